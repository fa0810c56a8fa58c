"""Compare the compiled and pure-Python rear-stage kernels.

    python benchmarks/bench_kernels.py [--sizes 25 50 100] [--repeats 5]

Both backends run on the same random problems; results must agree and the
script prints the best-of-repeats mean time per call and the speedup.
"""
import argparse
import sys
import time

import numpy as np

from twostage import kernels, rear


def time_calls(fn, problems, repeats):
    best = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = [fn(p) for p in problems]
        best.append((time.perf_counter() - t0) / len(problems))
    return min(best), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[25, 50, 100])
    ap.add_argument("--count", type=int, default=10, help="problems per size")
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if "cython" not in kernels.BACKENDS:
        print("compiled kernels not built; only the Python backend is available", file=sys.stderr)
        return 1
    solvers = {
        "hadrt": lambda p: rear.hadrt(p),
        "dp_timing": lambda p: rear.dp_timing(p, rear.greedy_sequence(p)),
    }
    rng = np.random.default_rng(args.seed)
    print(f"{'solver':<10} {'n':>5} {'python ms':>10} {'cython ms':>10} {'speedup':>8}")
    for n in args.sizes:
        problems = [rear.random_problem(rng, n, horizon=40 * n, window_length=(30, 120))
                    for _ in range(args.count)]
        for name, fn in solvers.items():
            timings, outputs = {}, {}
            for backend in ("python", "cython"):
                kernels.use_backend(backend)
                timings[backend], outputs[backend] = time_calls(fn, problems, args.repeats)
            if outputs["python"] != outputs["cython"]:
                print(f"backends disagree on {name} at n={n}", file=sys.stderr)
                return 1
            py, cy = timings["python"] * 1e3, timings["cython"] * 1e3
            print(f"{name:<10} {n:>5} {py:>10.3f} {cy:>10.3f} {py / cy:>7.1f}x")
    kernels.use_backend("cython")
    return 0


if __name__ == "__main__":
    sys.exit(main())
