"""Command-line front end: generate, train, solve, validate, bench.

Exit codes: 0 success, 1 validation failure, 2 usage error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import agent, bench, env, generate, kernels
from .core import (
    evaluate_objective,
    load_instance,
    load_schedule,
    save_instance,
    save_schedule,
    validate,
)

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # Accepted before or after the subcommand; the subparser copy must not
    # overwrite a value given earlier, hence SUPPRESS defaults there.
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=d(0), help="master seed (default 0)")
    parser.add_argument("--jobs", type=int, default=d(1), help="worker processes for evaluation")
    parser.add_argument("--out-dir", type=Path, default=d(Path(".")), help="directory for relative outputs")


def _out(args, path: Path | None, default: str) -> Path:
    path = Path(path) if path is not None else Path(default)
    if not path.is_absolute():
        path = args.out_dir / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def cmd_generate(args) -> int:
    if args.preset:
        if args.n_tasks is not None:
            raise UsageError("--preset and --n-tasks are mutually exclusive")
        scene, orbit = generate.preset(args.preset, args.seed)
        name = f"{args.preset}_s{args.seed}.json"
    elif args.n_tasks is not None:
        area = generate.Area(args.area)
        try:
            scene = generate.SceneConfig(
                args.n_tasks, area, n_resources=args.resources,
                horizon_seconds=args.horizon, seed=args.seed, label=args.label or "",
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        orbit = generate.SMALL_ORBIT if area is generate.Area.SMALL else generate.LARGE_ORBIT
        name = f"{area.value}_{args.n_tasks}_s{args.seed}.json"
    else:
        raise UsageError("give --preset or --n-tasks")
    inst = generate.generate_instance(scene, orbit)
    path = _out(args, args.output, name)
    save_instance(inst, path)
    meta = inst.metadata
    print(f"wrote {path}: {inst.n} tasks, {inst.m} resources, dropped {meta['dropped_tasks']}, "
          f"windows {meta['windows_total']} (mean {meta['windows_per_task_mean']}/task, "
          f"mean length {meta['window_length_mean']} s)")
    return EXIT_OK


def _config(args) -> agent.TrainConfig:
    return agent.TrainConfig(
        episodes=args.episodes, gamma=args.gamma, lr=args.lr, replay_capacity=args.replay_capacity,
        batch_size=args.batch_size, target_period=args.target_period, seed=args.seed,
    )


def cmd_train(args) -> int:
    insts = [load_instance(p) for p in args.instances]
    labels = [Path(p).stem for p in args.instances]
    cfg = _config(args)
    t0 = time.perf_counter()
    net, history = agent.train(insts, bench.DQN_MODES[args.mode], cfg, labels)
    model = _out(args, args.output, f"model_{args.mode}.json")
    net.save(model, {"seed": cfg.seed, "episodes": cfg.episodes, "mode": args.mode,
                     "instances": labels, "config": agent.config_dict(cfg)})
    hist = _out(args, args.history, model.with_suffix(".history.csv").name)
    agent.write_history(history, hist)
    tail = [h.total_profit for h in history[-100:]]
    mean = sum(tail) / len(tail) if tail else float("nan")
    print(f"wrote {model} and {hist}: {len(history)} episodes, last-100 mean profit {mean:.2f}, "
          f"{time.perf_counter() - t0:.1f} s")
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    net = None
    if args.mode != "hadrt-only":
        if args.model is None:
            raise UsageError(f"--mode {args.mode} needs --model")
        net = agent.QNetwork.load(args.model)
    t0 = time.perf_counter()
    trace = [] if args.trace else None
    if trace is not None and net is not None:
        final, _ = env.rollout(inst, bench.DQN_MODES[args.mode], agent.greedy_policy(net), trace)
        sched = env.extract_schedule(final)
    else:
        sched = bench.solve_mode(inst, args.mode, net)
    wall = time.perf_counter() - t0
    profit = evaluate_objective(sched, inst)
    path = _out(args, args.output, f"{Path(args.instance).stem}_{args.mode}.schedule.json")
    save_schedule(sched, path, {"mode": args.mode, "profit": profit})
    if trace is not None:
        env.write_trace(trace, _out(args, args.trace, "trace.jsonl"))
    print(f"profit={profit} scheduled={len(sched.scheduled())}/{inst.n} "
          f"candidate={inst.total_profit} wall={wall:.4f}s -> {path}")
    return EXIT_OK


def cmd_validate(args) -> int:
    inst = load_instance(args.instance)
    sched = load_schedule(args.schedule)
    violations = validate(sched, inst)
    for v in violations:
        print(f"VIOLATION {v.constraint} tasks={list(v.tasks)}: {v.detail}")
    print(f"{len(violations)} violation(s); profit={evaluate_objective(sched, inst)}")
    return EXIT_OK if not violations else EXIT_INVALID


def cmd_bench(args) -> int:
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    presets = args.presets or (["H_20"] if args.suite != "comparison" else ["T_8", "H_20"])
    for p in presets:
        if p not in generate.ALL_PRESETS:
            raise UsageError(f"unknown preset {p!r}")
    print(f"kernel backend: {kernels.backend_name()}")
    if args.suite == "convergence":
        bench.convergence(out, presets, args.modes or tuple(bench.DQN_MODES), args.seed,
                          args.episodes if args.episodes is not None else 1000)
        return EXIT_OK
    common = dict(
        presets=presets, modes=args.modes or bench.SOLVE_MODES, seed=args.seed,
        episodes=args.episodes if args.episodes is not None else 300,
        train_count=args.train_count, eval_count=args.eval_count, jobs=args.jobs,
    )
    if args.suite == "generalization":
        bench.generalization(out, **common)
    else:
        bench.comparison(out, timeout=args.timeout, **common)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twostage", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help):
        p = sub.add_parser(name, help=help)
        _global_flags(p, suppress=True)
        p.set_defaults(func=func)
        return p

    p = command("generate", cmd_generate, "write a scenario file")
    p.add_argument("--preset", choices=sorted(generate.ALL_PRESETS))
    p.add_argument("--n-tasks", type=int)
    p.add_argument("--area", choices=[a.value for a in generate.Area], default="SMALL")
    p.add_argument("--resources", type=int)
    p.add_argument("--horizon", type=int, default=86400, help="scheduling horizon in seconds")
    p.add_argument("--label")
    p.add_argument("-o", "--output", type=Path)

    p = command("train", cmd_train, "train a DQN assignment policy")
    p.add_argument("instances", nargs="+", type=Path)
    p.add_argument("--mode", choices=list(bench.DQN_MODES), default="dqn-dp")
    d = agent.TrainConfig()
    p.add_argument("--episodes", type=int, default=d.episodes)
    p.add_argument("--gamma", type=float, default=d.gamma)
    p.add_argument("--lr", type=float, default=d.lr)
    p.add_argument("--replay-capacity", type=int, default=d.replay_capacity)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--target-period", type=int, default=d.target_period)
    p.add_argument("-o", "--output", type=Path)
    p.add_argument("--history", type=Path)

    p = command("solve", cmd_solve, "schedule one scenario")
    p.add_argument("instance", type=Path)
    p.add_argument("--model", type=Path)
    p.add_argument("--mode", choices=list(bench.SOLVE_MODES), default="dqn-dp")
    p.add_argument("-o", "--output", type=Path)
    p.add_argument("--trace", type=Path, help="write per-step JSONL trace")

    p = command("validate", cmd_validate, "check a schedule against all constraints")
    p.add_argument("instance", type=Path)
    p.add_argument("schedule", type=Path)

    p = command("bench", cmd_bench, "run an experiment suite")
    p.add_argument("--suite", choices=sorted(bench.SUITES), required=True)
    p.add_argument("--presets", nargs="+")
    p.add_argument("--modes", nargs="+", choices=list(bench.SOLVE_MODES))
    p.add_argument("--episodes", type=int)
    p.add_argument("--train-count", type=int, default=20)
    p.add_argument("--eval-count", type=int, default=50)
    p.add_argument("--timeout", type=float, default=3600.0, help="oracle time limit in seconds")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on bad flags
    try:
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"twostage: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except agent.TrainingError as exc:
        print(f"twostage: training diverged: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, ValueError, RuntimeError, KeyError) as exc:
        print(f"twostage: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
