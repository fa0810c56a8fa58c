"""Experiment harness: convergence, generalization and comparison suites.

Every suite writes ``# schema=1`` CSV files into an output directory. Profit
tables are deterministic given the seed; wall-clock measurements go to a
separate ``*_timing.csv`` file.
"""
from __future__ import annotations

import csv
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import agent, env, generate, oracle, rear
from .core import Instance, Schedule, evaluate_objective, validate

SCHEMA_LINE = "# schema=1\n"

DQN_MODES = {
    "dqn-ch": env.Mode.CH,
    "dqn-dp": env.Mode.DP,
    "dqn-ch-c": env.Mode.CH_SEQ,
    "dqn-dp-c": env.Mode.DP_SEQ,
}
SOLVE_MODES = (*DQN_MODES, "hadrt-only")

# Seed offsets keep training and evaluation instances disjoint.
TRAIN_SEED_OFFSET = 0
EVAL_SEED_OFFSET = 100_000

CONVERGENCE_COLUMNS = ("preset", "mode", "episode", "total_profit", "mean_loss", "epsilon")
GENERALIZATION_COLUMNS = ("preset", "mode", "instance_seed", "profit", "candidate_profit", "margin",
                          "violations", "status")
COMPARISON_COLUMNS = ("preset", "mode", "instance_seed", "profit", "violations", "status")
TIMING_COLUMNS = ("preset", "mode", "instance_seed", "seconds")
SUMMARY_COLUMNS = ("preset", "mode", "n", "profit_mean", "profit_stdev", "seconds_mean", "seconds_stdev")


def hadrt_only(instance: Instance) -> Schedule:
    """HADRT on each resource in chronological order over the still-unscheduled tasks.

    The plan is cut at the first task that would exceed a capacity.
    """
    order = sorted(range(instance.m), key=lambda j: (instance.resources[j].horizon.start, j))
    placements = {}
    for j in order:
        ids = [t.id for t in instance.tasks if t.id not in placements and t.windows_on(j)]
        if not ids:
            continue
        res = instance.resources[j]
        result = rear.hadrt(rear.RearStageProblem.from_instance(instance, j, ids))
        energy = storage = 0.0
        for i, es, ee in result.placed:
            t = instance.tasks[i]
            energy += t.energy_cost
            storage += t.storage_cost
            if energy > res.energy_capacity + 1e-9 or storage > res.storage_capacity + 1e-9:
                break
            placements[i] = (j, es, ee)
    return Schedule.from_placements(instance.n, placements)


def solve_mode(instance: Instance, mode: str, net: agent.QNetwork | None = None) -> Schedule:
    if mode == "hadrt-only":
        return hadrt_only(instance)
    if mode not in DQN_MODES:
        raise ValueError(f"unknown mode {mode!r}; choose from {SOLVE_MODES}")
    if net is None:
        raise ValueError(f"mode {mode} needs a model")
    return agent.solve(instance, net, DQN_MODES[mode])


@dataclass
class Cell:
    """One (instance, solver) evaluation."""

    preset: str
    seed: int
    mode: str
    instance: Instance
    net: agent.QNetwork | None = None
    timeout: float | None = None


@dataclass
class CellResult:
    preset: str
    seed: int
    mode: str
    profit: int | None
    candidate_profit: int
    violations: int | None
    seconds: float
    status: str


def run_cell(cell: Cell) -> CellResult:
    t0 = time.perf_counter()
    try:
        if cell.mode == "oracle":
            _, sched = oracle.brute_force_optimal(cell.instance, cell.timeout)
        else:
            sched = solve_mode(cell.instance, cell.mode, cell.net)
        profit = evaluate_objective(sched, cell.instance)
        n_viol = len(validate(sched, cell.instance))
        status = "ok"
    except oracle.OracleTimeout:
        profit, n_viol, status = None, None, "timeout"
    except Exception as exc:  # recorded per row; the suite carries on
        profit, n_viol, status = None, None, f"error: {type(exc).__name__}: {exc}"
    return CellResult(cell.preset, cell.seed, cell.mode, profit, cell.instance.total_profit, n_viol,
                      time.perf_counter() - t0, status)


def run_cells(cells: Sequence[Cell], jobs: int = 1) -> list[CellResult]:
    """Evaluate cells, in parallel when ``jobs > 1``; output order follows input order."""
    if jobs <= 1 or len(cells) <= 1:
        return [run_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_cell, cells, chunksize=max(1, len(cells) // (4 * jobs))))


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path, columns: Sequence[str], rows: Sequence[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(SCHEMA_LINE)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> list[dict]:
    with open(path) as fh:
        first = fh.readline()
        if first != SCHEMA_LINE:
            raise ValueError(f"{path}: missing schema line")
        return list(csv.DictReader(fh))


def instances_for(preset: str, seeds: Sequence[int]) -> list[Instance]:
    return [generate.generate_preset(preset, s) for s in seeds]


def train_seeds(seed: int, count: int) -> list[int]:
    return [seed + TRAIN_SEED_OFFSET + k for k in range(count)]


def eval_seeds(seed: int, count: int) -> list[int]:
    return [seed + EVAL_SEED_OFFSET + k for k in range(count)]


def train_models(instances: Sequence[Instance], modes: Sequence[str], config: agent.TrainConfig,
                 log: Callable[[str], None] = lambda s: None) -> dict[str, agent.QNetwork]:
    nets = {}
    for mode in modes:
        if mode in DQN_MODES:
            t0 = time.perf_counter()
            nets[mode], _ = agent.train(instances, DQN_MODES[mode], config)
            log(f"trained {mode} on {len(instances)} instance(s), {config.episodes} episodes, "
                f"{time.perf_counter() - t0:.1f} s")
    return nets


def summarize(results: Sequence[CellResult]) -> list[tuple]:
    groups: dict[tuple[str, str], list[CellResult]] = {}
    for r in results:
        groups.setdefault((r.preset, r.mode), []).append(r)
    rows = []
    for (preset, mode), rs in groups.items():
        profits = [r.profit for r in rs if r.profit is not None]
        secs = [r.seconds for r in rs if r.profit is not None]
        rows.append((
            preset, mode, len(profits),
            statistics.fmean(profits) if profits else math.nan,
            statistics.stdev(profits) if len(profits) > 1 else 0.0,
            statistics.fmean(secs) if secs else math.nan,
            statistics.stdev(secs) if len(secs) > 1 else 0.0,
        ))
    return rows


# --- suites -----------------------------------------------------------------

def convergence(out_dir, presets: Sequence[str] = ("H_20",), modes: Sequence[str] = tuple(DQN_MODES),
                seed: int = 0, episodes: int = 1000, config: agent.TrainConfig | None = None,
                log: Callable[[str], None] = print) -> dict:
    """Train each mode on one instance per preset; per-episode profit curves."""
    out_dir = Path(out_dir)
    rows, summary = [], {}
    for preset in presets:
        inst = generate.generate_preset(preset, seed)
        for mode in modes:
            cfg = config or agent.TrainConfig(episodes=episodes, seed=seed)
            _, hist = agent.train([inst], DQN_MODES[mode], cfg)
            for h in hist:
                rows.append((preset, mode, h.episode, h.total_profit, h.mean_loss, h.epsilon))
            tail = [h.total_profit for h in hist[-100:]]
            summary[(preset, mode)] = statistics.fmean(tail) if tail else math.nan
            log(f"{preset} {mode}: last-100 mean profit {summary[(preset, mode)]:.2f} of {inst.total_profit}")
    write_csv(out_dir / "convergence.csv", CONVERGENCE_COLUMNS, rows)
    return summary


def generalization(out_dir, presets: Sequence[str] = ("H_20",), modes: Sequence[str] = SOLVE_MODES,
                   seed: int = 0, episodes: int = 300, train_count: int = 20, eval_count: int = 50,
                   jobs: int = 1, log: Callable[[str], None] = print) -> list[CellResult]:
    """Train on ``train_count`` instances, report profit margin on ``eval_count`` unseen ones."""
    out_dir = Path(out_dir)
    results = []
    for preset in presets:
        nets = train_models(instances_for(preset, train_seeds(seed, train_count)), modes,
                            agent.TrainConfig(episodes=episodes, seed=seed), log)
        seeds = eval_seeds(seed, eval_count)
        cells = [Cell(preset, s, mode, inst, nets.get(mode))
                 for s, inst in zip(seeds, instances_for(preset, seeds)) for mode in modes]
        results += run_cells(cells, jobs)
    rows = [(r.preset, r.mode, r.seed, r.profit, r.candidate_profit,
             None if r.profit is None else r.profit / r.candidate_profit, r.violations, r.status)
            for r in results]
    write_csv(out_dir / "generalization.csv", GENERALIZATION_COLUMNS, rows)
    write_csv(out_dir / "generalization_timing.csv", TIMING_COLUMNS,
              [(r.preset, r.mode, r.seed, r.seconds) for r in results])
    for preset in presets:
        for mode in modes:
            margins = [r.profit / r.candidate_profit for r in results
                       if r.preset == preset and r.mode == mode and r.profit is not None]
            if margins:
                log(f"{preset} {mode}: mean profit margin {statistics.fmean(margins):.3f}")
    return results


def is_tiny(instance: Instance) -> bool:
    span = max(r.horizon.end for r in instance.resources) - min(r.horizon.start for r in instance.resources)
    return (instance.n <= oracle.MAX_OPTIMAL_TASKS and instance.m <= oracle.MAX_OPTIMAL_RESOURCES
            and span <= oracle.MAX_OPTIMAL_HORIZON)


def comparison(out_dir, presets: Sequence[str] = ("T_8", "H_20"), modes: Sequence[str] = SOLVE_MODES,
               seed: int = 0, episodes: int = 300, train_count: int = 20, eval_count: int = 50,
               jobs: int = 1, timeout: float | None = 3600.0, log: Callable[[str], None] = print) -> list[CellResult]:
    """Profit and wall time per solver; the exact oracle joins on tiny presets."""
    out_dir = Path(out_dir)
    results = []
    for preset in presets:
        nets = train_models(instances_for(preset, train_seeds(seed, train_count)), modes,
                            agent.TrainConfig(episodes=episodes, seed=seed), log)
        seeds = eval_seeds(seed, eval_count)
        insts = instances_for(preset, seeds)
        cells = []
        for s, inst in zip(seeds, insts):
            cells += [Cell(preset, s, mode, inst, nets.get(mode)) for mode in modes]
            if is_tiny(inst):
                cells.append(Cell(preset, s, "oracle", inst, timeout=timeout))
        results += run_cells(cells, jobs)
    write_csv(out_dir / "comparison.csv", COMPARISON_COLUMNS,
              [(r.preset, r.mode, r.seed, r.profit, r.violations, r.status) for r in results])
    write_csv(out_dir / "comparison_timing.csv", TIMING_COLUMNS,
              [(r.preset, r.mode, r.seed, r.seconds) for r in results])
    summary = summarize(results)
    write_csv(out_dir / "comparison_summary_timing.csv", SUMMARY_COLUMNS, summary)
    for row in summary:
        log(f"{row[0]} {row[1]}: profit {row[3]:.2f} ± {row[4]:.2f}, time {row[5] * 1e3:.2f} ms")
    for preset in presets:
        ratio = time_ratio(results, preset)
        if ratio is not None:
            log(f"{preset}: dqn-ch / hadrt-only mean time ratio {ratio:.2f}")
    return results


def time_ratio(results: Sequence[CellResult], preset: str, num: str = "dqn-ch", den: str = "hadrt-only") -> float | None:
    a = [r.seconds for r in results if r.preset == preset and r.mode == num and r.status == "ok"]
    b = [r.seconds for r in results if r.preset == preset and r.mode == den and r.status == "ok"]
    if not a or not b:
        return None
    return statistics.fmean(a) / statistics.fmean(b)


def random_policy_mean(instance: Instance, mode, rollouts: int = 100, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    policy = env.random_policy(rng)
    totals = [sum(env.rollout(instance, env.Mode(mode), policy)[1]) for _ in range(rollouts)]
    return statistics.fmean(totals)


SUITES = {"convergence": convergence, "generalization": generalization, "comparison": comparison}
