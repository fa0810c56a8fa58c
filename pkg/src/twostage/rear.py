"""Rear-stage solvers: sequencing and timing of the tasks given to one resource."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .core import Instance, Resource, StructuralError, Task, TimeWindow, TransitionModel, transition_time


@dataclass(frozen=True)
class RearStageProblem:
    resource: Resource
    tasks: tuple[Task, ...]
    transition: TransitionModel
    ET: int
    mean_duration: float
    ct: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if self.mean_duration <= 0:
            raise ValueError("mean_duration must be positive")
        h = self.resource.horizon
        for t in self.tasks:
            for w in t.windows_on(self.resource.id):
                if w.start < h.start or w.end > h.end:
                    raise ValueError(f"task {t.id}: window {w} outside horizon {h}")
        if self.ct is None:
            n = len(self.tasks)
            ct = np.empty((n, n), dtype=np.int64)
            for a in range(n):
                for b in range(n):
                    ct[a, b] = transition_time(self.tasks[a], self.tasks[b], self.transition)
            object.__setattr__(self, "ct", ct)
        object.__setattr__(self, "_pos", {t.id: p for p, t in enumerate(self.tasks)})

    @classmethod
    def build(cls, resource: Resource, tasks: Sequence[Task], transition: TransitionModel, ct=None):
        tasks = tuple(tasks)
        ends = [w.end for t in tasks for w in t.windows_on(resource.id)]
        et = max(ends) if ends else resource.horizon.end
        mean = float(np.mean([t.duration for t in tasks])) if tasks else 1.0
        return cls(resource, tasks, transition, et, mean, ct)

    @classmethod
    def from_instance(cls, instance: Instance, j: int, task_ids: Sequence[int]):
        """Problem for resource ``j`` restricted to ``task_ids`` (reuses the cached transition matrix)."""
        ids = list(task_ids)
        ct = instance.transition_matrix[np.ix_(ids, ids)]
        return cls.build(instance.resources[j], [instance.tasks[i] for i in ids], instance.transition, ct)

    @property
    def ids(self) -> list[int]:
        return [t.id for t in self.tasks]

    def task(self, task_id: int) -> Task:
        return self.tasks[self._pos[task_id]]

    def positions(self, sequence: Sequence[int]) -> list[int]:
        seq = list(sequence)
        if sorted(seq) != sorted(self._pos) or len(set(seq)) != len(seq):
            raise StructuralError(f"sequence {seq} is not a permutation of {sorted(self._pos)}")
        return [self._pos[i] for i in seq]

    def flatten(self, order: Sequence[int]):
        """Kernel arrays for the tasks at problem positions ``order``."""
        j = self.resource.id
        ptr, ws, we = [0], [], []
        for p in order:
            for w in self.tasks[p].windows_on(j):
                ws.append(w.start)
                we.append(w.end)
            ptr.append(len(ws))
        i64 = np.int64
        dur = np.array([self.tasks[p].duration for p in order], dtype=i64)
        prof = np.array([self.tasks[p].profit for p in order], dtype=i64)
        ct = np.ascontiguousarray(self.ct[np.ix_(order, order)], dtype=i64)
        return (np.array(ptr, dtype=i64), np.array(ws, dtype=i64), np.array(we, dtype=i64), dur, prof, ct)


@dataclass(frozen=True)
class RearStageResult:
    placed: tuple[tuple[int, int, int], ...]  # (task id, es, ee) in chronological order
    skipped: tuple[int, ...]
    profit: int
    ops: int = field(default=0, compare=False)


def _result(problem: RearStageProblem, order: Sequence[int], starts, ops) -> RearStageResult:
    placed, skipped, profit = [], [], 0
    for p, s in zip(order, starts):
        t = problem.tasks[p]
        if s >= 0:
            placed.append((t.id, int(s), int(s) + t.duration))
            profit += t.profit
        else:
            skipped.append(t.id)
    placed.sort(key=lambda x: (x[1], x[0]))
    return RearStageResult(tuple(placed), tuple(sorted(skipped)), profit, int(ops))


def hadrt_score(problem: RearStageProblem, i: int, scheduled_count_with_i: int, window_end: int | None = None) -> float:
    """Residual-density score: placed count plus room left after the window, in mean durations."""
    if window_end is None:
        window_end = problem.task(i).windows_on(problem.resource.id)[0].end
    return scheduled_count_with_i + (problem.ET - window_end) / problem.mean_duration


def hadrt(problem: RearStageProblem, fixed: dict[int, int] | None = None) -> RearStageResult:
    """Constructive heuristic; ``fixed`` maps task id to a start kept from an earlier plan."""
    order = sorted(range(len(problem.tasks)), key=lambda p: problem.tasks[p].id)
    if not order:
        return RearStageResult((), (), 0, 0)
    fixed = fixed or {}
    pins = np.array([fixed.get(problem.tasks[p].id, -1) for p in order], dtype=np.int64)
    starts, ops = kernels.hadrt(*problem.flatten(order), float(problem.mean_duration), pins)
    return _result(problem, order, starts, ops)


def greedy_sequence(problem: RearStageProblem) -> list[int]:
    """Task ids by ascending end of their earliest window on this resource."""
    j = problem.resource.id
    return sorted(problem.ids, key=lambda i: (problem.task(i).windows_on(j)[0].end, i))


def dp_timing(problem: RearStageProblem, sequence: Sequence[int]) -> RearStageResult:
    """Profit-optimal start times for tasks executed in ``sequence`` order (any subset may be dropped)."""
    order = problem.positions(sequence)
    if not order:
        return RearStageResult((), (), 0, 0)
    profit, starts, ops = kernels.dp_solve(*problem.flatten(order))
    result = _result(problem, order, starts, ops)
    assert result.profit == profit
    return result


def place_in_order(problem: RearStageProblem, sequence: Sequence[int]) -> RearStageResult:
    order = problem.positions(sequence)
    if not order:
        return RearStageResult((), (), 0, 0)
    starts, ops = kernels.place_in_order(*problem.flatten(order))
    return _result(problem, order, starts, ops)


def random_problem(rng: np.random.Generator, n_tasks: int, horizon: int = 600, window_length=(10, 60),
                   max_windows: int = 2, duration=(3, 8), transition: TransitionModel | None = None) -> RearStageProblem:
    """Random single-resource problem on ``[0, horizon]``, used by tests and benchmarks."""
    transition = transition or TransitionModel()
    resource = Resource(0, 150.0, 2000.0, TimeWindow(0, horizon))
    tasks = []
    for i in range(n_tasks):
        d = int(rng.integers(duration[0], duration[1], endpoint=True))
        windows = []
        cursor = 0
        for _ in range(int(rng.integers(1, max_windows, endpoint=True))):
            length = int(rng.integers(max(window_length[0], d), max(window_length[1], d), endpoint=True))
            if cursor + length > horizon:
                break
            start = int(rng.integers(cursor, horizon - length, endpoint=True))
            windows.append(TimeWindow(start, start + length))
            cursor = start + length + 1
            if cursor >= horizon:
                break
        tasks.append(Task(i, float(rng.uniform(20, 30)), float(rng.uniform(108, 114)), d,
                          int(rng.integers(1, 10, endpoint=True)), {0: tuple(windows)}))
    return RearStageProblem.build(resource, tasks, transition)
