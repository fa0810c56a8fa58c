"""Exhaustive solvers for desk-scale verification.

Neither routine shares code with the rear-stage solvers; transition times are
recomputed from the core model.
"""
from __future__ import annotations

import time
from functools import lru_cache
from typing import Sequence

from .core import Instance, Schedule, transition_time
from .rear import RearStageProblem

MAX_TIMING_TASKS = 7
MAX_TIMING_HORIZON = 600
MAX_OPTIMAL_TASKS = 10
MAX_OPTIMAL_RESOURCES = 2
MAX_OPTIMAL_HORIZON = 1200


class OracleRefusal(ValueError):
    """Instance exceeds the size the exhaustive search is allowed to attempt."""


class OracleTimeout(RuntimeError):
    pass


def brute_force_timing(problem: RearStageProblem, sequence: Sequence[int]) -> int:
    """Best profit over every subset of ``sequence`` and every 1 s start time that keeps the order."""
    seq = list(sequence)
    h = problem.resource.horizon
    if len(seq) > MAX_TIMING_TASKS or h.length > MAX_TIMING_HORIZON:
        raise OracleRefusal(f"{len(seq)} tasks / {h.length} s exceeds {MAX_TIMING_TASKS} / {MAX_TIMING_HORIZON}")
    if sorted(seq) != sorted(problem.ids):
        raise OracleRefusal("sequence is not a permutation of the problem tasks")
    tasks = [problem.task(i) for i in seq]
    j = problem.resource.id
    n = len(tasks)
    gap = [[transition_time(a, b, problem.transition) for b in tasks] for a in tasks]
    starts = [[s for w in t.windows_on(j) for s in range(w.start, w.end - t.duration + 1)] for t in tasks]

    @lru_cache(maxsize=None)
    def best(pos: int, last: int, end: int) -> int:
        if pos == n:
            return 0
        value = best(pos + 1, last, end)
        t = tasks[pos]
        earliest = end + gap[last][pos] if last >= 0 else None
        for s in starts[pos]:
            if earliest is not None and s < earliest:
                continue
            value = max(value, t.profit + best(pos + 1, pos, s + t.duration))
        return value

    return best(0, -1, 0)


def _resource_table(instance: Instance, j: int, deadline: float | None):
    """For every subset of tasks: earliest finish of an order visiting all of them on resource ``j``.

    Returns ``(finish, parent)`` keyed by ``(mask, last)``, and the set of
    capacity-feasible masks that admit some order.
    """
    tasks = instance.tasks
    n = len(tasks)
    res = instance.resources[j]
    gap = [[transition_time(a, b, instance.transition) for b in tasks] for a in tasks]

    def start_after(i: int, t: int | None) -> int | None:
        d = tasks[i].duration
        for w in tasks[i].windows_on(j):
            s = w.start if t is None else max(w.start, t)
            if s + d <= w.end:
                return s
        return None

    finish: dict[tuple[int, int], int] = {}
    parent: dict[tuple[int, int], tuple[int, int] | None] = {}
    for i in range(n):
        s = start_after(i, None)
        if s is not None:
            finish[(1 << i, i)] = s + tasks[i].duration
            parent[(1 << i, i)] = None
    for mask in range(1, 1 << n):
        if deadline is not None and time.monotonic() > deadline:
            raise OracleTimeout("oracle exceeded its time budget")
        for last in range(n):
            key = (mask, last)
            if key not in finish:
                continue
            end = finish[key]
            for nxt in range(n):
                if mask >> nxt & 1:
                    continue
                s = start_after(nxt, end + gap[last][nxt])
                if s is None:
                    continue
                nk = (mask | 1 << nxt, nxt)
                if nk not in finish or s + tasks[nxt].duration < finish[nk]:
                    finish[nk] = s + tasks[nxt].duration
                    parent[nk] = key

    feasible = {0}
    for mask, _last in finish:
        ids = [i for i in range(n) if mask >> i & 1]
        energy = sum(tasks[i].energy_cost for i in ids)
        storage = sum(tasks[i].storage_cost for i in ids)
        if energy <= res.energy_capacity + 1e-9 and storage <= res.storage_capacity + 1e-9:
            feasible.add(mask)
    return finish, parent, feasible


def _placements(instance: Instance, j: int, mask: int, finish, parent) -> dict[int, tuple[int, int, int]]:
    if mask == 0:
        return {}
    last = min((lst for (m, lst) in finish if m == mask), key=lambda lst: (finish[(mask, lst)], lst))
    chain = []
    key = (mask, last)
    while key is not None:
        chain.append(key[1])
        key = parent[key]
    chain.reverse()
    # Replay the order with earliest starts to recover start times.
    out, end, prev = {}, None, None
    for i in chain:
        t = instance.tasks[i]
        lower = None if prev is None else end + transition_time(instance.tasks[prev], t, instance.transition)
        for w in t.windows_on(j):
            s = w.start if lower is None else max(w.start, lower)
            if s + t.duration <= w.end:
                break
        out[i] = (j, s, s + t.duration)
        end, prev = s + t.duration, i
    return out


def brute_force_optimal(instance: Instance, timeout: float | None = 3600.0) -> tuple[int, Schedule]:
    """Provably optimal schedule for tiny instances (exhaustive over subsets and orders)."""
    n, m = instance.n, instance.m
    span = max(r.horizon.end for r in instance.resources) - min(r.horizon.start for r in instance.resources)
    if n > MAX_OPTIMAL_TASKS or m > MAX_OPTIMAL_RESOURCES or span > MAX_OPTIMAL_HORIZON:
        raise OracleRefusal(
            f"n={n}, m={m}, horizon={span} s exceeds {MAX_OPTIMAL_TASKS}/{MAX_OPTIMAL_RESOURCES}/{MAX_OPTIMAL_HORIZON}"
        )
    deadline = None if timeout is None else time.monotonic() + timeout
    profit_of = [sum(instance.tasks[i].profit for i in range(n) if mask >> i & 1) for mask in range(1 << n)]
    tables = [_resource_table(instance, j, deadline) for j in range(m)]

    full = (1 << n) - 1
    if m == 1:
        best0 = max(tables[0][2], key=lambda mk: (profit_of[mk], -mk))
        masks = [best0]
    else:
        # best1[sup]: most profitable mask feasible on resource 1 inside sup.
        feas1 = tables[1][2]
        best1 = [mk if mk in feas1 else 0 for mk in range(1 << n)]
        for bit in range(n):
            for sup in range(1 << n):
                if sup >> bit & 1:
                    cand = best1[sup ^ (1 << bit)]
                    if (profit_of[cand], -cand) > (profit_of[best1[sup]], -best1[sup]):
                        best1[sup] = cand
        masks, value = [0, 0], -1
        for m0 in sorted(tables[0][2]):
            m1 = best1[full ^ m0]
            if profit_of[m0] + profit_of[m1] > value:
                masks, value = [m0, m1], profit_of[m0] + profit_of[m1]

    placements = {}
    for j, mask in enumerate(masks):
        placements.update(_placements(instance, j, mask, tables[j][0], tables[j][1]))
    schedule = Schedule.from_placements(n, placements)
    return sum(profit_of[mk] for mk in masks), schedule

