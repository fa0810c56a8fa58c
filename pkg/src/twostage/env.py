"""Assignment-stage MDP.

Resources are visited in chronological order. At each step the agent either
gives a task to the current resource (re-solving that resource's rear stage)
or closes the resource and moves on. The reward is the change in total profit.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable

import numpy as np

from . import rear
from .core import Instance, Schedule

N_FEATURES = 12


class Mode(enum.Enum):
    CH = "CH"  # HADRT sequences and times the resource's tasks
    DP = "DP"  # greedy window-end order, DP timing
    CH_SEQ = "CH_SEQ"  # selection order kept, one-pass earliest placement
    DP_SEQ = "DP_SEQ"  # selection order kept, DP timing


class ContractError(RuntimeError):
    """An operation was called outside its precondition."""


@dataclass(frozen=True)
class Action:
    task: int | None = None  # None means TERMINATE

    @classmethod
    def select(cls, i: int) -> "Action":
        return cls(int(i))

    @classmethod
    def terminate(cls) -> "Action":
        return cls(None)

    @property
    def is_terminate(self) -> bool:
        return self.task is None

    def __str__(self):
        return "TERMINATE" if self.task is None else f"SELECT({self.task})"


TERMINATE = Action.terminate()


class _Context:
    """Per-instance constants shared by all states of an episode."""

    def __init__(self, instance: Instance):
        self.instance = instance
        n, m = instance.n, instance.m
        self.order = sorted(range(m), key=lambda j: (instance.resources[j].horizon.start, j))
        self.max_profit = max(t.profit for t in instance.tasks)
        self.max_duration = max(t.duration for t in instance.tasks)
        self.total_horizon = float(sum(r.horizon.length for r in instance.resources))
        self.n_windows = [{j: len(ws) for j, ws in t.windows.items()} for t in instance.tasks]
        self.win_seconds = [{j: sum(w.length for w in ws) for j, ws in t.windows.items()} for t in instance.tasks]
        self.initial_count = [sum(c.values()) for c in self.n_windows]
        self.first_start = [{j: ws[0].start for j, ws in t.windows.items()} for t in instance.tasks]
        self.last_end = [{j: ws[-1].end for j, ws in t.windows.items()} for t in instance.tasks]
        self.n, self.m = n, m


_CONTEXTS: dict[int, _Context] = {}


def _context(instance: Instance) -> _Context:
    ctx = _CONTEXTS.get(id(instance))
    if ctx is None or ctx.instance is not instance:
        if len(_CONTEXTS) > 256:
            _CONTEXTS.clear()
        ctx = _CONTEXTS[id(instance)] = _Context(instance)
    return ctx


@dataclass(frozen=True)
class EnvState:
    t: int
    remaining: tuple[frozenset, ...]  # resources on which each task still has windows
    assigned: tuple[tuple[int, ...], ...]  # per resource, in selection order
    residual_energy: tuple[float, ...]
    residual_storage: tuple[float, ...]
    cursor: int  # position in chronological resource order
    last_objective: int
    mode: Mode
    results: tuple = field(compare=False, repr=False)
    instance: Instance = field(compare=False, repr=False)

    @property
    def resource(self) -> int | None:
        """Id of the resource under the cursor (None once all are passed)."""
        ctx = _context(self.instance)
        return ctx.order[self.cursor] if self.cursor < ctx.m else None

    @property
    def terminal(self) -> bool:
        return self.cursor >= self.instance.m or all(not r for r in self.remaining)

    def remaining_windows(self, i: int) -> dict:
        t = self.instance.tasks[i]
        return {j: t.windows[j] for j in sorted(self.remaining[i])}

    @cached_property
    def assigned_tasks(self) -> frozenset:
        return frozenset(i for a in self.assigned for i in a)


@dataclass(frozen=True)
class StepOutcome:
    reward: int
    next: EnvState
    done: bool


def reset(instance: Instance, mode: Mode = Mode.DP) -> EnvState:
    m = instance.m
    return EnvState(
        t=0,
        remaining=tuple(frozenset(t.windows) for t in instance.tasks),
        assigned=((),) * m,
        residual_energy=tuple(r.energy_capacity for r in instance.resources),
        residual_storage=tuple(r.storage_capacity for r in instance.resources),
        cursor=0,
        last_objective=0,
        mode=Mode(mode),
        results=(None,) * m,
        instance=instance,
    )


def _selectable(state: EnvState, i: int, j: int) -> bool:
    t = state.instance.tasks[i]
    return (
        j in state.remaining[i]
        and t.energy_cost <= state.residual_energy[j] + 1e-9
        and t.storage_cost <= state.residual_storage[j] + 1e-9
    )


def available_actions(state: EnvState) -> list[Action]:
    """Selectable tasks in id order, then TERMINATE."""
    if state.terminal:
        raise ContractError("no actions in a terminal state")
    j = state.resource
    acts = [Action(i) for i in range(state.instance.n) if _selectable(state, i, j)]
    acts.append(TERMINATE)
    return acts


def solve_resource(instance: Instance, j: int, task_ids, mode: Mode,
                   previous: rear.RearStageResult | None = None) -> rear.RearStageResult:
    """Rear-stage result for ``task_ids`` (in selection order) on resource ``j``.

    In CH mode the heuristic is warm-started: tasks placed by ``previous``
    keep their starts and only the others are (re)considered.
    """
    problem = rear.RearStageProblem.from_instance(instance, j, task_ids)
    if mode is Mode.CH:
        fixed = {i: es for i, es, _ in previous.placed} if previous is not None else None
        return rear.hadrt(problem, fixed)
    if mode is Mode.DP:
        return rear.dp_timing(problem, rear.greedy_sequence(problem))
    if mode is Mode.CH_SEQ:
        return rear.place_in_order(problem, list(task_ids))
    return rear.dp_timing(problem, list(task_ids))


def step(state: EnvState, action: Action) -> StepOutcome:
    if state.terminal:
        raise ContractError("episode already finished")
    inst = state.instance
    j = state.resource
    if action.is_terminate:
        passed = j
        remaining = tuple(r - {passed} if passed in r else r for r in state.remaining)
        nxt = EnvState(
            state.t + 1, remaining, state.assigned, state.residual_energy, state.residual_storage,
            state.cursor + 1, state.last_objective, state.mode, state.results, inst,
        )
        return StepOutcome(0, nxt, nxt.terminal)

    i = action.task
    if not (0 <= i < inst.n) or not _selectable(state, i, j):
        raise ContractError(f"{action} is not available on resource {j}")
    task = inst.tasks[i]
    assigned = list(state.assigned)
    assigned[j] = state.assigned[j] + (i,)
    results = list(state.results)
    results[j] = solve_resource(inst, j, assigned[j], state.mode, state.results[j])
    objective = sum(r.profit for r in results if r is not None)
    # Costs stay booked even if the rear stage drops the task: a later
    # re-solve may bring it back, and capacity must still hold then.
    energy = list(state.residual_energy)
    storage = list(state.residual_storage)
    energy[j] -= task.energy_cost
    storage[j] -= task.storage_cost
    remaining = list(state.remaining)
    remaining[i] = frozenset()
    nxt = EnvState(
        state.t + 1, tuple(remaining), tuple(assigned), tuple(energy), tuple(storage),
        state.cursor, objective, state.mode, tuple(results), inst,
    )
    return StepOutcome(objective - state.last_objective, nxt, nxt.terminal)


def encode_many(state: EnvState, actions: Iterable[Action]) -> np.ndarray:
    """Feature rows in [0, 1] for each (state, action) pair."""
    ctx = _context(state.instance)
    inst = state.instance
    actions = list(actions)
    out = np.zeros((len(actions), N_FEATURES))
    j = state.resource
    if j is None:
        raise ContractError("cannot encode a state past the last resource")
    h = inst.resources[j].horizon
    res = inst.resources[j]
    shared = (
        max(0.0, state.residual_energy[j]) / res.energy_capacity,
        max(0.0, state.residual_storage[j]) / res.storage_capacity,
        len(state.assigned[j]) / ctx.n,
        1.0 - len(state.assigned_tasks) / ctx.n,
        state.cursor / ctx.m,
    )
    out[:, 6:11] = shared
    for row, a in enumerate(actions):
        if a.is_terminate:
            out[row, 11] = 1.0
            continue
        i = a.task
        t = inst.tasks[i]
        rem = state.remaining[i]
        out[row, 0] = t.profit / ctx.max_profit
        out[row, 1] = t.duration / ctx.max_duration
        out[row, 2] = sum(ctx.n_windows[i][r] for r in rem) / ctx.initial_count[i]
        if j in rem:
            out[row, 3] = (ctx.first_start[i][j] - h.start) / h.length
            out[row, 4] = (ctx.last_end[i][j] - h.start) / h.length
        out[row, 5] = sum(ctx.win_seconds[i][r] for r in rem) / ctx.total_horizon
    return out


def encode(state: EnvState, action: Action) -> np.ndarray:
    return encode_many(state, [action])[0]


def extract_schedule(state: EnvState) -> Schedule:
    if not state.terminal:
        raise ContractError("schedule is only defined for terminal states")
    placements = {}
    for j, res in enumerate(state.results):
        if res is None:
            continue
        for i, es, ee in res.placed:
            placements[i] = (j, es, ee)
    return Schedule.from_placements(state.instance.n, placements)


Policy = Callable[[EnvState, list], Action]


def rollout(instance: Instance, mode: Mode, policy: Policy, trace: list | None = None):
    """Run one episode; returns ``(final_state, rewards)``."""
    state = reset(instance, mode)
    rewards = []
    while not state.terminal:
        acts = available_actions(state)
        a = policy(state, acts)
        out = step(state, a)
        if trace is not None:
            trace.append({
                "t": state.t,
                "resource": state.resource,
                "action": str(a),
                "reward": out.reward,
                "features": [round(float(x), 6) for x in encode(state, a)],
            })
        rewards.append(out.reward)
        state = out.next
    return state, rewards


def random_policy(rng: np.random.Generator) -> Policy:
    def choose(state, acts):
        return acts[int(rng.integers(len(acts)))]
    return choose


def write_trace(records: list, path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
