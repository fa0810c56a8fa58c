"""Domain types, objective, constraint validation and JSON persistence.

All times are whole seconds on a 1 s grid. Types are immutable once built.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping

import numpy as np

FORMAT_VERSION = 1

# Slack for float round-off before ceiling a transition time.
_CEIL_EPS = 1e-9
# Slack for summing float resource costs against capacities.
_CAP_EPS = 1e-9


class StructuralError(ValueError):
    """Raised when inputs do not index a valid instance."""


@dataclass(frozen=True, order=True)
class TimeWindow:
    start: int
    end: int

    def __post_init__(self):
        if int(self.start) != self.start or int(self.end) != self.end:
            raise ValueError(f"window bounds must be whole seconds: {self}")
        if not self.start < self.end:
            raise ValueError(f"window start must precede end: {self}")

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class Task:
    id: int
    lat: float
    lon: float
    duration: int
    profit: int
    windows: Mapping[int, tuple[TimeWindow, ...]]
    energy_cost: float = 0.0
    storage_cost: float = 0.0

    def __post_init__(self):
        if self.duration < 1 or self.profit < 1:
            raise ValueError(f"task {self.id}: duration and profit must be >= 1")
        # Windows too short to hold the task are dropped; the rest are sorted.
        cleaned = {}
        for j, ws in sorted(self.windows.items()):
            kept = tuple(sorted(w for w in ws if w.length >= self.duration))
            for a, b in zip(kept, kept[1:]):
                if b.start < a.end:
                    raise ValueError(f"task {self.id}: overlapping windows on resource {j}")
            if kept:
                cleaned[int(j)] = kept
        object.__setattr__(self, "windows", cleaned)

    def windows_on(self, j: int) -> tuple[TimeWindow, ...]:
        return self.windows.get(j, ())


@dataclass(frozen=True)
class Resource:
    id: int
    energy_capacity: float
    storage_capacity: float
    horizon: TimeWindow

    def __post_init__(self):
        if self.energy_capacity <= 0 or self.storage_capacity <= 0:
            raise ValueError(f"resource {self.id}: capacities must be positive")


@dataclass(frozen=True)
class TransitionModel:
    """Slew-time proxy: affine in the great-circle angle between targets."""

    base_seconds: int = 5
    per_degree_seconds: float = 0.2

    def __post_init__(self):
        if self.base_seconds < 0 or self.per_degree_seconds < 0:
            raise ValueError("transition parameters must be non-negative")


def angular_distance(lat1, lon1, lat2, lon2) -> float:
    """Great-circle distance in degrees (haversine, symmetric by construction)."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dphi = math.radians(abs(lat2 - lat1))
    dlam = math.radians(abs(lon2 - lon1))
    h = math.sin(dphi / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dlam / 2) ** 2
    return math.degrees(2 * math.asin(min(1.0, math.sqrt(h))))


def transition_time(a: Task, b: Task, model: TransitionModel) -> int:
    if a.lat == b.lat and a.lon == b.lon:
        return int(model.base_seconds)
    if (a.lat, a.lon) > (b.lat, b.lon):
        a, b = b, a
    dist = angular_distance(a.lat, a.lon, b.lat, b.lon)
    return int(math.ceil(model.base_seconds + model.per_degree_seconds * dist - _CEIL_EPS))


@dataclass(frozen=True)
class Instance:
    tasks: tuple[Task, ...]
    resources: tuple[Resource, ...]
    transition: TransitionModel = field(default_factory=TransitionModel)
    seed: int = 0
    scene_label: str = ""
    metadata: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "resources", tuple(self.resources))
        for i, t in enumerate(self.tasks):
            if t.id != i:
                raise StructuralError(f"task ids must be 0..n-1, got {t.id} at {i}")
        for j, r in enumerate(self.resources):
            if r.id != j:
                raise StructuralError(f"resource ids must be 0..m-1, got {r.id} at {j}")
        for t in self.tasks:
            if not t.windows:
                raise StructuralError(f"task {t.id} has no executable window")
            if any(j < 0 or j >= len(self.resources) for j in t.windows):
                raise StructuralError(f"task {t.id} references an unknown resource")
            for j, ws in t.windows.items():
                h = self.resources[j].horizon
                if ws[0].start < h.start or ws[-1].end > h.end:
                    raise StructuralError(f"task {t.id}: window outside the horizon of resource {j}")

    @property
    def n(self) -> int:
        return len(self.tasks)

    @property
    def m(self) -> int:
        return len(self.resources)

    @cached_property
    def transition_matrix(self) -> np.ndarray:
        """Pairwise transition seconds, computed once per instance."""
        n = self.n
        mat = np.zeros((n, n), dtype=np.int64)
        for a in range(n):
            for b in range(a + 1, n):
                mat[a, b] = mat[b, a] = transition_time(self.tasks[a], self.tasks[b], self.transition)
            mat[a, a] = self.transition.base_seconds
        return mat

    @property
    def max_profit(self) -> int:
        return max((t.profit for t in self.tasks), default=0)

    @property
    def total_profit(self) -> int:
        return sum(t.profit for t in self.tasks)


@dataclass(frozen=True)
class Schedule:
    """Assignment vector ``r`` (-1 = unscheduled) with start/end seconds."""

    r: tuple[int, ...]
    es: tuple[int | None, ...]
    ee: tuple[int | None, ...]

    def __post_init__(self):
        for name in ("r", "es", "ee"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not len(self.r) == len(self.es) == len(self.ee):
            raise StructuralError("r, es, ee must have equal length")
        for i, (r, s, e) in enumerate(zip(self.r, self.es, self.ee)):
            if r < -1:
                raise StructuralError(f"task {i}: invalid assignment {r}")
            if (r == -1) != (s is None) or (r == -1) != (e is None):
                raise StructuralError(f"task {i}: es/ee must be set iff the task is scheduled")

    @classmethod
    def empty(cls, n: int) -> "Schedule":
        return cls((-1,) * n, (None,) * n, (None,) * n)

    @classmethod
    def from_placements(cls, n: int, placements: Mapping[int, tuple[int, int, int]]) -> "Schedule":
        """Build from ``{task_id: (resource, es, ee)}``."""
        r, es, ee = [-1] * n, [None] * n, [None] * n
        for i, (j, s, e) in placements.items():
            r[i], es[i], ee[i] = j, s, e
        return cls(tuple(r), tuple(es), tuple(ee))

    def scheduled(self) -> list[int]:
        return [i for i, r in enumerate(self.r) if r > -1]


def _check_shape(schedule: Schedule, instance: Instance):
    if len(schedule.r) != instance.n:
        raise StructuralError(f"schedule covers {len(schedule.r)} tasks, instance has {instance.n}")
    for i, r in enumerate(schedule.r):
        if r >= instance.m:
            raise StructuralError(f"task {i} assigned to unknown resource {r}")


def evaluate_objective(schedule: Schedule, instance: Instance) -> int:
    """Total profit of scheduled tasks. Feasibility is not checked."""
    _check_shape(schedule, instance)
    return sum(instance.tasks[i].profit for i, r in enumerate(schedule.r) if r > -1)


def resource_usage(schedule: Schedule, instance: Instance, j: int) -> tuple[float, float]:
    if not 0 <= j < instance.m:
        raise StructuralError(f"unknown resource {j}")
    _check_shape(schedule, instance)
    energy = storage = 0.0
    for i, r in enumerate(schedule.r):
        if r == j:
            energy += instance.tasks[i].energy_cost
            storage += instance.tasks[i].storage_cost
    return energy, storage


@dataclass(frozen=True)
class Violation:
    constraint: str
    tasks: tuple[int, ...]
    detail: str = ""

    def __str__(self):
        ids = ",".join(map(str, self.tasks))
        return f"{self.constraint}[{ids}] {self.detail}".rstrip()


# Constraint names used in violation reports.
STORAGE = "storage-capacity"
ENERGY = "energy-capacity"
WINDOW = "time-window"
DURATION = "duration"
OVERLAP = "overlap"
TRANSITION = "transition-time"


def validate(schedule: Schedule, instance: Instance) -> list[Violation]:
    """Check every constraint and report all violations (never fail-fast).

    Runs independently of the solvers: pairwise checks compare every pair of
    tasks sharing a resource, not just chronological neighbours.
    """
    _check_shape(schedule, instance)
    out: list[Violation] = []
    # One r_i per task: a task cannot be booked twice in this representation.

    by_res: dict[int, list[int]] = {}
    for i in schedule.scheduled():
        by_res.setdefault(schedule.r[i], []).append(i)

    for j, ids in sorted(by_res.items()):
        res = instance.resources[j]
        energy = sum(instance.tasks[i].energy_cost for i in ids)
        storage = sum(instance.tasks[i].storage_cost for i in ids)
        if storage > res.storage_capacity + _CAP_EPS:
            out.append(Violation(STORAGE, tuple(ids), f"resource {j}: {storage:g} > {res.storage_capacity:g}"))
        if energy > res.energy_capacity + _CAP_EPS:
            out.append(Violation(ENERGY, tuple(ids), f"resource {j}: {energy:g} > {res.energy_capacity:g}"))

        for i in ids:
            t = instance.tasks[i]
            es, ee = schedule.es[i], schedule.ee[i]
            if ee - es != t.duration:
                out.append(Violation(DURATION, (i,), f"ee-es={ee - es}, duration={t.duration}"))
            if not any(w.start <= es and es + t.duration <= w.end for w in t.windows_on(j)):
                out.append(Violation(WINDOW, (i,), f"[{es},{es + t.duration}] outside windows on resource {j}"))

        mat = instance.transition_matrix
        for x in range(len(ids)):
            for y in range(x + 1, len(ids)):
                a, b = ids[x], ids[y]
                if schedule.es[b] < schedule.es[a] or (schedule.es[b] == schedule.es[a] and b < a):
                    a, b = b, a
                # Execution occupies [es, ee); a precedes b chronologically.
                if schedule.es[b] < schedule.ee[a]:
                    out.append(Violation(OVERLAP, (a, b), f"resource {j}"))
                    continue
                gap = schedule.es[b] - schedule.ee[a]
                if gap < mat[a, b]:
                    out.append(Violation(TRANSITION, (a, b), f"gap {gap} < {int(mat[a, b])}"))
    return out


# ---------------------------------------------------------------- persistence

def instance_to_dict(instance: Instance) -> dict:
    return {
        "format": FORMAT_VERSION,
        "scene_label": instance.scene_label,
        "seed": instance.seed,
        "transition": {
            "base_seconds": instance.transition.base_seconds,
            "per_degree_seconds": instance.transition.per_degree_seconds,
        },
        "resources": [
            {
                "id": r.id,
                "energy_capacity": r.energy_capacity,
                "storage_capacity": r.storage_capacity,
                "horizon": [r.horizon.start, r.horizon.end],
            }
            for r in instance.resources
        ],
        "tasks": [
            {
                "id": t.id,
                "lat": t.lat,
                "lon": t.lon,
                "duration": t.duration,
                "profit": t.profit,
                "energy_cost": t.energy_cost,
                "storage_cost": t.storage_cost,
                "windows": {str(j): [[w.start, w.end] for w in ws] for j, ws in t.windows.items()},
            }
            for t in instance.tasks
        ],
        "metadata": dict(instance.metadata),
    }


def instance_from_dict(data: dict) -> Instance:
    if data.get("format") != FORMAT_VERSION:
        raise StructuralError(f"unsupported instance format {data.get('format')!r}")
    tr = data["transition"]
    resources = [
        Resource(r["id"], float(r["energy_capacity"]), float(r["storage_capacity"]), TimeWindow(*r["horizon"]))
        for r in data["resources"]
    ]
    tasks = [
        Task(
            id=t["id"],
            lat=float(t["lat"]),
            lon=float(t["lon"]),
            duration=int(t["duration"]),
            profit=int(t["profit"]),
            windows={int(j): tuple(TimeWindow(s, e) for s, e in ws) for j, ws in t["windows"].items()},
            energy_cost=float(t["energy_cost"]),
            storage_cost=float(t["storage_cost"]),
        )
        for t in data["tasks"]
    ]
    return Instance(
        tasks=tuple(tasks),
        resources=tuple(resources),
        transition=TransitionModel(int(tr["base_seconds"]), float(tr["per_degree_seconds"])),
        seed=int(data.get("seed", 0)),
        scene_label=data.get("scene_label", ""),
        metadata=data.get("metadata", {}),
    )


def schedule_to_dict(schedule: Schedule) -> dict:
    return {"format": FORMAT_VERSION, "r": list(schedule.r), "es": list(schedule.es), "ee": list(schedule.ee)}


def schedule_from_dict(data: dict) -> Schedule:
    if data.get("format") != FORMAT_VERSION:
        raise StructuralError(f"unsupported schedule format {data.get('format')!r}")
    return Schedule(tuple(data["r"]), tuple(data["es"]), tuple(data["ee"]))


def dumps(obj: dict) -> str:
    return json.dumps(obj, indent=1) + "\n"


def save_instance(instance: Instance, path) -> None:
    Path(path).write_text(dumps(instance_to_dict(instance)))


def load_instance(path) -> Instance:
    return instance_from_dict(json.loads(Path(path).read_text()))


def save_schedule(schedule: Schedule, path, extra: dict | None = None) -> None:
    data = schedule_to_dict(schedule)
    if extra:
        data.update(extra)
    Path(path).write_text(dumps(data))


def load_schedule(path) -> Schedule:
    return schedule_from_dict(json.loads(Path(path).read_text()))
