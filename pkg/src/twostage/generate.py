"""Synthetic AEOS scenario generation.

Visibility comes from an analytic ground-track sweep rather than orbit
propagation: during the ascending half of each pass the sub-satellite latitude
rises linearly while its longitude drifts linearly (orbital motion projected
through the inclination, minus Earth rotation). A target is visible on a pass
when its longitude lies within the swath of the track at the moment the track
crosses the target's latitude.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .core import Instance, Resource, Task, TimeWindow, TransitionModel

log = logging.getLogger(__name__)

SIDEREAL_DAY = 86164.0
DEFAULT_ENERGY_CAPACITY = 150.0  # Ah
DEFAULT_STORAGE_CAPACITY = 2000.0  # GB
ENERGY_PER_SECOND = 0.1  # Ah per second of observation
STORAGE_PER_SECOND = 1.0  # GB per second of observation
WINDOW_LENGTH_RANGE = (30, 120)
TASK_DURATION = 5
PROFIT_RANGE = (1, 10)


class GenerationError(RuntimeError):
    pass


class Area(enum.Enum):
    SMALL = "SMALL"
    LARGE = "LARGE"


AREA_BOUNDS = {
    Area.SMALL: ((20.0, 30.0), (108.0, 114.0)),
    Area.LARGE: ((3.0, 53.0), (73.0, 133.0)),
}


@dataclass(frozen=True)
class SceneConfig:
    n_tasks: int
    area: Area = Area.SMALL
    lat_range: tuple[float, float] | None = None
    lon_range: tuple[float, float] | None = None
    n_resources: int | None = None
    horizon_seconds: int = 86400
    seed: int = 0
    label: str = ""

    def __post_init__(self):
        lat, lon = AREA_BOUNDS[self.area]
        if self.lat_range is None:
            object.__setattr__(self, "lat_range", lat)
        if self.lon_range is None:
            object.__setattr__(self, "lon_range", lon)
        if self.n_resources is None:
            object.__setattr__(self, "n_resources", 3 if self.area is Area.SMALL else 5)
        if self.n_tasks < 1 or self.n_resources < 1 or self.horizon_seconds < 1:
            raise ValueError("n_tasks, n_resources and horizon_seconds must be positive")
        for lo, hi in (self.lat_range, self.lon_range):
            if lo > hi:
                raise ValueError(f"empty range [{lo}, {hi}]")


@dataclass(frozen=True)
class OrbitConfig:
    period_seconds: int = 5760
    swath_half_width_deg: float = 3.0
    ground_track_start_lon: float = 108.5  # track longitude of pass 0 at reference_lat_deg
    inclination_deg: float = 97.4
    pass_lon_step_deg: float = 2.5  # eastward offset between consecutive passes
    reference_lat_deg: float = 25.0

    def __post_init__(self):
        if self.period_seconds <= 0:
            raise ValueError("period_seconds must be positive")
        if not 0 < self.swath_half_width_deg < 90:
            raise ValueError("swath_half_width_deg must lie in (0, 90)")

    @property
    def max_latitude(self) -> float:
        return min(self.inclination_deg, 180.0 - self.inclination_deg)

    def crossing_offset(self, lat: float) -> float:
        """Seconds from pass start until the ascending track reaches ``lat``."""
        top = self.max_latitude
        return (lat + top) * self.period_seconds / (4.0 * top)

    @property
    def lon_rate(self) -> float:
        """Ground-track longitude drift in degrees per second."""
        return 360.0 / self.period_seconds * math.cos(math.radians(self.inclination_deg)) - 360.0 / SIDEREAL_DAY

    def track_lon(self, pass_index: int, lat: float) -> float:
        drift = self.lon_rate * (self.crossing_offset(lat) - self.crossing_offset(self.reference_lat_deg))
        return self.ground_track_start_lon + pass_index * self.pass_lon_step_deg + drift


SMALL_ORBIT = OrbitConfig()
LARGE_ORBIT = OrbitConfig(
    swath_half_width_deg=12.0, ground_track_start_lon=79.0, pass_lon_step_deg=12.0, reference_lat_deg=28.0
)

PRESETS = {
    "H_20": (SceneConfig(20, Area.SMALL, label="H_20"), SMALL_ORBIT),
    "H_50": (SceneConfig(50, Area.SMALL, label="H_50"), SMALL_ORBIT),
    "C_100": (SceneConfig(100, Area.LARGE, label="C_100"), LARGE_ORBIT),
    "C_200": (SceneConfig(200, Area.LARGE, label="C_200"), LARGE_ORBIT),
    "C_400": (SceneConfig(400, Area.LARGE, label="C_400"), LARGE_ORBIT),
}
# Desk-scale scene small enough for the exact oracle (n <= 10, m <= 2, 1200 s).
TINY_PRESETS = {
    "T_8": (
        SceneConfig(8, Area.SMALL, n_resources=2, horizon_seconds=1200, label="T_8"),
        replace(SMALL_ORBIT, period_seconds=600, pass_lon_step_deg=3.0),
    ),
}
ALL_PRESETS = {**PRESETS, **TINY_PRESETS}


def preset(name: str, seed: int = 0) -> tuple[SceneConfig, OrbitConfig]:
    try:
        scene, orbit = ALL_PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(ALL_PRESETS)}") from None
    return replace(scene, seed=seed), orbit


def pass_horizon(j: int, config: SceneConfig, orbit: OrbitConfig) -> TimeWindow:
    spacing = config.horizon_seconds // config.n_resources
    if orbit.period_seconds > spacing:
        raise ValueError("orbital period longer than the spacing between passes")
    return TimeWindow(j * spacing, j * spacing + orbit.period_seconds)


def _wrap(deg: float) -> float:
    return (deg + 180.0) % 360.0 - 180.0


def compute_windows(task: Task, resource: Resource, orbit: OrbitConfig, window_length: int = 60) -> list[TimeWindow]:
    """Visibility windows of ``task`` during the pass that ``resource`` models.

    ``window_length`` is the seeded draw for this (task, pass) pair; the window
    is centred on the latitude-crossing time and clipped to the pass.
    """
    if abs(task.lat) > orbit.max_latitude:
        return []
    offset = _wrap(task.lon - orbit.track_lon(resource.id, task.lat))
    if abs(offset) > orbit.swath_half_width_deg:
        return []
    h = resource.horizon
    centre = h.start + int(round(orbit.crossing_offset(task.lat)))
    start = max(h.start, centre - window_length // 2)
    end = min(h.end, centre - window_length // 2 + window_length)
    if end - start < task.duration:
        return []
    return [TimeWindow(start, end)]


def generate_instance(config: SceneConfig, orbit: OrbitConfig) -> Instance:
    """Draw a scenario. Deterministic in ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    n, m = config.n_tasks, config.n_resources
    # Fixed draw order keeps every field a pure function of the seed.
    lats = rng.uniform(config.lat_range[0], config.lat_range[1], size=n)
    lons = rng.uniform(config.lon_range[0], config.lon_range[1], size=n)
    profits = rng.integers(PROFIT_RANGE[0], PROFIT_RANGE[1], endpoint=True, size=n)
    lengths = rng.integers(WINDOW_LENGTH_RANGE[0], WINDOW_LENGTH_RANGE[1], endpoint=True, size=(n, m))

    resources = tuple(
        Resource(j, DEFAULT_ENERGY_CAPACITY, DEFAULT_STORAGE_CAPACITY, pass_horizon(j, config, orbit))
        for j in range(m)
    )
    d = TASK_DURATION
    tasks: list[Task] = []
    dropped = 0
    for i in range(n):
        lat, lon = round(float(lats[i]), 6), round(float(lons[i]), 6)
        probe = Task(0, lat, lon, d, int(profits[i]), {})
        windows = {}
        for res in resources:
            ws = compute_windows(probe, res, orbit, int(lengths[i, res.id]))
            if ws:
                windows[res.id] = tuple(ws)
        if not windows:
            dropped += 1
            continue
        tasks.append(
            Task(len(tasks), lat, lon, d, int(profits[i]), windows, ENERGY_PER_SECOND * d, STORAGE_PER_SECOND * d)
        )
    if dropped:
        log.info("dropped %d of %d tasks with no visibility window", dropped, n)
    if not tasks:
        raise GenerationError(
            f"no task is visible: n={n}, lat={config.lat_range}, lon={config.lon_range}, orbit={orbit}"
        )

    n_windows = [sum(len(ws) for ws in t.windows.values()) for t in tasks]
    lens = [w.length for t in tasks for ws in t.windows.values() for w in ws]
    scene = asdict(config)
    scene["area"] = config.area.value
    metadata = {
        "scene": scene,
        "orbit": asdict(orbit),
        "drawn_tasks": n,
        "dropped_tasks": dropped,
        "window_length_range": list(WINDOW_LENGTH_RANGE),
        "windows_total": int(sum(n_windows)),
        "windows_per_task_mean": round(float(np.mean(n_windows)), 4),
        "window_length_mean": round(float(np.mean(lens)), 4),
    }
    return Instance(
        tasks=tuple(tasks),
        resources=resources,
        transition=TransitionModel(),
        seed=config.seed,
        scene_label=config.label or f"{config.area.value}_{n}",
        metadata=metadata,
    )


def generate_preset(name: str, seed: int = 0) -> Instance:
    return generate_instance(*preset(name, seed))
