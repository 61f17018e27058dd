"""Deterministic synthetic address-event scenes with per-frame ground truth.

Objects are textureless rectangles gliding over a dark background. Only a
moving contrast edge emits: the sides of the rectangle facing along or
against its velocity produce events as Poisson processes, one per edge
pixel, at a configurable rate. A motionless object is invisible. Uniform
background noise covers the whole array.

Objects leave one sensor border and re-enter at the opposite one: positions
live on a per-axis torus of circumference (extent + object size), so an
object is never split across a border. While less than
``VISIBILITY_CUTOFF`` of an object's area is on-screen the object neither
emits events nor receives a ground-truth box (annotators do not box
slivers); in-between, events from its off-screen pixels are dropped and the
box is clipped to the array.

Everything is reproducible: one child generator per object plus one for
noise, all derived from the scene seed, and the merged stream is sorted by
(t, y, x, polarity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .metrics import GroundTruthBox
from .pipeline import MICROS_PER_SECOND, DvsEvent, SensorGeometry

#: Minimum on-screen area fraction for an object to emit or be annotated.
VISIBILITY_CUTOFF = 0.6


@dataclass(frozen=True)
class MovingObject:
    """A rectangle with linear motion and an edge event rate.

    ``edge_rate`` is events per edge pixel per second. Horizontal velocity
    activates the left/right sides, vertical velocity the top/bottom sides.
    """

    width: int
    height: int
    x0: float
    y0: float
    vx: float
    vy: float
    edge_rate: float
    label: str = "obj"

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"object size must be positive, got {self.width}x{self.height}")
        if self.edge_rate < 0:
            raise ValueError(f"edge_rate must be >= 0, got {self.edge_rate}")


@dataclass(frozen=True)
class SceneSpec:
    geometry: SensorGeometry
    duration_s: float
    objects: tuple[MovingObject, ...]
    noise_rate: float = 0.0
    fps: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.duration_s < 0:
            raise ValueError(f"duration must be >= 0, got {self.duration_s}")
        if self.noise_rate < 0:
            raise ValueError(f"noise_rate must be >= 0, got {self.noise_rate}")
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")


@dataclass
class SynthOutput:
    events: list[DvsEvent]
    gt: list[GroundTruthBox]
    frame_count: int


def _edge_offsets(obj: MovingObject) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Offsets (dx, dy) of emitting contour pixels and their polarities.

    Polarity is 1 on sides the object advances toward, 0 on trailing sides.
    """
    offsets: dict[tuple[int, int], int] = {}
    if obj.vx != 0:
        lead_dx = obj.width - 1 if obj.vx > 0 else 0
        for dy in range(obj.height):
            offsets[(0, dy)] = max(offsets.get((0, dy), 0), int(lead_dx == 0))
            offsets[(obj.width - 1, dy)] = max(
                offsets.get((obj.width - 1, dy), 0), int(lead_dx == obj.width - 1)
            )
    if obj.vy != 0:
        lead_dy = obj.height - 1 if obj.vy > 0 else 0
        for dx in range(obj.width):
            offsets[(dx, 0)] = max(offsets.get((dx, 0), 0), int(lead_dy == 0))
            offsets[(dx, obj.height - 1)] = max(
                offsets.get((dx, obj.height - 1), 0), int(lead_dy == obj.height - 1)
            )
    items = sorted(offsets.items())
    dx = np.array([k[0] for k, _ in items], dtype=np.int64)
    dy = np.array([k[1] for k, _ in items], dtype=np.int64)
    pol = np.array([v for _, v in items], dtype=np.int64)
    return dx, dy, pol


def _origin_at(obj: MovingObject, geometry: SensorGeometry, t_s) -> tuple[np.ndarray, np.ndarray]:
    """Rounded top-left pixel of the object at time(s) t_s (torus wrap)."""
    period_x = geometry.width + obj.width
    period_y = geometry.height + obj.height
    xr = np.mod(obj.x0 + obj.width + obj.vx * np.asarray(t_s, dtype=float), period_x) - obj.width
    yr = np.mod(obj.y0 + obj.height + obj.vy * np.asarray(t_s, dtype=float), period_y) - obj.height
    return np.floor(xr + 0.5).astype(np.int64), np.floor(yr + 0.5).astype(np.int64)


def _visible_fraction(
    obj: MovingObject, geometry: SensorGeometry, ox: np.ndarray, oy: np.ndarray
) -> np.ndarray:
    """On-screen area fraction at the given rounded origins."""
    w_vis = np.clip(np.minimum(ox + obj.width, geometry.width) - np.maximum(ox, 0), 0, None)
    h_vis = np.clip(np.minimum(oy + obj.height, geometry.height) - np.maximum(oy, 0), 0, None)
    return (w_vis * h_vis) / (obj.width * obj.height)


def _object_events(
    obj: MovingObject, geometry: SensorGeometry, duration_s: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    dx, dy, pol = _edge_offsets(obj)
    t_total = int(round(duration_s * MICROS_PER_SECOND))
    if len(dx) == 0 or obj.edge_rate == 0 or t_total == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, empty, empty
    count = rng.poisson(len(dx) * obj.edge_rate * duration_s)
    if count == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, empty, empty
    t_us = rng.integers(0, t_total, count)
    pick = rng.integers(0, len(dx), count)
    ox, oy = _origin_at(obj, geometry, t_us / MICROS_PER_SECOND)
    x = ox + dx[pick]
    y = oy + dy[pick]
    keep = (
        (x >= 0)
        & (x < geometry.width)
        & (y >= 0)
        & (y < geometry.height)
        & (_visible_fraction(obj, geometry, ox, oy) >= VISIBILITY_CUTOFF)
    )
    return t_us[keep], x[keep], y[keep], pol[pick][keep]


def _noise_events(
    geometry: SensorGeometry, noise_rate: float, duration_s: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    t_total = int(round(duration_s * MICROS_PER_SECOND))
    count = 0
    if noise_rate > 0 and t_total > 0:
        count = rng.poisson(noise_rate * geometry.height * geometry.width * duration_s)
    if count == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, empty, empty
    return (
        rng.integers(0, t_total, count),
        rng.integers(0, geometry.width, count),
        rng.integers(0, geometry.height, count),
        rng.integers(0, 2, count),
    )


def gen_scene(spec: SceneSpec) -> SynthOutput:
    """Generate the sorted event stream and per-frame ground truth."""
    geometry = spec.geometry
    parts = []
    for k, obj in enumerate(spec.objects):
        rng = np.random.default_rng([spec.seed, 1, k])
        parts.append(_object_events(obj, geometry, spec.duration_s, rng))
    parts.append(_noise_events(geometry, spec.noise_rate, spec.duration_s, np.random.default_rng([spec.seed, 2])))

    t = np.concatenate([p[0] for p in parts])
    x = np.concatenate([p[1] for p in parts])
    y = np.concatenate([p[2] for p in parts])
    pol = np.concatenate([p[3] for p in parts])
    order = np.lexsort((pol, x, y, t))
    events = [
        DvsEvent(ti, xi, yi, pi)
        for ti, xi, yi, pi in zip(
            t[order].tolist(), x[order].tolist(), y[order].tolist(), pol[order].tolist()
        )
    ]

    t_total = int(round(spec.duration_s * MICROS_PER_SECOND))
    frame_count = -((-t_total * spec.fps) // MICROS_PER_SECOND)
    gt: list[GroundTruthBox] = []
    for f in range(frame_count):
        t_mid = (f + 0.5) / spec.fps
        for k, obj in enumerate(spec.objects):
            ox, oy = _origin_at(obj, geometry, t_mid)
            if _visible_fraction(obj, geometry, ox, oy) < VISIBILITY_CUTOFF:
                continue
            x0 = max(0, int(ox))
            y0 = max(0, int(oy))
            x1 = min(geometry.width, int(ox) + obj.width)
            y1 = min(geometry.height, int(oy) + obj.height)
            if x0 < x1 and y0 < y1:
                gt.append(GroundTruthBox(f, x0, y0, x1, y1, f"{obj.label}-{k}"))
    return SynthOutput(events=events, gt=gt, frame_count=frame_count)


def expected_event_count(spec: SceneSpec) -> float:
    """Analytic expectation of the generated stream length.

    Off-screen edge pixels drop their events, so each contour pixel
    contributes rate * duration * (fraction of time it is on-screen),
    estimated on a fine deterministic time grid.
    """
    samples = 2001
    ts = np.linspace(0.0, spec.duration_s, samples)
    total = spec.noise_rate * spec.geometry.height * spec.geometry.width * spec.duration_s
    for obj in spec.objects:
        dx, dy, _ = _edge_offsets(obj)
        if len(dx) == 0 or obj.edge_rate == 0:
            continue
        ox, oy = _origin_at(obj, spec.geometry, ts)
        emitting = _visible_fraction(obj, spec.geometry, ox, oy) >= VISIBILITY_CUTOFF
        x = ox[:, None] + dx[None, :]
        y = oy[:, None] + dy[None, :]
        visible = (
            (x >= 0)
            & (x < spec.geometry.width)
            & (y >= 0)
            & (y < spec.geometry.height)
            & emitting[:, None]
        )
        total += visible.mean(axis=0).sum() * obj.edge_rate * spec.duration_s
    return float(total)


def _traffic_layout(car_w: int, car_h: int) -> list[MovingObject]:
    """Default mix for a traffic scene: two cars, a bus, two pedestrians.

    Speeds scale with the apparent car size so closer scenes move faster in
    pixels; rates are placeholders replaced by the preset calibration.
    """
    s = car_w / 40.0
    hum_w = max(3, round(car_w * 0.2))
    hum_h = max(6, round(car_h * 0.9))
    bus_w = round(car_w * 2.2)
    bus_h = round(car_h * 1.4)
    return [
        MovingObject(car_w, car_h, 20, 70, 90 * s, 9 * s, 0.0, "car"),
        MovingObject(max(3, car_w - 2), max(3, car_h - 2), 180, 100, -75 * s, -7 * s, 0.0, "car"),
        MovingObject(bus_w, bus_h, 60, 28, 45 * s, 4 * s, 0.0, "bus"),
        MovingObject(hum_w, hum_h, 50, 140, 12 * s, 1.2 * s, 0.0, "human"),
        MovingObject(hum_w, hum_h, 170, 132, -10 * s, -1 * s, 0.0, "human"),
    ]


def _calibrated_traffic(
    name: str, car_size: tuple[int, int], duration_s: float, target_events: int, noise_share: float
) -> SceneSpec:
    """Scene whose expected event count hits the target.

    Each object's rate is proportional to its speed (a fixed number of
    events per pixel crossed), then one shared factor is solved so that the
    analytic expectation lands on the target.
    """
    geometry = SensorGeometry(180, 240)
    layout = _traffic_layout(*car_size)
    unit = [replace(o, edge_rate=math.hypot(o.vx, o.vy)) for o in layout]
    probe = SceneSpec(geometry, duration_s, tuple(unit), 0.0, 30, 0)
    per_unit = expected_event_count(probe)
    object_target = target_events * (1.0 - noise_share)
    factor = object_target / per_unit
    objects = tuple(
        replace(o, edge_rate=factor * math.hypot(o.vx, o.vy)) for o in layout
    )
    noise_rate = (target_events * noise_share) / (geometry.height * geometry.width * duration_s)
    return SceneSpec(geometry, duration_s, objects, noise_rate, 30, 0)


def _desk_scene() -> SceneSpec:
    """Small standard scene for quick experiments: three vehicles.

    Rates give a few events per pixel crossing, which keeps the refractory
    layer's survival fraction in a realistic band. Lanes stay separated by
    more than two window strides so proposals of different objects never
    merge, and every object is large enough that a window-quantized box can
    still clear moderate overlap thresholds.
    """
    geometry = SensorGeometry(180, 240)
    objects = (
        MovingObject(48, 24, 10, 20, 90.0, 2.0, 270.0, "car"),
        MovingObject(44, 22, 200, 88, -72.0, -1.0, 216.0, "car"),
        MovingObject(40, 20, 60, 140, 60.0, 1.0, 180.0, "car"),
    )
    return SceneSpec(geometry, 6.0, objects, noise_rate=0.03, fps=30, seed=0)


def _compare_scene() -> SceneSpec:
    """Head-to-head scene: three compact square-ish movers.

    Object footprints are close to twice the baseline tracker's default
    cluster radius, the regime where a fixed-size box tracker is at its
    best, so the comparison does not stack the deck against it.
    """
    geometry = SensorGeometry(180, 240)
    objects = (
        MovingObject(24, 20, 10, 20, 60.0, 2.0, 180.0, "car"),
        MovingObject(24, 18, 200, 80, -54.0, -1.0, 162.0, "car"),
        MovingObject(22, 18, 60, 140, 48.0, 1.0, 144.0, "car"),
    )
    return SceneSpec(geometry, 6.0, objects, noise_rate=0.02, fps=30, seed=0)


_TABLE_PRESETS = {
    "traffic-50m-day": ((40, 20), 58.9898, 927242, 0.06),
    "traffic-50m-night": ((38, 18), 59.9599, 771646, 0.10),
    "traffic-100m-day": ((28, 14), 60.0291, 630885, 0.06),
    "traffic-100m-night": ((27, 14), 59.9599, 480272, 0.10),
    "traffic-150m-day": ((19, 11), 58.9897, 583646, 0.06),
    "traffic-150m-night": ((19, 11), 59.9593, 479242, 0.10),
}

PRESET_NAMES = ("traffic-desk", "traffic-compare") + tuple(_TABLE_PRESETS)

#: Expected stream length of each calibrated preset.
PRESET_TARGET_EVENTS = {name: row[2] for name, row in _TABLE_PRESETS.items()}


def preset(name: str) -> SceneSpec:
    """A named ready-made scene; see PRESET_NAMES."""
    if name == "traffic-desk":
        return _desk_scene()
    if name == "traffic-compare":
        return _compare_scene()
    row = _TABLE_PRESETS.get(name)
    if row is None:
        raise KeyError(f"unknown preset {name!r}; known: {', '.join(PRESET_NAMES)}")
    car_size, duration_s, target, noise_share = row
    return _calibrated_traffic(name, car_size, duration_s, target, noise_share)
