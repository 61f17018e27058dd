"""Nearest-cluster tracker baseline fed by the denoised event stream.

Each surviving spike either shifts the closest cluster center toward it
(when within the assignment radius) or seeds a new cluster. Cluster
activity counts events and decays exponentially with time; at each frame
boundary every sufficiently active cluster emits a fixed-size box around
its center. With a full table the least active cluster is replaced in
place. Ties (equidistant centers, equal activities) resolve to the lowest
cluster index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError
from .pipeline import (
    MICROS_PER_SECOND,
    DvsEvent,
    FrameProposals,
    PipelineConfig,
    ProposalBox,
    frame_start,
)


@dataclass(slots=True)
class MsCluster:
    cx: float
    cy: float
    radius: float
    activity: float
    t_last: int


@dataclass(frozen=True)
class MsConfig:
    radius: float = 9.0
    eta: float = 0.5
    tau_act_us: float = 40_000.0
    act_threshold: float = 3.0
    max_clusters: int = 12

    def __post_init__(self):
        if not (0 < self.eta <= 1):
            raise ConfigError(f"eta must lie in (0, 1], got {self.eta}")
        if self.radius <= 0 or self.tau_act_us <= 0 or self.max_clusters <= 0:
            raise ConfigError("radius, tau_act_us, and max_clusters must be positive")


@dataclass
class MsCounters:
    """Instrumentation of one baseline run (accounting model in cost.py)."""

    k_inp: int = 0
    k_ref: int = 0
    cluster_scans: int = 0
    assigned: int = 0
    seeded: int = 0
    emit_scans: int = 0
    proposals_per_frame: list[int] = field(default_factory=list)


class MeanShiftTracker:
    def __init__(self, cfg: MsConfig, height: int, width: int):
        self.cfg = cfg
        self.height = height
        self.width = width
        self.clusters: list[MsCluster] = []

    def _decay_all(self, t: int) -> None:
        tau = self.cfg.tau_act_us
        for c in self.clusters:
            dt = t - c.t_last
            if dt > 0:
                c.activity *= math.exp(-dt / tau)
                c.t_last = t

    def step(self, x: int, y: int, t: int) -> bool:
        """Assign one spike to the nearest in-range cluster, or seed one.

        Returns True when a new cluster was seeded.
        """
        self._decay_all(t)
        cfg = self.cfg
        best = -1
        best_d2 = cfg.radius * cfg.radius
        for idx, c in enumerate(self.clusters):
            d2 = (x - c.cx) ** 2 + (y - c.cy) ** 2
            if d2 < best_d2 or (d2 == best_d2 and best == -1):
                best = idx
                best_d2 = d2
        if best >= 0:
            c = self.clusters[best]
            c.cx += cfg.eta * (x - c.cx)
            c.cy += cfg.eta * (y - c.cy)
            c.activity += 1.0
            return False
        fresh = MsCluster(float(x), float(y), cfg.radius, 1.0, t)
        if len(self.clusters) < cfg.max_clusters:
            self.clusters.append(fresh)
        else:
            weakest = min(range(len(self.clusters)), key=lambda i: (self.clusters[i].activity, i))
            self.clusters[weakest] = fresh
        return True

    def emit(self, t_end: int) -> list[ProposalBox]:
        """Boxes of side 2*radius for clusters still active at ``t_end``."""
        cfg = self.cfg
        side = int(round(2 * cfg.radius))
        boxes = []
        for c in self.clusters:
            decayed = c.activity * math.exp(-max(0, t_end - c.t_last) / cfg.tau_act_us)
            if decayed < cfg.act_threshold:
                continue
            x0 = int(round(c.cx - cfg.radius))
            y0 = int(round(c.cy - cfg.radius))
            x1 = min(self.width, x0 + side)
            y1 = min(self.height, y0 + side)
            x0 = max(0, x0)
            y0 = max(0, y0)
            if x0 < x1 and y0 < y1:
                boxes.append(ProposalBox(x0, y0, x1, y1, t_end))
        boxes.sort(key=lambda b: (b.y0, b.x0, b.x1, b.y1))
        return boxes


def run_meanshift(
    events, config: PipelineConfig, ms: MsConfig
) -> tuple[list[FrameProposals], MsCounters]:
    """Refractory denoising, then cluster tracking, then per-frame boxes.

    Uses the same refractory layer and frame windows as the main pipeline so
    both consume an identical denoised stream.
    """
    config.validate()
    refractory = config.build_refractory_layer()
    tracker = MeanShiftTracker(ms, config.sensor_height, config.sensor_width)
    counters = MsCounters()
    fps = config.fps
    frames: list[FrameProposals] = []

    def close_frame(f: int) -> None:
        t_end = frame_start(f + 1, fps)
        counters.emit_scans += len(tracker.clusters)
        boxes = tracker.emit(t_end)
        counters.proposals_per_frame.append(len(boxes))
        frames.append(FrameProposals(f, frame_start(f, fps), t_end, boxes))

    current = 0
    t_last: int | None = None
    for ev in events:
        f = (ev.t * fps) // MICROS_PER_SECOND
        while current < f:
            close_frame(current)
            current += 1
        t_last = ev.t
        counters.k_inp += 1
        spike = refractory.step(ev)
        if spike is None:
            continue
        counters.k_ref += 1
        counters.cluster_scans += len(tracker.clusters)
        if tracker.step(*spike):
            counters.seeded += 1
        else:
            counters.assigned += 1

    covered_us = 0 if t_last is None else t_last + 1
    duration_us = config.duration_us()
    if duration_us is not None:
        covered_us = max(covered_us, duration_us)
    frame_count = -((-covered_us * fps) // MICROS_PER_SECOND)
    while current < frame_count:
        close_frame(current)
        current += 1
    return frames, counters
