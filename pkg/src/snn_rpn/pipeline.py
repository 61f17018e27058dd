"""Event-driven region-proposal pipeline.

Three stages process an address-event stream:

1. a per-pixel refractory layer that thins bursty and noisy input,
2. a grid of window neurons that pool surviving spikes through decaying
   conductances and emit one fixed-size candidate box per output spike,
3. a per-frame clustering pass that merges touching candidates into
   object-sized proposals.

The first two stages are asynchronous and advance neuron state only when an
event arrives. The clustering stage bins candidate boxes into fixed-duration
frame windows aligned to t=0.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

from .cost import OPS_PER_INPUT_EVENT, refractory_spike_ops, window_update_ops
from .errors import ConfigError, StreamOrderError
from .neuron import (
    ConductanceAccumulator,
    NeuronParams,
    NeuronState,
    add_conductance,
    apply_drive,
)

MICROS_PER_SECOND = 1_000_000


@dataclass(slots=True)
class DvsEvent:
    """One sensor event: timestamp (microseconds), pixel, polarity flag."""

    t: int
    x: int
    y: int
    polarity: int = 1


@dataclass(slots=True, frozen=True)
class SensorGeometry:
    height: int
    width: int

    def __post_init__(self):
        if self.height <= 0 or self.width <= 0:
            raise ValueError(f"sensor dimensions must be positive, got {self.height}x{self.width}")

    def contains(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height


def _window_origins(extent: int, window: int, stride: int) -> list[int]:
    # Origins step by stride; the last one is clamped to the border so
    # trailing pixels stay covered.
    last = extent - window
    origins = list(range(0, last + 1, stride))
    if origins[-1] != last:
        origins.append(last)
    return origins


def _coverage_table(origins: list[int], window: int, extent: int) -> list[tuple[int, ...]]:
    table: list[list[int]] = [[] for _ in range(extent)]
    for idx, origin in enumerate(origins):
        for p in range(origin, origin + window):
            table[p].append(idx)
    return [tuple(ix) for ix in table]


class ConvGeometry:
    """Placement of square analysis windows over the sensor plane.

    Window origins advance by ``stride`` along each axis, with a final origin
    clamped to the border. Construction rejects layouts where a pixel would
    be covered by more than two windows per axis (more than four in total)
    or left uncovered.
    """

    def __init__(self, sensor: SensorGeometry, window: int, stride: int):
        if window <= 0 or stride <= 0:
            raise ConfigError(f"window and stride must be positive, got W={window} S={stride}")
        if window > sensor.height or window > sensor.width:
            raise ConfigError(
                f"window {window} exceeds sensor {sensor.height}x{sensor.width}"
            )
        if 2 * stride < window:
            raise ConfigError(
                f"stride {stride} below half the window {window}: overlap would exceed 50%"
            )
        if stride > window:
            raise ConfigError(f"stride {stride} above window {window} would leave gaps")
        self.sensor = sensor
        self.window = window
        self.stride = stride
        self.row_origins = _window_origins(sensor.height, window, stride)
        self.col_origins = _window_origins(sensor.width, window, stride)
        self.rows = len(self.row_origins)
        self.cols = len(self.col_origins)
        self._row_cover = _coverage_table(self.row_origins, window, sensor.height)
        self._col_cover = _coverage_table(self.col_origins, window, sensor.width)
        for table in (self._row_cover, self._col_cover):
            if any(len(ix) == 0 for ix in table):
                raise ConfigError("some pixel is covered by no window")
        worst = max(len(ix) for ix in self._row_cover) * max(
            len(ix) for ix in self._col_cover
        )
        if worst > 4:
            raise ConfigError(
                f"window/stride {window}/{stride} covers some pixel by {worst} windows "
                "(clamped origin too close to its neighbor); at most 4 are allowed"
            )

    def windows_covering(self, x: int, y: int) -> list[tuple[int, int]]:
        """All (row, col) window indices whose W x W extent contains the pixel."""
        if not self.sensor.contains(x, y):
            raise ValueError(f"pixel ({x}, {y}) outside sensor {self.sensor}")
        return [(i, j) for i in self._row_cover[y] for j in self._col_cover[x]]

    def window_origin(self, i: int, j: int) -> tuple[int, int]:
        """Top-left (y, x) pixel of window (i, j)."""
        return self.row_origins[i], self.col_origins[j]


@dataclass(slots=True, frozen=True)
class ProposalBox:
    """Axis-aligned candidate box; [x0, x1) x [y0, y1), half-open pixels."""

    x0: int
    y0: int
    x1: int
    y1: int
    t: int

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate box ({self.x0},{self.y0},{self.x1},{self.y1})")


@dataclass
class FrameProposals:
    """Clustered proposals of one frame window [t_start, t_end)."""

    frame_index: int
    t_start: int
    t_end: int
    boxes: list[ProposalBox]


@dataclass
class RunCounters:
    """Raw measurements of one pipeline run.

    ``ops_*`` follow the per-event arithmetic accounting used by the cost
    model: 5 per input event, the full four-window budget per refractory
    spike, and r*(r-1) per frame for clustering. ``ops_conv_touched`` tallies
    the windows actually updated instead of the four-window budget.
    """

    k_inp: int = 0
    k_ref: int = 0
    k_conv: int = 0
    proposals_per_frame: list[int] = field(default_factory=list)
    ops_refractory: int = 0
    ops_conv: int = 0
    ops_conv_touched: int = 0
    ops_cluster: int = 0


class RefractoryLayer:
    """One LIF neuron per pixel; passes sparse activity, caps burst rate."""

    def __init__(self, geometry: SensorGeometry, params: NeuronParams, w_in: float):
        if w_in < 0:
            raise ConfigError(f"input weight must be >= 0, got {w_in}")
        self.geometry = geometry
        self.params = params
        self.w_in = w_in
        self.states = [
            NeuronState(params.v_rest, 0, None)
            for _ in range(geometry.height * geometry.width)
        ]
        self._t_prev = 0

    def step(self, ev: DvsEvent) -> tuple[int, int, int] | None:
        """Feed one event to its pixel neuron; return (x, y, t) if it fires.

        Polarity is ignored: ON and OFF events drive the same neuron.
        """
        if not self.geometry.contains(ev.x, ev.y):
            raise ValueError(f"event at ({ev.x}, {ev.y}) outside sensor {self.geometry}")
        if ev.t < self._t_prev:
            raise StreamOrderError(-1, f"event at t={ev.t} after t={self._t_prev}")
        self._t_prev = ev.t
        i = ev.y * self.geometry.width + ev.x
        state, fired = apply_drive(self.states[i], self.params, self.w_in, ev.t)
        self.states[i] = state
        return (ev.x, ev.y, ev.t) if fired else None


class ConvLayer:
    """Window neurons pooling refractory spikes through decaying conductances.

    Each incoming spike raises the pooled conductance of every covering
    window by ``w_ff``; the window's membrane then receives a kick
    proportional to the pooled conductance (``g_sum * dv_scale``). A firing
    window emits one W x W box at its own position and resets. Optional
    lateral links add ``w_lat`` of conductance to the 4-neighborhood of a
    firing window; neighbors re-evaluate on their next input.
    """

    def __init__(
        self,
        geometry: ConvGeometry,
        params: NeuronParams,
        tau_g: float,
        w_ff: float,
        dv_scale: float,
        lateral_enabled: bool = False,
        w_lat: float = 0.0,
    ):
        if params.t_refractory != 0:
            raise ConfigError("window neurons must have zero refractory period")
        if w_ff < 0 or w_lat < 0 or dv_scale < 0:
            raise ConfigError("weights and dv_scale must be >= 0")
        self.geometry = geometry
        self.params = params
        self.w_ff = w_ff
        self.dv_scale = dv_scale
        self.lateral_enabled = lateral_enabled
        self.w_lat = w_lat
        n = geometry.rows * geometry.cols
        self.states = [NeuronState(params.v_rest, 0, None) for _ in range(n)]
        self.conductances = [ConductanceAccumulator(tau_g) for _ in range(n)]

    def step(self, spike: tuple[int, int, int]) -> list[ProposalBox]:
        """Process one refractory spike; return the boxes emitted."""
        x, y, t = spike
        cols = self.geometry.cols
        window = self.geometry.window
        boxes: list[ProposalBox] = []
        fired: list[tuple[int, int]] = []
        for i, j in self.geometry.windows_covering(x, y):
            k = i * cols + j
            acc = add_conductance(self.conductances[k], self.w_ff, t)
            self.conductances[k] = acc
            state, spiked = apply_drive(
                self.states[k], self.params, acc.g_sum * self.dv_scale, t
            )
            self.states[k] = state
            if spiked:
                y0, x0 = self.geometry.window_origin(i, j)
                boxes.append(ProposalBox(x0, y0, x0 + window, y0 + window, t))
                fired.append((i, j))
        if self.lateral_enabled:
            for i, j in fired:
                self.apply_lateral(i, j, t)
        return boxes

    def apply_lateral(self, i: int, j: int, t: int) -> None:
        """Excite the in-bounds 4-neighborhood of a window that just fired."""
        rows, cols = self.geometry.rows, self.geometry.cols
        for ni, nj in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
            if 0 <= ni < rows and 0 <= nj < cols:
                k = ni * cols + nj
                self.conductances[k] = add_conductance(self.conductances[k], self.w_lat, t)


def boxes_touch(a: ProposalBox, b: ProposalBox) -> bool:
    """True when two half-open boxes overlap or share an edge or corner."""
    return a.x0 <= b.x1 and b.x0 <= a.x1 and a.y0 <= b.y1 and b.y0 <= a.y1


def _merge_pass(boxes: list[ProposalBox]) -> tuple[list[ProposalBox], bool]:
    n = len(boxes)
    seen = [False] * n
    out: list[ProposalBox] = []
    changed = False
    for s in range(n):
        if seen[s]:
            continue
        seen[s] = True
        comp = [s]
        stack = [s]
        while stack:
            u = stack.pop()
            for v in range(n):
                if not seen[v] and boxes_touch(boxes[u], boxes[v]):
                    seen[v] = True
                    stack.append(v)
                    comp.append(v)
        if len(comp) > 1:
            changed = True
        members = [boxes[c] for c in comp]
        out.append(
            ProposalBox(
                min(m.x0 for m in members),
                min(m.y0 for m in members),
                max(m.x1 for m in members),
                max(m.y1 for m in members),
                max(m.t for m in members),
            )
        )
    return out, changed


def cluster_frame(boxes: list[ProposalBox]) -> list[ProposalBox]:
    """Merge every connected group of touching boxes into its bounding box.

    Bounding boxes of separate groups can themselves touch, so merging
    repeats until no two output boxes touch. A merged box carries the latest
    timestamp among its members. Output is ordered by (y0, x0, x1, y1).
    """
    merged = list(boxes)
    changed = len(merged) > 1
    while changed:
        merged, changed = _merge_pass(merged)
    merged.sort(key=lambda b: (b.y0, b.x0, b.x1, b.y1))
    return merged


def frame_of(t: int, fps: int) -> int:
    """Frame index of a timestamp under fixed 1/fps windows aligned to t=0."""
    return (t * fps) // MICROS_PER_SECOND


def frame_start(f: int, fps: int) -> int:
    """First timestamp belonging to frame f (exact rational boundary)."""
    return -((-f * MICROS_PER_SECOND) // fps)


@dataclass
class PipelineConfig:
    """Tunable parameters of the full pipeline.

    Time constants and refractory period are in microseconds; rates are
    dimensionless voltage/conductance units. The shipped defaults are tuning
    defaults for desk-scale synthetic scenes: the refractory layer passes
    one event per pixel per 30 ms, the window layer threshold is the knob
    swept in experiments.
    """

    sensor_height: int = 180
    sensor_width: int = 240
    window: int = 16
    stride: int = 12
    fps: int = 30
    duration_s: float | None = None
    # refractory layer
    ref_tau_m_us: float = 10_000.0
    ref_v_rest: float = 0.0
    ref_v_reset: float = 0.0
    ref_v_th: float = 1.0
    ref_refractory_us: int = 30_000
    ref_w_in: float = 1.0
    # window (convolution) layer
    conv_tau_m_us: float = 20_000.0
    conv_tau_g_us: float = 5_000.0
    conv_v_rest: float = 0.0
    conv_v_reset: float = 0.0
    conv_v_th: float = 2.4
    conv_w_ff: float = 1.0
    conv_dv_scale: float = 0.1
    lateral: bool = False
    conv_w_lat: float = 0.5

    def sensor_geometry(self) -> SensorGeometry:
        return SensorGeometry(self.sensor_height, self.sensor_width)

    def conv_geometry(self) -> ConvGeometry:
        return ConvGeometry(self.sensor_geometry(), self.window, self.stride)

    def refractory_params(self) -> NeuronParams:
        return NeuronParams(
            tau_m=self.ref_tau_m_us,
            v_rest=self.ref_v_rest,
            v_th=self.ref_v_th,
            v_reset=self.ref_v_reset,
            t_refractory=self.ref_refractory_us,
        )

    def conv_params(self) -> NeuronParams:
        return NeuronParams(
            tau_m=self.conv_tau_m_us,
            v_rest=self.conv_v_rest,
            v_th=self.conv_v_th,
            v_reset=self.conv_v_reset,
            t_refractory=0,
        )

    def build_refractory_layer(self) -> RefractoryLayer:
        return RefractoryLayer(self.sensor_geometry(), self.refractory_params(), self.ref_w_in)

    def build_conv_layer(self) -> ConvLayer:
        return ConvLayer(
            self.conv_geometry(),
            self.conv_params(),
            self.conv_tau_g_us,
            self.conv_w_ff,
            self.conv_dv_scale,
            self.lateral,
            self.conv_w_lat,
        )

    def validate(self) -> None:
        if self.fps <= 0:
            raise ConfigError(f"fps must be positive, got {self.fps}")
        if self.duration_s is not None and self.duration_s < 0:
            raise ConfigError(f"duration must be >= 0, got {self.duration_s}")
        self.conv_geometry()
        self.refractory_params()
        self.conv_params()

    def with_conv_threshold(self, v_th: float) -> "PipelineConfig":
        return replace(self, conv_v_th=v_th)

    def duration_us(self) -> int | None:
        if self.duration_s is None:
            return None
        return int(round(self.duration_s * MICROS_PER_SECOND))


def run_pipeline(
    events: Iterable[DvsEvent], config: PipelineConfig
) -> tuple[list[FrameProposals], RunCounters]:
    """Drive all layers event by event and cluster candidates per frame.

    Frames cover max(configured duration, last event time) with fixed
    1/fps windows aligned to t=0. Raises StreamOrderError naming the
    offending index on an unordered stream.
    """
    config.validate()
    refractory = config.build_refractory_layer()
    conv = config.build_conv_layer()
    counters = RunCounters()
    bins: dict[int, list[ProposalBox]] = {}
    fps = config.fps
    spike_budget = refractory_spike_ops(config.window)
    touch_cost = window_update_ops(config.window)
    geometry = refractory.geometry
    t_last: int | None = None

    for index, ev in enumerate(events):
        if t_last is not None and ev.t < t_last:
            raise StreamOrderError(
                index, f"event {index} at t={ev.t} breaks order (previous t={t_last})"
            )
        if not geometry.contains(ev.x, ev.y):
            raise ValueError(
                f"event {index} at ({ev.x}, {ev.y}) outside sensor "
                f"{geometry.height}x{geometry.width}"
            )
        t_last = ev.t
        counters.k_inp += 1
        counters.ops_refractory += OPS_PER_INPUT_EVENT
        spike = refractory.step(ev)
        if spike is None:
            continue
        counters.k_ref += 1
        counters.ops_conv += spike_budget
        counters.ops_conv_touched += touch_cost * len(
            conv.geometry.windows_covering(spike[0], spike[1])
        )
        boxes = conv.step(spike)
        if boxes:
            counters.k_conv += len(boxes)
            for box in boxes:
                bins.setdefault(frame_of(box.t, fps), []).append(box)

    covered_us = 0 if t_last is None else t_last + 1
    duration_us = config.duration_us()
    if duration_us is not None:
        covered_us = max(covered_us, duration_us)
    frame_count = -((-covered_us * fps) // MICROS_PER_SECOND)

    frames: list[FrameProposals] = []
    for f in range(frame_count):
        raw = bins.get(f, [])
        r = len(raw)
        counters.proposals_per_frame.append(r)
        counters.ops_cluster += r * (r - 1)
        frames.append(
            FrameProposals(f, frame_start(f, fps), frame_start(f + 1, fps), cluster_frame(raw))
        )
    return frames, counters
