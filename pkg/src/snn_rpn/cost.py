"""Arithmetic cost and memory model plus measured-run reconciliation.

The operation accounting is per event: updating one pixel neuron costs 5
operations; one surviving spike updates up to four window neurons at
6*W*W + 4 operations each (5*W*W conductance updates, W*W - 1 additions for
the total current, 5 for the membrane), for a per-spike budget of
24*W*W + 16; clustering r boxes in a frame costs r*(r-1) comparisons.

The memory model stores two b-bit variables per pixel neuron, two per pixel
synapse, two per window neuron, and two per buffered proposal:

    bits = 2*H*L*b + 2*H*L*b + 2*M*N*b + 2*r*b

``state_bits_actual`` reports this artifact's real per-variable footprint
alongside, since the model above under-counts the box buffer and pools
synapse state differently than the accounting assumes.

Alpha (the fraction of events surviving the refractory layer) is carried as
an exact rational so totals reconcile with instrumented counters to the
integer. Reports round to 3 significant digits.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Union

Rational = Union[int, Fraction]

OPS_PER_INPUT_EVENT = 5
MAX_WINDOWS_PER_PIXEL = 4


def window_update_ops(window: int) -> int:
    """Operations to update one window neuron on one incoming spike."""
    return 6 * window * window + 4


def refractory_spike_ops(window: int) -> int:
    """Budgeted operations per surviving spike (four covering windows)."""
    return MAX_WINDOWS_PER_PIXEL * window_update_ops(window)


def cluster_ops(r: int) -> int:
    """Box-location comparisons to cluster r proposals of one frame."""
    return r * (r - 1)


def as_rational(value) -> Fraction:
    """Exact Fraction from int, Fraction, or decimal string/float."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, float):
        # treat the printed decimal as the intended value, not the binary one
        return Fraction(repr(value))
    raise TypeError(f"cannot interpret {value!r} as a rational")


@dataclass(frozen=True)
class CostInputs:
    """Symbols of the analytic model."""

    k_inp: int
    alpha: Fraction
    w: int
    f: int
    r: int
    h: int
    l: int
    m: int
    n: int
    b: int

    def __post_init__(self):
        if not (0 <= self.alpha <= 1):
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        for name in ("k_inp", "w", "f", "r", "h", "l", "m", "n", "b"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class CostReport:
    """Evaluated model: totals, per-event rate, and per-layer breakdown."""

    c_total: Fraction
    b_total: int
    per_event: Fraction
    breakdown: dict[str, Fraction]


def per_event_ops(alpha: Rational, window: int) -> Fraction:
    """Operations per input event, clustering excluded."""
    alpha = as_rational(alpha)
    return OPS_PER_INPUT_EVENT + alpha * refractory_spike_ops(window)


def ops_total(inputs: CostInputs) -> Fraction:
    """Total operation count for a whole recording."""
    return (
        Fraction(inputs.k_inp * OPS_PER_INPUT_EVENT)
        + inputs.alpha * inputs.k_inp * refractory_spike_ops(inputs.w)
        + inputs.f * cluster_ops(inputs.r)
    )


def mem_total(inputs: CostInputs) -> int:
    """Total model memory in bits (refractory term appears twice by design)."""
    return (
        2 * inputs.h * inputs.l * inputs.b
        + 2 * inputs.h * inputs.l * inputs.b
        + 2 * inputs.m * inputs.n * inputs.b
        + 2 * inputs.r * inputs.b
    )


def state_bits_actual(h: int, l: int, m: int, n: int, r: int, b: int) -> int:
    """Bits this artifact actually keeps per run at b bits per variable.

    Pixel neurons hold (v, t_update, t_spike); window neurons add a pooled
    (g, t_g) pair to those three; a buffered box holds 4 corners plus a
    timestamp.
    """
    return 3 * h * l * b + 5 * m * n * b + 5 * r * b


def make_report(inputs: CostInputs) -> CostReport:
    breakdown = {
        "refractory": Fraction(inputs.k_inp * OPS_PER_INPUT_EVENT),
        "convolution": inputs.alpha * inputs.k_inp * refractory_spike_ops(inputs.w),
        "clustering": Fraction(inputs.f * cluster_ops(inputs.r)),
    }
    return CostReport(
        c_total=sum(breakdown.values(), Fraction(0)),
        b_total=mem_total(inputs),
        per_event=per_event_ops(inputs.alpha, inputs.w),
        breakdown=breakdown,
    )


@dataclass(frozen=True)
class MeasuredRun:
    """Ratios and tallies extracted from a finished run's counters."""

    alpha: Fraction
    alpha_defined: bool
    r_mean: Fraction
    k_inp: int
    k_ref: int
    frames: int
    ops: dict[str, int]


def measure(counters) -> MeasuredRun:
    """Summarize RunCounters: survival fraction, mean box rate, op tallies."""
    k_inp = counters.k_inp
    k_ref = counters.k_ref
    defined = k_inp > 0
    alpha = Fraction(k_ref, k_inp) if defined else Fraction(0)
    per_frame = counters.proposals_per_frame
    r_mean = Fraction(sum(per_frame), len(per_frame)) if per_frame else Fraction(0)
    return MeasuredRun(
        alpha=alpha,
        alpha_defined=defined,
        r_mean=r_mean,
        k_inp=k_inp,
        k_ref=k_ref,
        frames=len(per_frame),
        ops={
            "refractory": counters.ops_refractory,
            "convolution": counters.ops_conv,
            "clustering": counters.ops_cluster,
            "convolution_touched": counters.ops_conv_touched,
        },
    )


def model_from_counters(counters, window: int) -> dict[str, int]:
    """Per-frame-exact model evaluation at the measured counter values.

    The clustering term sums r_t*(r_t - 1) over actual frames instead of
    using a mean rate, so the result must equal the instrumented counters
    exactly on any run.
    """
    return {
        "refractory": counters.k_inp * OPS_PER_INPUT_EVENT,
        "convolution": counters.k_ref * refractory_spike_ops(window),
        "clustering": sum(cluster_ops(r) for r in counters.proposals_per_frame),
    }


def sig3(value) -> float:
    """Round to 3 significant digits for display."""
    x = float(value)
    if x == 0:
        return 0.0
    return float(f"{x:.3g}")


def format_number(value: Rational) -> str:
    frac = as_rational(value)
    if frac.denominator == 1:
        return str(frac.numerator)
    return f"{sig3(frac):g}"


def format_report(
    report: CostReport, inputs: CostInputs, measured: MeasuredRun | None = None
) -> str:
    """Human-readable cost/memory report."""
    lines = [
        "operation model",
        f"  ops/event (clustering excluded): {format_number(report.per_event)}"
        f"  ({sig3(report.per_event / 1000):g} Kops/event)",
        f"  refractory total:  {format_number(report.breakdown['refractory'])}",
        f"  convolution total: {format_number(report.breakdown['convolution'])}",
        f"  clustering total:  {format_number(report.breakdown['clustering'])}",
        f"  grand total:       {format_number(report.c_total)}",
        "memory model",
        f"  total bits: {report.b_total}  ({sig3(report.b_total / 1e6):g} Mbits)",
        f"  actual state bits: "
        f"{state_bits_actual(inputs.h, inputs.l, inputs.m, inputs.n, inputs.r, inputs.b)}",
    ]
    if measured is not None:
        alpha_txt = (
            f"{sig3(measured.alpha):g}" if measured.alpha_defined else "undefined (no input)"
        )
        lines += [
            "measured",
            f"  events in: {measured.k_inp}  surviving: {measured.k_ref}  alpha: {alpha_txt}",
            f"  frames: {measured.frames}  mean proposals/frame: {sig3(measured.r_mean):g}",
            f"  ops refractory:  {measured.ops['refractory']}",
            f"  ops convolution: {measured.ops['convolution']}"
            f"  (windows actually touched: {measured.ops['convolution_touched']})",
            f"  ops clustering:  {measured.ops['clustering']}",
        ]
    return "\n".join(lines)


def report_csv_rows(report: CostReport, inputs: CostInputs) -> list[tuple[str, str]]:
    rows = [
        ("ops_per_event", format_number(report.per_event)),
        ("ops_refractory", format_number(report.breakdown["refractory"])),
        ("ops_convolution", format_number(report.breakdown["convolution"])),
        ("ops_clustering", format_number(report.breakdown["clustering"])),
        ("ops_total", format_number(report.c_total)),
        ("memory_bits", str(report.b_total)),
        (
            "state_bits_actual",
            str(state_bits_actual(inputs.h, inputs.l, inputs.m, inputs.n, inputs.r, inputs.b)),
        ),
    ]
    return rows


# Baseline tracker accounting: per surviving spike every live cluster is
# decayed and distance-checked, the winning cluster update or a fresh seed
# costs a few more; per frame emission re-checks every cluster.
MS_OPS_PER_CLUSTER_SCAN = 11
MS_OPS_PER_ASSIGN = 8
MS_OPS_PER_SEED = 6
MS_OPS_PER_EMIT_CLUSTER = 6
MS_VARS_PER_CLUSTER = 4


def ms_ops_total(counters) -> int:
    """Instrumented operation total of one baseline tracker run."""
    return (
        counters.k_inp * OPS_PER_INPUT_EVENT
        + counters.cluster_scans * MS_OPS_PER_CLUSTER_SCAN
        + counters.assigned * MS_OPS_PER_ASSIGN
        + counters.seeded * MS_OPS_PER_SEED
        + counters.emit_scans * MS_OPS_PER_EMIT_CLUSTER
    )


def ms_mem_total(h: int, l: int, max_clusters: int, b: int) -> int:
    """Baseline memory: refractory layer plus the cluster table."""
    return 2 * h * l * b + MS_VARS_PER_CLUSTER * max_clusters * b
