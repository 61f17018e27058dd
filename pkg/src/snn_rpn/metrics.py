"""Proposal quality metrics: overlap ratios, matching, precision/recall.

Boxes use half-open integer pixel coordinates throughout, so areas and
intersections are exact integers. Any object carrying x0/y0/x1/y1
attributes is accepted where a box is expected.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .pipeline import FrameProposals, PipelineConfig, run_pipeline

METRICS = ("iou", "fs")


@dataclass(slots=True, frozen=True)
class GroundTruthBox:
    """Annotated object extent in one frame."""

    frame_index: int
    x0: int
    y0: int
    x1: int
    y1: int
    object_id: str | None = None

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(
                f"degenerate ground-truth box ({self.x0},{self.y0},{self.x1},{self.y1})"
            )


@dataclass
class MatchCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def add(self, other: "MatchCounts") -> None:
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn


@dataclass(slots=True, frozen=True)
class PrCurvePoint:
    """One operating point of a threshold sweep; precision/recall are None
    when their denominator is zero."""

    threshold: float
    precision: float | None
    recall: float | None


def _area(box) -> int:
    a = (box.x1 - box.x0) * (box.y1 - box.y0)
    if a <= 0:
        raise ValueError(f"degenerate box ({box.x0},{box.y0},{box.x1},{box.y1})")
    return a


def _intersection(a, b) -> int:
    w = min(a.x1, b.x1) - max(a.x0, b.x0)
    h = min(a.y1, b.y1) - max(a.y0, b.y0)
    if w <= 0 or h <= 0:
        return 0
    return w * h


def iou(a, b) -> float:
    """Intersection over union of two boxes; 0 when disjoint."""
    area_a = _area(a)
    area_b = _area(b)
    inter = _intersection(a, b)
    return inter / (area_a + area_b - inter)


def fitness(proposal, gt) -> float:
    """Intersection over ground-truth area; rewards covering proposals."""
    _area(proposal)
    return _intersection(proposal, gt) / _area(gt)


def _score(metric: str):
    if metric == "iou":
        return iou
    if metric == "fs":
        return fitness
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


def match_frame(
    proposals: Sequence, gts: Sequence, threshold: float, metric: str = "iou"
) -> MatchCounts:
    """Greedy one-to-one matching in descending score order.

    Pairs scoring at least ``threshold`` become true positives; leftover
    proposals are false positives, leftover ground truths false negatives.
    Ties break on (proposal index, gt index).
    """
    if not (0 < threshold <= 1):
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    score = _score(metric)
    pairs = []
    for pi, p in enumerate(proposals):
        for gi, g in enumerate(gts):
            s = score(p, g)
            if s >= threshold:
                pairs.append((-s, pi, gi))
    pairs.sort()
    p_used = [False] * len(proposals)
    g_used = [False] * len(gts)
    tp = 0
    for _, pi, gi in pairs:
        if p_used[pi] or g_used[gi]:
            continue
        p_used[pi] = True
        g_used[gi] = True
        tp += 1
    return MatchCounts(tp=tp, fp=len(proposals) - tp, fn=len(gts) - tp)


def pr_point(counts: MatchCounts) -> tuple[float | None, float | None]:
    """(precision, recall); a component is None when undefined."""
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp > 0 else None
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn > 0 else None
    return precision, recall


def group_by_frame(boxes: Iterable) -> dict[int, list]:
    grouped: dict[int, list] = {}
    for b in boxes:
        grouped.setdefault(b.frame_index, []).append(b)
    return grouped


def match_frames(
    frames: Sequence[FrameProposals],
    gt: Iterable[GroundTruthBox],
    threshold: float,
    metric: str = "iou",
) -> MatchCounts:
    """Accumulate greedy matches over every frame of a run."""
    gt_by_frame = gt if isinstance(gt, dict) else group_by_frame(gt)
    total = MatchCounts()
    indices = {f.frame_index for f in frames} | set(gt_by_frame)
    proposals_by_frame = {f.frame_index: f.boxes for f in frames}
    for f in sorted(indices):
        total.add(
            match_frame(
                proposals_by_frame.get(f, []), gt_by_frame.get(f, []), threshold, metric
            )
        )
    return total


def sweep_thresholds(
    events: Sequence,
    gt: Iterable[GroundTruthBox],
    config: PipelineConfig,
    thresholds: Sequence[float],
    metric: str = "iou",
    overlap: float = 0.3,
) -> list[PrCurvePoint]:
    """One full pipeline run per window-neuron threshold, same stream reused.

    A failing run is reported on stderr and skipped; remaining thresholds
    still execute. Points come back ordered by threshold.
    """
    if len(thresholds) == 0:
        raise ValueError("thresholds must be non-empty")
    _score(metric)
    gt_by_frame = group_by_frame(gt)
    points: list[PrCurvePoint] = []
    for v_th in sorted(thresholds):
        try:
            frames, _ = run_pipeline(events, replace(config, conv_v_th=v_th))
        except Exception as exc:  # keep sweeping the other thresholds
            print(f"sweep: threshold {v_th} failed: {exc}", file=sys.stderr)
            continue
        counts = match_frames(frames, gt_by_frame, overlap, metric)
        precision, recall = pr_point(counts)
        points.append(PrCurvePoint(v_th, precision, recall))
    return points
