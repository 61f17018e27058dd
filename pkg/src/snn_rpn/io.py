"""File formats: event CSV, box CSV, flat config files, PPM rendering.

Readers reject malformed input with the offending line number instead of
repairing it; writers produce byte-deterministic output.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Sequence

from .errors import ParseError
from .metrics import GroundTruthBox
from .pipeline import DvsEvent, FrameProposals, ProposalBox, SensorGeometry

EVENT_HEADER = "t_us,x,y,p"
BOX_HEADER = "frame,x0,y0,x1,y1"
GT_HEADER = "frame,x0,y0,x1,y1,id"


def read_events(path, geometry: SensorGeometry) -> Iterator[DvsEvent]:
    """Stream events from a CSV file, validating bounds and ordering."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != EVENT_HEADER:
            raise ParseError(path, 1, f"expected header {EVENT_HEADER!r}, got {header!r}")
        t_prev = -1
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != 4:
                raise ParseError(path, lineno, f"expected 4 fields, got {len(fields)}")
            try:
                t, x, y, p = (int(f) for f in fields)
            except ValueError:
                raise ParseError(path, lineno, f"non-integer field in {line!r}") from None
            if t < 0:
                raise ParseError(path, lineno, f"negative timestamp {t}")
            if t < t_prev:
                raise ParseError(path, lineno, f"timestamp {t} regresses below {t_prev}")
            if not geometry.contains(x, y):
                raise ParseError(
                    path, lineno,
                    f"pixel ({x}, {y}) outside sensor {geometry.height}x{geometry.width}",
                )
            if p not in (0, 1):
                raise ParseError(path, lineno, f"polarity must be 0 or 1, got {p}")
            t_prev = t
            yield DvsEvent(t, x, y, p)


def write_events(path, events: Iterable[DvsEvent]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(EVENT_HEADER + "\n")
        for ev in events:
            fh.write(f"{ev.t},{ev.x},{ev.y},{ev.polarity}\n")


def _parse_box_row(path, lineno: int, line: str, want_id: bool):
    fields = line.split(",")
    if len(fields) not in (5, 6):
        raise ParseError(path, lineno, f"expected 5 or 6 fields, got {len(fields)}")
    try:
        frame, x0, y0, x1, y1 = (int(f) for f in fields[:5])
    except ValueError:
        raise ParseError(path, lineno, f"non-integer field in {line!r}") from None
    if frame < 0:
        raise ParseError(path, lineno, f"negative frame index {frame}")
    if x1 <= x0 or y1 <= y0:
        raise ParseError(path, lineno, f"inverted box ({x0},{y0},{x1},{y1})")
    obj = fields[5] if len(fields) == 6 and fields[5] != "" else None
    return (frame, x0, y0, x1, y1, obj) if want_id else (frame, x0, y0, x1, y1)


def read_gt(path) -> list[GroundTruthBox]:
    """Ground-truth boxes from CSV rows frame,x0,y0,x1,y1[,id]."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith(BOX_HEADER):
            raise ParseError(path, 1, f"expected header starting with {BOX_HEADER!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            frame, x0, y0, x1, y1, obj = _parse_box_row(path, lineno, line, want_id=True)
            out.append(GroundTruthBox(frame, x0, y0, x1, y1, obj))
    return out


def write_gt(path, boxes: Iterable[GroundTruthBox]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(GT_HEADER + "\n")
        for b in boxes:
            obj = b.object_id if b.object_id is not None else ""
            fh.write(f"{b.frame_index},{b.x0},{b.y0},{b.x1},{b.y1},{obj}\n")


def write_proposals(path, frames: Iterable[FrameProposals]) -> None:
    """Clustered proposals as CSV rows frame,x0,y0,x1,y1."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(BOX_HEADER + "\n")
        for frame in frames:
            for b in frame.boxes:
                fh.write(f"{frame.frame_index},{b.x0},{b.y0},{b.x1},{b.y1}\n")


def read_proposals(path) -> dict[int, list[ProposalBox]]:
    """Proposal boxes grouped by frame index (timestamps not stored)."""
    out: dict[int, list[ProposalBox]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith(BOX_HEADER):
            raise ParseError(path, 1, f"expected header starting with {BOX_HEADER!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            frame, x0, y0, x1, y1 = _parse_box_row(path, lineno, line, want_id=False)
            out.setdefault(frame, []).append(ProposalBox(x0, y0, x1, y1, 0))
    return out


def read_config(path) -> dict[str, str]:
    """Flat key = value text file; '#' starts a comment."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(path, lineno, f"expected 'key = value', got {raw.strip()!r}")
            key, value = line.split("=", 1)
            key = key.strip()
            value = value.strip()
            if not key or not value:
                raise ParseError(path, lineno, f"empty key or value in {raw.strip()!r}")
            if key in out:
                raise ParseError(path, lineno, f"duplicate key {key!r}")
            out[key] = value
    return out


BLACK = (0, 0, 0)
WHITE = (255, 255, 255)
RED = (255, 0, 0)
GREEN = (0, 255, 0)


def _outline(pixels: bytearray, width: int, height: int, box, color) -> None:
    x0 = max(0, box.x0)
    y0 = max(0, box.y0)
    x1 = min(width, box.x1)
    y1 = min(height, box.y1)
    if x0 >= x1 or y0 >= y1:
        return
    for x in range(x0, x1):
        for y in (y0, y1 - 1):
            k = 3 * (y * width + x)
            pixels[k : k + 3] = bytes(color)
    for y in range(y0, y1):
        for x in (x0, x1 - 1):
            k = 3 * (y * width + x)
            pixels[k : k + 3] = bytes(color)


def render_frame(
    events: Sequence[DvsEvent],
    boxes: Sequence,
    geometry: SensorGeometry,
    gt_boxes: Sequence = (),
) -> bytes:
    """Binary PPM (P6): events white on black, proposals red, truth green."""
    width, height = geometry.width, geometry.height
    pixels = bytearray(3 * width * height)
    for ev in events:
        k = 3 * (ev.y * width + ev.x)
        pixels[k : k + 3] = bytes(WHITE)
    for b in gt_boxes:
        _outline(pixels, width, height, b, GREEN)
    for b in boxes:
        _outline(pixels, width, height, b, RED)
    header = f"P6\n{width} {height}\n255\n".encode("ascii")
    return header + bytes(pixels)
