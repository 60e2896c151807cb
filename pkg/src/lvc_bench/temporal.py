"""Interval arithmetic, segment lookups and grid-aligned annotation splitting."""

from __future__ import annotations

from typing import NamedTuple

from .datamodel import TIME_RESOLUTION_S, SegmentGrid, TimedCaption, VideoAnnotation


class Interval(NamedTuple):
    start_s: float
    end_s: float

    @classmethod
    def of(cls, item) -> "Interval":
        if isinstance(item, Interval):
            return item
        if isinstance(item, TimedCaption):
            return cls(item.start_s, item.end_s)
        start, end = item
        return cls(float(start), float(end))


def overlap(a, b) -> float:
    """Length of the intersection; 0 when they only touch or are disjoint."""
    a, b = Interval.of(a), Interval.of(b)
    return max(0.0, min(a.end_s, b.end_s) - max(a.start_s, b.start_s))


def overlaps(a, b) -> bool:
    return overlap(a, b) > 0.0


def iou(a, b) -> float:
    """1-D temporal intersection over union."""
    a, b = Interval.of(a), Interval.of(b)
    inter = overlap(a, b)
    if inter <= 0.0:
        return 0.0
    union = (a.end_s - a.start_s) + (b.end_s - b.start_s) - inter
    return min(1.0, inter / union)


def refs_for_segment(ann: VideoAnnotation, grid: SegmentGrid, n: int) -> list[TimedCaption]:
    """Ground-truth events overlapping slot ``n`` with positive measure."""
    if n < 1:
        raise ValueError("segment index is 1-based")
    seg = grid.bounds(n)
    return [ev for ev in ann.events if overlaps(ev, seg)]


def split_event(ev: TimedCaption, grid: SegmentGrid) -> list[TimedCaption]:
    """Pieces of ``ev`` cut at the grid boundaries it crosses.

    Slivers shorter than the output time resolution are dropped (unless the
    event itself is that short) so every chunk survives serialization.
    """
    chunks = []
    first = grid.slot_of(ev.start_s)
    n = first
    while True:
        lo, hi = grid.bounds(n)
        if lo >= ev.end_s:
            break
        start, end = max(lo, ev.start_s), min(hi, ev.end_s)
        if end > start:
            chunks.append(ev.with_interval(start, end))
        n += 1
    kept = [c for c in chunks if c.end_s - c.start_s >= TIME_RESOLUTION_S]
    return kept or chunks


def split_annotations(ann: VideoAnnotation, grid: SegmentGrid) -> VideoAnnotation:
    """Cut every event at the absolute grid boundaries it crosses.

    Each chunk keeps the original sentence. The result is sorted by chunk
    start; ties keep the original event order.
    """
    keyed = []
    for order, ev in enumerate(ann.events):
        for chunk in split_event(ev, grid):
            keyed.append((chunk.start_s, order, chunk))
    keyed.sort(key=lambda item: (item[0], item[1]))
    return VideoAnnotation(ann.video_id, ann.duration_s, tuple(c for _, _, c in keyed))
