"""Caption consolidation, causal stream replay and emission-log auditing."""

from __future__ import annotations

import json
import math
import queue
import threading
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np

from .datamodel import (
    PredictionSet,
    SegmentGrid,
    TimedCaption,
    VideoAnnotation,
    group_by_segment,
)
from .temporal import overlaps, refs_for_segment, split_annotations
from .textscore import normalize as _normalize

normalize = lru_cache(maxsize=65536)(_normalize)

CAUSALITY = "CAUSALITY"
IRREVERSIBILITY = "IRREVERSIBILITY"
TIMELINESS = "TIMELINESS"

#: Violations that fail an audit; TIMELINESS is advisory only.
BLOCKING = frozenset({CAUSALITY, IRREVERSIBILITY})


class LogStructureError(ValueError):
    """Emission log is out of order or inconsistent with its grid."""


def _order_key(ev: TimedCaption):
    return (ev.start_s, ev.end_s, ev.sentence, -(ev.confidence if ev.confidence is not None else 1.0))


def overlap_groups(preds: Sequence[TimedCaption]) -> list[list[TimedCaption]]:
    """Connected components of the pairwise positive-overlap graph."""
    items = sorted(preds, key=_order_key)
    groups: list[list[TimedCaption]] = []
    reach = -math.inf
    # after sorting by start, a component ends where the next start is at or
    # past the running max end
    for ev in items:
        if groups and ev.start_s < reach:
            groups[-1].append(ev)
            reach = max(reach, ev.end_s)
        else:
            groups.append([ev])
            reach = ev.end_s
    return groups


def _conf(ev: TimedCaption) -> float:
    return 1.0 if ev.confidence is None else ev.confidence


def vote(group: Sequence[TimedCaption]) -> TimedCaption:
    """Most frequent caption of one overlap group, spanning its own votes.

    Ties: higher max confidence, then earlier earliest start, then the
    lexicographically smaller normalized sentence.
    """
    if len(group) == 1 and group[0].confidence is not None:
        return group[0]
    ballots: dict[str, list[TimedCaption]] = {}
    for ev in group:
        ballots.setdefault(normalize(ev.sentence), []).append(ev)

    def rank(item):
        text, evs = item
        return (-len(evs), -max(_conf(e) for e in evs), min(e.start_s for e in evs), text)

    _, winners = min(ballots.items(), key=rank)
    if len(winners) == 1 and winners[0].confidence is not None:
        return winners[0]
    best = min(winners, key=lambda e: (-_conf(e), e.start_s, e.end_s, e.sentence))
    return TimedCaption(
        min(e.start_s for e in winners),
        max(e.end_s for e in winners),
        best.sentence,
        max(_conf(e) for e in winners),
    )


def consolidate(preds: Iterable[TimedCaption]) -> list[TimedCaption]:
    """Merge temporally overlapping predictions by frequency voting."""
    out = [vote(g) for g in overlap_groups(list(preds))]
    return sorted(out, key=_order_key)


@dataclass(frozen=True)
class Emission:
    n: int
    t: float
    tuples: tuple[TimedCaption, ...] = ()

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "t": round(self.t, 6),
            "tuples": [
                {"s": round(c.start_s, 6), "e": round(c.end_s, 6), "sentence": c.sentence,
                 "score": round(_conf(c), 6)}
                for c in self.tuples
            ],
        }


@dataclass(frozen=True)
class EmissionLog:
    emissions: tuple[Emission, ...] = ()
    video_id: str = ""

    def __iter__(self):
        return iter(self.emissions)

    def __len__(self):
        return len(self.emissions)

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(e.as_dict(), sort_keys=True, ensure_ascii=False) + "\n"
            for e in self.emissions
        )

    @classmethod
    def from_jsonl(cls, text: str, video_id: str = "") -> "EmissionLog":
        emissions = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                tuples = tuple(
                    TimedCaption(float(t["s"]), float(t["e"]), t["sentence"], t.get("score", 1.0))
                    for t in rec["tuples"]
                )
                emissions.append(Emission(int(rec["n"]), float(rec["t"]), tuples))
            except (KeyError, TypeError, ValueError) as exc:
                raise LogStructureError(f"line {lineno}: {exc}") from exc
        return cls(tuple(emissions), video_id)


@dataclass(frozen=True)
class ReplayConfig:
    grid: SegmentGrid
    memory: int = 1

    def __post_init__(self):
        if isinstance(self.memory, bool) or int(self.memory) != self.memory or self.memory < 1:
            raise ValueError("memory must be a positive integer")


def segment_batches(
    preds: PredictionSet, grid: SegmentGrid, last: int | None = None
) -> Iterator[tuple[int, list[TimedCaption]]]:
    """Producer side: ``(n, predictions emitted in slot n)`` for n = 1, 2, ..."""
    buckets = group_by_segment(preds, grid)
    last = max(max(buckets, default=0), last or 0)
    for n in range(1, last + 1):
        yield n, buckets.get(n, [])


_DONE = object()


def _threaded(batches: Iterator, maxsize: int) -> Iterator:
    # Bounded producer/consumer hand-off; blocking put() means nothing is
    # dropped and FIFO order is kept.
    buf: queue.Queue = queue.Queue(maxsize=maxsize)
    errors: list[BaseException] = []

    def produce():
        try:
            for item in batches:
                buf.put(item)
        except BaseException as exc:  # surfaced in the consumer
            errors.append(exc)
        finally:
            buf.put(_DONE)

    worker = threading.Thread(target=produce, daemon=True)
    worker.start()
    while True:
        item = buf.get()
        if item is _DONE:
            break
        yield item
    worker.join()
    if errors:
        raise errors[0]


def _content(ev: TimedCaption) -> tuple[str, float]:
    return normalize(ev.sentence), round(_conf(ev), 6)


def _key(ev: TimedCaption) -> tuple[float, float]:
    # same precision as the serialized log
    return round(ev.start_s, 6), round(ev.end_s, 6)


def replay(
    preds: PredictionSet,
    config: ReplayConfig,
    consolidate_window: bool = False,
    *,
    last_segment: int | None = None,
    threaded: bool = False,
    buffer_size: int = 4,
) -> EmissionLog:
    """Replay a prediction file as a live stream with memory ``M``.

    At step ``n`` the working set holds the predictions emitted in slots
    ``n-M+1 .. n``; it is optionally consolidated, clamped to end by
    ``t_prime(n)`` and recorded. An interval's content is fixed the first
    time it is emitted: later tuples that would give an emitted interval a
    different caption or confidence are withheld.
    """
    grid, memory = config.grid, config.memory
    batches: Iterator = segment_batches(preds, grid, last_segment)
    if threaded:
        batches = _threaded(batches, buffer_size)
    window: list[tuple[int, list[TimedCaption]]] = []
    committed: dict[tuple[float, float], set] = {}
    emissions = []
    for n, batch in batches:
        window.append((n, batch))
        window = [(k, b) for k, b in window if k > n - memory]
        working = [ev for _, b in window for ev in b]
        if consolidate_window:
            working = consolidate(working)
        t_n = grid.t_prime(n)
        emissions.append(Emission(n, t_n, tuple(emit_step(working, t_n, committed))))
    return EmissionLog(tuple(emissions), preds.video_id)


def clamp_causal(ev: TimedCaption, t_n: float) -> TimedCaption | None:
    """Cut ``ev`` to end at ``t_n``; None if it starts at or after ``t_n``."""
    if ev.end_s <= t_n:
        return ev
    if ev.start_s >= t_n:
        return None
    return ev.with_interval(ev.start_s, t_n)


def emit_step(working: Sequence[TimedCaption], t_n: float, committed: dict) -> list[TimedCaption]:
    """Tuples emitted at time ``t_n``; updates ``committed`` in place."""
    out = []
    fresh: dict[tuple[float, float], set] = {}
    for ev in sorted(working, key=_order_key):
        ev = clamp_causal(ev, t_n)
        if ev is None:
            continue
        key = _key(ev)
        if key in committed and _content(ev) not in committed[key]:
            continue
        fresh.setdefault(key, set()).add(_content(ev))
        out.append(ev)
    for key, contents in fresh.items():
        committed.setdefault(key, contents)
    return out


@dataclass(frozen=True)
class Violation:
    kind: str
    step: int
    tuple: TimedCaption | None
    detail: str = ""

    def as_dict(self) -> dict:
        tup = None
        if self.tuple is not None:
            tup = {"s": round(self.tuple.start_s, 6), "e": round(self.tuple.end_s, 6),
                   "sentence": self.tuple.sentence, "score": round(_conf(self.tuple), 6)}
        return {"kind": self.kind, "step": self.step, "tuple": tup, "detail": self.detail}


def audit_causality(
    log: EmissionLog,
    grid: SegmentGrid,
    ann: VideoAnnotation | None = None,
) -> list[Violation]:
    """Check a log for causality and irreversibility breaches.

    With ground truth, slots that overlap an annotated event but emitted
    nothing are reported as advisory TIMELINESS entries.
    """
    prev = 0
    for em in log:
        if em.n <= prev:
            raise LogStructureError(f"segment index {em.n} after {prev}; log must be strictly increasing")
        if not math.isclose(em.t, grid.t_prime(em.n), rel_tol=1e-9, abs_tol=1e-6):
            raise LogStructureError(f"step {em.n}: emission time {em.t} != {grid.t_prime(em.n)}")
        prev = em.n

    found: list[Violation] = []
    committed: dict[tuple[float, float], tuple[int, set]] = {}
    for em in log:
        t_n = grid.t_prime(em.n)
        fresh: dict[tuple[float, float], set] = {}
        for ev in em.tuples:
            if ev.end_s > t_n + 1e-6:
                found.append(Violation(CAUSALITY, em.n, ev, f"ends at {ev.end_s:g}s after emission time {t_n:g}s"))
            key = _key(ev)
            if key in committed and _content(ev) not in committed[key][1]:
                first = committed[key][0]
                msg = f"interval [{key[0]:g}, {key[1]:g}] was emitted at step {first} with different content"
                found.append(Violation(IRREVERSIBILITY, em.n, ev, msg))
            fresh.setdefault(key, set()).add(_content(ev))
        for key, contents in fresh.items():
            committed.setdefault(key, (em.n, contents))

    if ann is not None:
        emitted = {em.n for em in log if em.tuples}
        for n in range(1, grid.num_segments(ann.duration_s) + 1):
            if n not in emitted and refs_for_segment(ann, grid, n):
                found.append(Violation(TIMELINESS, n, None, "annotated activity but nothing emitted"))
    return found


def blocking(violations: Iterable[Violation]) -> list[Violation]:
    return [v for v in violations if v.kind in BLOCKING]


DEFAULT_DISTRACTORS = (
    "a man is talking to the camera",
    "a woman walks across the room",
    "people are dancing on a stage",
    "a dog runs through the grass",
    "a person plays the guitar",
    "a child rides a bicycle down the street",
    "the crowd cheers loudly",
    "a chef chops vegetables in a kitchen",
)


def synth_stream(
    ann: VideoAnnotation,
    grid: SegmentGrid,
    quality: float = 1.0,
    fp_rate: float = 0.0,
    seed: int = 0,
    vocabulary: Sequence[str] | None = None,
) -> PredictionSet:
    """Synthetic live predictions for testing metrics.

    Every grid-split ground-truth chunk is predicted with its true sentence
    with probability ``quality``, otherwise with a sentence from
    ``vocabulary`` (sentences of other videos). Each slot also gets
    ``Poisson(fp_rate)`` distractors placed where no annotation lies.
    """
    if not 0.0 <= quality <= 1.0:
        raise ValueError("quality must be in [0, 1]")
    if fp_rate < 0:
        raise ValueError("fp_rate must be non-negative")
    rng = np.random.default_rng(seed)
    pool = list(vocabulary) if vocabulary else list(DEFAULT_DISTRACTORS)

    def noisy_conf(center: float) -> float:
        return round(float(np.clip(center + rng.normal(0.0, 0.1), 0.0, 1.0)), 6)

    events = []
    for chunk in split_annotations(ann, grid).events:
        if rng.random() < quality:
            sentence = chunk.sentence
        else:
            wrong = [s for s in pool if normalize(s) != normalize(chunk.sentence)]
            sentence = wrong[int(rng.integers(len(wrong)))] if wrong else "something else happens"
        events.append(TimedCaption(chunk.start_s, chunk.end_s, sentence, noisy_conf(quality)))

    if fp_rate > 0:
        for n in range(1, grid.num_segments(ann.duration_s) + 1):
            k = int(rng.poisson(fp_rate))
            if k == 0:
                continue
            lo, hi = grid.bounds(n)
            hi = min(hi, ann.duration_s)
            gaps = _free_gaps(lo, hi, ann.events)
            if not gaps:
                continue
            for _ in range(k):
                g_lo, g_hi = gaps[int(rng.integers(len(gaps)))]
                a, b = sorted(rng.uniform(g_lo, g_hi, size=2))
                a, b = round(float(a), 6), round(float(b), 6)
                if not (g_lo <= a < b <= g_hi):
                    a, b = g_lo, g_hi
                events.append(TimedCaption(a, b, pool[int(rng.integers(len(pool)))], noisy_conf(1.0 - quality)))
    events.sort(key=_order_key)
    return PredictionSet(ann.video_id, tuple(events))


def _free_gaps(
    lo: float, hi: float, events: Sequence[TimedCaption], min_len: float = 1e-3
) -> list[tuple[float, float]]:
    covered = sorted((max(lo, e.start_s), min(hi, e.end_s)) for e in events if overlaps(e, (lo, hi)))
    gaps = []
    cursor = lo
    for a, b in covered:
        if a - cursor > min_len:
            gaps.append((cursor, a))
        cursor = max(cursor, b)
    if hi - cursor > min_len:
        gaps.append((cursor, hi))
    return gaps
