"""Domain types and JSON ingestion for annotations and prediction files.

Time is always seconds as Python floats. Frame counts only appear in
:class:`SegmentGrid`, which converts them once.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

logger = logging.getLogger(__name__)

#: Ground-truth events may overshoot the video duration by this much (seconds)
#: before the file is rejected instead of clamped.
CLAMP_SLACK_S = 0.5

DEFAULT_FPS = 30.0

#: Predictions ending later than this multiple of the duration are rejected.
MAX_END_FACTOR = 10.0

#: Slot boundaries are rounded to this many decimals so that n * dt lands on
#: the decimal value a human would write (6 * 1.6 == 9.6, not 9.600000000000001).
BOUNDARY_DIGITS = 9

#: Resolution of emitted timestamps (six fractional digits).
TIME_RESOLUTION_S = 1e-6


class ParseError(ValueError):
    """Raised when an input document cannot be read into typed values."""


class StructuralError(ParseError):
    """Raised when a document parses but its arrays do not line up."""


class RangeError(ValueError):
    """Raised when a timestamp falls outside the accepted range."""


def _has_words(sentence: str) -> bool:
    from .textscore.tokenize import tokenize

    return bool(tokenize(sentence))


@dataclass(frozen=True)
class TimedCaption:
    """One captioned event ``[start_s, end_s]`` with optional confidence."""

    start_s: float
    end_s: float
    sentence: str
    confidence: float | None = None

    def __post_init__(self):
        for name in ("start_s", "end_s"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"{name} must be a finite number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.start_s < 0:
            raise ValueError(f"negative start time {self.start_s}")
        if not self.start_s < self.end_s:
            raise ValueError(
                f"empty interval [{self.start_s}, {self.end_s}] for {self.sentence!r}"
            )
        if not isinstance(self.sentence, str) or not _has_words(self.sentence):
            raise ValueError(f"sentence has no words: {self.sentence!r}")
        if self.confidence is not None:
            conf = float(self.confidence)
            if not 0.0 <= conf <= 1.0:
                raise ValueError(f"confidence {conf} outside [0, 1]")
            object.__setattr__(self, "confidence", conf)

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def with_interval(self, start_s: float, end_s: float) -> "TimedCaption":
        return TimedCaption(start_s, end_s, self.sentence, self.confidence)


@dataclass(frozen=True)
class VideoAnnotation:
    video_id: str
    duration_s: float
    events: tuple[TimedCaption, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if not self.duration_s > 0:
            raise ValueError(f"{self.video_id}: duration must be positive")
        for ev in self.events:
            if ev.end_s > self.duration_s + CLAMP_SLACK_S:
                raise RangeError(
                    f"{self.video_id}: event ends at {ev.end_s} past duration "
                    f"{self.duration_s}"
                )


@dataclass(frozen=True)
class PredictionSet:
    video_id: str
    events: tuple[TimedCaption, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        for ev in self.events:
            if ev.confidence is None:
                raise ValueError(f"{self.video_id}: prediction without confidence")


@dataclass(frozen=True)
class SegmentGrid:
    """Uniform partition of a timeline into ``delta_t_s``-long slots.

    Slot ``n`` (1-based) covers ``[(n-1)*delta_t_s, n*delta_t_s)`` and closes
    at ``t_prime(n) = n*delta_t_s``. Build it from frames (the usual case) or
    pass ``delta_t_s`` directly for corpora that are not 30 fps.
    """

    delta_t_frames: int | None = None
    fps: float = DEFAULT_FPS
    delta_t_s: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not self.fps > 0:
            raise ValueError("fps must be positive")
        if self.delta_t_frames is not None:
            if isinstance(self.delta_t_frames, bool) or int(self.delta_t_frames) != self.delta_t_frames:
                raise ValueError("delta_t_frames must be an integer")
            if self.delta_t_frames <= 0:
                raise ValueError("delta_t_frames must be positive")
            seconds = self.delta_t_frames / self.fps
            if self.delta_t_s is not None and not math.isclose(self.delta_t_s, seconds):
                raise ValueError("delta_t_s disagrees with delta_t_frames / fps")
            object.__setattr__(self, "delta_t_s", seconds)
        elif self.delta_t_s is None:
            raise ValueError("either delta_t_frames or delta_t_s is required")
        if not (self.delta_t_s > 0 and math.isfinite(self.delta_t_s)):
            raise ValueError("delta_t_s must be positive")
        object.__setattr__(self, "delta_t_s", float(self.delta_t_s))

    @classmethod
    def from_frames(cls, frames: int, fps: float = DEFAULT_FPS) -> "SegmentGrid":
        return cls(delta_t_frames=frames, fps=fps)

    @classmethod
    def from_seconds(cls, seconds: float) -> "SegmentGrid":
        return cls(delta_t_s=seconds)

    def start(self, n: int) -> float:
        return self.t_prime(n - 1)

    def t_prime(self, n: int) -> float:
        return round(n * self.delta_t_s, BOUNDARY_DIGITS)

    def bounds(self, n: int) -> tuple[float, float]:
        return self.start(n), self.t_prime(n)

    def slot_of(self, t: float) -> int:
        """Slot whose half-open interval contains instant ``t``."""
        n = int(math.floor(t / self.delta_t_s)) + 1
        # keep consistent with bounds() under float rounding
        while n > 1 and t < self.start(n):
            n -= 1
        while t >= self.t_prime(n):
            n += 1
        return max(n, 1)

    def emission_slot(self, t: float) -> int:
        """First slot whose closing instant is at or after ``t``.

        A caption ending at ``t`` is fully known at ``t`` and is emitted at
        the next boundary ``t_prime(n) >= t``.
        """
        if t <= 0:
            return 1
        n = max(1, int(math.ceil(t / self.delta_t_s)))
        while n > 1 and self.t_prime(n - 1) >= t:
            n -= 1
        while self.t_prime(n) < t:
            n += 1
        return n

    def num_segments(self, duration_s: float) -> int:
        """Number of slots needed to cover ``[0, duration_s]``."""
        if not duration_s > 0:
            raise ValueError("duration must be positive")
        return self.emission_slot(duration_s)


def _load_json(raw: bytes | str) -> Any:
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not UTF-8: {exc}") from exc
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from exc


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{where}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ParseError(f"{where}: non-finite number")
    return float(value)


def _pair(value: Any, where: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ParseError(f"{where}: expected [start, end], got {value!r}")
    return _number(value[0], where), _number(value[1], where)


def parse_ground_truth(raw: bytes | str) -> dict[str, VideoAnnotation]:
    """Read an ActivityNet Captions style ground-truth file.

    Events that overshoot the duration by at most ``CLAMP_SLACK_S`` are
    clamped with a warning; larger overshoots raise :class:`ParseError`.
    """
    doc = _load_json(raw)
    if not isinstance(doc, dict):
        raise ParseError("ground truth must be a JSON object keyed by video id")
    out: dict[str, VideoAnnotation] = {}
    for vid, entry in doc.items():
        if not isinstance(entry, dict):
            raise ParseError(f"{vid}: entry must be an object")
        for key in ("duration", "timestamps", "sentences"):
            if key not in entry:
                raise ParseError(f"{vid}: missing field {key!r}")
        duration = _number(entry["duration"], f"{vid}.duration")
        if duration <= 0:
            raise ParseError(f"{vid}.duration: must be positive")
        stamps, sentences = entry["timestamps"], entry["sentences"]
        if not isinstance(stamps, list) or not isinstance(sentences, list):
            raise ParseError(f"{vid}: timestamps and sentences must be arrays")
        if len(stamps) != len(sentences):
            raise StructuralError(
                f"{vid}: {len(stamps)} timestamps but {len(sentences)} sentences"
            )
        events = []
        for i, (stamp, sentence) in enumerate(zip(stamps, sentences)):
            where = f"{vid}.timestamps[{i}]"
            start, end = _pair(stamp, where)
            if not isinstance(sentence, str):
                raise ParseError(f"{vid}.sentences[{i}]: expected a string")
            if end > duration + CLAMP_SLACK_S:
                raise ParseError(
                    f"{where}: end {end} exceeds duration {duration} by more than "
                    f"{CLAMP_SLACK_S}s"
                )
            if end > duration:
                logger.warning("%s: clamping end %s to duration %s", where, end, duration)
                end = duration
            start = max(start, 0.0)
            try:
                events.append(TimedCaption(start, end, sentence))
            except ValueError as exc:
                raise ParseError(f"{where}: {exc}") from exc
        out[vid] = VideoAnnotation(vid, duration, tuple(events))
    return out


def parse_predictions(raw: bytes | str) -> dict[str, PredictionSet]:
    """Read a dense-captioning submission file (``{"results": {...}}``)."""
    doc = _load_json(raw)
    if not isinstance(doc, dict) or "results" not in doc:
        raise ParseError("prediction file must be an object with a 'results' key")
    results = doc["results"]
    if not isinstance(results, dict):
        raise ParseError("'results' must be an object keyed by video id")
    out: dict[str, PredictionSet] = {}
    for vid, items in results.items():
        if not isinstance(items, list):
            raise ParseError(f"{vid}: predictions must be an array")
        events = []
        for i, item in enumerate(items):
            where = f"results.{vid}[{i}]"
            if not isinstance(item, dict):
                raise ParseError(f"{where}: expected an object")
            if "sentence" not in item or "timestamp" not in item:
                raise ParseError(f"{where}: needs 'sentence' and 'timestamp'")
            start, end = _pair(item["timestamp"], f"{where}.timestamp")
            sentence = item["sentence"]
            if not isinstance(sentence, str):
                raise ParseError(f"{where}.sentence: expected a string")
            if "score" in item and item["score"] is not None:
                conf = _number(item["score"], f"{where}.score")
            else:
                logger.warning("%s: missing score, using 1.0", where)
                conf = 1.0
            try:
                events.append(TimedCaption(start, end, sentence, conf))
            except ValueError as exc:
                raise ParseError(f"{where}: {exc}") from exc
        out[vid] = PredictionSet(vid, tuple(events))
    return out


def _fmt(x: float) -> float:
    # 6 fractional digits, but keep the value a JSON number
    return float(f"{x:.6f}")


def ground_truth_document(annotations: Iterable[VideoAnnotation]) -> dict:
    doc = {}
    for ann in sorted(annotations, key=lambda a: a.video_id):
        doc[ann.video_id] = {
            "duration": _fmt(ann.duration_s),
            "timestamps": [[_fmt(e.start_s), _fmt(e.end_s)] for e in ann.events],
            "sentences": [e.sentence for e in ann.events],
        }
    return doc


def predictions_document(predictions: Iterable[PredictionSet]) -> dict:
    results = {}
    for ps in sorted(predictions, key=lambda p: p.video_id):
        results[ps.video_id] = [
            {
                "sentence": e.sentence,
                "timestamp": [_fmt(e.start_s), _fmt(e.end_s)],
                "score": _fmt(e.confidence if e.confidence is not None else 1.0),
            }
            for e in ps.events
        ]
    return {"results": results}


def dump_json(doc: Any) -> bytes:
    """Byte-stable JSON: sorted keys, fixed separators, trailing newline."""
    text = json.dumps(doc, sort_keys=True, ensure_ascii=False, indent=1)
    return (text + "\n").encode("utf-8")


def serialize_ground_truth(annotations: Mapping[str, VideoAnnotation] | Iterable[VideoAnnotation]) -> bytes:
    values = annotations.values() if isinstance(annotations, Mapping) else annotations
    return dump_json(ground_truth_document(values))


def serialize_predictions(predictions: Mapping[str, PredictionSet] | Iterable[PredictionSet]) -> bytes:
    values = predictions.values() if isinstance(predictions, Mapping) else predictions
    return dump_json(predictions_document(values))


def group_by_segment(
    preds: PredictionSet, grid: SegmentGrid, duration_s: float | None = None
) -> dict[int, list[TimedCaption]]:
    """Bucket predictions by the slot in which they are emitted.

    The emission slot is decided by the END time. When ``duration_s`` is given,
    predictions ending past ``MAX_END_FACTOR * duration_s`` raise
    :class:`RangeError`.
    """
    buckets: dict[int, list[TimedCaption]] = {}
    for ev in preds.events:
        if duration_s is not None and ev.end_s > MAX_END_FACTOR * duration_s:
            raise RangeError(
                f"{preds.video_id}: prediction ends at {ev.end_s}, more than "
                f"{MAX_END_FACTOR:g}x the duration {duration_s}"
            )
        buckets.setdefault(grid.emission_slot(ev.end_s), []).append(ev)
    # stable order inside a bucket regardless of input order
    for items in buckets.values():
        items.sort(key=_caption_key)
    return dict(sorted(buckets.items()))


def _caption_key(ev: TimedCaption):
    return (ev.start_s, ev.end_s, ev.sentence, -(ev.confidence or 0.0))
