"""Live Score family: per-segment gamma, false positives, LS/wLS/hLS/hwLS.

For a stream cut into slots of ``delta_t_s`` seconds, with ``gamma_n`` the
caption score of slot ``n`` and ``fp_n`` its false-positive count::

    LS(n)   = sum(gamma_1..n) / n
    wLS(n)  = LS(n) * exp(-sum(fp_1..n) / n)
    hLS(n)  = sum(gamma_{n-w+1..n}) / D(n)
    hwLS(n) = hLS(n) * exp(-sum(fp_{n-w+1..n}) / D(n))

``D(n)`` is ``n`` in ``PAPER_K`` mode and ``min(w, n)`` in
``EFFECTIVE_WINDOW`` mode.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .datamodel import PredictionSet, SegmentGrid, TimedCaption, VideoAnnotation, group_by_segment
from .temporal import overlaps, refs_for_segment
from .textscore import ScorerKind, score_sentences

logger = logging.getLogger(__name__)

VARIANTS = ("ls", "wls", "hls", "hwls")


class WindowNorm(str, enum.Enum):
    PAPER_K = "paper"
    EFFECTIVE_WINDOW = "effective"


class ReportScale(str, enum.Enum):
    UNIT = "unit"
    PERCENT = "percent"

    @property
    def factor(self) -> float:
        return 100.0 if self is ReportScale.PERCENT else 1.0


class GammaMode(str, enum.Enum):
    #: best overlapping prediction per reference, averaged over references
    PER_REFERENCE_MAX = "per-reference-max"
    #: mean over every overlapping (reference, prediction) pair
    ALL_PAIRS_MEAN = "all-pairs-mean"


@dataclass(frozen=True)
class LiveScoreConfig:
    grid: SegmentGrid
    scorer: ScorerKind = ScorerKind.BLEU4
    window: int = 5
    window_normalization: WindowNorm = WindowNorm.PAPER_K
    report_scale: ReportScale = ReportScale.UNIT
    gamma_mode: GammaMode = GammaMode.PER_REFERENCE_MAX

    def __post_init__(self):
        if isinstance(self.window, bool) or int(self.window) != self.window or self.window < 1:
            raise ValueError(f"window must be a positive integer, got {self.window!r}")
        object.__setattr__(self, "scorer", ScorerKind(self.scorer))
        object.__setattr__(self, "window_normalization", WindowNorm(self.window_normalization))
        object.__setattr__(self, "report_scale", ReportScale(self.report_scale))
        object.__setattr__(self, "gamma_mode", GammaMode(self.gamma_mode))

    def echo(self) -> dict:
        return {
            "delta_t_frames": self.grid.delta_t_frames,
            "fps": self.grid.fps,
            "delta_t_s": self.grid.delta_t_s,
            "scorer": self.scorer.value,
            "window": self.window,
            "window_normalization": self.window_normalization.value,
            "report_scale": self.report_scale.value,
            "gamma_mode": self.gamma_mode.value,
        }


@dataclass(frozen=True)
class GammaSeries:
    gamma: tuple[float, ...]
    fp: tuple[int, ...]
    has_refs: tuple[bool, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gamma", tuple(float(g) for g in self.gamma))
        object.__setattr__(self, "fp", tuple(int(f) for f in self.fp))
        has_refs = tuple(self.has_refs) or tuple(True for _ in self.gamma)
        object.__setattr__(self, "has_refs", has_refs)
        if not (len(self.gamma) == len(self.fp) == len(self.has_refs)):
            raise ValueError("gamma, fp and has_refs must have equal length")
        if any(not 0.0 <= g <= 1.0 for g in self.gamma):
            raise ValueError("gamma values must lie in [0, 1]")
        if any(f < 0 for f in self.fp):
            raise ValueError("fp counts must be non-negative")

    def __len__(self) -> int:
        return len(self.gamma)


@dataclass(frozen=True)
class LiveScoreSeries:
    """Per-slot values, all in [0, 1]; ``t_prime`` holds slot closing times."""

    t_prime: tuple[float, ...]
    gamma: tuple[float, ...]
    fp: tuple[int, ...]
    ls: tuple[float, ...]
    wls: tuple[float, ...]
    hls: tuple[float, ...]
    hwls: tuple[float, ...]
    has_refs: tuple[bool, ...] = ()
    video_id: str = ""
    config: LiveScoreConfig | None = field(default=None, compare=False)

    def __len__(self) -> int:
        return len(self.ls)

    def means(self) -> dict[str, float]:
        return summarize(self)


def gamma_for_segment(
    seg_preds: Sequence[TimedCaption],
    seg_refs: Sequence[TimedCaption],
    kind: ScorerKind,
    mode: GammaMode = GammaMode.PER_REFERENCE_MAX,
) -> tuple[float, int]:
    """Score one slot. Returns ``(gamma, fp_count)``.

    A false positive is a prediction overlapping no reference interval; text
    quality does not enter the count.
    """
    fp = sum(1 for p in seg_preds if not any(overlaps(p, r) for r in seg_refs))
    if not seg_refs:
        return 0.0, fp
    if GammaMode(mode) is GammaMode.ALL_PAIRS_MEAN:
        scores = [
            score_sentences(kind, p.sentence, [r.sentence])
            for r in seg_refs for p in seg_preds if overlaps(p, r)
        ]
        return (math.fsum(scores) / len(scores) if scores else 0.0), fp
    per_ref = []
    for r in seg_refs:
        pool = [p for p in seg_preds if overlaps(p, r)]
        per_ref.append(max((score_sentences(kind, p.sentence, [r.sentence]) for p in pool), default=0.0))
    return math.fsum(per_ref) / len(per_ref), fp


def _prefix(values: Sequence[float]) -> list[float]:
    out = [0.0]
    acc = 0.0
    for v in values:
        acc += v
        out.append(acc)
    return out


def _window_sums(prefix: Sequence[float], w: int) -> list[float]:
    # prefix[n] - prefix[n - w]; when the window covers the whole history the
    # value is prefix[n] itself, so hLS == LS bit-for-bit there.
    return [prefix[n] if n <= w else prefix[n] - prefix[n - w] for n in range(1, len(prefix))]


def _denominators(count: int, w: int, norm: WindowNorm) -> list[int]:
    if WindowNorm(norm) is WindowNorm.PAPER_K:
        return list(range(1, count + 1))
    return [min(w, n) for n in range(1, count + 1)]


def _clip(x: float) -> float:
    return min(1.0, max(0.0, x))


def ls_series(gammas: GammaSeries) -> list[float]:
    if not len(gammas):
        raise ValueError("empty gamma series")
    prefix = _prefix(gammas.gamma)
    return [_clip(prefix[n] / n) for n in range(1, len(prefix))]


def wls_series(gammas: GammaSeries) -> list[float]:
    ls = ls_series(gammas)
    fp_prefix = _prefix(gammas.fp)
    return [ls[n - 1] * math.exp(-fp_prefix[n] / n) for n in range(1, len(fp_prefix))]


def hls_series(gammas: GammaSeries, w: int, normalization: WindowNorm = WindowNorm.PAPER_K) -> list[float]:
    if w < 1:
        raise ValueError("window must be >= 1")
    if not len(gammas):
        raise ValueError("empty gamma series")
    sums = _window_sums(_prefix(gammas.gamma), w)
    dens = _denominators(len(gammas), w, normalization)
    return [_clip(s / d) for s, d in zip(sums, dens)]


def hwls_series(gammas: GammaSeries, w: int, normalization: WindowNorm = WindowNorm.PAPER_K) -> list[float]:
    hls = hls_series(gammas, w, normalization)
    fp_sums = _window_sums(_prefix(gammas.fp), w)
    dens = _denominators(len(gammas), w, normalization)
    return [h * math.exp(-f / d) for h, f, d in zip(hls, fp_sums, dens)]


def iter_gammas(
    preds: PredictionSet, ann: VideoAnnotation, config: LiveScoreConfig
) -> Iterator[tuple[int, float, int, bool]]:
    """Yield ``(n, gamma, fp, has_refs)`` slot by slot, in order.

    Step ``n`` only sees predictions emitted at or before ``t_prime(n)``.
    Predictions whose emission slot falls after the last slot of the video
    are scored in the last slot.
    """
    grid = config.grid
    count = grid.num_segments(ann.duration_s)
    buckets = group_by_segment(preds, grid, ann.duration_s)
    late = [p for n, items in buckets.items() if n > count for p in items]
    if late:
        logger.warning("%s: %d predictions end after the video; scored in the last slot",
                       preds.video_id, len(late))
        buckets[count] = sorted(buckets.get(count, []) + late,
                                key=lambda e: (e.start_s, e.end_s, e.sentence))
    for n in range(1, count + 1):
        refs = refs_for_segment(ann, grid, n)
        gamma, fp = gamma_for_segment(buckets.get(n, ()), refs, config.scorer, config.gamma_mode)
        yield n, gamma, fp, bool(refs)


def gamma_series(preds: PredictionSet, ann: VideoAnnotation, config: LiveScoreConfig) -> GammaSeries:
    rows = list(iter_gammas(preds, ann, config))
    return GammaSeries(
        gamma=[r[1] for r in rows], fp=[r[2] for r in rows], has_refs=[r[3] for r in rows]
    )


def series_from_gammas(gammas: GammaSeries, config: LiveScoreConfig, video_id: str = "") -> LiveScoreSeries:
    w, norm = config.window, config.window_normalization
    return LiveScoreSeries(
        t_prime=tuple(config.grid.t_prime(n) for n in range(1, len(gammas) + 1)),
        gamma=gammas.gamma,
        fp=gammas.fp,
        ls=tuple(ls_series(gammas)),
        wls=tuple(wls_series(gammas)),
        hls=tuple(hls_series(gammas, w, norm)),
        hwls=tuple(hwls_series(gammas, w, norm)),
        has_refs=gammas.has_refs,
        video_id=video_id,
        config=config,
    )


def evaluate_live(preds: PredictionSet, ann: VideoAnnotation, config: LiveScoreConfig) -> LiveScoreSeries:
    """Run the Live Score pipeline over one video."""
    if not ann.duration_s > 0:
        raise ValueError(f"{ann.video_id}: zero-duration video")
    return series_from_gammas(gamma_series(preds, ann, config), config, ann.video_id)


def summarize(series: LiveScoreSeries, scale: ReportScale | None = None) -> dict[str, float]:
    """Mean over all slots of each variant, in the requested scale."""
    if not len(series):
        raise ValueError("empty series")
    if scale is None:
        scale = series.config.report_scale if series.config else ReportScale.UNIT
    factor = ReportScale(scale).factor
    return {v: factor * math.fsum(getattr(series, v)) / len(series) for v in VARIANTS}


def summarize_corpus(summaries: Sequence[dict[str, float]]) -> dict[str, float]:
    """Uniform average of per-video summaries."""
    if not summaries:
        raise ValueError("no videos to summarize")
    return {v: math.fsum(s[v] for s in summaries) / len(summaries) for v in VARIANTS}
