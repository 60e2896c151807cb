"""Offline dense-captioning evaluation in the ActivityNet 2018 challenge style.

Localization precision/recall and caption scores are computed per IoU
threshold with many-to-many matching, then averaged over thresholds and
uniformly over videos.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .datamodel import PredictionSet, VideoAnnotation
from .temporal import iou
from .textscore import ScorerKind, score_sentences

logger = logging.getLogger(__name__)

IOU_THRESHOLDS = (0.3, 0.5, 0.7, 0.9)


class IdMismatchError(ValueError):
    """Prediction and annotation files share no video ids."""


@dataclass(frozen=True)
class OfflineReport:
    """Percent-scaled offline scores for one video or a whole corpus."""

    thresholds: tuple[float, ...]
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    caption: dict[str, float] = field(default_factory=dict)
    videos: int = 1
    flags: tuple[str, ...] = ()

    @property
    def avg_precision(self) -> float:
        return math.fsum(self.precision) / len(self.precision)

    @property
    def avg_recall(self) -> float:
        return math.fsum(self.recall) / len(self.recall)

    def as_dict(self) -> dict:
        return {
            "thresholds": list(self.thresholds),
            "precision": list(self.precision),
            "recall": list(self.recall),
            "avg_precision": self.avg_precision,
            "avg_recall": self.avg_recall,
            "caption": dict(sorted(self.caption.items())),
            "videos": self.videos,
            "flags": list(self.flags),
        }


def _iou_matrix(preds: PredictionSet, ann: VideoAnnotation) -> list[list[float]]:
    return [[iou(p, g) for g in ann.events] for p in preds.events]


def localization_pr(
    preds: PredictionSet,
    ann: VideoAnnotation,
    thresholds: Sequence[float] = IOU_THRESHOLDS,
) -> tuple[list[tuple[float, float]], list[str]]:
    """Per-threshold ``(precision, recall)`` in percent, plus flags.

    A prediction counts toward precision, and a ground-truth event toward
    recall, when it has at least one partner with IoU >= threshold.
    """
    flags = []
    if not preds.events:
        flags.append(f"{ann.video_id}: no predictions, precision reported as 0")
    if not ann.events:
        flags.append(f"{ann.video_id}: no ground-truth events, recall reported as 0")
    mat = _iou_matrix(preds, ann)
    out = []
    for tau in thresholds:
        hit_pred = sum(1 for row in mat if any(v >= tau for v in row))
        hit_gt = sum(1 for j in range(len(ann.events)) if any(row[j] >= tau for row in mat))
        precision = 100.0 * hit_pred / len(preds.events) if preds.events else 0.0
        recall = 100.0 * hit_gt / len(ann.events) if ann.events else 0.0
        out.append((precision, recall))
    return out, flags


def caption_precision(
    preds: PredictionSet,
    ann: VideoAnnotation,
    thresholds: Sequence[float] = IOU_THRESHOLDS,
    kind: ScorerKind = ScorerKind.METEOR_LITE,
) -> float:
    """Mean caption score of predictions against their IoU-matched references.

    Each prediction is scored once per threshold against every ground-truth
    sentence whose event reaches the threshold; unmatched predictions score 0.
    """
    if not preds.events:
        return 0.0
    mat = _iou_matrix(preds, ann)
    per_tau = []
    for tau in thresholds:
        total = []
        for p, row in zip(preds.events, mat):
            refs = [g.sentence for g, v in zip(ann.events, row) if v >= tau]
            total.append(score_sentences(kind, p.sentence, refs) if refs else 0.0)
        per_tau.append(100.0 * math.fsum(total) / len(total))
    return math.fsum(per_tau) / len(per_tau)


def evaluate_video(
    preds: PredictionSet,
    ann: VideoAnnotation,
    kinds: Iterable[ScorerKind] = tuple(ScorerKind),
    thresholds: Sequence[float] = IOU_THRESHOLDS,
) -> OfflineReport:
    pr, flags = localization_pr(preds, ann, thresholds)
    caption = {ScorerKind(k).value: caption_precision(preds, ann, thresholds, k) for k in kinds}
    return OfflineReport(
        thresholds=tuple(thresholds),
        precision=tuple(p for p, _ in pr),
        recall=tuple(r for _, r in pr),
        caption=caption,
        flags=tuple(flags),
    )


def average_reports(reports: Sequence[OfflineReport], flags: Sequence[str] = ()) -> OfflineReport:
    if not reports:
        raise ValueError("no reports to average")
    k = len(reports)
    thresholds = reports[0].thresholds

    def col(getter):
        return tuple(math.fsum(getter(r)[i] for r in reports) / k for i in range(len(thresholds)))

    caption = {
        name: math.fsum(r.caption[name] for r in reports) / k
        for name in reports[0].caption
    }
    all_flags = list(flags) + [f for r in reports for f in r.flags]
    return OfflineReport(
        thresholds=thresholds,
        precision=col(lambda r: r.precision),
        recall=col(lambda r: r.recall),
        caption=caption,
        videos=k,
        flags=tuple(all_flags),
    )


def evaluate_offline(
    predictions: Mapping[str, PredictionSet],
    annotations: Mapping[str, VideoAnnotation],
    kinds: Iterable[ScorerKind] = tuple(ScorerKind),
    thresholds: Sequence[float] = IOU_THRESHOLDS,
    jobs: int = 1,
) -> tuple[OfflineReport, dict[str, OfflineReport]]:
    """Corpus report (uniform mean over videos) and per-video reports.

    Videos are those present in both inputs. Predicted ids missing from the
    annotations are flagged and skipped; annotated videos without predictions
    are flagged and left out of the average.
    """
    kinds = tuple(ScorerKind(k) for k in kinds)
    common = sorted(set(predictions) & set(annotations))
    if not common:
        raise IdMismatchError("no video id appears in both predictions and annotations")
    flags = []
    extra = sorted(set(predictions) - set(annotations))
    if extra:
        flags.append(f"{len(extra)} predicted videos not in annotations, skipped")
        logger.warning("skipping %d predicted videos without annotations", len(extra))
    missing = sorted(set(annotations) - set(predictions))
    if missing:
        flags.append(f"{len(missing)} annotated videos without predictions, not averaged")

    def run(vid):
        return evaluate_video(predictions[vid], annotations[vid], kinds, thresholds)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(run, common))
    else:
        reports = [run(vid) for vid in common]
    per_video = dict(zip(common, reports))
    return average_reports(reports, flags), per_video
