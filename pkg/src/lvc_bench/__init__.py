"""Evaluation tooling for live (online) dense video captioning."""

__version__ = "0.1.0"

from .datamodel import (  # noqa: E402
    PredictionSet,
    SegmentGrid,
    TimedCaption,
    VideoAnnotation,
    group_by_segment,
    parse_ground_truth,
    parse_predictions,
)
from .livescore import LiveScoreConfig, evaluate_live, summarize  # noqa: E402
from .offline_eval import evaluate_offline  # noqa: E402
from .stream import audit_causality, consolidate, replay, synth_stream  # noqa: E402
from .temporal import iou, split_annotations  # noqa: E402
from .textscore import ScorerKind  # noqa: E402

__all__ = [
    "LiveScoreConfig", "PredictionSet", "ScorerKind", "SegmentGrid", "TimedCaption",
    "VideoAnnotation", "audit_causality", "consolidate", "evaluate_live",
    "evaluate_offline", "group_by_segment", "iou", "parse_ground_truth",
    "parse_predictions", "replay", "split_annotations", "summarize", "synth_stream",
]
