import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lvc_bench.datamodel import PredictionSet, SegmentGrid, TimedCaption, VideoAnnotation  # noqa: E402

ACCEPTANCE_RESULTS = {}


def ev(start, end, sentence="a man runs", conf=None):
    return TimedCaption(start, end, sentence, conf)


def pred(start, end, sentence="a man runs", conf=1.0):
    return TimedCaption(start, end, sentence, conf)


@pytest.fixture
def grid5():
    return SegmentGrid.from_seconds(5.0)


@pytest.fixture
def three_event_video():
    return VideoAnnotation("v_three", 30.0, (
        ev(0.0, 7.0, "a man runs down the street"),
        ev(5.0, 12.0, "a dog barks at the man"),
        ev(20.0, 24.0, "the man waves goodbye"),
    ))


@pytest.fixture
def write_json(tmp_path):
    def _write(name, doc):
        path = tmp_path / name
        path.write_text(json.dumps(doc), encoding="utf-8")
        return str(path)
    return _write


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k.split()[0])):
        status, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"[{status}] criterion {key}: {detail}")


__all__ = ["ev", "pred", "PredictionSet", "VideoAnnotation", "SegmentGrid"]
