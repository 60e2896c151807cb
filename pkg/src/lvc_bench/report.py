"""Deterministic CSV/JSON emitters and the run manifest."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import os
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import __version__
from .livescore import VARIANTS, LiveScoreSeries, ReportScale
from .offline_eval import OfflineReport
from .textscore import scorer_metadata

SERIES_HEADER = ("segment_index", "t_prime_s", "gamma", "fp", "ls", "wls", "hls", "hwls")
MANIFEST_NAME = "manifest.json"


def fmt(x: float) -> str:
    """Fixed six-decimal rendering used in every emitted table."""
    out = f"{x:.6f}"
    return "0.000000" if out == "-0.000000" else out


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def json_text(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def series_csv(series: LiveScoreSeries, scale: ReportScale = ReportScale.UNIT) -> str:
    k = ReportScale(scale).factor
    rows = (
        (n, series.t_prime[n - 1], k * series.gamma[n - 1], series.fp[n - 1],
         k * series.ls[n - 1], k * series.wls[n - 1], k * series.hls[n - 1], k * series.hwls[n - 1])
        for n in range(1, len(series) + 1)
    )
    return _csv_text(SERIES_HEADER, rows)


def live_summary_csv(table: Mapping[str, Mapping[str, Mapping[int | str, float]]], columns: Sequence) -> str:
    """Rows are ``variant x scorer``, columns the swept segment lengths.

    ``table[variant][scorer][column] -> value``.
    """
    header = ["variant", "scorer"] + [f"dt_{c}" for c in columns]
    rows = []
    for variant in VARIANTS:
        for scorer in sorted(table.get(variant, {})):
            cells = table[variant][scorer]
            rows.append([variant, scorer] + [float(cells[c]) for c in columns])
    return _csv_text(header, rows)


def offline_csv(report: OfflineReport, per_video: Mapping[str, OfflineReport] | None = None) -> str:
    taus = [f"{t:g}" for t in report.thresholds]
    scorers = sorted(report.caption)
    header = (
        ["video_id"]
        + [f"recall@{t}" for t in taus] + ["recall_avg"]
        + [f"precision@{t}" for t in taus] + ["precision_avg"]
        + [f"caption_{s}" for s in scorers]
    )

    def row(name, rep):
        return (
            [name] + list(rep.recall) + [rep.avg_recall]
            + list(rep.precision) + [rep.avg_precision]
            + [rep.caption[s] for s in scorers]
        )

    rows = [row("__corpus__", report)]
    for vid in sorted(per_video or {}):
        rows.append(row(vid, per_video[vid]))
    return _csv_text(header, rows)


def sha256_file(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def build_manifest(command: str, config: dict, inputs: Mapping[str, str | os.PathLike],
                   outputs: Iterable[Path], out_dir: Path) -> dict:
    return {
        "tool": "lvc-bench",
        "version": __version__,
        "command": command,
        "config": config,
        "scorers": scorer_metadata(),
        "inputs": {name: {"path": os.path.basename(str(p)), "sha256": sha256_file(p)}
                   for name, p in sorted(inputs.items())},
        "outputs": {str(p.relative_to(out_dir)): sha256_file(p) for p in sorted(outputs)},
        # the only field allowed to differ between identical runs
        "created_utc": _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
    }


def write_manifest(out_dir: Path, command: str, config: dict, inputs, outputs) -> Path:
    manifest = build_manifest(command, config, inputs, outputs, out_dir)
    return write_text(out_dir / MANIFEST_NAME, json_text(manifest))
