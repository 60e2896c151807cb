"""``lvc-bench`` command line.

Exit codes: 0 ok, 2 unreadable/malformed input, 3 video id sets do not
intersect, 4 usage error, 5 audit found causality/irreversibility breaches.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

from . import __version__
from .datamodel import (
    DEFAULT_FPS,
    ParseError,
    PredictionSet,
    RangeError,
    SegmentGrid,
    parse_ground_truth,
    parse_predictions,
    serialize_ground_truth,
    serialize_predictions,
)
from .livescore import (
    VARIANTS,
    GammaMode,
    LiveScoreConfig,
    ReportScale,
    WindowNorm,
    evaluate_live,
    summarize,
    summarize_corpus,
)
from .offline_eval import IdMismatchError, evaluate_offline
from .report import json_text, live_summary_csv, offline_csv, series_csv, write_manifest, write_text
from .stream import (
    EmissionLog,
    LogStructureError,
    ReplayConfig,
    audit_causality,
    blocking,
    replay,
    synth_stream,
)
from .temporal import split_annotations
from .textscore import ScorerKind

log = logging.getLogger("lvc_bench")

EXIT_OK, EXIT_PARSE, EXIT_MISMATCH, EXIT_USAGE, EXIT_AUDIT = 0, 2, 3, 4, 5

#: Segment lengths (frames) swept when --dt is not given.
DEFAULT_DT_SWEEP = (24, 48, 72, 96, 120, 150)


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read(path: str) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc


def _scorers(names: Sequence[str] | None, default: Sequence[ScorerKind]) -> list[ScorerKind]:
    if not names:
        return list(default)
    kinds = []
    for chunk in names:
        for name in chunk.split(","):
            if name.strip():
                try:
                    kind = ScorerKind.parse(name)
                except ValueError as exc:
                    raise UsageError(str(exc)) from None
                if kind not in kinds:
                    kinds.append(kind)
    return kinds


def _grids(args, sweep_default: bool) -> list[tuple[str, SegmentGrid]]:
    """``(column label, grid)`` pairs from --dt / --dt-seconds / --fps."""
    if args.fps <= 0:
        raise UsageError("--fps must be positive")
    if args.dt and args.dt_seconds:
        raise UsageError("use either --dt or --dt-seconds, not both")
    if args.dt_seconds:
        if any(s <= 0 for s in args.dt_seconds):
            raise UsageError("--dt-seconds values must be positive")
        return [(f"{s:g}s", SegmentGrid.from_seconds(s)) for s in args.dt_seconds]
    frames = args.dt or (list(DEFAULT_DT_SWEEP) if sweep_default else None)
    if not frames:
        raise UsageError("--dt (frames) or --dt-seconds is required")
    if any(f <= 0 for f in frames):
        raise UsageError("--dt values must be positive frame counts")
    return [(str(f), SegmentGrid.from_frames(f, args.fps)) for f in frames]


def _jobs(args) -> int:
    jobs = args.jobs
    if jobs is None:
        env = os.environ.get("LVC_BENCH_JOBS")
        if env:
            try:
                jobs = int(env)
            except ValueError:
                raise UsageError(f"LVC_BENCH_JOBS must be an integer, got {env!r}") from None
    jobs = 1 if jobs is None else jobs
    if jobs < 1:
        raise UsageError("--jobs must be >= 1")
    return jobs


def _common_ids(preds: dict, gt: dict) -> list[str]:
    common = sorted(set(preds) & set(gt))
    if not common:
        raise IdMismatchError("prediction and ground-truth files share no video ids")
    extra = len(set(preds) - set(gt))
    if extra:
        log.warning("skipping %d predicted videos that are not in the ground truth", extra)
    return common


# -- eval-offline -------------------------------------------------------------

def cmd_eval_offline(args) -> int:
    kinds = _scorers(args.scorer, tuple(ScorerKind))
    jobs = _jobs(args)
    out_dir = Path(args.out)
    gt = parse_ground_truth(_read(args.gt))
    preds = parse_predictions(_read(args.pred))
    corpus, per_video = evaluate_offline(preds, gt, kinds, jobs=jobs)
    outputs = [
        write_text(out_dir / "offline_report.csv", offline_csv(corpus, per_video)),
        write_text(out_dir / "offline_report.json", json_text({
            "manifest": "manifest.json",
            "corpus": corpus.as_dict(),
            "videos": {vid: rep.as_dict() for vid, rep in sorted(per_video.items())},
        })),
    ]
    config = {"thresholds": list(corpus.thresholds), "scorers": [k.value for k in kinds]}
    write_manifest(out_dir, "eval-offline", config, {"ground_truth": args.gt, "predictions": args.pred}, outputs)
    print(f"avg precision {corpus.avg_precision:.2f}  avg recall {corpus.avg_recall:.2f}  "
          + "  ".join(f"{k} {v:.2f}" for k, v in sorted(corpus.caption.items())))
    return EXIT_OK


# -- eval-live ----------------------------------------------------------------

def _live_one(task):
    """Worker: every (grid, scorer) combination for one video."""
    pred, ann, configs = task
    out = []
    for label, config in configs:
        series = evaluate_live(pred, ann, config)
        out.append((label, config.scorer.value,
                    series_csv(series, config.report_scale),
                    summarize(series, config.report_scale)))
    return ann.video_id, out


def cmd_eval_live(args) -> int:
    kinds = _scorers(args.scorer, (ScorerKind.BLEU4,))
    grids = _grids(args, sweep_default=True)
    jobs = _jobs(args)
    if args.window < 1:
        raise UsageError("--window must be >= 1")
    try:
        norm = WindowNorm(args.norm)
        scale = ReportScale(args.scale)
        gamma_mode = GammaMode(args.gamma_mode)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    configs = [
        (label, LiveScoreConfig(grid, kind, args.window, norm, scale, gamma_mode))
        for label, grid in grids for kind in kinds
    ]
    out_dir = Path(args.out)

    gt = parse_ground_truth(_read(args.gt))
    preds = parse_predictions(_read(args.pred))
    ids = _common_ids(preds, gt)
    tasks = [(preds[vid], gt[vid], configs) for vid in ids]
    try:
        if jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_live_one, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
        else:
            results = [_live_one(t) for t in tasks]
    except RangeError as exc:
        raise InputError(str(exc)) from exc

    outputs = []
    per_cell: dict[tuple[str, str], list[dict]] = {}
    video_means: dict[str, dict] = {}
    for vid, rows in results:  # sorted by video id
        for label, scorer, text, summary in rows:
            outputs.append(write_text(out_dir / "series" / f"dt_{label}" / scorer / f"{vid}.csv", text))
            per_cell.setdefault((label, scorer), []).append(summary)
            video_means.setdefault(vid, {}).setdefault(f"dt_{label}", {})[scorer] = summary

    labels = [label for label, _ in grids]
    table: dict[str, dict[str, dict[str, float]]] = {v: {} for v in VARIANTS}
    for (label, scorer), summaries in per_cell.items():
        corpus = summarize_corpus(summaries)
        for v in VARIANTS:
            table[v].setdefault(scorer, {})[label] = corpus[v]
    outputs.append(write_text(out_dir / "live_summary.csv", live_summary_csv(table, labels)))
    outputs.append(write_text(out_dir / "live_summary.json", json_text({
        "manifest": "manifest.json",
        "columns": [f"dt_{c}" for c in labels],
        "summary": {v: {s: {f"dt_{c}": table[v][s][c] for c in labels} for s in sorted(table[v])}
                    for v in VARIANTS},
        "videos": len(ids),
        "per_video": video_means,
    })))
    config = {
        "delta_t": [{"label": label, "delta_t_frames": g.delta_t_frames, "fps": g.fps,
                     "delta_t_s": g.delta_t_s} for label, g in grids],
        "scorers": [k.value for k in kinds],
        "window": args.window,
        "window_normalization": norm.value,
        "report_scale": scale.value,
        "gamma_mode": gamma_mode.value,
        "segment_assignment": "end-time, emitted at first boundary >= end",
    }
    write_manifest(out_dir, "eval-live", config, {"ground_truth": args.gt, "predictions": args.pred}, outputs)
    for v in VARIANTS:
        for s in sorted(table[v]):
            print(f"{v:5s} {s:12s} " + " ".join(f"{table[v][s][c]:8.2f}" for c in labels))
    return EXIT_OK


# -- split-annotations --------------------------------------------------------

def cmd_split_annotations(args) -> int:
    grids = _grids(args, sweep_default=False)
    if len(grids) != 1:
        raise UsageError("split-annotations takes exactly one segment length")
    _, grid = grids[0]
    gt = parse_ground_truth(_read(args.gt))
    split = [split_annotations(ann, grid) for _, ann in sorted(gt.items())]
    write_text(Path(args.out), serialize_ground_truth(split).decode("utf-8"))
    return EXIT_OK


# -- replay-audit -------------------------------------------------------------

def cmd_replay_audit(args) -> int:
    grids = _grids(args, sweep_default=False)
    if len(grids) != 1:
        raise UsageError("replay-audit takes exactly one segment length")
    _, grid = grids[0]
    if args.memory < 1:
        raise UsageError("--memory must be >= 1")
    if bool(args.pred) == bool(args.log):
        raise UsageError("give either a prediction file or --log (audit-only), not both")
    out_dir = Path(args.out)

    gt = parse_ground_truth(_read(args.gt)) if args.gt else {}
    if args.log:
        try:
            logs = {"": EmissionLog.from_jsonl(_read(args.log).decode("utf-8"))}
        except (LogStructureError, UnicodeDecodeError) as exc:
            raise InputError(f"{args.log}: {exc}") from exc
    else:
        preds = parse_predictions(_read(args.pred))
        cfg = ReplayConfig(grid, args.memory)
        logs = {}
        for vid in sorted(preds):
            last = grid.num_segments(gt[vid].duration_s) if vid in gt else None
            logs[vid] = replay(preds[vid], cfg, args.consolidate, last_segment=last)

    outputs = []
    report = []
    n_blocking = 0
    for vid, elog in logs.items():
        if not args.log:
            outputs.append(write_text(out_dir / "logs" / f"{vid}.jsonl", elog.to_jsonl()))
        try:
            found = audit_causality(elog, grid, gt.get(vid))
        except LogStructureError as exc:
            raise InputError(f"{vid or args.log}: {exc}") from exc
        n_blocking += len(blocking(found))
        for v in found:
            entry = v.as_dict()
            entry["video_id"] = vid
            report.append(entry)
    outputs.append(write_text(out_dir / "audit.json", json_text(report)))
    inputs = {"log": args.log} if args.log else {"predictions": args.pred}
    if args.gt:
        inputs["ground_truth"] = args.gt
    config = {"delta_t_frames": grid.delta_t_frames, "fps": grid.fps, "delta_t_s": grid.delta_t_s,
              "memory": args.memory, "consolidate": bool(args.consolidate)}
    write_manifest(out_dir, "replay-audit", config, inputs, outputs)
    for r in report:
        if r["kind"] != "TIMELINESS":
            print(f"{r['video_id'] or '-'} step {r['step']}: {r['kind']} {r['detail']}", file=sys.stderr)
    print(f"{len(logs)} logs audited, {n_blocking} violations, "
          f"{len(report) - n_blocking} advisory")
    return EXIT_AUDIT if n_blocking else EXIT_OK


# -- synth --------------------------------------------------------------------

def cmd_synth(args) -> int:
    grids = _grids(args, sweep_default=False)
    if len(grids) != 1:
        raise UsageError("synth takes exactly one segment length")
    if not 0.0 <= args.quality <= 1.0 or args.fp_rate < 0:
        raise UsageError("--quality must be in [0, 1] and --fp-rate >= 0")
    _, grid = grids[0]
    gt = parse_ground_truth(_read(args.gt))
    vocab = sorted({ev.sentence for ann in gt.values() for ev in ann.events})
    out: list[PredictionSet] = []
    for i, vid in enumerate(sorted(gt)):
        own = {ev.sentence for ev in gt[vid].events}
        others = [s for s in vocab if s not in own] or None
        out.append(synth_stream(gt[vid], grid, args.quality, args.fp_rate, args.seed + i, others))
    write_text(Path(args.out), serialize_predictions(out).decode("utf-8"))
    return EXIT_OK


def _add_grid_flags(p, repeat: bool):
    action = "append" if repeat else None
    kw = {"action": action} if repeat else {}
    p.add_argument("--dt", type=int, help="segment length in frames" + (" (repeatable)" if repeat else ""), **kw)
    p.add_argument("--dt-seconds", type=float, help="segment length in seconds instead of frames", **kw)
    p.add_argument("--fps", type=float, default=DEFAULT_FPS, help="frames per second (default 30)")


def _wrap_single(p):
    # store single --dt values as one-element lists for _grids()
    def post(args):
        for name in ("dt", "dt_seconds"):
            value = getattr(args, name)
            if value is not None and not isinstance(value, list):
                setattr(args, name, [value])
        return args
    p.set_defaults(_post=post)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lvc-bench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("eval-offline", help="ActivityNet-2018 style offline evaluation")
    p.add_argument("gt")
    p.add_argument("pred")
    p.add_argument("--scorer", action="append", help="BLEU4, ROUGE_L, METEOR_LITE (default: all)")
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval_offline)

    p = sub.add_parser("eval-live", help="Live Score series and summary")
    p.add_argument("gt")
    p.add_argument("pred")
    _add_grid_flags(p, repeat=True)
    p.add_argument("--scorer", action="append", help="BLEU4 (default), ROUGE_L, METEOR_LITE")
    p.add_argument("--window", type=int, default=5, help="history window w in segments (default 5)")
    p.add_argument("--norm", default=WindowNorm.PAPER_K.value, help="paper (default) or effective")
    p.add_argument("--scale", default=ReportScale.PERCENT.value, help="percent (default) or unit")
    p.add_argument("--gamma-mode", default=GammaMode.PER_REFERENCE_MAX.value,
                   help="per-reference-max (default) or all-pairs-mean")
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval_live)

    p = sub.add_parser("split-annotations", help="cut ground truth along the segment grid")
    p.add_argument("gt")
    _add_grid_flags(p, repeat=False)
    _wrap_single(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split_annotations)

    p = sub.add_parser("replay-audit", help="replay predictions as a stream and audit causality")
    p.add_argument("pred", nargs="?")
    p.add_argument("--log", help="audit an existing JSONL emission log instead of replaying")
    p.add_argument("--gt", help="ground truth, enables advisory timeliness checks")
    _add_grid_flags(p, repeat=False)
    _wrap_single(p)
    p.add_argument("--memory", type=int, default=1, help="segments kept in memory (M)")
    p.add_argument("--consolidate", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_replay_audit)

    p = sub.add_parser("synth", help="write a synthetic prediction file for a ground truth")
    p.add_argument("gt")
    _add_grid_flags(p, repeat=False)
    _wrap_single(p)
    p.add_argument("--quality", type=float, default=1.0)
    p.add_argument("--fp-rate", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if hasattr(args, "_post"):
        args = args._post(args)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"lvc-bench: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, RangeError, InputError) as exc:
        print(f"lvc-bench: input error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except IdMismatchError as exc:
        print(f"lvc-bench: {exc}", file=sys.stderr)
        return EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
