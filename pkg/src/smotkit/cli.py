"""Command line front end.

Exit codes: 0 success, 2 input validation, 3 sequence pairing, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import data_io, metrics, synth
from .errors import PairingError, ValidationError
from .geometry import mean_object_size
from .matching import MEASURES
from .tracker import Tracker, TrackerConfig

_DISPLAY = {
    "so_hota": "SO-HOTA", "so_deta": "SO-DetA", "so_assa": "SO-AssA",
    "so_detre": "SO-DetRe", "so_detpr": "SO-DetPr",
    "hota": "HOTA", "deta": "DetA", "assa": "AssA",
    "mota": "MOTA", "motp": "MOTP", "idf1": "IDF1",
    "mt": "MT", "ml": "ML",
    "idsw": "IDSW", "fp": "FP", "fn": "FN", "tp": "TP",
}
_COUNT_KEYS = {"idsw", "fp", "fn", "tp", "gt", "mt_count", "ml_count"}


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _parse_range(text: str, name: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise ValidationError(f"{name}: expected LO:HI, got {text!r}")
    return float(parts[0]), float(parts[1])


def _parse_shifts(text: str) -> list[float]:
    """Either a comma list ('0,4,8') or an inclusive range 'start:stop[:step]'."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) not in (2, 3):
            raise ValidationError(f"shifts: expected START:STOP[:STEP], got {text!r}")
        start, stop = float(parts[0]), float(parts[1])
        step = float(parts[2]) if len(parts) == 3 else 1.0
        if step <= 0:
            raise ValidationError("shifts: step must be positive")
        if stop < start:
            raise ValidationError("shifts: stop must be >= start")
        count = int((stop - start) / step + 1e-9) + 1
        return [start + i * step for i in range(count)]
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ValidationError(f"shifts: {exc}") from None


def _default_jobs() -> int:
    env = os.environ.get("SMOT_EVAL_JOBS")
    if env is not None:
        try:
            value = int(env)
        except ValueError:
            raise ValidationError(f"SMOT_EVAL_JOBS: not an integer: {env!r}") from None
        if value < 1:
            raise ValidationError("SMOT_EVAL_JOBS: must be >= 1")
        return value
    return os.cpu_count() or 1


def _load_side(path: str, fmt: str, is_gt: bool) -> dict:
    if fmt == "coco":
        pairs = data_io.parse_coco_vid(Path(path).read_text(encoding="utf-8"))
        side = {}
        for pair in pairs:
            side[pair.name] = pair.gt
        return side
    return data_io.load_mot_sequences(path, is_gt=is_gt)


def _print_scores(label: str, scores: dict, stream) -> None:
    parts = []
    for key in metrics._KEY_ORDER:
        if key not in scores or key == "vacuous":
            continue
        value = scores[key]
        name = _DISPLAY.get(key, key)
        if value is None:
            parts.append(f"{name} n/a")
        elif key in _COUNT_KEYS:
            parts.append(f"{name} {int(value)}")
        else:
            parts.append(f"{name} {100.0 * value:.2f}")
    suffix = "  [vacuous]" if scores.get("vacuous") else ""
    print(f"{label}: " + "  ".join(parts) + suffix, file=stream)


def cmd_evaluate(args) -> int:
    gt_side = _load_side(args.gt, args.format, is_gt=True)
    pred_side = _load_side(args.pred, args.format, is_gt=False)
    pairs = data_io.build_pairs(gt_side, pred_side)

    warnings = []
    for pair in pairs:
        if not pair.gt:
            warnings.append(f"sequence {pair.name!r}: ground truth is empty")
        if not pair.pred:
            warnings.append(f"sequence {pair.name!r}: predictions are empty")
    for line in warnings:
        print(f"warning: {line}", file=sys.stderr)
    if warnings and args.strict:
        raise ValidationError(f"strict mode: {len(warnings)} warning(s) escalated")

    families = [tok.strip() for tok in args.metrics.split(",") if tok.strip()]
    jobs = args.jobs if args.jobs is not None else _default_jobs()
    report = metrics.evaluate_sequences(
        pairs,
        metrics=families,
        mean_size=args.s_override,
        jobs=jobs,
    )

    _print_scores("pooled", report.pooled, sys.stdout)
    if args.per_sequence:
        for name in sorted(report.per_sequence):
            _print_scores(name, report.per_sequence[name], sys.stdout)
    if report.config.get("s_used") is not None:
        print(f"S = {report.config['s_used']:.4f}", file=sys.stderr)

    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        if args.output_format == "csv":
            out.write_text(report.to_csv(), encoding="utf-8")
        else:
            out.write_text(report.to_json(), encoding="utf-8")
        if not args.no_figures:
            from . import plotting

            figure = plotting.render_report_figure(report, out.with_suffix(".png"))
            print(f"wrote {out} and {figure}", file=sys.stderr)
        else:
            print(f"wrote {out}", file=sys.stderr)
    return 0


def cmd_synth_displacement(args) -> int:
    config = synth.DisplacementStudyConfig(
        box_size=args.box_size,
        shifts=_parse_shifts(args.shifts),
        frames=args.frames,
        s_override=args.s_override,
    )
    rows = synth.displacement_study(config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as handle:
        synth.write_displacement_csv(rows, handle)
    if not args.no_figures:
        from . import plotting

        figure = plotting.render_displacement_figure(rows, out.with_suffix(".png"))
        print(f"wrote {out} and {figure}", file=sys.stderr)
    else:
        print(f"wrote {out}", file=sys.stderr)
    return 0


def cmd_synth_scene(args) -> int:
    box_lo, box_hi = _parse_range(args.box_size, "box-size")
    speed_lo, speed_hi = _parse_range(args.speed, "speed")
    arena_parts = args.arena.lower().split("x")
    if len(arena_parts) != 2:
        raise ValidationError(f"arena: expected WIDTHxHEIGHT, got {args.arena!r}")
    config = synth.SceneConfig(
        n_objects=args.objects,
        frames=args.frames,
        arena=(float(arena_parts[0]), float(arena_parts[1])),
        box_size_range=(box_lo, box_hi),
        motion=args.motion,
        speed_range=(speed_lo, speed_hi),
        seed=args.seed,
        name=Path(args.out).stem,
    )
    scene = synth.generate_scene(config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as handle:
        data_io.write_mot(scene.gt, handle)
    print(f"wrote {out} ({len(scene.gt)} boxes, {config.frames} frames)", file=sys.stderr)

    if args.pred_out:
        corruption = synth.CorruptionConfig(
            center_noise_sigma=args.sigma,
            miss_rate=args.miss_rate,
            fp_rate=args.fp_rate,
            id_switch_rate=args.id_switch_rate,
            drop_ids=args.drop_ids,
            seed=args.seed,
        )
        corrupted = synth.corrupt(scene, corruption)
        pred_out = Path(args.pred_out)
        pred_out.parent.mkdir(parents=True, exist_ok=True)
        with pred_out.open("w", encoding="utf-8") as handle:
            data_io.write_mot(corrupted, handle)
        print(f"wrote {pred_out} ({len(corrupted)} boxes)", file=sys.stderr)
    return 0


def cmd_track(args) -> int:
    detections = data_io.parse_mot(Path(args.detections).read_text(encoding="utf-8"))
    affines = None
    if args.affine:
        affines = data_io.load_affines(Path(args.affine).read_text(encoding="utf-8"))
    config = TrackerConfig(
        similarity=args.similarity,
        assoc_threshold=args.assoc_threshold,
        ema_lambda=args.ema_lambda,
        ocm_weight=args.ocm_weight,
        expand=args.expand,
        penalty_weight=args.penalty_weight,
        max_age=args.max_age,
        min_hits=args.min_hits,
    )
    mean_size = args.mean_size
    if mean_size is None and detections and config.similarity in ("dotd", "expanded_penalty"):
        mean_size = mean_object_size([det.box for det in detections])

    start = time.perf_counter()
    if detections:
        tracker = Tracker(config, mean_size=mean_size, affines=affines)
        tracks = tracker.run(detections)
    else:
        tracks = []
    elapsed = time.perf_counter() - start
    if args.interpolate_gap:
        from .fusion import interpolate_tracks

        tracks = interpolate_tracks(tracks, max_gap=args.interpolate_gap)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as handle:
        data_io.write_mot(tracks, handle)
    n_frames = max((det.frame for det in detections), default=0)
    n_ids = len({det.track_id for det in tracks})
    fps = n_frames / elapsed if elapsed > 0 else float("inf")
    print(
        f"wrote {out}: {n_ids} tracks, {len(tracks)} boxes, "
        f"{n_frames} frames in {elapsed:.2f}s ({fps:.0f} fps)",
        file=sys.stderr,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smotkit",
        description="Small-object tracking: evaluation, synthetic data, and a reference tracker.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("evaluate", help="score predictions against ground truth")
    p_eval.add_argument("gt", help="ground-truth file or directory")
    p_eval.add_argument("pred", help="prediction file or directory")
    p_eval.add_argument("--format", choices=("mot", "coco"), default="mot")
    p_eval.add_argument(
        "--metrics", default="so_hota",
        help="comma list from: so_hota, hota, clear, idf1, or 'all'",
    )
    p_eval.add_argument("--s-override", type=float, default=None, metavar="S",
                        help="fixed mean object size instead of the pooled estimate")
    p_eval.add_argument("--out", default=None, help="report file to write")
    p_eval.add_argument("--output-format", choices=("json", "csv"), default="json")
    p_eval.add_argument("--jobs", type=_positive_int, default=None,
                        help="worker processes (default: SMOT_EVAL_JOBS or CPU count)")
    p_eval.add_argument("--per-sequence", action="store_true",
                        help="also print one line per sequence")
    p_eval.add_argument("--strict", action="store_true",
                        help="treat warnings (empty sequences) as errors")
    p_eval.add_argument("--no-figures", action="store_true",
                        help="skip the figure rendered next to --out")
    p_eval.set_defaults(func=cmd_evaluate)

    p_synth = sub.add_parser("synth", help="generate synthetic data")
    synth_sub = p_synth.add_subparsers(dest="synth_command", required=True)

    p_disp = synth_sub.add_parser("displacement", help="single-box displacement sweep")
    p_disp.add_argument("--box-size", type=float, default=16.0)
    p_disp.add_argument("--shifts", default="0:64:1",
                        help="START:STOP[:STEP] inclusive, or a comma list")
    p_disp.add_argument("--frames", type=_positive_int, default=50)
    p_disp.add_argument("--s-override", type=float, default=None)
    p_disp.add_argument("--out", default="displacement.csv")
    p_disp.add_argument("--no-figures", action="store_true")
    p_disp.set_defaults(func=cmd_synth_displacement)

    p_scene = synth_sub.add_parser("scene", help="multi-object scene, optional corruption")
    p_scene.add_argument("--objects", type=_positive_int, default=5)
    p_scene.add_argument("--frames", type=_positive_int, default=100)
    p_scene.add_argument("--arena", default="1920x1080")
    p_scene.add_argument("--box-size", default="8:24", help="LO:HI pixels")
    p_scene.add_argument("--motion", choices=("linear", "sinusoidal", "flock"),
                         default="linear")
    p_scene.add_argument("--speed", default="1:4", help="LO:HI pixels per frame")
    p_scene.add_argument("--seed", type=int, default=0)
    p_scene.add_argument("--out", required=True, help="ground-truth MOT file")
    p_scene.add_argument("--pred-out", default=None,
                         help="also write a corrupted copy here")
    p_scene.add_argument("--sigma", type=float, default=0.0,
                         help="center jitter std [px]")
    p_scene.add_argument("--miss-rate", type=float, default=0.0)
    p_scene.add_argument("--fp-rate", type=float, default=0.0,
                         help="expected false positives per frame")
    p_scene.add_argument("--id-switch-rate", type=float, default=0.0)
    p_scene.add_argument("--drop-ids", action="store_true")
    p_scene.set_defaults(func=cmd_synth_scene)

    p_track = sub.add_parser("track", help="run the reference tracker on detections")
    p_track.add_argument("detections", help="MOT detection file")
    p_track.add_argument("--similarity", choices=MEASURES, default="dotd")
    p_track.add_argument("--assoc-threshold", type=float, default=0.3)
    p_track.add_argument("--ema-lambda", type=float, default=0.9)
    p_track.add_argument("--ocm-weight", type=float, default=0.2)
    p_track.add_argument("--expand", type=float, default=0.5)
    p_track.add_argument("--penalty-weight", type=float, default=0.25)
    p_track.add_argument("--max-age", type=_positive_int, default=30)
    p_track.add_argument("--min-hits", type=_positive_int, default=3)
    p_track.add_argument("--mean-size", type=float, default=None,
                         help="override the size scale estimated from the detections")
    p_track.add_argument("--affine", default=None,
                         help="per-frame camera motion CSV")
    p_track.add_argument("--interpolate-gap", type=int, default=0, metavar="N",
                         help="post hoc linear fill of track gaps up to N frames")
    p_track.add_argument("--out", required=True)
    p_track.set_defaults(func=cmd_track)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PairingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - last resort
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
