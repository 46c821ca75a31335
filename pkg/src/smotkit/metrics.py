"""Tracking metric suites and the evaluation report.

Two families share the same matching machinery: the small-object suite
scores with the dot-distance similarity, the classical suite with IoU.
Both average detection and association quality over the 19-threshold grid.
CLEAR (MOTA and friends) and IDF1 use conventional IoU >= 0.5 matching.
All pooling across sequences sums counts first and computes ratios last.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .data_io import SequencePair
from .errors import ValidationError
from .geometry import iou_matrix
from .matching import DEFAULT_ALPHAS, MatchAccumulator, _normalized_alphas, accumulate

METRIC_FAMILIES = ("so_hota", "hota", "clear", "idf1")

# Canonical column order for reports.
_KEY_ORDER = (
    "so_hota", "so_deta", "so_assa", "so_detre", "so_detpr",
    "hota", "deta", "assa",
    "mota", "idf1", "mt", "ml", "idsw", "fp", "fn", "vacuous",
)


def _is_vacuous(acc: MatchAccumulator) -> bool:
    return acc.tp == 0 and acc.fn == 0 and acc.fp == 0


def so_deta(acc: MatchAccumulator) -> float:
    """Detection accuracy tp / (tp + fn + fp); a fully empty instance counts
    as perfect agreement and scores 1.0."""
    if _is_vacuous(acc):
        return 1.0
    return acc.tp / (acc.tp + acc.fn + acc.fp)


def so_assa(acc: MatchAccumulator) -> float:
    """Association accuracy: mean over matched detections of
    TPA / (TPA + FNA + FPA) for the detection's track pair.

    Grouped by track pair this is sum over pairs of pair_tp^2 over
    (|g| + |p| - pair_tp), divided by tp. Zero matches score 0.0 unless the
    instance is fully empty, which scores 1.0.
    """
    if _is_vacuous(acc):
        return 1.0
    if acc.tp == 0:
        return 0.0
    total = 0.0
    for (g, p), tpa in acc.pair_tp.items():
        denom = acc.gt_track_size[g] + acc.pred_track_size[p] - tpa
        total += tpa * tpa / denom
    return total / acc.tp


def so_detre(acc: MatchAccumulator) -> float:
    """Detection recall tp / (tp + fn); 1.0 when there is nothing to recall."""
    if acc.tp + acc.fn == 0:
        return 1.0
    return acc.tp / (acc.tp + acc.fn)


def so_detpr(acc: MatchAccumulator) -> float:
    """Detection precision tp / (tp + fp); 1.0 when nothing was predicted."""
    if acc.tp + acc.fp == 0:
        return 1.0
    return acc.tp / (acc.tp + acc.fp)


@dataclass
class SuiteCounts:
    """Additive per-threshold counts for one sequence or a pooled set."""

    alphas: tuple[float, ...]
    tp: np.ndarray
    ass_num: np.ndarray
    gt_total: int
    pred_total: int

    @property
    def vacuous(self) -> bool:
        return self.gt_total == 0 and self.pred_total == 0

    def add(self, other: "SuiteCounts") -> "SuiteCounts":
        if self.alphas != other.alphas:
            raise ValidationError("cannot pool counts built on different threshold grids")
        return SuiteCounts(
            alphas=self.alphas,
            tp=self.tp + other.tp,
            ass_num=self.ass_num + other.ass_num,
            gt_total=self.gt_total + other.gt_total,
            pred_total=self.pred_total + other.pred_total,
        )


def _suite_counts(accs: dict[float, MatchAccumulator]) -> SuiteCounts:
    alphas = tuple(sorted(accs))
    tp = np.array([accs[a].tp for a in alphas], dtype=np.int64)
    ass_num = np.zeros(len(alphas), dtype=float)
    for i, a in enumerate(alphas):
        acc = accs[a]
        for (g, p), tpa in acc.pair_tp.items():
            ass_num[i] += tpa * tpa / (acc.gt_track_size[g] + acc.pred_track_size[p] - tpa)
    first = accs[alphas[0]]
    return SuiteCounts(
        alphas=alphas,
        tp=tp,
        ass_num=ass_num,
        gt_total=first.tp + first.fn,
        pred_total=first.tp + first.fp,
    )


def _suite_scores(c: SuiteCounts, prefix: str, with_re_pr: bool):
    """Scores and per-threshold curves from additive counts."""
    n = len(c.alphas)
    names = [f"{prefix}hota", f"{prefix}deta", f"{prefix}assa"]
    if with_re_pr:
        names += [f"{prefix}detre", f"{prefix}detpr"]
    if c.vacuous:
        curves = {name: np.ones(n) for name in names}
    else:
        tp = c.tp.astype(float)
        fn = float(c.gt_total) - tp
        fp = float(c.pred_total) - tp
        deta = tp / (tp + fn + fp)
        assa = np.divide(c.ass_num, tp, out=np.zeros(n), where=c.tp > 0)
        curves = {
            f"{prefix}hota": np.sqrt(deta * assa),
            f"{prefix}deta": deta,
            f"{prefix}assa": assa,
        }
        if with_re_pr:
            curves[f"{prefix}detre"] = tp / c.gt_total if c.gt_total else np.ones(n)
            curves[f"{prefix}detpr"] = (
                np.divide(tp, tp + fp, out=np.ones(n), where=(tp + fp) > 0)
            )
    scores = {name: float(curve.mean()) for name, curve in curves.items()}
    scores["vacuous"] = c.vacuous
    return scores, curves


@dataclass
class SuiteResult:
    """Threshold-averaged scores, pooled and per sequence."""

    measure: str
    alphas: tuple[float, ...]
    mean_size: float | None
    pooled: dict[str, float | bool]
    pooled_alpha: dict[str, np.ndarray]
    per_sequence: dict[str, dict[str, float | bool]]
    seq_counts: list[tuple[str, SuiteCounts]]
    pooled_counts: SuiteCounts


def _pooled_mean_size(pairs: Sequence[SequencePair]) -> float:
    """Mean object size over all gt boxes of all sequences."""
    total = 0.0
    count = 0
    for pair in pairs:
        boxes = pair.gt_columns.boxes
        total += float((boxes[:, 2] * boxes[:, 3]).sum())
        count += boxes.shape[0]
    if count == 0:
        raise ValidationError("mean object size undefined for empty ground truth; "
                              "supply an explicit size override")
    return math.sqrt(total / count)


def _run_suite(
    pairs: Sequence[SequencePair],
    measure: str,
    prefix: str,
    with_re_pr: bool,
    mean_size: float | None,
    alphas: Sequence[float],
) -> SuiteResult:
    alphas = tuple(_normalized_alphas(alphas))
    seq_counts = [
        (p.name, _suite_counts(accumulate(p, measure, mean_size, alphas)))
        for p in pairs
    ]
    return _assemble_suite(measure, prefix, with_re_pr, mean_size, alphas, seq_counts)


def _assemble_suite(measure, prefix, with_re_pr, mean_size, alphas, seq_counts) -> SuiteResult:
    pooled_counts = SuiteCounts(alphas, np.zeros(len(alphas), dtype=np.int64),
                                np.zeros(len(alphas)), 0, 0)
    per_sequence = {}
    for name, counts in seq_counts:
        pooled_counts = pooled_counts.add(counts)
        per_sequence[name], _ = _suite_scores(counts, prefix, with_re_pr)
    pooled, pooled_alpha = _suite_scores(pooled_counts, prefix, with_re_pr)
    return SuiteResult(
        measure=measure,
        alphas=alphas,
        mean_size=mean_size,
        pooled=pooled,
        pooled_alpha=pooled_alpha,
        per_sequence=per_sequence,
        seq_counts=seq_counts,
        pooled_counts=pooled_counts,
    )


def so_hota_suite(
    pairs: Sequence[SequencePair],
    mean_size: float | None = None,
    alphas: Sequence[float] = DEFAULT_ALPHAS,
) -> SuiteResult:
    """Small-object suite: dot-distance similarity over the threshold grid.

    mean_size defaults to the pooled mean object size of the evaluated
    ground truth.
    """
    if mean_size is None:
        mean_size = _pooled_mean_size(pairs)
    return _run_suite(pairs, "dotd", "so_", True, mean_size, alphas)


def hota_suite(
    pairs: Sequence[SequencePair],
    alphas: Sequence[float] = DEFAULT_ALPHAS,
) -> SuiteResult:
    """Classical suite: IoU similarity over the threshold grid."""
    return _run_suite(pairs, "iou", "", False, None, alphas)


@dataclass
class ClearCounts:
    """Additive CLEAR counts for one sequence or a pooled set."""

    gt_total: int = 0
    pred_total: int = 0
    fn: int = 0
    fp: int = 0
    idsw: int = 0
    gt_tracks: int = 0
    mostly_tracked: int = 0
    mostly_lost: int = 0

    def add(self, o: "ClearCounts") -> "ClearCounts":
        return ClearCounts(
            self.gt_total + o.gt_total, self.pred_total + o.pred_total,
            self.fn + o.fn, self.fp + o.fp, self.idsw + o.idsw,
            self.gt_tracks + o.gt_tracks,
            self.mostly_tracked + o.mostly_tracked, self.mostly_lost + o.mostly_lost,
        )


def _clear_sequence(pair: SequencePair, iou_threshold: float) -> ClearCounts:
    gt = pair.gt_columns
    pred = pair.pred_columns
    counts = ClearCounts(gt_total=len(pair.gt), pred_total=len(pair.pred),
                         gt_tracks=len(gt.track_ids))
    matched_frames = {int(t): 0 for t in gt.track_ids}
    last_matched: dict[int, int] = {}
    prev_pairs: dict[int, int] = {}
    for f in range(1, pair.frame_count + 1):
        gs = gt.frame_slice(f)
        ps = pred.frame_slice(f)
        n_g = gs.stop - gs.start
        n_p = ps.stop - ps.start
        if n_g == 0 and n_p == 0:
            prev_pairs = {}
            continue
        if n_g == 0 or n_p == 0:
            counts.fn += n_g
            counts.fp += n_p
            prev_pairs = {}
            continue
        g_tids = gt.track_ids[gt.track_idx[gs]]
        p_tids = pred.track_ids[pred.track_idx[ps]]
        iou = iou_matrix(gt.boxes[gs], pred.boxes[ps])
        g_pos = {int(t): i for i, t in enumerate(g_tids)}
        p_pos = {int(t): j for j, t in enumerate(p_tids)}

        # keep still-valid pairings from the previous frame
        matches: dict[int, int] = {}
        for g_tid, p_tid in prev_pairs.items():
            gi = g_pos.get(g_tid)
            pj = p_pos.get(p_tid)
            if gi is not None and pj is not None and iou[gi, pj] >= iou_threshold:
                matches[g_tid] = p_tid
        free_g = [i for t, i in g_pos.items() if t not in matches]
        used_p = set(matches.values())
        free_p = [j for t, j in p_pos.items() if t not in used_p]
        if free_g and free_p:
            sub = iou[np.ix_(free_g, free_p)]
            eligible = sub >= iou_threshold
            if eligible.any():
                rows, cols = linear_sum_assignment(np.where(eligible, sub, 0.0),
                                                   maximize=True)
                for i, j in zip(rows, cols):
                    if eligible[i, j]:
                        matches[int(g_tids[free_g[i]])] = int(p_tids[free_p[j]])

        counts.fn += n_g - len(matches)
        counts.fp += n_p - len(matches)
        for g_tid, p_tid in matches.items():
            if g_tid in last_matched and last_matched[g_tid] != p_tid:
                counts.idsw += 1
            last_matched[g_tid] = p_tid
            matched_frames[g_tid] += 1
        prev_pairs = matches

    sizes = {int(t): int(s) for t, s in zip(gt.track_ids, gt.track_sizes)}
    for tid, size in sizes.items():
        ratio = matched_frames[tid] / size
        if ratio >= 0.8:
            counts.mostly_tracked += 1
        if ratio <= 0.2:
            counts.mostly_lost += 1
    return counts


def _clear_scores(c: ClearCounts) -> dict[str, float | int | None]:
    mota = None
    if c.gt_total > 0:
        mota = 1.0 - (c.fn + c.fp + c.idsw) / c.gt_total
    mt = c.mostly_tracked / c.gt_tracks if c.gt_tracks else None
    ml = c.mostly_lost / c.gt_tracks if c.gt_tracks else None
    return {"mota": mota, "mt": mt, "ml": ml,
            "idsw": c.idsw, "fp": c.fp, "fn": c.fn}


@dataclass
class ClearResult:
    """CLEAR metrics with frame-to-frame identity carry-over at fixed IoU."""

    iou_threshold: float
    pooled: dict[str, float | int | None]
    per_sequence: dict[str, dict[str, float | int | None]]
    seq_counts: list[tuple[str, ClearCounts]]
    pooled_counts: ClearCounts


def clear_metrics(pairs: Sequence[SequencePair], iou_threshold: float = 0.5) -> ClearResult:
    """MOTA, MT, ML and identity-switch counts at one IoU threshold.

    A sequence without ground truth gets a null MOTA; pooled MOTA over zero
    ground-truth detections is an error.
    """
    seq_counts = [(p.name, _clear_sequence(p, iou_threshold)) for p in pairs]
    return _assemble_clear(iou_threshold, seq_counts)


def _assemble_clear(iou_threshold, seq_counts) -> ClearResult:
    pooled_counts = ClearCounts()
    per_sequence = {}
    for name, c in seq_counts:
        pooled_counts = pooled_counts.add(c)
        per_sequence[name] = _clear_scores(c)
    if pooled_counts.gt_total == 0:
        raise ValidationError("MOTA undefined: no ground-truth detections in any sequence")
    return ClearResult(iou_threshold, _clear_scores(pooled_counts), per_sequence,
                       seq_counts, pooled_counts)


@dataclass
class IdCounts:
    """Additive identity-measure counts."""

    idtp: int = 0
    gt_total: int = 0
    pred_total: int = 0

    def add(self, o: "IdCounts") -> "IdCounts":
        return IdCounts(self.idtp + o.idtp, self.gt_total + o.gt_total,
                        self.pred_total + o.pred_total)


def _idf1_sequence(pair: SequencePair, iou_threshold: float) -> IdCounts:
    gt = pair.gt_columns
    pred = pair.pred_columns
    overlap = np.zeros((len(gt.track_ids), len(pred.track_ids)), dtype=np.int64)
    frames_both = np.intersect1d(np.unique(gt.frames), np.unique(pred.frames))
    for f in frames_both:
        gs = gt.frame_slice(int(f))
        ps = pred.frame_slice(int(f))
        hits = iou_matrix(gt.boxes[gs], pred.boxes[ps]) >= iou_threshold
        np.add.at(overlap, (gt.track_idx[gs][:, None], pred.track_idx[ps][None, :]),
                  hits.astype(np.int64))
    idtp = 0
    if overlap.size:
        # maximizing co-matched frames over a one-to-one track pairing
        # minimizes the total count of frames each track spends unpaired
        rows, cols = linear_sum_assignment(overlap, maximize=True)
        idtp = int(overlap[rows, cols].sum())
    return IdCounts(idtp=idtp, gt_total=len(pair.gt), pred_total=len(pair.pred))


def _idf1_scores(c: IdCounts) -> dict[str, float | bool]:
    if c.gt_total == 0 and c.pred_total == 0:
        return {"idf1": 1.0, "vacuous": True}
    return {"idf1": 2.0 * c.idtp / (c.gt_total + c.pred_total), "vacuous": False}


@dataclass
class IdResult:
    """Global identity-preservation score."""

    iou_threshold: float
    pooled: dict[str, float]
    per_sequence: dict[str, dict[str, float]]
    seq_counts: list[tuple[str, IdCounts]]
    pooled_counts: IdCounts


def idf1(pairs: Sequence[SequencePair], iou_threshold: float = 0.5) -> IdResult:
    """IDF1 from an optimal global track-to-track pairing per sequence."""
    seq_counts = [(p.name, _idf1_sequence(p, iou_threshold)) for p in pairs]
    return _assemble_idf1(iou_threshold, seq_counts)


def _assemble_idf1(iou_threshold, seq_counts) -> IdResult:
    pooled_counts = IdCounts()
    per_sequence = {}
    for name, c in seq_counts:
        pooled_counts = pooled_counts.add(c)
        per_sequence[name] = _idf1_scores(c)
    return IdResult(iou_threshold, _idf1_scores(pooled_counts), per_sequence,
                    seq_counts, pooled_counts)


def _ordered(d: dict) -> dict:
    out = {k: d[k] for k in _KEY_ORDER if k in d}
    out.update({k: v for k, v in d.items() if k not in out})
    return out


@dataclass
class MetricReport:
    """Pooled and per-sequence scores plus the configuration that made them."""

    config: dict
    pooled: dict
    per_sequence: dict[str, dict]
    pooled_alpha: dict[str, np.ndarray]
    family_counts: dict[str, list[tuple[str, object]]]
    iou_threshold: float = 0.5

    def to_json_dict(self) -> dict:
        def clean(value):
            if isinstance(value, (np.floating, np.integer)):
                return value.item()
            return value

        return {
            "pooled": {k: clean(v) for k, v in _ordered(self.pooled).items()},
            "per_sequence": {
                name: {k: clean(v) for k, v in _ordered(scores).items()}
                for name, scores in sorted(self.per_sequence.items())
            },
            "config": dict(self.config),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    def to_csv(self) -> str:
        """Flat table: one row per sequence plus a __pooled__ row."""
        doc = self.to_json_dict()
        keys = list(doc["pooled"].keys())
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["sequence"] + keys)

        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, bool):
                return str(v).lower()
            if isinstance(v, float):
                return format(v, ".10g")
            return v

        for name, scores in doc["per_sequence"].items():
            writer.writerow([name] + [fmt(scores.get(k)) for k in keys])
        writer.writerow(["__pooled__"] + [fmt(doc["pooled"].get(k)) for k in keys])
        return buf.getvalue()


def _normalize_families(metrics: Sequence[str]) -> list[str]:
    requested = []
    for m in metrics:
        key = m.strip().lower().replace("-", "_")
        if key == "all":
            return list(METRIC_FAMILIES)
        if key not in METRIC_FAMILIES:
            raise ValidationError(
                f"unknown metric family {m!r}; choose from "
                f"{', '.join(METRIC_FAMILIES)}, all"
            )
        if key not in requested:
            requested.append(key)
    if not requested:
        raise ValidationError("no metric families requested")
    return requested


# Sequence list shared with forked evaluation workers; fork inherits it so
# only the small per-sequence counts travel back over the pipe.
_WORKER_PAIRS: list[SequencePair] = []
_WORKER_PARAMS: dict = {}


def _count_one(pair: SequencePair, families, mean_size, alphas, iou_threshold) -> dict:
    out = {"meta": (len(pair.gt), len(pair.pred))}
    if "so_hota" in families:
        out["so_hota"] = _suite_counts(accumulate(pair, "dotd", mean_size, alphas))
    if "hota" in families:
        out["hota"] = _suite_counts(accumulate(pair, "iou", None, alphas))
    if "clear" in families:
        out["clear"] = _clear_sequence(pair, iou_threshold)
    if "idf1" in families:
        out["idf1"] = _idf1_sequence(pair, iou_threshold)
    return out


def _worker(index: int) -> tuple[int, dict]:
    p = _WORKER_PARAMS
    return index, _count_one(_WORKER_PAIRS[index], p["families"], p["mean_size"],
                             p["alphas"], p["iou_threshold"])


def evaluate_sequences(
    pairs: Sequence[SequencePair],
    metrics: Sequence[str] = METRIC_FAMILIES,
    mean_size: float | None = None,
    alphas: Sequence[float] = DEFAULT_ALPHAS,
    iou_threshold: float = 0.5,
    jobs: int = 1,
) -> MetricReport:
    """Evaluate paired sequences and assemble a MetricReport.

    jobs > 1 distributes sequences over worker processes; scheduling never
    changes the result because only per-sequence counts are summed.
    """
    if not pairs:
        raise ValidationError("nothing to evaluate: no sequences")
    names = [p.name for p in pairs]
    if len(set(names)) != len(names):
        raise ValidationError("duplicate sequence names in evaluation input")
    families = _normalize_families(metrics)
    alphas = tuple(_normalized_alphas(alphas))
    s_used = None
    if "so_hota" in families:
        s_used = float(mean_size) if mean_size is not None else _pooled_mean_size(pairs)
        if s_used <= 0 or not math.isfinite(s_used):
            raise ValidationError(f"mean size override must be finite and > 0, got {s_used}")

    per_seq: list[dict | None] = [None] * len(pairs)
    use_procs = jobs > 1 and len(pairs) > 1 and hasattr(os, "fork")
    if use_procs:
        import concurrent.futures
        import multiprocessing

        global _WORKER_PAIRS, _WORKER_PARAMS
        _WORKER_PAIRS = list(pairs)
        _WORKER_PARAMS = {"families": families, "mean_size": s_used,
                          "alphas": alphas, "iou_threshold": iou_threshold}
        ctx = multiprocessing.get_context("fork")
        try:
            with concurrent.futures.ProcessPoolExecutor(
                max_workers=min(jobs, len(pairs)), mp_context=ctx
            ) as pool_exec:
                for index, counts in pool_exec.map(_worker, range(len(pairs))):
                    per_seq[index] = counts
        finally:
            _WORKER_PAIRS = []
            _WORKER_PARAMS = {}
    else:
        for i, pair in enumerate(pairs):
            per_seq[i] = _count_one(pair, families, s_used, alphas, iou_threshold)

    pooled: dict = {}
    per_sequence: dict[str, dict] = {name: {} for name in names}
    pooled_alpha: dict[str, np.ndarray] = {}
    family_counts: dict[str, list[tuple[str, object]]] = {}

    family_counts["meta"] = [(n, c["meta"]) for n, c in zip(names, per_seq)]
    gt_sum = sum(c["meta"][0] for c in per_seq)
    pred_sum = sum(c["meta"][1] for c in per_seq)
    pooled["vacuous"] = gt_sum == 0 and pred_sum == 0
    for name, counts in zip(names, per_seq):
        per_sequence[name]["vacuous"] = counts["meta"] == (0, 0)

    if "so_hota" in families:
        seq_counts = [(n, c["so_hota"]) for n, c in zip(names, per_seq)]
        family_counts["so_hota"] = seq_counts
        suite = _assemble_suite("dotd", "so_", True, s_used, alphas, seq_counts)
        _merge_family(pooled, per_sequence, suite.pooled, suite.per_sequence)
        pooled_alpha.update(suite.pooled_alpha)
    if "hota" in families:
        seq_counts = [(n, c["hota"]) for n, c in zip(names, per_seq)]
        family_counts["hota"] = seq_counts
        suite = _assemble_suite("iou", "", False, None, alphas, seq_counts)
        _merge_family(pooled, per_sequence, suite.pooled, suite.per_sequence)
        pooled_alpha.update(suite.pooled_alpha)
    if "clear" in families:
        seq_counts = [(n, c["clear"]) for n, c in zip(names, per_seq)]
        family_counts["clear"] = seq_counts
        clear = _assemble_clear(iou_threshold, seq_counts)
        _merge_family(pooled, per_sequence, clear.pooled, clear.per_sequence)
    if "idf1" in families:
        seq_counts = [(n, c["idf1"]) for n, c in zip(names, per_seq)]
        family_counts["idf1"] = seq_counts
        ids = _assemble_idf1(iou_threshold, seq_counts)
        _merge_family(pooled, per_sequence, ids.pooled, ids.per_sequence)

    config = {
        "measure": "dotd" if "so_hota" in families else "iou",
        "thresholds": list(alphas),
        "s_used": s_used,
    }
    return MetricReport(config, pooled, per_sequence, pooled_alpha, family_counts,
                        iou_threshold=iou_threshold)


def _merge_family(pooled, per_sequence, fam_pooled, fam_per_seq):
    for k, v in fam_pooled.items():
        if k != "vacuous":
            pooled[k] = v
    for name, scores in fam_per_seq.items():
        for k, v in scores.items():
            if k != "vacuous":
                per_sequence[name][k] = v


def pool(reports: Sequence[MetricReport]) -> MetricReport:
    """Pool reports built with identical configuration into one.

    Count-level: per-sequence counts from every report are summed before
    any ratio is formed, so pooling a dataset with a copy of itself leaves
    every ratio metric unchanged.
    """
    if not reports:
        raise ValidationError("nothing to pool: no reports")
    config = reports[0].config
    iou_threshold = reports[0].iou_threshold
    for r in reports[1:]:
        if r.config != config or r.iou_threshold != iou_threshold:
            raise ValidationError(
                f"cannot pool reports with different configs: {r.config} vs {config}"
            )
    families = set()
    for r in reports:
        families.update(r.family_counts)
    merged: dict[str, list[tuple[str, object]]] = {
        fam: [sc for r in reports for sc in r.family_counts.get(fam, [])]
        for fam in families
    }
    alphas = tuple(config["thresholds"])
    s_used = config["s_used"]

    pooled: dict = {}
    per_sequence: dict[str, dict] = {}
    pooled_alpha: dict[str, np.ndarray] = {}
    gt_sum = sum(c[0] for _, c in merged["meta"])
    pred_sum = sum(c[1] for _, c in merged["meta"])
    pooled["vacuous"] = gt_sum == 0 and pred_sum == 0
    for name, c in merged["meta"]:
        per_sequence.setdefault(name, {})["vacuous"] = c == (0, 0)
    if "so_hota" in merged:
        suite = _assemble_suite("dotd", "so_", True, s_used, alphas, merged["so_hota"])
        _merge_family(pooled, per_sequence, suite.pooled, suite.per_sequence)
        pooled_alpha.update(suite.pooled_alpha)
    if "hota" in merged:
        suite = _assemble_suite("iou", "", False, None, alphas, merged["hota"])
        _merge_family(pooled, per_sequence, suite.pooled, suite.per_sequence)
        pooled_alpha.update(suite.pooled_alpha)
    if "clear" in merged:
        clear = _assemble_clear(iou_threshold, merged["clear"])
        _merge_family(pooled, per_sequence, clear.pooled, clear.per_sequence)
    if "idf1" in merged:
        ids = _assemble_idf1(iou_threshold, merged["idf1"])
        _merge_family(pooled, per_sequence, ids.pooled, ids.per_sequence)
    return MetricReport(dict(config), pooled, per_sequence, pooled_alpha, merged,
                        iou_threshold=iou_threshold)
