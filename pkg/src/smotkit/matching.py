"""Per-frame detection matching and sequence-level accumulation.

Matching is threshold-gated and runs in two passes over a sequence. The
first pass scores every (gt track, pred track) pair with a Jaccard-style
association potential built from frame similarities. The second pass
solves a per-frame assignment at each threshold alpha, preferring, in
order: more matched pairs, larger total potential, larger total
similarity. Both tie-break tiers are folded into one Hungarian solve by
scoring eligible pairs as K + potential + eps * sim with K large and eps
tiny.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, permutations
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .data_io import SequencePair
from .errors import ValidationError
from .geometry import (
    DEFAULT_EXPAND,
    DEFAULT_PENALTY_WEIGHT,
    BoundingBox,
    boxes_to_array,
    diou_matrix,
    dotd_matrix,
    expanded_penalty_matrix,
    iou_matrix,
)

# Canonical threshold grid: 0.05, 0.10, ... 0.95.
DEFAULT_ALPHAS: tuple[float, ...] = tuple(round(k * 0.05, 2) for k in range(1, 20))

MEASURES = ("iou", "dotd", "diou", "expanded_penalty")


def _as_box_array(side) -> np.ndarray:
    if isinstance(side, np.ndarray):
        return side
    items = list(side)
    if items and isinstance(items[0], BoundingBox):
        return boxes_to_array(items)
    return boxes_to_array([d.box for d in items])


def similarity_matrix(
    gt_frame,
    pred_frame,
    measure: str,
    mean_size: float | None = None,
    *,
    expand: float = DEFAULT_EXPAND,
    penalty_weight: float = DEFAULT_PENALTY_WEIGHT,
) -> np.ndarray:
    """Pairwise similarity between one frame's gt and pred boxes.

    Accepts detections, boxes, or (N, 4) ltwh arrays on either side.
    measure is one of iou, dotd, diou, expanded_penalty; the distance-based
    measures require mean_size.
    """
    a = _as_box_array(gt_frame)
    b = _as_box_array(pred_frame)
    if measure == "iou":
        return iou_matrix(a, b)
    if measure == "dotd":
        if mean_size is None:
            raise ValidationError("measure 'dotd' requires a mean object size")
        return dotd_matrix(a, b, mean_size)
    if measure == "diou":
        return diou_matrix(a, b)
    if measure == "expanded_penalty":
        if mean_size is None:
            raise ValidationError("measure 'expanded_penalty' requires a mean object size")
        return expanded_penalty_matrix(a, b, expand=expand,
                                       penalty_weight=penalty_weight, mean_size=mean_size)
    raise ValidationError(f"unknown similarity measure {measure!r}; choose from {MEASURES}")


@dataclass
class MatchAccumulator:
    """Match counts for one sequence (or a pooled set) at one threshold.

    pair_tp counts, per (gt track id, pred track id), the frames in which
    the two were matched. Track sizes are total detections per track and do
    not depend on the threshold.
    """

    alpha: float
    tp: int
    fn: int
    fp: int
    pair_tp: dict[tuple[int, int], int]
    gt_track_size: dict[int, int]
    pred_track_size: dict[int, int]

    def check_identities(self) -> None:
        """Assert the bookkeeping identities; used by tests."""
        assert self.tp == sum(self.pair_tp.values())
        assert self.tp + self.fn == sum(self.gt_track_size.values())
        assert self.tp + self.fp == sum(self.pred_track_size.values())
        for (g, p), count in self.pair_tp.items():
            assert count <= min(self.gt_track_size[g], self.pred_track_size[p])


def _tier_constants(shape: tuple[int, int], potential: np.ndarray) -> tuple[float, float]:
    # K dominates any achievable potential + eps * sim total, so the solver
    # maximizes match count first; eps keeps similarity a pure tie-break.
    n = max(shape[0], shape[1], 1)
    maxpot = float(potential.max()) if potential.size else 0.0
    k = n * (1.0 + max(maxpot, 0.0)) + 1.0
    eps = 1.0 / (n * n * 1.0e6)
    return k, eps


def _coerce(sim, potential) -> tuple[np.ndarray, np.ndarray]:
    sim = np.asarray(sim, dtype=float)
    if sim.ndim != 2:
        raise ValidationError(f"similarity matrix must be 2-D, got shape {sim.shape}")
    if potential is None:
        potential = np.zeros_like(sim)
    else:
        potential = np.asarray(potential, dtype=float)
        if potential.shape != sim.shape:
            raise ValidationError(
                f"potential shape {potential.shape} does not match similarity {sim.shape}"
            )
    return sim, potential


def match_frame(sim, alpha: float, potential=None) -> set[tuple[int, int]]:
    """One-to-one matching of a frame at threshold alpha.

    Only pairs with sim >= alpha are matchable (boundary equality counts).
    Among maximum-cardinality assignments the solver prefers larger total
    association potential, then larger total similarity. Returns the set of
    matched (row, column) index pairs.
    """
    sim, potential = _coerce(sim, potential)
    if 0 in sim.shape:
        return set()
    eligible = sim >= alpha
    if not eligible.any():
        return set()
    k, eps = _tier_constants(sim.shape, potential)
    return _solve_masked(eligible, potential + eps * sim, k)


def _solve_masked(eligible: np.ndarray, base: np.ndarray, k: float) -> set[tuple[int, int]]:
    n_rows, n_cols = eligible.shape
    if n_rows == 1:
        scores = np.where(eligible[0], base[0], -np.inf)
        return {(0, int(np.argmax(scores)))}
    if n_cols == 1:
        scores = np.where(eligible[:, 0], base[:, 0], -np.inf)
        return {(int(np.argmax(scores)), 0)}
    score = np.where(eligible, k + base, 0.0)
    rows, cols = linear_sum_assignment(score, maximize=True)
    return {(int(i), int(j)) for i, j in zip(rows, cols) if eligible[i, j]}


def brute_force_match(sim, alpha: float, potential=None) -> set[tuple[int, int]]:
    """Exhaustive reference matcher for matrices up to 6 x 6.

    Optimizes the same layered objective as match_frame by enumerating all
    one-to-one assignments over eligible pairs; among optima it returns the
    lexicographically smallest pair set.
    """
    sim, potential = _coerce(sim, potential)
    n_rows, n_cols = sim.shape
    if n_rows > 6 or n_cols > 6:
        raise ValidationError(f"brute force matcher limited to 6 x 6, got {sim.shape}")
    if 0 in sim.shape:
        return set()
    eligible = sim >= alpha
    if not eligible.any():
        return set()
    k, eps = _tier_constants(sim.shape, potential)
    base = potential + eps * sim

    best_score = 0.0
    best_pairs: tuple[tuple[int, int], ...] = ()
    rows = range(n_rows)
    cols = list(range(n_cols))
    max_size = min(n_rows, n_cols)
    for size in range(1, max_size + 1):
        for row_subset in combinations(rows, size):
            for col_perm in permutations(cols, size):
                pairs = tuple(zip(row_subset, col_perm))
                if not all(eligible[i, j] for i, j in pairs):
                    continue
                score = sum(k + base[i, j] for i, j in pairs)
                if score > best_score or (score == best_score and pairs < best_pairs):
                    best_score = score
                    best_pairs = pairs
    return set(best_pairs)


class _SequenceEngine:
    """Shared machinery behind association_potential and accumulate."""

    def __init__(self, pair: SequencePair, measure: str, mean_size: float | None,
                 expand: float, penalty_weight: float):
        gt = pair.gt_columns
        pred = pair.pred_columns
        if np.any(gt.track_idx < 0) or np.any(pred.track_idx < 0):
            raise ValidationError(
                f"sequence {pair.name}: evaluation requires track ids on every detection"
            )
        self.gt_ids = gt.track_ids
        self.pred_ids = pred.track_ids
        self.gt_sizes = gt.track_sizes
        self.pred_sizes = pred.track_sizes

        frames_both = np.intersect1d(np.unique(gt.frames), np.unique(pred.frames))
        self.frames: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        pot_num = np.zeros((len(self.gt_ids), len(self.pred_ids)), dtype=float)
        for f in frames_both:
            gs = gt.frame_slice(int(f))
            ps = pred.frame_slice(int(f))
            sim = similarity_matrix(gt.boxes[gs], pred.boxes[ps], measure, mean_size,
                                    expand=expand, penalty_weight=penalty_weight)
            gi = gt.track_idx[gs]
            pi = pred.track_idx[ps]
            np.add.at(pot_num, (gi[:, None], pi[None, :]), sim)
            self.frames.append((gi, pi, sim))
        denom = self.gt_sizes[:, None] + self.pred_sizes[None, :] - pot_num
        with np.errstate(invalid="ignore", divide="ignore"):
            self.potential = np.where(denom > 0, pot_num / denom, 0.0)


def association_potential(
    pair: SequencePair,
    measure: str,
    mean_size: float | None = None,
    *,
    expand: float = DEFAULT_EXPAND,
    penalty_weight: float = DEFAULT_PENALTY_WEIGHT,
) -> dict[tuple[int, int], float]:
    """Sequence-level affinity of every (gt track, pred track) pair.

    For tracks g and p the potential is sum_f sim_f(g, p) divided by
    (|g| + |p| - sum_f sim_f(g, p)), a soft Jaccard index over frames.
    Pairs with zero accumulated similarity are omitted; treat missing keys
    as 0.
    """
    eng = _SequenceEngine(pair, measure, mean_size, expand, penalty_weight)
    out: dict[tuple[int, int], float] = {}
    for gi, pi in np.argwhere(eng.potential > 0):
        out[(int(eng.gt_ids[gi]), int(eng.pred_ids[pi]))] = float(eng.potential[gi, pi])
    return out


def _normalized_alphas(alphas: Sequence[float]) -> list[float]:
    values = sorted(set(float(a) for a in alphas))
    if not values:
        raise ValidationError("threshold grid must not be empty")
    if values[0] <= 0.0 or values[-1] > 1.0:
        raise ValidationError(f"thresholds must lie in (0, 1], got {values}")
    return values


def accumulate(
    pair: SequencePair,
    measure: str,
    mean_size: float | None = None,
    alphas: Sequence[float] = DEFAULT_ALPHAS,
    *,
    expand: float = DEFAULT_EXPAND,
    penalty_weight: float = DEFAULT_PENALTY_WEIGHT,
) -> dict[float, MatchAccumulator]:
    """Run per-frame matching over a sequence at every threshold.

    Returns one MatchAccumulator per alpha. tp counts matched frames, fn
    and fp the unmatched gt and pred detections; pair_tp holds per track
    pair match counts feeding the association score.
    """
    alpha_list = _normalized_alphas(alphas)
    eng = _SequenceEngine(pair, measure, mean_size, expand, penalty_weight)
    n_alpha = len(alpha_list)
    n_g = len(eng.gt_ids)
    n_p = len(eng.pred_ids)
    tp = [0] * n_alpha
    pair_tp = np.zeros((n_alpha, n_g, n_p), dtype=np.int64)

    for gi, pi, sim in eng.frames:
        pot_sub = eng.potential[gi[:, None], pi[None, :]]
        k, eps = _tier_constants(sim.shape, pot_sub)
        base = pot_sub + eps * sim
        cache: dict[bytes, set[tuple[int, int]]] = {}
        # alphas ascend, so eligibility only shrinks; stop once it empties
        for ai, alpha in enumerate(alpha_list):
            eligible = sim >= alpha
            if not eligible.any():
                break
            key = eligible.tobytes()
            pairs = cache.get(key)
            if pairs is None:
                pairs = _solve_masked(eligible, base, k)
                cache[key] = pairs
            tp[ai] += len(pairs)
            for i, j in pairs:
                pair_tp[ai, gi[i], pi[j]] += 1

    total_gt = int(eng.gt_sizes.sum())
    total_pred = int(eng.pred_sizes.sum())
    out: dict[float, MatchAccumulator] = {}
    for ai, alpha in enumerate(alpha_list):
        pairs_dict = {
            (int(eng.gt_ids[g]), int(eng.pred_ids[p])): int(pair_tp[ai, g, p])
            for g, p in np.argwhere(pair_tp[ai] > 0)
        }
        out[alpha] = MatchAccumulator(
            alpha=alpha,
            tp=tp[ai],
            fn=total_gt - tp[ai],
            fp=total_pred - tp[ai],
            pair_tp=pairs_dict,
            gt_track_size={int(t): int(s) for t, s in zip(eng.gt_ids, eng.gt_sizes)},
            pred_track_size={int(t): int(s) for t, s in zip(eng.pred_ids, eng.pred_sizes)},
        )
    return out
