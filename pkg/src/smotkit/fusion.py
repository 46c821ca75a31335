"""Combining detector outputs: weighted box fusion, ensembles, gap filling."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .data_io import Detection
from .errors import ValidationError
from .geometry import BoundingBox, boxes_to_array, iou_matrix


def wbf(
    box_lists: Sequence[Sequence[tuple[BoundingBox, float]]],
    weights: Sequence[float],
    cluster_iou: float = 0.55,
) -> list[tuple[BoundingBox, float]]:
    """Weighted box fusion across detectors for one frame.

    Each detector contributes (box, confidence) pairs and a weight; the
    weights must sum to 1 within 1e-9. Boxes are visited in descending
    confidence and greedily joined to the first-best existing cluster whose
    running fused box overlaps by at least cluster_iou, else they start a
    new cluster. Fused coordinates are the weight-times-confidence average
    of the members; fused confidence is the weight average.
    """
    if len(weights) != len(box_lists):
        raise ValidationError(
            f"{len(box_lists)} detector lists but {len(weights)} weights"
        )
    total = float(sum(weights))
    if abs(total - 1.0) > 1e-9:
        raise ValidationError(f"detector weights must sum to 1, got {total!r}")

    entries = []  # (conf, order, ltwh array, weight)
    order = 0
    for det_weight, boxes in zip(weights, box_lists):
        for box, conf in boxes:
            entries.append((float(conf), order, box.as_array(), float(det_weight)))
            order += 1
    entries.sort(key=lambda e: (-e[0], e[1]))

    coord_num: list[np.ndarray] = []
    coord_den: list[float] = []
    conf_num: list[float] = []
    weight_sum: list[float] = []
    fused: list[np.ndarray] = []
    for conf, _, coords, det_weight in entries:
        wc = det_weight * conf
        best = -1
        best_iou = cluster_iou
        if fused:
            ious = iou_matrix(coords[None, :], np.stack(fused))[0]
            j = int(np.argmax(ious))
            if ious[j] >= best_iou:
                best = j
        if best < 0:
            coord_num.append(wc * coords)
            coord_den.append(wc)
            conf_num.append(det_weight * conf)
            weight_sum.append(det_weight)
            fused.append(coords.copy())
        else:
            coord_num[best] = coord_num[best] + wc * coords
            coord_den[best] += wc
            conf_num[best] += det_weight * conf
            weight_sum[best] += det_weight
            fused[best] = coord_num[best] / coord_den[best]
    out = []
    for num, den, cn, ws in zip(coord_num, coord_den, conf_num, weight_sum):
        coords = num / den
        out.append((BoundingBox(*coords), cn / ws))
    return out


def adaptive_wbf_weights(confidences_per_detector: Sequence[Sequence[float]]) -> list[float]:
    """Per-frame fusion weights proportional to each detector's mean
    confidence.

    A detector with no detections this frame contributes a zero mean. All
    detectors empty is an error: there is nothing to weight.
    """
    means = []
    for confs in confidences_per_detector:
        confs = list(confs)
        means.append(sum(confs) / len(confs) if confs else 0.0)
    total = sum(means)
    if total == 0.0:
        raise ValidationError("no detections from any detector; weights undefined")
    return [m / total for m in means]


def intersection_ensemble(
    primary: Sequence[Detection],
    secondary: Sequence[Detection],
) -> list[Detection]:
    """Keep each primary detection only if it overlaps some secondary box.

    Overlap means strictly positive IoU. Output preserves primary order.
    """
    primary = list(primary)
    if not primary:
        return []
    if not secondary:
        return []
    ious = iou_matrix(boxes_to_array([d.box for d in primary]),
                      boxes_to_array([d.box for d in secondary]))
    keep = (ious > 0.0).any(axis=1)
    return [d for d, k in zip(primary, keep) if k]


def interpolate_tracks(detections: Sequence[Detection], max_gap: int = 20) -> list[Detection]:
    """Fill short per-track gaps by linear interpolation.

    Every detection must carry a track id. For consecutive observations of
    a track that are separated by up to max_gap missing frames, the box
    coordinates and confidence are interpolated linearly frame by frame.
    Returns all detections sorted by (frame, id).
    """
    by_track: dict[int, list[Detection]] = {}
    for det in detections:
        if det.track_id is None:
            raise ValidationError("interpolation requires track ids on every detection")
        by_track.setdefault(det.track_id, []).append(det)

    out = list(detections)
    for tid, dets in by_track.items():
        dets.sort(key=lambda d: d.frame)
        for prev, nxt in zip(dets, dets[1:]):
            missing = nxt.frame - prev.frame - 1
            if not 1 <= missing <= max_gap:
                continue
            a = prev.box.as_array()
            b = nxt.box.as_array()
            span = nxt.frame - prev.frame
            for k in range(1, missing + 1):
                t = k / span
                coords = a + (b - a) * t
                out.append(Detection(
                    frame=prev.frame + k,
                    track_id=tid,
                    box=BoundingBox(*coords),
                    confidence=prev.confidence + (nxt.confidence - prev.confidence) * t,
                    class_id=prev.class_id,
                ))
    return sorted(out, key=lambda d: (d.frame, d.track_id))
