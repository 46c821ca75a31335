"""Bounding-box similarity kernels.

Boxes live in continuous pixel coordinates as (left, top, width, height)
with the y axis pointing down. All kernels come in a scalar form working
on :class:`BoundingBox` and a batch form working on (N, 4) float arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ValidationError

# Defaults for the expansion-plus-penalty kernel.
DEFAULT_EXPAND = 0.5
DEFAULT_PENALTY_WEIGHT = 0.25


@dataclass(frozen=True, slots=True)
class BoundingBox:
    """Axis-aligned box, strictly positive width and height."""

    left: float
    top: float
    width: float
    height: float

    def __post_init__(self):
        for name in ("left", "top", "width", "height"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValidationError(f"non-finite box {name}: {v!r}")
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(
                f"non-positive box dimension: width={self.width}, height={self.height}"
            )

    @property
    def center(self) -> tuple[float, float]:
        return (self.left + self.width / 2.0, self.top + self.height / 2.0)

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_array(self) -> np.ndarray:
        return np.array([self.left, self.top, self.width, self.height], dtype=float)


def boxes_to_array(boxes: Iterable[BoundingBox]) -> np.ndarray:
    """Stack boxes into an (N, 4) ltwh array."""
    rows = [(b.left, b.top, b.width, b.height) for b in boxes]
    if not rows:
        return np.zeros((0, 4), dtype=float)
    return np.asarray(rows, dtype=float)


def _check_ltwh(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValidationError(f"expected (N, 4) box array, got shape {arr.shape}")
    return arr


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise intersection over union between two ltwh box arrays."""
    a = _check_ltwh(a)
    b = _check_ltwh(b)
    ax1, ay1 = a[:, 0:1], a[:, 1:2]
    ax2, ay2 = ax1 + a[:, 2:3], ay1 + a[:, 3:4]
    bx1, by1 = b[:, 0], b[:, 1]
    bx2, by2 = bx1 + b[:, 2], by1 + b[:, 3]
    iw = np.minimum(ax2, bx2[None, :]) - np.maximum(ax1, bx1[None, :])
    ih = np.minimum(ay2, by2[None, :]) - np.maximum(ay1, by1[None, :])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    union = (a[:, 2] * a[:, 3])[:, None] + (b[:, 2] * b[:, 3])[None, :] - inter
    # the subtraction above can leave union a few ulp below inter
    return np.clip(inter / union, 0.0, 1.0)


def center_distance_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise Euclidean distance between box centers."""
    a = _check_ltwh(a)
    b = _check_ltwh(b)
    acx = a[:, 0] + a[:, 2] / 2.0
    acy = a[:, 1] + a[:, 3] / 2.0
    bcx = b[:, 0] + b[:, 2] / 2.0
    bcy = b[:, 1] + b[:, 3] / 2.0
    dx = acx[:, None] - bcx[None, :]
    dy = acy[:, None] - bcy[None, :]
    return np.hypot(dx, dy)


def _check_mean_size(mean_size: float) -> float:
    mean_size = float(mean_size)
    if not math.isfinite(mean_size) or mean_size <= 0:
        raise ValidationError(f"mean object size must be finite and > 0, got {mean_size!r}")
    return mean_size


def dotd_matrix(a: np.ndarray, b: np.ndarray, mean_size: float) -> np.ndarray:
    """Pairwise dot distance similarity exp(-D / mean_size)."""
    mean_size = _check_mean_size(mean_size)
    return np.exp(-center_distance_matrix(a, b) / mean_size)


def diou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise distance-IoU: IoU minus squared center distance over squared
    enclosing-box diagonal."""
    a = _check_ltwh(a)
    b = _check_ltwh(b)
    iou = iou_matrix(a, b)
    d = center_distance_matrix(a, b)
    ax1, ay1 = a[:, 0], a[:, 1]
    ax2, ay2 = ax1 + a[:, 2], ay1 + a[:, 3]
    bx1, by1 = b[:, 0], b[:, 1]
    bx2, by2 = bx1 + b[:, 2], by1 + b[:, 3]
    ew = np.maximum(ax2[:, None], bx2[None, :]) - np.minimum(ax1[:, None], bx1[None, :])
    eh = np.maximum(ay2[:, None], by2[None, :]) - np.minimum(ay1[:, None], by1[None, :])
    c2 = ew * ew + eh * eh
    # centers sit inside the enclosing box, so d^2/c^2 <= 1 up to rounding
    return np.clip(iou - (d * d) / c2, -1.0, 1.0)


def expand_boxes(arr: np.ndarray, expand: float) -> np.ndarray:
    """Scale width and height by (1 + 2 * expand) about each box center."""
    arr = _check_ltwh(arr)
    factor = 1.0 + 2.0 * float(expand)
    if factor <= 0:
        raise ValidationError(f"expansion factor must keep sizes positive, got expand={expand}")
    out = arr.copy()
    out[:, 0] = arr[:, 0] + arr[:, 2] / 2.0 - arr[:, 2] * factor / 2.0
    out[:, 1] = arr[:, 1] + arr[:, 3] / 2.0 - arr[:, 3] * factor / 2.0
    out[:, 2] = arr[:, 2] * factor
    out[:, 3] = arr[:, 3] * factor
    return out


def expanded_penalty_matrix(
    a: np.ndarray,
    b: np.ndarray,
    expand: float = DEFAULT_EXPAND,
    penalty_weight: float = DEFAULT_PENALTY_WEIGHT,
    mean_size: float = 1.0,
) -> np.ndarray:
    """IoU of expanded boxes minus a weighted normalized-distance penalty.

    The penalty term is penalty_weight * (1 - exp(-D / mean_size)), so the
    score can go slightly negative for distant pairs.
    """
    mean_size = _check_mean_size(mean_size)
    ea = expand_boxes(a, expand)
    eb = expand_boxes(b, expand)
    penalty = penalty_weight * (1.0 - np.exp(-center_distance_matrix(a, b) / mean_size))
    return iou_matrix(ea, eb) - penalty


def center_distance(a: BoundingBox, b: BoundingBox) -> float:
    """Euclidean distance between the centers of two boxes."""
    acx, acy = a.center
    bcx, bcy = b.center
    return math.hypot(acx - bcx, acy - bcy)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes, in [0, 1]."""
    return float(iou_matrix(a.as_array()[None, :], b.as_array()[None, :])[0, 0])


def dotd(a: BoundingBox, b: BoundingBox, mean_size: float) -> float:
    """Dot distance similarity exp(-D / mean_size), in (0, 1].

    D is the center distance and mean_size the dataset mean object size;
    the similarity is 1 for coincident centers and decays exponentially
    with distance measured in units of mean_size.
    """
    mean_size = _check_mean_size(mean_size)
    return math.exp(-center_distance(a, b) / mean_size)


def diou(a: BoundingBox, b: BoundingBox) -> float:
    """Distance-IoU of two boxes, in (-1, 1]. Never exceeds plain IoU."""
    return float(diou_matrix(a.as_array()[None, :], b.as_array()[None, :])[0, 0])


def expanded_penalty_similarity(
    a: BoundingBox,
    b: BoundingBox,
    expand: float = DEFAULT_EXPAND,
    penalty_weight: float = DEFAULT_PENALTY_WEIGHT,
    mean_size: float = 1.0,
) -> float:
    """Similarity for fast small objects: expand both boxes, take IoU, then
    subtract penalty_weight * (1 - exp(-D / mean_size))."""
    return float(
        expanded_penalty_matrix(
            a.as_array()[None, :],
            b.as_array()[None, :],
            expand=expand,
            penalty_weight=penalty_weight,
            mean_size=mean_size,
        )[0, 0]
    )


def mean_object_size(boxes: Iterable[BoundingBox]) -> float:
    """Dataset mean object size: sqrt of the mean box area.

    The mean runs over every annotated box, so how boxes are grouped into
    images does not affect the value. Empty input is an error; callers
    evaluating unlabeled data must supply an explicit override instead.
    """
    total = 0.0
    count = 0
    for box in boxes:
        total += box.width * box.height
        count += 1
    if count == 0:
        raise ValidationError("mean object size undefined for empty ground truth; "
                              "supply an explicit size override")
    return math.sqrt(total / count)
