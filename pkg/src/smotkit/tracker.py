"""Reference online tracker.

A constant-velocity Kalman filter per track, associated to detections by a
configurable similarity with a direction-consistency cost, plus the
observation-centric touches that help at low frame rates: velocity
smoothing over the last observed displacement and filter re-runs along a
virtual trajectory after occlusion gaps. Camera motion can be compensated
with per-frame affine transforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .data_io import AffineTransform, Detection
from .errors import ValidationError
from .geometry import BoundingBox, boxes_to_array
from .matching import MEASURES, similarity_matrix

# Noise scales, relative to box dimensions. Velocity starts out very loose
# so a single re-observation effectively sets it.
_POS_WEIGHT = 1.0 / 20.0
_VEL_WEIGHT = 1.0 / 160.0
_MIN_DIM = 1e-3

_F = np.eye(8)
for _i in range(4):
    _F[_i, _i + 4] = 1.0
_H = np.eye(4, 8)


@dataclass
class TrackerConfig:
    """Tunable tracker behavior; defaults suit small fast objects."""

    similarity: str = "dotd"
    assoc_threshold: float = 0.3
    ema_lambda: float = 0.9
    ocm_weight: float = 0.2
    expand: float = 0.5
    penalty_weight: float = 0.25
    max_age: int = 30
    min_hits: int = 3
    interpolation_max_gap: int = 20

    def __post_init__(self):
        if self.similarity not in MEASURES:
            raise ValidationError(
                f"unknown similarity {self.similarity!r}; choose from {MEASURES}"
            )
        if not 0.0 <= self.ema_lambda <= 1.0:
            raise ValidationError(f"ema_lambda must lie in [0, 1], got {self.ema_lambda}")
        if self.ocm_weight < 0:
            raise ValidationError(f"ocm_weight must be >= 0, got {self.ocm_weight}")
        if self.max_age < 0 or self.min_hits < 1:
            raise ValidationError(
                f"need max_age >= 0 and min_hits >= 1, got {self.max_age}/{self.min_hits}"
            )
        if self.interpolation_max_gap < 0:
            raise ValidationError(
                f"interpolation_max_gap must be >= 0, got {self.interpolation_max_gap}"
            )


def _box_to_z(box: BoundingBox) -> np.ndarray:
    cx, cy = box.center
    return np.array([cx, cy, box.width, box.height], dtype=float)


def _z_to_box(z: np.ndarray) -> BoundingBox:
    w = max(float(z[2]), _MIN_DIM)
    h = max(float(z[3]), _MIN_DIM)
    return BoundingBox(float(z[0]) - w / 2.0, float(z[1]) - h / 2.0, w, h)


def _kf_initiate(box: BoundingBox) -> tuple[np.ndarray, np.ndarray]:
    z = _box_to_z(box)
    mean = np.concatenate([z, np.zeros(4)])
    w, h = z[2], z[3]
    std = np.array([
        2 * _POS_WEIGHT * w, 2 * _POS_WEIGHT * h,
        2 * _POS_WEIGHT * w, 2 * _POS_WEIGHT * h,
        w, h, w, h,
    ])
    return mean, np.diag(std * std)


def _kf_predict(mean: np.ndarray, cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w = max(abs(mean[2]), _MIN_DIM)
    h = max(abs(mean[3]), _MIN_DIM)
    q_std = np.array([
        _POS_WEIGHT * w, _POS_WEIGHT * h, _POS_WEIGHT * w, _POS_WEIGHT * h,
        _VEL_WEIGHT * w, _VEL_WEIGHT * h, _VEL_WEIGHT * w, _VEL_WEIGHT * h,
    ])
    mean = _F @ mean
    mean[2] = max(mean[2], _MIN_DIM)
    mean[3] = max(mean[3], _MIN_DIM)
    cov = _F @ cov @ _F.T + np.diag(q_std * q_std)
    return mean, cov


def _kf_update(mean: np.ndarray, cov: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w = max(abs(mean[2]), _MIN_DIM)
    h = max(abs(mean[3]), _MIN_DIM)
    r_std = np.array([_POS_WEIGHT * w, _POS_WEIGHT * h, _POS_WEIGHT * w, _POS_WEIGHT * h])
    s = _H @ cov @ _H.T + np.diag(r_std * r_std)
    gain = np.linalg.solve(s.T, (_H @ cov.T)).T
    mean = mean + gain @ (z - _H @ mean)
    cov = (np.eye(8) - gain @ _H) @ cov
    mean[2] = max(mean[2], _MIN_DIM)
    mean[3] = max(mean[3], _MIN_DIM)
    return mean, cov


@dataclass
class TrackState:
    """Mutable state of one track."""

    track_id: int
    kalman_mean: np.ndarray
    kalman_cov: np.ndarray
    ema_velocity: np.ndarray
    hits: int
    age: int
    time_since_update: int
    last_observation: BoundingBox
    last_frame: int
    ema_initialized: bool = False
    # filter state at the moment of the last update, for gap re-runs
    snapshot_mean: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    snapshot_cov: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    @property
    def box(self) -> BoundingBox:
        return _z_to_box(self.kalman_mean[:4])


def new_track(track_id: int, detection: Detection) -> TrackState:
    """Start a track from an unmatched detection."""
    mean, cov = _kf_initiate(detection.box)
    return TrackState(
        track_id=track_id,
        kalman_mean=mean,
        kalman_cov=cov,
        ema_velocity=np.zeros(2),
        hits=1,
        age=0,
        time_since_update=0,
        last_observation=detection.box,
        last_frame=detection.frame,
        snapshot_mean=mean.copy(),
        snapshot_cov=cov.copy(),
    )


def predict(track: TrackState) -> BoundingBox:
    """Advance the track one frame; returns the predicted box.

    Ages the track and bumps time_since_update; covariance always grows.
    """
    track.kalman_mean, track.kalman_cov = _kf_predict(track.kalman_mean, track.kalman_cov)
    track.age += 1
    track.time_since_update += 1
    return track.box


def _hull_of_corners(box: BoundingBox, transform: AffineTransform) -> BoundingBox:
    x1, y1 = box.left, box.top
    x2, y2 = box.left + box.width, box.top + box.height
    corners = np.array([[x1, y1], [x2, y1], [x1, y2], [x2, y2]])
    mapped = transform.apply_points(corners)
    lo = mapped.min(axis=0)
    hi = mapped.max(axis=0)
    return BoundingBox(float(lo[0]), float(lo[1]),
                       max(float(hi[0] - lo[0]), _MIN_DIM),
                       max(float(hi[1] - lo[1]), _MIN_DIM))


def affine_compensate(tracks: Sequence[TrackState], transform: AffineTransform) -> Sequence[TrackState]:
    """Map track state into the new frame's coordinates.

    Each predicted box is replaced by the axis-aligned hull of its four
    transformed corners; velocities (Kalman and smoothed) go through the
    linear part. The identity transform changes nothing. Also moves the
    last observation so direction costs stay consistent under camera
    motion.
    """
    if transform.is_identity:
        return tracks
    lin = transform.linear()
    for track in tracks:
        old = track.box
        new = _hull_of_corners(old, transform)
        z = _box_to_z(new)
        scale_w = z[2] / old.width
        scale_h = z[3] / old.height
        track.kalman_mean[:4] = z
        track.kalman_mean[4:6] = lin @ track.kalman_mean[4:6]
        track.kalman_mean[6] *= scale_w
        track.kalman_mean[7] *= scale_h
        track.ema_velocity = lin @ track.ema_velocity
        track.last_observation = _hull_of_corners(track.last_observation, transform)
        # keep the re-run start state in the same coordinates
        snap_old = _z_to_box(track.snapshot_mean[:4])
        snap_new = _hull_of_corners(snap_old, transform)
        track.snapshot_mean[:4] = _box_to_z(snap_new)
        track.snapshot_mean[4:6] = lin @ track.snapshot_mean[4:6]
        track.snapshot_mean[6] *= snap_new.width / snap_old.width
        track.snapshot_mean[7] *= snap_new.height / snap_old.height
    return tracks


def _direction_costs(tracks: Sequence[TrackState], det_boxes: np.ndarray) -> np.ndarray:
    """Angle between each track's smoothed velocity and the displacement to
    each detection, normalized to [0, 1]; zero when either vector is tiny."""
    n_t = len(tracks)
    n_d = det_boxes.shape[0]
    out = np.zeros((n_t, n_d))
    det_cx = det_boxes[:, 0] + det_boxes[:, 2] / 2.0
    det_cy = det_boxes[:, 1] + det_boxes[:, 3] / 2.0
    for i, track in enumerate(tracks):
        v = track.ema_velocity
        v_norm = float(np.hypot(v[0], v[1]))
        if v_norm < 1e-6:
            continue
        lcx, lcy = track.last_observation.center
        dx = det_cx - lcx
        dy = det_cy - lcy
        d_norm = np.hypot(dx, dy)
        ok = d_norm >= 1e-6
        cosang = np.clip((v[0] * dx + v[1] * dy) / (v_norm * np.maximum(d_norm, 1e-12)),
                         -1.0, 1.0)
        out[i, ok] = np.arccos(cosang[ok]) / math.pi
    return out


def associate(
    tracks: Sequence[TrackState],
    detections: Sequence[Detection],
    config: TrackerConfig,
    mean_size: float | None = None,
) -> tuple[list[tuple[int, int]], list[int], list[int]]:
    """Assign detections to predicted tracks.

    Cost is negative similarity plus ocm_weight times the normalized
    direction disagreement; pairs below assoc_threshold similarity stay
    unmatched. Returns (matches, unmatched track indices, unmatched
    detection indices).
    """
    if not tracks or not detections:
        return [], list(range(len(tracks))), list(range(len(detections)))
    pred_boxes = boxes_to_array([t.box for t in tracks])
    det_boxes = boxes_to_array([d.box for d in detections])
    sim = similarity_matrix(pred_boxes, det_boxes, config.similarity, mean_size,
                            expand=config.expand, penalty_weight=config.penalty_weight)
    cost = -sim
    if config.ocm_weight > 0:
        cost = cost + config.ocm_weight * _direction_costs(tracks, det_boxes)
    rows, cols = linear_sum_assignment(cost)
    matches = []
    matched_t = set()
    matched_d = set()
    for i, j in zip(rows, cols):
        if sim[i, j] >= config.assoc_threshold:
            matches.append((int(i), int(j)))
            matched_t.add(int(i))
            matched_d.add(int(j))
    unmatched_t = [i for i in range(len(tracks)) if i not in matched_t]
    unmatched_d = [j for j in range(len(detections)) if j not in matched_d]
    return matches, unmatched_t, unmatched_d


def update(track: TrackState, detection: Detection, config: TrackerConfig) -> TrackState:
    """Fold a matched detection into the track.

    After a gap the filter is re-run from its state at the last update
    along a straight virtual path between the two observations, so the
    intermediate blind predictions do not distort the velocity estimate.
    The smoothed velocity blends the observed per-frame displacement with
    weight (1 - ema_lambda); the first displacement initializes it.
    """
    gap = detection.frame - track.last_frame
    if gap < 1:
        raise ValidationError(
            f"detection frame {detection.frame} not after track frame {track.last_frame}"
        )
    z_new = _box_to_z(detection.box)
    if gap > 1:
        z_old = _box_to_z(track.last_observation)
        mean, cov = track.snapshot_mean.copy(), track.snapshot_cov.copy()
        for k in range(1, gap + 1):
            mean, cov = _kf_predict(mean, cov)
            z_k = z_old + (z_new - z_old) * (k / gap)
            mean, cov = _kf_update(mean, cov, z_k)
        track.kalman_mean, track.kalman_cov = mean, cov
    else:
        track.kalman_mean, track.kalman_cov = _kf_update(
            track.kalman_mean, track.kalman_cov, z_new)

    old_cx, old_cy = track.last_observation.center
    new_cx, new_cy = detection.box.center
    v_obs = np.array([(new_cx - old_cx) / gap, (new_cy - old_cy) / gap])
    if not track.ema_initialized:
        track.ema_velocity = v_obs
        track.ema_initialized = True
    else:
        lam = config.ema_lambda
        track.ema_velocity = lam * track.ema_velocity + (1.0 - lam) * v_obs

    track.hits += 1
    track.time_since_update = 0
    track.last_observation = detection.box
    track.last_frame = detection.frame
    track.snapshot_mean = track.kalman_mean.copy()
    track.snapshot_cov = track.kalman_cov.copy()
    return track


class Tracker:
    """Online multi-object tracker over per-frame detections.

    Track ids are assigned in spawn order, starting at 1, and never reused.
    Tracks report only on frames where they were matched (or spawned, when
    min_hits allows), and die after max_age frames without a detection.
    """

    def __init__(
        self,
        config: TrackerConfig | None = None,
        mean_size: float | None = None,
        affines: dict[int, AffineTransform] | None = None,
    ):
        self.config = config or TrackerConfig()
        if self.config.similarity in ("dotd", "expanded_penalty") and mean_size is None:
            raise ValidationError(
                f"similarity {self.config.similarity!r} needs a mean object size"
            )
        self.mean_size = mean_size
        self.affines = affines or {}
        self.tracks: list[TrackState] = []
        self._next_id = 1
        self._last_frame = 0

    def step(self, frame: int, detections: Sequence[Detection]) -> list[Detection]:
        """Advance to `frame` and consume its detections.

        Returns the confirmed track outputs for this frame. Frames must
        arrive in ascending order; skipped frames age the tracks.
        """
        if frame <= self._last_frame:
            raise ValidationError(
                f"frame {frame} out of order after {self._last_frame}"
            )
        for det in detections:
            if det.frame != frame:
                raise ValidationError(
                    f"detection for frame {det.frame} fed into step({frame})"
                )
        for _ in range(frame - self._last_frame):
            for track in self.tracks:
                predict(track)
        transform = self.affines.get(frame)
        if transform is not None:
            affine_compensate(self.tracks, transform)

        matches, _, unmatched_d = associate(self.tracks, detections, self.config,
                                            self.mean_size)
        outputs = []
        for ti, di in matches:
            track = self.tracks[ti]
            det = detections[di]
            update(track, det, self.config)
            if track.hits >= self.config.min_hits:
                outputs.append(Detection(frame, track.track_id, det.box,
                                         det.confidence, det.class_id))
        for di in unmatched_d:
            det = detections[di]
            track = new_track(self._next_id, det)
            self._next_id += 1
            self.tracks.append(track)
            if track.hits >= self.config.min_hits:
                outputs.append(Detection(frame, track.track_id, det.box,
                                         det.confidence, det.class_id))
        self.tracks = [t for t in self.tracks
                       if t.time_since_update <= self.config.max_age]
        self._last_frame = frame
        return outputs

    def run(self, detections: Iterable[Detection],
            frame_count: int | None = None) -> list[Detection]:
        """Track a whole detection list, frame by frame."""
        by_frame: dict[int, list[Detection]] = {}
        for det in detections:
            by_frame.setdefault(det.frame, []).append(det)
        if frame_count is None:
            frame_count = max(by_frame, default=0)
        outputs: list[Detection] = []
        for frame in range(1, frame_count + 1):
            outputs.extend(self.step(frame, by_frame.get(frame, [])))
        return outputs
