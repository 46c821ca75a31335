"""Synthetic sequences: displacement curves, scene generation, corruption.

Everything here is a pure function of its configuration. Randomness comes
from numpy's seeded PCG64 generator, so identical configs produce byte
identical outputs on every platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .data_io import Detection, SequencePair
from .errors import ValidationError
from .geometry import BoundingBox, dotd, iou
from .matching import DEFAULT_ALPHAS
from .metrics import hota_suite, so_hota_suite

DISPLACEMENT_CSV_HEADER = "x,iou,dotd,hota,so_hota"


@dataclass(frozen=True)
class DisplacementRow:
    """One displacement-study sample: kernel values and pipeline scores."""

    x: float
    iou: float
    dotd: float
    hota: float
    so_hota: float


@dataclass
class DisplacementStudyConfig:
    """Static track of square boxes versus a copy shifted straight down."""

    box_size: float = 16.0
    shifts: tuple[float, ...] = tuple(float(x) for x in range(0, 65))
    frames: int = 50
    s_override: float | None = None

    def __post_init__(self):
        if self.box_size <= 0:
            raise ValidationError(f"box size must be > 0, got {self.box_size}")
        if self.frames < 1:
            raise ValidationError(f"frame count must be >= 1, got {self.frames}")
        shifts = tuple(float(x) for x in self.shifts)
        if not shifts:
            raise ValidationError("shift list must not be empty")
        if any(x < 0 for x in shifts):
            raise ValidationError("shifts must be >= 0")
        if list(shifts) != sorted(shifts):
            raise ValidationError("shifts must be sorted ascending")
        self.shifts = shifts


def displacement_study(cfg: DisplacementStudyConfig) -> list[DisplacementRow]:
    """Sweep a vertical shift between coincident tracks and score each shift.

    The ground truth is one static track of box_size x box_size boxes over
    cfg.frames frames; the prediction is the same track shifted down by x.
    The iou and dotd columns are single-pair kernel values, hota and
    so_hota run the full pipeline on the shifted sequence. The mean object
    size is box_size unless overridden.
    """
    d = cfg.box_size
    s = cfg.s_override if cfg.s_override is not None else d
    base = BoundingBox(100.0, 100.0, d, d)
    rows = []
    for x in cfg.shifts:
        shifted = BoundingBox(base.left, base.top + x, d, d)
        gt = [Detection(frame=f, track_id=1, box=base) for f in range(1, cfg.frames + 1)]
        pred = [Detection(frame=f, track_id=1, box=shifted) for f in range(1, cfg.frames + 1)]
        pair = SequencePair(f"shift-{x:g}", gt, pred)
        rows.append(DisplacementRow(
            x=float(x),
            iou=iou(base, shifted),
            dotd=dotd(base, shifted, s),
            hota=hota_suite([pair], alphas=DEFAULT_ALPHAS).pooled["hota"],
            so_hota=so_hota_suite([pair], mean_size=s,
                                  alphas=DEFAULT_ALPHAS).pooled["so_hota"],
        ))
    return rows


def write_displacement_csv(rows: Sequence[DisplacementRow], stream: IO[str]) -> None:
    """Write study rows as fixed six-decimal CSV."""
    stream.write(DISPLACEMENT_CSV_HEADER + "\n")
    for r in rows:
        stream.write(f"{r.x:.6f},{r.iou:.6f},{r.dotd:.6f},{r.hota:.6f},{r.so_hota:.6f}\n")


MOTIONS = ("linear", "sinusoidal", "flock")


@dataclass
class SceneConfig:
    """Seeded multi-object scene with boxes bouncing inside an arena."""

    n_objects: int = 5
    frames: int = 100
    arena: tuple[float, float] = (1920.0, 1080.0)
    box_size_range: tuple[float, float] = (8.0, 24.0)
    motion: str = "linear"
    speed_range: tuple[float, float] = (1.0, 4.0)
    seed: int = 0
    name: str = "scene"

    def __post_init__(self):
        if self.n_objects < 1:
            raise ValidationError(f"need at least one object, got {self.n_objects}")
        if self.frames < 1:
            raise ValidationError(f"frame count must be >= 1, got {self.frames}")
        if self.motion not in MOTIONS:
            raise ValidationError(f"unknown motion {self.motion!r}; choose from {MOTIONS}")
        lo, hi = self.box_size_range
        if not 0 < lo <= hi:
            raise ValidationError(f"bad box size range {self.box_size_range}")
        if hi >= min(self.arena):
            raise ValidationError(
                f"boxes up to {hi} px cannot fit the {self.arena} arena"
            )
        lo, hi = self.speed_range
        if not 0 <= lo <= hi:
            raise ValidationError(f"bad speed range {self.speed_range}")


def _fold(values: np.ndarray, lo: np.ndarray | float, hi: np.ndarray | float) -> np.ndarray:
    """Reflect coordinates into [lo, hi] as if bouncing off both walls."""
    span = hi - lo
    y = np.mod(values - lo, 2.0 * span)
    return lo + np.where(y > span, 2.0 * span - y, y)


def generate_scene(cfg: SceneConfig) -> SequencePair:
    """Simulate object tracks and return them as the gt side of a pair.

    Motion modes: linear (constant velocity, wall reflection), sinusoidal
    (linear plus a transverse sine offset), flock (shared velocity, tight
    cluster of starts, small per-frame jitter). Box sizes are fixed per
    object. Identical configs give identical output down to the byte.
    """
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_objects
    frames = np.arange(cfg.frames, dtype=float)
    width, height = cfg.arena

    w = rng.uniform(cfg.box_size_range[0], cfg.box_size_range[1], size=n)
    h = rng.uniform(cfg.box_size_range[0], cfg.box_size_range[1], size=n)
    lo_x, hi_x = w / 2.0, width - w / 2.0
    lo_y, hi_y = h / 2.0, height - h / 2.0

    if cfg.motion == "flock":
        speed = rng.uniform(*cfg.speed_range)
        angle = rng.uniform(0.0, 2.0 * math.pi)
        vx = np.full(n, speed * math.cos(angle))
        vy = np.full(n, speed * math.sin(angle))
        origin_x = rng.uniform(lo_x.max(), max(hi_x.min(), lo_x.max() + 1e-9))
        origin_y = rng.uniform(lo_y.max(), max(hi_y.min(), lo_y.max() + 1e-9))
        spread = 4.0 * float(np.mean((w + h) / 2.0))
        start_x = origin_x + rng.normal(0.0, spread, size=n)
        start_y = origin_y + rng.normal(0.0, spread, size=n)
    else:
        speed = rng.uniform(cfg.speed_range[0], cfg.speed_range[1], size=n)
        angle = rng.uniform(0.0, 2.0 * math.pi, size=n)
        vx = speed * np.cos(angle)
        vy = speed * np.sin(angle)
        start_x = rng.uniform(lo_x, hi_x)
        start_y = rng.uniform(lo_y, hi_y)

    cx = start_x[:, None] + vx[:, None] * frames[None, :]
    cy = start_y[:, None] + vy[:, None] * frames[None, :]

    if cfg.motion == "sinusoidal":
        amp = rng.uniform(0.5, 2.0, size=n) * (w + h) / 2.0
        freq = rng.uniform(0.02, 0.1, size=n)
        phase = rng.uniform(0.0, 2.0 * math.pi, size=n)
        wave = amp[:, None] * np.sin(2.0 * math.pi * freq[:, None] * frames[None, :]
                                     + phase[:, None])
        norm = np.hypot(vx, vy)
        safe = np.where(norm > 0, norm, 1.0)
        cx = cx + wave * (-vy / safe)[:, None]
        cy = cy + wave * (vx / safe)[:, None]
    elif cfg.motion == "flock":
        jitter = 0.1 * ((w + h) / 2.0)
        cx = cx + rng.normal(0.0, 1.0, size=cx.shape) * jitter[:, None]
        cy = cy + rng.normal(0.0, 1.0, size=cy.shape) * jitter[:, None]

    cx = _fold(cx, lo_x[:, None], hi_x[:, None])
    cy = _fold(cy, lo_y[:, None], hi_y[:, None])

    detections = []
    for i in range(n):
        for t in range(cfg.frames):
            detections.append(Detection(
                frame=t + 1,
                track_id=i + 1,
                box=BoundingBox(cx[i, t] - w[i] / 2.0, cy[i, t] - h[i] / 2.0, w[i], h[i]),
            ))
    return SequencePair(cfg.name, detections, [], frame_count=cfg.frames)


@dataclass
class CorruptionConfig:
    """Controlled damage applied to a ground-truth sequence."""

    center_noise_sigma: float = 0.0
    miss_rate: float = 0.0
    fp_rate: float = 0.0
    id_switch_rate: float = 0.0
    drop_ids: bool = False
    seed: int = 0

    def __post_init__(self):
        for name in ("miss_rate", "id_switch_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")
        if self.fp_rate < 0:
            raise ValidationError(f"fp_rate must be >= 0, got {self.fp_rate}")
        if self.center_noise_sigma < 0:
            raise ValidationError(f"noise sigma must be >= 0, got {self.center_noise_sigma}")


def corrupt(gt: SequencePair, cfg: CorruptionConfig) -> list[Detection]:
    """Derive predictions from ground truth with controlled defects.

    In draw order: identity switches (per track per frame, swapping the two
    chosen ids from that frame on), detection drops (per detection), center
    jitter (isotropic Gaussian), and per-frame false-positive injection
    (Poisson with mean fp_rate times the frame's gt count, placed uniformly
    in the gt bounding envelope). drop_ids finally strips every identity.
    An all-zero config returns the ground truth unchanged.
    """
    rng = np.random.default_rng(cfg.seed)
    dets = list(gt.gt)

    # permanent pairwise id swaps, applied forward from the frame they occur
    if cfg.id_switch_rate > 0:
        all_ids = sorted({d.track_id for d in dets})
        mapping = {t: t for t in all_ids}
        by_frame: dict[int, list[int]] = {}
        for d in dets:
            by_frame.setdefault(d.frame, []).append(d.track_id)
        remapped: dict[tuple[int, int], int] = {}
        current = dict(mapping)
        for f in sorted(by_frame):
            if len(all_ids) > 1:
                for tid in sorted(set(by_frame[f])):
                    if rng.random() < cfg.id_switch_rate:
                        others = [t for t in all_ids if t != tid]
                        partner = others[rng.integers(len(others))]
                        current[tid], current[partner] = current[partner], current[tid]
            for tid in by_frame[f]:
                remapped[(f, tid)] = current[tid]
        dets = [
            Detection(d.frame, remapped[(d.frame, d.track_id)], d.box,
                      d.confidence, d.class_id)
            for d in dets
        ]

    if cfg.miss_rate > 0 and dets:
        keep = rng.random(len(dets)) >= cfg.miss_rate
        dets = [d for d, k in zip(dets, keep) if k]

    if cfg.center_noise_sigma > 0 and dets:
        offsets = rng.normal(0.0, cfg.center_noise_sigma, size=(len(dets), 2))
        dets = [
            Detection(d.frame, d.track_id,
                      BoundingBox(d.box.left + dx, d.box.top + dy,
                                  d.box.width, d.box.height),
                      d.confidence, d.class_id)
            for d, (dx, dy) in zip(dets, offsets)
        ]

    if cfg.fp_rate > 0 and gt.gt:
        boxes = gt.gt_columns.boxes
        env_right = float((boxes[:, 0] + boxes[:, 2]).max())
        env_bottom = float((boxes[:, 1] + boxes[:, 3]).max())
        dim_lo = float(boxes[:, 2:4].min())
        dim_hi = float(boxes[:, 2:4].max())
        gt_per_frame: dict[int, int] = {}
        for d in gt.gt:
            gt_per_frame[d.frame] = gt_per_frame.get(d.frame, 0) + 1
        next_id = max((d.track_id for d in gt.gt), default=0) + 1
        for f in sorted(gt_per_frame):
            for _ in range(rng.poisson(cfg.fp_rate * gt_per_frame[f])):
                bw = rng.uniform(dim_lo, dim_hi)
                bh = rng.uniform(dim_lo, dim_hi)
                dets.append(Detection(
                    frame=f,
                    track_id=next_id,
                    box=BoundingBox(rng.uniform(0.0, env_right), rng.uniform(0.0, env_bottom),
                                    bw, bh),
                    confidence=float(rng.uniform(0.1, 1.0)),
                ))
                next_id += 1

    if cfg.drop_ids:
        dets = [Detection(d.frame, None, d.box, d.confidence, d.class_id) for d in dets]
    return sorted(dets, key=lambda d: (d.frame, d.track_id if d.track_id is not None else -1,
                                       d.box.left, d.box.top))
