"""Reading and writing tracking data.

Detection files follow the (frame, id, bb_left, bb_top, bb_width, bb_height,
conf, x, y, z) line layout, one detection per line, comma separated. Frames
are 1-based. A track id of -1 marks a detection without an identity. The
fields after conf are optional and ignored on input.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .errors import PairingError, ValidationError
from .geometry import BoundingBox

MOT_LINE_FORMAT = "%d,%d,%.3f,%.3f,%.3f,%.3f,%.4f,-1,-1,-1"


@dataclass(frozen=True, slots=True)
class Detection:
    """One box in one frame, optionally belonging to a track."""

    frame: int
    track_id: int | None
    box: BoundingBox
    confidence: float = 1.0
    class_id: int = 1

    def __post_init__(self):
        if self.frame < 1:
            raise ValidationError(f"frame index must be >= 1, got {self.frame}")
        if self.track_id is not None and self.track_id < 1:
            raise ValidationError(f"track id must be >= 1 or absent, got {self.track_id}")
        if not (0.0 <= self.confidence <= 1.0) or not math.isfinite(self.confidence):
            raise ValidationError(f"confidence must lie in [0, 1], got {self.confidence}")


def _detection_sort_key(det: Detection):
    tid = det.track_id if det.track_id is not None else -1
    b = det.box
    return (det.frame, tid, b.left, b.top, b.width, b.height, det.confidence)


class _SideColumns:
    """Columnar view of one side of a sequence, for fast per-frame slicing."""

    __slots__ = ("frames", "boxes", "conf", "track_idx", "track_ids", "track_sizes",
                 "_starts", "_frame_lo")

    def __init__(self, detections: Sequence[Detection], frame_count: int):
        n = len(detections)
        self.frames = np.fromiter((d.frame for d in detections), dtype=np.int64, count=n)
        self.boxes = np.zeros((n, 4), dtype=float)
        self.conf = np.zeros(n, dtype=float)
        ids = np.zeros(n, dtype=np.int64)
        for i, d in enumerate(detections):
            b = d.box
            self.boxes[i] = (b.left, b.top, b.width, b.height)
            self.conf[i] = d.confidence
            ids[i] = d.track_id if d.track_id is not None else -1
        self.track_ids, inverse = np.unique(ids, return_inverse=True)
        self.track_idx = inverse.astype(np.int64)
        if self.track_ids.size and self.track_ids[0] == -1:
            self.track_idx = self.track_idx - 1  # index -1 stands for "no id"
            self.track_ids = self.track_ids[1:]
        self.track_sizes = np.bincount(
            self.track_idx[self.track_idx >= 0], minlength=len(self.track_ids)
        ).astype(np.int64)
        # detections arrive sorted by frame; offsets give O(1) per-frame slices
        self._frame_lo = 1
        self._starts = np.searchsorted(self.frames, np.arange(1, frame_count + 2))

    def frame_slice(self, frame: int) -> slice:
        return slice(self._starts[frame - 1], self._starts[frame])


class SequencePair:
    """Ground truth and predictions for one sequence, validated and canonical.

    Detections are stored sorted by (frame, track id, box, confidence), so
    two pairs built from the same data in any input order compare equal.
    Both sides must carry track identities and respect (frame, id)
    uniqueness.
    """

    def __init__(
        self,
        name: str,
        gt: Iterable[Detection],
        pred: Iterable[Detection],
        frame_count: int | None = None,
    ):
        self.name = str(name)
        self.gt = sorted(gt, key=_detection_sort_key)
        self.pred = sorted(pred, key=_detection_sort_key)
        max_frame = max(
            (d.frame for d in self.gt), default=0
        ), max((d.frame for d in self.pred), default=0)
        inferred = max(max_frame)
        if frame_count is None:
            frame_count = max(inferred, 1)
        if inferred > frame_count:
            raise ValidationError(
                f"sequence {self.name}: detection at frame {inferred} "
                f"exceeds frame count {frame_count}"
            )
        self.frame_count = int(frame_count)
        for side, dets in (("gt", self.gt), ("pred", self.pred)):
            seen: set[tuple[int, int]] = set()
            for d in dets:
                if d.track_id is None:
                    raise ValidationError(
                        f"sequence {self.name}: {side} detection at frame {d.frame} "
                        "has no track id"
                    )
                key = (d.frame, d.track_id)
                if key in seen:
                    raise ValidationError(
                        f"sequence {self.name}: duplicate {side} (frame, id) pair {key}"
                    )
                seen.add(key)
        self._gt_cols: _SideColumns | None = None
        self._pred_cols: _SideColumns | None = None

    def __eq__(self, other) -> bool:
        if not isinstance(other, SequencePair):
            return NotImplemented
        return (
            self.name == other.name
            and self.frame_count == other.frame_count
            and self.gt == other.gt
            and self.pred == other.pred
        )

    def __repr__(self) -> str:
        return (
            f"SequencePair({self.name!r}, frames={self.frame_count}, "
            f"gt={len(self.gt)}, pred={len(self.pred)})"
        )

    @property
    def gt_columns(self) -> _SideColumns:
        if self._gt_cols is None:
            self._gt_cols = _SideColumns(self.gt, self.frame_count)
        return self._gt_cols

    @property
    def pred_columns(self) -> _SideColumns:
        if self._pred_cols is None:
            self._pred_cols = _SideColumns(self.pred, self.frame_count)
        return self._pred_cols

    def gt_boxes(self) -> list[BoundingBox]:
        return [d.box for d in self.gt]


def parse_mot(source: Iterable[str] | str, is_gt: bool = False) -> list[Detection]:
    """Parse detection lines into Detection objects.

    Args:
        source: text, an open file, or any iterable of lines.
        is_gt: treat the 7th column as a consider flag (0 drops the line,
            anything else keeps it with confidence 1.0), the ground-truth
            file convention.

    Raises:
        ValidationError: on any malformed line, citing line number and text.
    """
    if isinstance(source, str):
        source = source.splitlines()
    detections: list[Detection] = []
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(",")
        if not 7 <= len(parts) <= 10:
            raise ValidationError(
                f"line {lineno}: expected 7 to 10 comma-separated fields, "
                f"got {len(parts)}: {line!r}"
            )
        try:
            frame = int(parts[0])
            raw_id = int(parts[1])
            left, top, width, height = (float(p) for p in parts[2:6])
            conf = float(parts[6])
        except ValueError as exc:
            raise ValidationError(f"line {lineno}: {exc}: {line!r}") from None
        if width <= 0 or height <= 0:
            raise ValidationError(
                f"line {lineno}: non-positive box dimension "
                f"({width} x {height}): {line!r}"
            )
        if is_gt:
            if conf == 0:
                continue
            conf = 1.0
        try:
            det = Detection(
                frame=frame,
                track_id=None if raw_id == -1 else raw_id,
                box=BoundingBox(left, top, width, height),
                confidence=conf,
            )
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}: {line!r}") from None
        detections.append(det)
    return detections


def write_mot(detections: Iterable[Detection], stream: IO[str]) -> None:
    """Write detections in the standard line layout, sorted by (frame, id)."""
    for det in sorted(detections, key=_detection_sort_key):
        tid = det.track_id if det.track_id is not None else -1
        b = det.box
        stream.write(MOT_LINE_FORMAT % (det.frame, tid, b.left, b.top,
                                        b.width, b.height, det.confidence))
        stream.write("\n")


def _coco_require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ValidationError(f"{where} missing required field {key!r}")
    return obj[key]


def parse_coco_vid(source: str | dict) -> list[SequencePair]:
    """Parse a COCO-style video annotation document.

    The document holds `videos` (id, name, frame_count), `images`
    (id, video_id, frame_index, 1-based) and `annotations` (image_id,
    bbox as [left, top, width, height], track_id, optional score and
    category_id). Returns one SequencePair per video with the ground-truth
    side filled in and an empty prediction side; referential or uniqueness
    violations raise ValidationError.
    """
    doc = json.loads(source) if isinstance(source, str) else source
    if not isinstance(doc, dict):
        raise ValidationError("top-level JSON value must be an object")
    videos = doc.get("videos")
    images = doc.get("images")
    annotations = doc.get("annotations")
    if videos is None or images is None or annotations is None:
        raise ValidationError("document needs 'videos', 'images' and 'annotations' lists")

    video_info: dict[int, tuple[str, int]] = {}
    for v in videos:
        vid = _coco_require(v, "id", "video")
        name = str(_coco_require(v, "name", f"video {vid}"))
        frame_count = int(_coco_require(v, "frame_count", f"video {vid}"))
        if vid in video_info:
            raise ValidationError(f"duplicate video id {vid}")
        if frame_count < 1:
            raise ValidationError(f"video {name!r}: frame_count must be >= 1")
        video_info[vid] = (name, frame_count)

    image_frame: dict[int, tuple[int, int]] = {}
    seen_frames: set[tuple[int, int]] = set()
    for img in images:
        iid = _coco_require(img, "id", "image")
        vid = _coco_require(img, "video_id", f"image {iid}")
        frame = int(_coco_require(img, "frame_index", f"image {iid}"))
        if vid not in video_info:
            raise ValidationError(f"image {iid} references unknown video {vid}")
        if iid in image_frame:
            raise ValidationError(f"duplicate image id {iid}")
        _, frame_count = video_info[vid]
        if not 1 <= frame <= frame_count:
            raise ValidationError(
                f"image {iid}: frame_index {frame} outside 1..{frame_count}"
            )
        if (vid, frame) in seen_frames:
            raise ValidationError(f"video {vid}: duplicate frame_index {frame}")
        seen_frames.add((vid, frame))
        image_frame[iid] = (vid, frame)

    per_video: dict[int, list[Detection]] = {vid: [] for vid in video_info}
    for i, ann in enumerate(annotations):
        where = f"annotation {ann.get('id', i)}"
        iid = _coco_require(ann, "image_id", where)
        if iid not in image_frame:
            raise ValidationError(f"{where} references unknown image {iid}")
        bbox = _coco_require(ann, "bbox", where)
        if not isinstance(bbox, (list, tuple)) or len(bbox) != 4:
            raise ValidationError(f"{where}: bbox must be [left, top, width, height]")
        track_id = int(_coco_require(ann, "track_id", where))
        vid, frame = image_frame[iid]
        score = float(ann.get("score", 1.0))
        try:
            det = Detection(
                frame=frame,
                track_id=track_id,
                box=BoundingBox(*(float(v) for v in bbox)),
                confidence=score,
                class_id=int(ann.get("category_id", 1)),
            )
        except ValidationError as exc:
            raise ValidationError(f"{where}: {exc}") from None
        per_video[vid].append(det)

    pairs = []
    for vid in sorted(video_info, key=lambda v: video_info[v][0]):
        name, frame_count = video_info[vid]
        pairs.append(SequencePair(name, per_video[vid], [], frame_count=frame_count))
    return pairs


@dataclass(frozen=True, slots=True)
class AffineTransform:
    """2D affine map (x, y) -> (a x + b y + tx, c x + d y + ty)."""

    a: float
    b: float
    tx: float
    c: float
    d: float
    ty: float

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls(1.0, 0.0, 0.0, 0.0, 1.0, 0.0)

    @property
    def is_identity(self) -> bool:
        return (self.a, self.b, self.tx, self.c, self.d, self.ty) == (
            1.0, 0.0, 0.0, 0.0, 1.0, 0.0)

    def linear(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=float)

    def apply_points(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.linear().T + np.array([self.tx, self.ty])

    def inverse(self) -> "AffineTransform":
        det = self.a * self.d - self.b * self.c
        ia, ib = self.d / det, -self.b / det
        ic, id_ = -self.c / det, self.a / det
        return AffineTransform(
            ia, ib, -(ia * self.tx + ib * self.ty),
            ic, id_, -(ic * self.tx + id_ * self.ty),
        )


def load_affines(source: Iterable[str] | str) -> dict[int, AffineTransform]:
    """Parse per-frame camera-motion rows `frame,a,b,tx,c,d,ty`.

    Each transform maps coordinates of frame - 1 into frame, so frame
    indices start at 2. Frames with no row default to the identity at the
    point of use. Singular linear parts are rejected.
    """
    if isinstance(source, str):
        source = source.splitlines()
    out: dict[int, AffineTransform] = {}
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line:
            continue
        if lineno == 1 and line.lower().startswith("frame"):
            continue  # optional header row
        parts = line.split(",")
        if len(parts) != 7:
            raise ValidationError(
                f"line {lineno}: expected 7 fields (frame,a,b,tx,c,d,ty): {line!r}"
            )
        try:
            frame = int(parts[0])
            a, b, tx, c, d, ty = (float(p) for p in parts[1:])
        except ValueError as exc:
            raise ValidationError(f"line {lineno}: {exc}: {line!r}") from None
        if frame < 2:
            raise ValidationError(f"line {lineno}: transform frame must be >= 2: {line!r}")
        if frame in out:
            raise ValidationError(f"line {lineno}: duplicate transform for frame {frame}")
        if abs(a * d - b * c) < 1e-12:
            raise ValidationError(f"line {lineno}: singular linear part: {line!r}")
        out[frame] = AffineTransform(a, b, tx, c, d, ty)
    return out


def load_mot_sequences(path: str | Path, is_gt: bool = False) -> dict[str, list[Detection]]:
    """Load one detection file or a directory of per-sequence files.

    A directory maps each *.txt / *.csv file stem to its detections; a
    single file becomes one sequence named after its stem.
    """
    path = Path(path)
    if path.is_dir():
        files = sorted(p for p in path.iterdir()
                       if p.is_file() and p.suffix.lower() in (".txt", ".csv"))
        if not files:
            raise ValidationError(f"no detection files (*.txt, *.csv) found in {path}")
        out = {}
        for f in files:
            try:
                out[f.stem] = parse_mot(f.read_text().splitlines(), is_gt=is_gt)
            except ValidationError as exc:
                raise ValidationError(f"{f}: {exc}") from None
        return out
    if path.is_file():
        try:
            return {path.stem: parse_mot(path.read_text().splitlines(), is_gt=is_gt)}
        except ValidationError as exc:
            raise ValidationError(f"{path}: {exc}") from None
    raise ValidationError(f"no such file or directory: {path}")


def build_pairs(
    gt: dict[str, list[Detection]] | list[SequencePair],
    pred: dict[str, list[Detection]] | list[SequencePair],
) -> list[SequencePair]:
    """Pair ground truth and predictions by sequence name.

    Accepts per-name detection maps or gt-sided SequencePairs on either
    side. Any sequence present on one side only raises PairingError naming
    it.
    """
    def as_map(side) -> tuple[dict[str, list[Detection]], dict[str, int]]:
        if isinstance(side, dict):
            return side, {}
        dets = {}
        counts = {}
        for sp in side:
            if sp.name in dets:
                raise ValidationError(f"duplicate sequence name {sp.name!r}")
            dets[sp.name] = sp.gt
            counts[sp.name] = sp.frame_count
        return dets, counts

    gt_map, gt_counts = as_map(gt)
    pred_map, pred_counts = as_map(pred)
    missing_pred = sorted(set(gt_map) - set(pred_map))
    missing_gt = sorted(set(pred_map) - set(gt_map))
    if missing_pred:
        raise PairingError(f"no predictions for sequence(s): {', '.join(missing_pred)}")
    if missing_gt:
        raise PairingError(f"no ground truth for sequence(s): {', '.join(missing_gt)}")
    pairs = []
    for name in sorted(gt_map):
        frame_count = max(gt_counts.get(name, 0), pred_counts.get(name, 0)) or None
        pairs.append(SequencePair(name, gt_map[name], pred_map[name],
                                  frame_count=frame_count))
    return pairs
