import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator
from scipy.interpolate import CubicSpline

from .errors import AnnotationError, CurveError
from .imggrid import MIN_PATCH_SIDE

logger = logging.getLogger(__name__)

Point = Tuple[float, float]

BBOX_MARGIN = 0.1
MAX_SPACING = 1.0


def bbox_from_points(points, margin=BBOX_MARGIN):
    """Extent of the points grown by `margin` of its size on each side: (x, y, w, h)."""
    pts = np.asarray(points, dtype=np.float64)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    w, h = hi - lo
    return (float(lo[0] - margin * w), float(lo[1] - margin * h),
            float((1 + 2 * margin) * w), float((1 + 2 * margin) * h))


class Annotation(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    landmarks: List[Point]
    contour: Optional[List[Point]] = None
    left_eye: Optional[Point] = None
    right_eye: Optional[Point] = None
    bbox: Optional[Tuple[float, float, float, float]] = None

    @field_validator("landmarks")
    @classmethod
    def _enough_landmarks(cls, v):
        if len(v) < 2:
            raise ValueError(f"need at least 2 landmarks, got {len(v)}")
        return v

    @model_validator(mode="after")
    def _check(self):
        groups = [self.landmarks, self.contour or [],
                  [p for p in (self.left_eye, self.right_eye) if p is not None],
                  [self.bbox] if self.bbox else []]
        if not all(math.isfinite(c) for group in groups for p in group for c in p):
            raise ValueError("non-finite coordinate")
        if self.left_eye is not None and self.right_eye is not None:
            if math.dist(self.left_eye, self.right_eye) <= 0:
                raise ValueError("eye points coincide")
        if self.bbox is None:
            object.__setattr__(self, "bbox", bbox_from_points(self.landmarks))
        return self

    def to_json(self):
        return self.model_dump(mode="json", exclude_none=True)


def parse_annotation(path):
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise AnnotationError(f"{path}: {e}") from e
    if not isinstance(raw, dict):
        raise AnnotationError(f"{path}: annotation must be a JSON object")
    if not raw.get("landmarks"):
        raise AnnotationError(f"{path}: no initial curve source")
    try:
        return Annotation.model_validate(raw)
    except ValidationError as e:
        msgs = "; ".join(f"{'.'.join(map(str, x['loc'])) or '<root>'}: {x['msg']}" for x in e.errors())
        raise AnnotationError(f"{path}: {msgs}") from e


def read_landmarks(path):
    """Plain-text landmarks: one "x y" pair per line, '#' starts a comment."""
    points = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        fields = body.split()
        try:
            if len(fields) != 2:
                raise ValueError(f"expected 2 fields, got {len(fields)}")
            x, y = float(fields[0]), float(fields[1])
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError("non-finite coordinate")
        except ValueError as e:
            raise AnnotationError(f"{path}:{lineno}: malformed landmark line {line!r} ({e})") from e
        points.append((x, y))
    return points


def write_landmarks(points, path):
    with open(path, "w") as f:
        for x, y in points:
            f.write(f"{x!r} {y!r}\n")


@dataclass(frozen=True)
class Curve:
    points: np.ndarray  # (n, 2)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64).reshape(-1, 2)
        if len(pts) < 2:
            raise CurveError(f"curve needs at least 2 points, got {len(pts)}")
        if not np.all(np.isfinite(pts)):
            raise CurveError("curve contains non-finite coordinates")
        steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if np.any(steps <= 0):
            raise CurveError("curve has repeated consecutive points")
        pts.setflags(write=False)
        arc = np.concatenate([[0.0], np.cumsum(steps)])
        arc.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "arclength", arc)

    def __len__(self):
        return len(self.points)

    @property
    def length(self):
        return float(self.arclength[-1])

    def at(self, s):
        """Points at arc-length positions s (linear along the polyline)."""
        s = np.asarray(s, dtype=np.float64)
        x = np.interp(s, self.arclength, self.points[:, 0])
        y = np.interp(s, self.arclength, self.points[:, 1])
        return np.stack([x, y], axis=-1)

    def resample(self, n):
        if n < 2:
            raise CurveError(f"resample needs n >= 2, got {n}")
        return self.at(np.linspace(0.0, self.length, n))

    def tangents(self):
        """Unit tangents per vertex: central differences inside, one-sided at the ends."""
        d = np.gradient(self.points, self.arclength, axis=0)
        return d / np.linalg.norm(d, axis=1, keepdims=True)

    def to_json(self):
        return self.points.tolist()


def fit_initial_curve(landmarks):
    """Natural cubic spline through the landmarks, chord-length parameterized,
    densified so consecutive points are at most 1 px apart."""
    pts = np.asarray(landmarks, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 2:
        raise CurveError(f"need at least 2 landmarks, got {len(pts)}")
    chords = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    if np.any(chords <= 0):
        k = int(np.argmin(chords))
        raise CurveError(f"duplicate consecutive landmarks at index {k}")
    knots = np.concatenate([[0.0], np.cumsum(chords)])
    spline = CubicSpline(knots, pts, bc_type="natural", axis=0)

    # per-interval arc estimate from a fine probe, then subdivide until spacing <= 1 px
    probe = np.linspace(0.0, 1.0, 33)
    counts = []
    for a, b in zip(knots[:-1], knots[1:]):
        seg = spline(a + (b - a) * probe)
        arc = np.linalg.norm(np.diff(seg, axis=0), axis=1).sum()
        counts.append(max(1, math.ceil(arc * 1.25)))
    while True:
        params = [np.linspace(a, b, c, endpoint=False) for a, b, c in zip(knots[:-1], knots[1:], counts)]
        params.append(knots[-1:])
        t = np.concatenate(params)
        dense = spline(t)
        dense[np.searchsorted(t, knots)] = pts
        gaps = np.linalg.norm(np.diff(dense, axis=0), axis=1)
        if gaps.max() <= MAX_SPACING:
            break
        interval = np.searchsorted(knots, t[:-1], side="right") - 1
        for k in np.unique(interval[gaps > MAX_SPACING]):
            counts[k] *= 2
    logger.debug("initial curve: %d landmarks -> %d points", len(pts), len(dense))
    return Curve(dense)


@dataclass(frozen=True)
class SquareSpec:
    center: tuple
    tangent_angle: float
    side: int
    order_index: int

    @property
    def patch_angle(self):
        return self.tangent_angle - math.pi / 2


def square_side(size_factor, bbox):
    side = int(round(size_factor * max(bbox[2], bbox[3])))
    if side < MIN_PATCH_SIDE:
        logger.warning("square side %d below minimum, clamping to %d", side, MIN_PATCH_SIDE)
        side = MIN_PATCH_SIDE
    return side


def sample_squares(curve, count, size_factor, bbox):
    if count < 2:
        raise CurveError(f"square count must be >= 2, got {count}")
    if size_factor <= 0:
        raise CurveError(f"size factor must be positive, got {size_factor}")
    if curve.length <= 0:
        raise CurveError("degenerate curve: zero arc length")
    side = square_side(size_factor, bbox)
    s = np.linspace(0.0, curve.length, count)
    centers = curve.at(s)
    tan = curve.tangents()
    tx = np.interp(s, curve.arclength, tan[:, 0])
    ty = np.interp(s, curve.arclength, tan[:, 1])
    angles = np.arctan2(ty, tx)
    return [SquareSpec((float(c[0]), float(c[1])), float(a), side, k)
            for k, (c, a) in enumerate(zip(centers, angles))]
