"""Contour evaluation: dense/sparse mean errors, CED tables and the
local parabola-fit study over annotated contours."""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import MetricsError, SeamError
from .imggrid import SquarePatch
from .initcurve import Curve, bbox_from_points, fit_initial_curve, sample_squares
from .seamcut import fit_parabola

logger = logging.getLogger(__name__)

DEFAULT_CED_THRESHOLDS = np.round(np.linspace(0.0, 0.1, 21), 6)
STUDY_BIN_EDGES = np.round(np.linspace(0.0, 0.2, 41), 6)


@dataclass
class MetricsReport:
    dme: float
    sme: Optional[float]
    normalizer: float
    distances: List[float] = field(default_factory=list)
    runtime_ms: Optional[float] = None

    def to_json(self, include_distances=False):
        out = {"dme": self.dme, "sme": self.sme, "normalizer": self.normalizer}
        if self.runtime_ms is not None:
            out["runtime_ms"] = self.runtime_ms
        if include_distances:
            out["distances"] = list(self.distances)
        return out


def interocular(ann):
    if ann.left_eye is None or ann.right_eye is None:
        raise MetricsError("annotation lacks eye points; supply an explicit normalizer")
    d = math.dist(ann.left_eye, ann.right_eye)
    if d <= 0:
        raise MetricsError("eye points coincide")
    return d


def _points(obj):
    if isinstance(obj, Curve):
        return obj.points
    return np.asarray(obj, dtype=np.float64).reshape(-1, 2)


def nearest_distances(points, polyline, chunk=4096):
    """Exact point-to-segment distance from each point to the polyline."""
    pts = _points(points)
    poly = _points(polyline)
    if len(poly) == 1:
        return np.linalg.norm(pts - poly[0], axis=1)
    a, b = poly[:-1], poly[1:]
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    denom = np.where(denom > 0, denom, 1.0)
    out = np.empty(len(pts))
    for start in range(0, len(pts), chunk):
        p = pts[start:start + chunk, None, :]
        t = np.clip(np.einsum("psj,sj->ps", p - a, ab) / denom, 0.0, 1.0)
        proj = a + t[..., None] * ab
        out[start:start + chunk] = np.sqrt(np.square(p - proj).sum(axis=-1)).min(axis=1)
    return out


def _check_normalizer(normalizer):
    if not normalizer or normalizer <= 0:
        raise MetricsError(f"normalizer must be positive, got {normalizer}")


def dme(estimated, truth, normalizer):
    _check_normalizer(normalizer)
    d = nearest_distances(estimated, truth)
    if d.size == 0:
        raise MetricsError("estimated curve is empty")
    return float(d.mean() / normalizer)


def sme(estimated_landmarks, truth_landmarks, normalizer):
    _check_normalizer(normalizer)
    est, tru = _points(estimated_landmarks), _points(truth_landmarks)
    if len(est) != len(tru):
        raise MetricsError(f"landmark count mismatch: {len(est)} estimated vs {len(tru)} truth")
    if len(est) == 0:
        raise MetricsError("no landmarks to compare")
    return float(np.linalg.norm(est - tru, axis=1).mean() / normalizer)


def curve_to_landmarks(curve, n):
    return curve.resample(n)


def landmarks_to_curve(landmarks):
    return fit_initial_curve(landmarks)


def ced(errors, thresholds=DEFAULT_CED_THRESHOLDS):
    """(threshold, fraction of errors <= threshold) rows."""
    errs = np.sort(np.asarray(errors, dtype=np.float64))
    if errs.size == 0:
        raise MetricsError("no errors to accumulate")
    t = np.asarray(thresholds, dtype=np.float64)
    frac = np.searchsorted(errs, t, side="right") / errs.size
    return [(float(a), float(b)) for a, b in zip(t, frac)]


def resolve_normalizer(ann, override=None):
    if override is not None:
        _check_normalizer(override)
        return float(override)
    return interocular(ann)


def evaluate(estimated, ann, normalizer, runtime_ms=None):
    """MetricsReport of an estimated contour against an annotation with a truth contour."""
    if not ann.contour or len(ann.contour) < 2:
        raise MetricsError("annotation has no ground-truth contour")
    dist = nearest_distances(estimated, ann.contour)
    est_curve = estimated if isinstance(estimated, Curve) else Curve(estimated)
    sparse = sme(curve_to_landmarks(est_curve, len(ann.landmarks)), ann.landmarks, normalizer)
    return MetricsReport(float(dist.mean() / normalizer), sparse, float(normalizer),
                         dist.tolist(), runtime_ms)


@dataclass
class FitStudy:
    errors: np.ndarray
    edges: np.ndarray
    counts: np.ndarray

    def cumulative(self):
        """(bin upper edge, fraction) from the binned counts, so overflow counts in the last bin."""
        if self.errors.size == 0:
            return []
        fractions = np.cumsum(self.counts) / self.errors.size
        return [(float(e), float(f)) for e, f in zip(self.edges[1:], fractions)]

    def fraction_within(self, t):
        if self.errors.size == 0:
            return 0.0
        return float(np.count_nonzero(self.errors <= t) / self.errors.size)

    def table(self):
        """Rows of (bin_lo, bin_hi, count, cumulative)."""
        cum = [c for _, c in self.cumulative()] or [0.0] * len(self.counts)
        return [(float(lo), float(hi), int(n), float(c))
                for lo, hi, n, c in zip(self.edges[:-1], self.edges[1:], self.counts, cum)]


def _clip_to_square(curve, spec):
    """Truth points inside the square, as (i, j) patch coordinates of the run through its center."""
    probe = SquarePatch(spec.side, spec.center, spec.patch_angle, None, None)
    i, j = probe.to_patch(curve.points[:, 0], curve.points[:, 1])
    hi = (spec.side - 1) / 2.0
    inside = (i >= 0) & (i <= 2 * hi) & (j >= 0) & (j <= 2 * hi)
    centre = int(np.argmin(np.square(curve.points - np.asarray(spec.center)).sum(axis=1)))
    if not inside[centre]:
        return None
    lo = centre
    while lo > 0 and inside[lo - 1]:
        lo -= 1
    hi_idx = centre
    while hi_idx + 1 < len(inside) and inside[hi_idx + 1]:
        hi_idx += 1
    return np.stack([i[lo:hi_idx + 1], j[lo:hi_idx + 1]], axis=1)


def segment_fit_error(points, side):
    """RMS vertical residual of the least-squares parabola, divided by the patch side."""
    par = fit_parabola(points)
    resid = points[:, 1] - par(points[:, 0])
    return float(np.sqrt(np.mean(resid ** 2)) / side)


def parabola_fit_study(truth_curves, config, bboxes=None, edges=STUDY_BIN_EDGES):
    """Fit-error distribution of ground-truth contour pieces inside sampled squares."""
    errors = []
    for n, curve in enumerate(truth_curves):
        bbox = bboxes[n] if bboxes is not None else bbox_from_points(curve.points)
        for spec in sample_squares(curve, config.square_count, config.square_size_factor, bbox):
            piece = _clip_to_square(curve, spec)
            if piece is None or len(piece) < 3:
                continue
            try:
                errors.append(segment_fit_error(piece, spec.side))
            except SeamError:
                continue
    errors = np.asarray(errors, dtype=np.float64)
    edges = np.asarray(edges, dtype=np.float64)
    # overflow lands in the last bin
    counts, _ = np.histogram(np.clip(errors, edges[0], edges[-1]), bins=edges)
    logger.info("fit study: %d segments, %.3f within 0.05", errors.size,
                float(np.mean(errors <= 0.05)) if errors.size else 0.0)
    return FitStudy(errors, edges, counts)
