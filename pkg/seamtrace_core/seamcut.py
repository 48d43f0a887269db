"""Local seam cutting inside one square patch.

A seam holds one column per row with adjacent columns at most 1 apart. The
gradient seam maximizes the summed patch gradient exactly. The guided seam
adds a parabola prior: past the first `window` rows each cell is also scored
by e = 1 - (d / d_norm)^2, where d is the distance of the cell to the
parabola fitted to the previous `window` points of the path it extends.

Ties between predecessors prefer delta 0, then -1, then +1; ties between end
columns prefer the smallest column.
"""
import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import SeamError

logger = logging.getLogger(__name__)

DELTA_ORDER = (0, -1, 1)
DELTA_RANK = {0: 0, -1: 1, 1: 2}


@dataclass(frozen=True)
class Parabola:
    """j = a*i^2 + b*i + c in patch coordinates."""
    a: float
    b: float
    c: float

    def __call__(self, i):
        return self.a * i * i + self.b * i + self.c


@dataclass(frozen=True)
class SeamPath:
    cols: np.ndarray
    score: float
    global_points: np.ndarray
    tangents: np.ndarray
    segment_id: int = 0

    def __len__(self):
        return len(self.cols)

    def with_segment(self, segment_id):
        return replace(self, segment_id=int(segment_id))


def fit_window(rows, cols):
    """Least-squares quadratics via the 3x3 normal equations.

    rows: (w,) shared abscissae; cols: (k, w) ordinates. Returns (k, 3) of (a, b, c).
    """
    rows = np.asarray(rows, dtype=np.float64)
    cols = np.asarray(cols, dtype=np.float64).reshape(-1, len(rows))
    design = np.stack([rows * rows, rows, np.ones_like(rows)], axis=1)
    normal = design.T @ design
    try:
        coeffs = np.linalg.solve(normal, design.T @ cols.T)
    except np.linalg.LinAlgError as e:
        raise SeamError(f"singular normal matrix in parabola fit: {e}") from e
    return coeffs.T


def fit_parabola(points, count=None):
    """Fit j as a quadratic in i over the last `count` (i, j) points (all if None)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if count is not None:
        pts = pts[-count:]
    if len(np.unique(pts[:, 0])) < 3:
        raise SeamError("parabola fit needs at least 3 points with distinct i")
    a, b, c = fit_window(pts[:, 0], pts[:, 1][None, :])[0]
    return Parabola(float(a), float(b), float(c))


def _vertical_distance(i, j, coeffs):
    a, b, c = coeffs[..., 0], coeffs[..., 1], coeffs[..., 2]
    return np.abs(j - (a * i * i + b * i + c))


def _exact_distance(i, j, coeffs):
    """Nearest distance from (i, j) to the curve t -> (t, a t^2 + b t + c)."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    shape = np.broadcast_shapes(np.shape(i), np.shape(j), coeffs.shape[:-1])
    coeffs = np.broadcast_to(coeffs, shape + (3,)).reshape(-1, 3)
    i = np.broadcast_to(np.asarray(i, dtype=np.float64), shape).ravel()
    j = np.broadcast_to(np.asarray(j, dtype=np.float64), shape).ravel()
    a, b, c0 = coeffs[:, 0], coeffs[:, 1], coeffs[:, 2] - j
    out = _vertical_distance(i, j, coeffs)

    flat = np.abs(a) < 1e-9
    if np.any(flat):
        line = np.abs(c0 + b * i) / np.sqrt(1.0 + b * b)
        out = np.where(flat, np.minimum(out, line), out)

    curved = ~flat
    if np.any(curved):
        ac, bc, cc, ic = a[curved], b[curved], c0[curved], i[curved]
        lead = 2.0 * ac * ac
        p2 = 3.0 * ac * bc / lead
        p1 = (bc * bc + 2.0 * ac * cc + 1.0) / lead
        p0 = (bc * cc - ic) / lead
        companion = np.zeros((len(ac), 3, 3))
        companion[:, 0, 0] = -p2
        companion[:, 0, 1] = -p1
        companion[:, 0, 2] = -p0
        companion[:, 1, 0] = 1.0
        companion[:, 2, 1] = 1.0
        t = np.linalg.eigvals(companion).real
        for _ in range(2):
            f = ((t + p2[:, None]) * t + p1[:, None]) * t + p0[:, None]
            df = (3.0 * t + 2.0 * p2[:, None]) * t + p1[:, None]
            t = np.where(np.abs(df) > 1e-12, t - f / np.where(df == 0, 1.0, df), t)
        y = (ac[:, None] * t + bc[:, None]) * t + cc[:, None]
        dist = np.sqrt((t - ic[:, None]) ** 2 + y * y).min(axis=1)
        out = out.copy()
        out[curved] = np.minimum(out[curved], dist)
    return out.reshape(shape)


def parabola_distance(i, j, coeffs, mode="vertical"):
    if mode == "vertical":
        return _vertical_distance(i, j, coeffs)
    if mode == "exact":
        return _exact_distance(i, j, coeffs)
    raise SeamError(f"unknown distance mode {mode!r}")


def parabola_error(point, parabola, d_norm=3.0, mode="vertical"):
    """e = 1 - (d / d_norm)^2, deliberately unclamped below zero."""
    i, j = point
    coeffs = np.array([parabola.a, parabola.b, parabola.c])
    d = float(parabola_distance(i, j, coeffs, mode))
    return 1.0 - (d / d_norm) ** 2


def _weights(alpha, weighting):
    if weighting == "eq4":
        return float(alpha), 1.0 - float(alpha)
    if weighting == "eq5-literal":
        return 1.0, 1.0
    raise SeamError(f"unknown alpha weighting {weighting!r}")


def _seam_dp(grads, wg, we, window, d_norm, mode):
    rows, cols = grads.shape
    jj = np.arange(cols)
    use_prior = we != 0.0 and rows > window + 1
    score = np.empty((rows, cols))
    back = np.zeros((rows, cols), dtype=np.intp)
    score[0] = wg * grads[0]
    # columns of the best path ending at each cell of the previous row, newest last
    hist = jj[:, None] if use_prior else None
    for i in range(1, rows):
        prev = score[i - 1]
        coeffs = fit_window(np.arange(i - window, i), hist) if use_prior and i > window else None
        best = arg = None
        for delta in DELTA_ORDER:
            src = jj + delta
            valid = (src >= 0) & (src < cols)
            src = np.clip(src, 0, cols - 1)
            cand = prev[src]
            if coeffs is not None:
                d = parabola_distance(i, jj, coeffs[src], mode)
                cand = cand + we * (1.0 - (d / d_norm) ** 2)
            cand = np.where(valid, cand, -np.inf)
            if best is None:
                best, arg = cand, src
            else:
                better = cand > best
                best = np.where(better, cand, best)
                arg = np.where(better, src, arg)
        score[i] = best + wg * grads[i]
        back[i] = arg
        if use_prior:
            hist = np.concatenate([hist[arg], jj[:, None]], axis=1)[:, -window:]

    end = int(np.argmax(score[-1]))
    path = np.empty(rows, dtype=np.intp)
    path[-1] = end
    for i in range(rows - 1, 0, -1):
        path[i - 1] = back[i, path[i]]
    return path, float(score[-1, end])


def seam_to_global(patch, cols, score=0.0, segment_id=0):
    cols = np.asarray(cols, dtype=np.intp)
    x, y = patch.to_global(np.arange(len(cols)), cols)
    pts = np.stack([x, y], axis=1)
    if len(pts) > 1:
        d = np.gradient(pts, axis=0)
        tangents = d / np.linalg.norm(d, axis=1, keepdims=True)
    else:
        tangents = np.array([[-np.sin(patch.angle), np.cos(patch.angle)]])
    return SeamPath(cols, float(score), pts, tangents, int(segment_id))


def gradient_seam(patch):
    cols, score = _seam_dp(patch.grads, 1.0, 0.0, 0, 1.0, "vertical")
    return seam_to_global(patch, cols, score)


def guided_seam(patch, alpha=0.7, window=20, d_norm=3.0, weighting="eq4", mode="vertical"):
    if not 0.0 <= alpha <= 1.0:
        raise SeamError(f"alpha must be in [0, 1], got {alpha}")
    if window < 3:
        raise SeamError(f"window must be >= 3, got {window}")
    wg, we = _weights(alpha, weighting)
    cols, score = _seam_dp(patch.grads, wg, we, window, d_norm, mode)
    return seam_to_global(patch, cols, score)


def seam_score(patch, cols, alpha=0.7, window=20, d_norm=3.0, weighting="eq4", mode="vertical"):
    """Objective of one path, with every parabola fitted to the path's own history."""
    wg, we = _weights(alpha, weighting)
    g = patch.grads
    cols = np.asarray(cols)
    total = wg * g[0, cols[0]]
    for i in range(1, len(cols)):
        if we != 0.0 and len(cols) > window + 1 and i > window:
            coeffs = fit_window(np.arange(i - window, i), cols[None, i - window:i])
            d = parabola_distance(i, cols[i], coeffs[0], mode)
            total = total + we * (1.0 - (float(d) / d_norm) ** 2)
        total = total + wg * g[i, cols[i]]
    return float(total)
