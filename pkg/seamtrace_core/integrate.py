"""Global integration of overlapping local seams into one contour.

Every seam point gets a directionality sigma = l1 / (l0 + l1) from the
eigenvalues of its Gaussian-weighted neighbourhood covariance. The walk then
starts at the first point of the first segment and repeatedly steps to the
next point of its own segment when all K nearest neighbours belong to it, or
otherwise to the best-scoring unvisited neighbour.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import IntegrationError
from .initcurve import Curve

logger = logging.getLogger(__name__)

THETA_CUTOFF = 1e-12


@dataclass(frozen=True)
class SeamCloud:
    positions: np.ndarray  # (M*N, 2)
    tangents: np.ndarray  # (M*N, 2)
    segment: np.ndarray  # k per record
    index: np.ndarray  # i per record
    sigma: np.ndarray
    count_segments: int
    count_points: int

    def __len__(self):
        return len(self.positions)

    def record(self, k, i):
        return k * self.count_points + i


def theta(r, h):
    return np.exp(-np.square(r) / (h / 2.0) ** 2)


def support_radius(h):
    """Distance beyond which theta drops below THETA_CUTOFF."""
    return (h / 2.0) * math.sqrt(-math.log(THETA_CUTOFF))


def weighted_covariance(p, positions, h):
    """Sum over the other points q of theta(|p-q|) (p-q)^T (p-q); exact, no cutoff."""
    if isinstance(positions, SeamCloud):
        positions = positions.positions
    diff =np.asarray(p, dtype=np.float64) - np.asarray(positions, dtype=np.float64)
    w = theta(np.linalg.norm(diff, axis=1), h)
    return (diff * w[:, None]).T @ diff


def eigen2(cov):
    """Closed-form eigenvalues (l0 <= l1) of a symmetric 2x2 matrix, l0 clamped at 0."""
    a, b, d = float(cov[0][0]), float(cov[0][1]), float(cov[1][1])
    mid = 0.5 * (a + d)
    rad = math.hypot(0.5 * (a - d), b)
    return max(mid - rad, 0.0), max(mid + rad, 0.0)


def directionality(cov):
    l0, l1 = eigen2(cov)
    total = l0 + l1
    if total <= 0.0:
        return 0.5
    return l1 / total


def directionality_field(positions, h):
    """sigma for every point; neighbours past the theta cutoff are skipped."""
    positions = np.asarray(positions, dtype=np.float64)
    tree = cKDTree(positions)
    neighbours = tree.query_ball_point(positions, r=support_radius(h))
    sigma = np.empty(len(positions))
    for n, idx in enumerate(neighbours):
        sigma[n] = directionality(weighted_covariance(positions[n], positions[np.sort(idx)], h))
    return sigma


def build_cloud(seams, h=20.0):
    if not seams:
        raise IntegrationError("empty cloud: no seams to integrate")
    sizes = {len(s) for s in seams}
    if len(sizes) != 1:
        raise IntegrationError(f"seams have unequal lengths {sorted(sizes)}")
    count_points = sizes.pop()
    ordered = sorted(seams, key=lambda s: s.segment_id)
    positions = np.concatenate([s.global_points for s in ordered])
    tangents = np.concatenate([s.tangents for s in ordered])
    segment = np.repeat(np.arange(len(ordered)), count_points)
    index = np.tile(np.arange(count_points), len(ordered))
    sigma = directionality_field(positions, h)
    logger.debug("cloud: %d segments x %d points, mean sigma %.4f",
                 len(ordered), count_points, float(sigma.mean()))
    return SeamCloud(positions, tangents, segment, index, sigma, len(ordered), count_points)


def knn(cloud, q, K):
    """Indices of the K records nearest to record q (q excluded); ties by (k, i)."""
    if len(cloud) < K + 1:
        raise IntegrationError(f"cloud has {len(cloud)} points, need at least K+1 = {K + 1}")
    d2 = np.square(cloud.positions - cloud.positions[q]).sum(axis=1)
    d2[q] = np.inf
    # records are stored in (k, i) order, so a stable sort breaks ties lexicographically
    return np.argsort(d2, kind="stable")[:K]


def _candidate_scores(cloud, q, cand, variant):
    delta = cloud.positions[cand] - cloud.positions[q]
    norm = np.linalg.norm(delta, axis=1)
    unit = delta / np.where(norm > 0, norm, 1.0)[:, None]
    align = unit @ cloud.tangents[q]
    if variant == "corrected":
        return cloud.sigma[cand] + align
    if variant == "paper-literal":
        return cloud.sigma[q] - align
    raise IntegrationError(f"unknown score variant {variant!r}")


def walk_order(cloud, K=7, variant="corrected"):
    """Record indices of the integrated contour, in walk order."""
    if len(cloud) == 0:
        raise IntegrationError("empty cloud")
    last = cloud.record(cloud.count_segments - 1, cloud.count_points - 1)
    visited = np.zeros(len(cloud), dtype=bool)
    q = 0
    order = [q]
    visited[q] = True
    for _ in range(len(cloud)):
        if q == last:
            break
        k, i = int(cloud.segment[q]), int(cloud.index[q])
        neigh = knn(cloud, q, K)
        if np.all(cloud.segment[neigh] == k):
            if i + 1 == cloud.count_points:
                break
            nxt = q + 1
            if not visited[nxt]:
                q = nxt
                order.append(q)
                visited[q] = True
                continue
        same_next = (cloud.segment[neigh] == k) & (cloud.index[neigh] == i + 1)
        cand = neigh[((cloud.segment[neigh] != k) | same_next) & ~visited[neigh]]
        if len(cand) == 0:
            break
        scores = _candidate_scores(cloud, q, cand, variant)
        # argmax with ties going to the lowest (k, i)
        best = scores.max()
        q = int(cand[scores == best].min())
        order.append(q)
        visited[q] = True
    logger.debug("walk visited %d of %d points", len(order), len(cloud))
    return order


def integrate_walk(cloud, K=7, variant="corrected"):
    order = walk_order(cloud, K, variant)
    pts = cloud.positions[order]
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
    pts = pts[keep]
    if len(pts) < 2:
        raise IntegrationError("walk produced fewer than 2 distinct points")
    return Curve(pts)
