import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seamtrace_core import IntegrationError, build_cloud, directionality, integrate_walk, knn, walk_order
from seamtrace_core.integrate import directionality_field, eigen2, theta, weighted_covariance
from tests.conftest import seam_from_points


def test_theta_values():
    assert theta(0.0, 20.0) == 1.0
    assert theta(10.0, 20.0) == pytest.approx(math.exp(-1.0))


def test_collinear_cloud_is_rank_one():
    t = np.arange(-5.0, 6.0)
    cov = weighted_covariance((0.0, 0.0), np.stack([t, 2.0 * t], axis=1), 20.0)
    l0, l1 = eigen2(cov)
    assert l0 <= 1e-9 * l1
    assert directionality(cov) == pytest.approx(1.0)


def test_cross_is_isotropic():
    cross = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    assert directionality(weighted_covariance((0.0, 0.0), cross, 20.0)) == pytest.approx(0.5)


def test_directionality_conventions():
    assert directionality(np.array([[4.0, 0.0], [0.0, 0.0]])) == 1.0
    assert directionality(np.eye(2) * 3.0) == 0.5
    assert directionality(np.zeros((2, 2))) == 0.5


def test_covariance_matches_double_loop(rng):
    for _ in range(100):
        pts = rng.uniform(100).reshape(50, 2) * 40.0
        p = pts[0]
        oracle = np.zeros((2, 2))
        for q in pts[1:]:
            d = p - q
            w = math.exp(-(d @ d) / 10.0 ** 2)
            for a in range(2):
                for b in range(2):
                    oracle[a, b] += w * d[a] * d[b]
        np.testing.assert_allclose(weighted_covariance(p, pts, 20.0), oracle, rtol=1e-9, atol=1e-9)


@given(st.floats(-100, 100), st.floats(-100, 100), st.floats(-100, 100), st.floats(-100, 100))
def test_directionality_range(a, b, c, d):
    m = np.array([[a, b], [c, d]])
    sigma = directionality(m @ m.T)
    assert 0.5 - 1e-12 <= sigma <= 1.0 + 1e-12


def test_field_cutoff_matches_exact_sum(rng):
    pts = rng.uniform(400).reshape(200, 2) * 150.0
    field = directionality_field(pts, 20.0)
    exact = [directionality(weighted_covariance(p, pts, 20.0)) for p in pts]
    np.testing.assert_allclose(field, exact, atol=1e-6)


def _cloud(*segments, h=20.0):
    return build_cloud([seam_from_points(pts, k) for k, pts in enumerate(segments)], h)


def _line(n, x0=0.0, y=0.0):
    return np.stack([x0 + np.arange(n, dtype=np.float64), np.full(n, y)], axis=1)


def test_knn_picks_closest():
    xs = np.array([0.0, 4.0, 1.0, 9.0, 3.0, 2.0, 7.0, 5.0, 10.0, 6.0, 8.0])
    cloud = _cloud(np.stack([xs, np.zeros_like(xs)], axis=1))
    assert sorted(xs[knn(cloud, 0, 3)]) == [1.0, 2.0, 3.0]


def test_knn_ties_go_to_lower_record():
    cloud = _cloud(np.array([[0.0, 0.0], [1.0, 0.0], [5.0, 5.0], [-1.0, 0.0]]))
    assert knn(cloud, 0, 1).tolist() == [1]
    cloud = _cloud(np.array([[0.0, 0.0], [3.0, 3.0]]), np.array([[-1.0, 0.0], [1.0, 0.0]]))
    assert knn(cloud, 0, 1).tolist() == [2]


def test_knn_matches_full_sort(rng):
    pts = rng.uniform(120).reshape(3, 20, 2) * 30.0
    cloud = _cloud(*pts)
    for q in range(0, 60, 7):
        d2 = np.square(cloud.positions - cloud.positions[q]).sum(axis=1)
        order = [r for r in np.lexsort((np.arange(60), d2)) if r != q][:5]
        assert knn(cloud, q, 5).tolist() == order


def test_knn_needs_enough_points():
    cloud = _cloud(_line(5))
    with pytest.raises(IntegrationError):
        knn(cloud, 0, 5)


def test_build_cloud_errors():
    with pytest.raises(IntegrationError, match="empty"):
        build_cloud([])
    with pytest.raises(IntegrationError, match="unequal"):
        build_cloud([seam_from_points(_line(5), 0), seam_from_points(_line(6), 1)])


def test_build_cloud_orders_segments():
    a, b = seam_from_points(_line(10, y=1.0), 1), seam_from_points(_line(10), 0)
    cloud = build_cloud([a, b])
    assert len(cloud) == 20 and cloud.count_segments == 2 and cloud.count_points == 10
    np.testing.assert_array_equal(cloud.positions[:10], b.global_points)
    assert cloud.record(1, 3) == 13
    assert np.all((cloud.sigma >= 0.5) & (cloud.sigma <= 1.0 + 1e-12))


def test_single_segment_is_reproduced():
    pts = np.stack([np.arange(20.0), 0.02 * np.arange(20.0) ** 2], axis=1)
    curve = integrate_walk(_cloud(pts), K=7)
    np.testing.assert_array_equal(curve.points, pts)


def test_offset_segments_walk_forward():
    n = 20
    cloud = _cloud(_line(n), _line(n, x0=0.5))
    order = walk_order(cloud, K=7)
    assert len(set(order)) == len(order)
    xs = cloud.positions[order, 0]
    assert np.all(np.diff(xs) > 0)
    assert len(order) <= 2 * n
    assert order[-1] == cloud.record(1, n - 1)


def test_walk_on_exact_contour_samples(rng):
    t = np.linspace(-60.0, 60.0, 241)
    contour = np.stack([100.0 + t, 150.0 - 0.01 * t * t], axis=1)
    segments = [contour[s:s + 31] for s in range(0, 211, 10)]
    cloud = _cloud(*segments)
    curve = integrate_walk(cloud, K=7)
    from seamtrace_core.metrics import nearest_distances

    assert nearest_distances(curve.points, contour).max() <= 1.0
    assert len(curve) <= len(cloud)


def _noisy_segments(rng, count=4, n=25):
    segs = []
    for k in range(count):
        base = _line(n, x0=6.0 * k, y=0.0) + rng.normal(2 * n).reshape(n, 2) * 0.3
        segs.append(np.round(base * 64.0) / 64.0)
    return segs


def test_walk_is_loop_free_and_bounded(rng):
    segs = _noisy_segments(rng)
    cloud = _cloud(*segs)
    for variant in ("corrected", "paper-literal"):
        order = walk_order(cloud, K=7, variant=variant)
        assert len(set(order)) == len(order) <= len(cloud)
        assert order[0] == 0


def test_walk_is_translation_equivariant(rng):
    segs = _noisy_segments(rng)
    shift = np.array([37.0, -12.0])
    base = integrate_walk(_cloud(*segs), K=7)
    moved = integrate_walk(_cloud(*[s + shift for s in segs]), K=7)
    np.testing.assert_array_equal(moved.points, base.points + shift)


def test_unknown_variant():
    with pytest.raises(IntegrationError):
        walk_order(_cloud(_line(10), _line(10, y=2.0)), K=3, variant="reverse")
