import numpy as np
import pytest
from hypothesis import given, strategies as st

from hardyscope.errors import InvalidModelError
from hardyscope.mspace import (Ball, MetricMeasureSpace, build_circle, build_graph, canonical_balls,
                               check_doubling, cone_mask, estimate_doubling, set_pair, tent_mask)


@pytest.mark.parametrize("n", [2, 3, 16, 33])
def test_circle_metric(n):
    sp = build_circle(n)
    h = 2 * np.pi / n
    assert sp.n == n
    assert np.allclose(sp.dist, sp.dist.T)
    assert np.all(np.diag(sp.dist) == 0)
    assert sp.diameter == pytest.approx(h * (n // 2))
    assert sp.total_mass == pytest.approx(2 * np.pi)


@pytest.mark.parametrize("dist,mass", [
    ([[0, 1], [2, 0]], [1, 1]),
    ([[1, 1], [1, 0]], [1, 1]),
    ([[0, 1], [1, 0]], [1, -1]),
    ([[0, 1, 5], [1, 0, 1], [5, 1, 0]], [1, 1, 1]),
    ([[0, 0], [0, 0]], [1, 1]),
])
def test_invalid_metrics_rejected(dist, mass):
    with pytest.raises(InvalidModelError):
        MetricMeasureSpace(np.array(dist, float), np.array(mass, float))


def test_graph_path_distances():
    sp = build_graph([(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5)], np.ones(4))
    assert sp.dist[0, 3] == pytest.approx(3.5)
    assert sp.dist[1, 3] == pytest.approx(2.5)


def test_graph_keeps_lightest_parallel_edge():
    sp = build_graph([(0, 1, 3.0), (1, 0, 1.0)], np.ones(2))
    assert sp.dist[0, 1] == 1.0


def test_graph_disconnected():
    with pytest.raises(InvalidModelError):
        build_graph([(0, 1, 1.0)], np.ones(3))


def test_balls_are_open():
    sp = build_circle(8)
    h = 2 * np.pi / 8
    assert sp.ball_mask(0, h).sum() == 1
    assert sp.ball_mask(0, h * 1.0001).sum() == 3
    assert sp.volume(0, h * 1.0001) == pytest.approx(3 * h)
    assert Ball(0, h).scaled(2).radius == 2 * h


def test_separation_and_distance_to_set():
    sp = build_circle(12)
    h = 2 * np.pi / 12
    assert sp.separation([0], [3]) == pytest.approx(3 * h)
    assert sp.separation([], [3]) == np.inf
    assert np.all(sp.distance_to_set(np.zeros(12, bool)) == np.inf)
    p = set_pair(sp, [0, 1], [5])
    assert p.sep == pytest.approx(4 * h)


def test_tent_of_whole_space_is_everything():
    sp = build_circle(10)
    T = tent_mask(sp, np.ones(10, bool), [0.1, 1.0, 100.0])
    assert T.all()


@given(st.integers(4, 24), st.floats(0.05, 3.0), st.integers(0, 23))
def test_tent_and_cone_duality(n, t, x):
    # (y, t) in the cone of x iff x in B(y, t); (y, t) in T(B) iff B(y, t) inside B
    x = x % n
    sp = build_circle(n)
    C = cone_mask(sp, x, [t])[0]
    assert np.array_equal(C, sp.dist[:, x] < t)
    ball = Ball(x, 2 * t)
    T = tent_mask(sp, ball, [t])[0]
    inside = ball.mask(sp)
    brute = np.array([np.all(inside[sp.dist[y] < t]) and inside[y] for y in range(n)])
    # open balls on a discrete space: B(y, t) in B iff rho(y, M \ B) >= t
    assert np.array_equal(T, brute)


def test_canonical_balls_distinct_and_cover():
    sp = build_circle(9)
    centers, radii, masks = canonical_balls(sp)
    keys = {m.tobytes() for m in masks}
    assert len(keys) == len(masks)
    assert any(m.all() for m in masks)
    assert all(m[c] for c, m in zip(centers, masks))


def test_roundtrip_dict():
    sp = build_graph([(0, 1, 1.0), (1, 2, 1.0)], [1.0, 2.0, 3.0])
    sp2 = MetricMeasureSpace.from_dict(sp.to_dict())
    assert np.array_equal(sp.dist, sp2.dist)
    assert np.array_equal(sp.mass, sp2.mass)


def test_uniform_circle_doubling():
    sp = build_circle(64)
    h = 2 * np.pi / 64
    radii = h * np.array([1.5, 3, 6, 12])
    alphas = [1.0, 2.0, 4.0]
    cert = estimate_doubling(sp, radii, alphas)
    assert cert.violations == 0
    assert cert.A >= 1.0
    assert 0 <= cert.kappa <= 4


@given(st.lists(st.floats(0.2, 5.0), min_size=3, max_size=9), st.lists(st.floats(0.1, 3.0), min_size=3, max_size=9))
def test_doubling_certificate_has_no_violations(lengths, masses):
    k = min(len(lengths), len(masses))
    edges = [(i, i + 1, lengths[i]) for i in range(k - 1)]
    sp = build_graph(edges, masses[:k])
    radii = np.geomspace(0.1, 10.0, 6)
    alphas = [1.0, 1.5, 3.0]
    cert = estimate_doubling(sp, radii, alphas)
    assert check_doubling(sp, cert, radii, alphas) == 0


def test_doubling_rejects_bad_grid():
    sp = build_circle(8)
    with pytest.raises(ValueError):
        estimate_doubling(sp, [1.0], [0.5])
