import numpy as np
import pytest
from hypothesis import given, strategies as st

from hardyscope.calderon import LogGrid
from hardyscope.errors import IncompatibleFieldsError
from hardyscope.experiments import random_bump_field, smooth_tent_atom
from hardyscope.mspace import Ball, build_circle, build_graph
from hardyscope.specop import circle_derivative
from hardyscope.tent import (TentField, area_functional, atomic_decompose, ball_volumes, duality_ratio,
                             is_tent_atom, t2_norm, t2_pairing, tent_norm, tent_norm_inf)

GRID = LogGrid(0.1, 2.0, 10)


def _field(space, seed, grid=GRID, complex_=True):
    r = np.random.default_rng(seed)
    v = r.standard_normal((grid.count, space.n))
    if complex_:
        v = v + 1j * r.standard_normal(v.shape)
    return TentField(space, grid, v)


spaces = st.sampled_from([
    build_circle(12),
    build_circle(17, 3.0),
    build_graph([(0, 1, 0.3), (1, 2, 0.7), (2, 3, 0.2), (3, 4, 1.1), (1, 4, 0.5)], [1.0, 0.5, 2.0, 1.0, 0.3]),
])


@given(space=spaces, seed=st.integers(0, 2 ** 31))
def test_t2_fubini_identity(space, seed):
    # sum_x mu_x A(x)^2 = sum_t w_t sum_y e_t(y) exactly
    U = _field(space, seed)
    assert tent_norm(U, 2) == pytest.approx(t2_norm(U), rel=1e-12)


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0])
@given(space=spaces, seed=st.integers(0, 2 ** 31),
       c=st.complex_numbers(min_magnitude=1e-6, max_magnitude=10, allow_nan=False))
def test_norm_axioms(p, space, seed, c):
    U, V = _field(space, seed), _field(space, seed + 1)
    nu, nv = tent_norm(U, p), tent_norm(V, p)
    assert tent_norm(U + V, p) <= (nu + nv) * (1 + 1e-12)
    assert tent_norm(c * U, p) == pytest.approx(abs(c) * nu, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("p", [1.0, 2.0, 4.0])
@pytest.mark.parametrize("j,y", [(0, 0), (5, 3), (9, 7)])
def test_single_cell_oracle(p, j, y):
    # one cell (t_j, y) with energy e: A(x)^2 = w_j e / V(y, t_j) on B(y, t_j), zero elsewhere
    sp = build_circle(12)
    vals = np.zeros((GRID.count, sp.n))
    vals[j, y] = 2.0
    U = TentField(sp, GRID, vals)
    t, w = GRID.nodes[j], GRID.weights[j]
    e = sp.mass[y] * 4.0
    V = sp.mass[sp.dist[y] < t].sum()
    expect = V ** (1 / p) * np.sqrt(w * e / V)
    assert tent_norm(U, p) == pytest.approx(expect, rel=1e-12)
    A = area_functional(U)
    assert np.all(A[sp.dist[y] >= t] == 0)


def test_single_cell_inf_norm_brute():
    # sup over all balls B with B(y, t) inside B of w e / mu(B)
    sp = build_circle(10)
    j, y = 4, 2
    vals = np.zeros((GRID.count, sp.n))
    vals[j, y] = 1.0
    U = TentField(sp, GRID, vals)
    t = GRID.nodes[j]
    we = GRID.weights[j] * sp.mass[y]
    best = 0.0
    for c in range(sp.n):
        for r in np.concatenate([np.unique(sp.dist), [100.0]]):
            B = sp.dist[c] < r
            outside = ~B
            dc = sp.dist[y][outside].min() if outside.any() else np.inf
            if dc >= t:
                best = max(best, we / sp.mass[B].sum())
    assert tent_norm_inf(U) == pytest.approx(np.sqrt(best), rel=1e-12)


def test_ball_volumes():
    sp = build_circle(8)
    h = 2 * np.pi / 8
    V = ball_volumes(sp, [0.5 * h, 1.5 * h, 10.0])
    assert np.allclose(V[0], h)
    assert np.allclose(V[1], 3 * h)
    assert np.allclose(V[2], 2 * np.pi)


@given(space=spaces, seed=st.integers(0, 2 ** 31))
def test_pairing_cauchy_schwarz(space, seed):
    U, V = _field(space, seed), _field(space, seed + 7)
    assert abs(t2_pairing(U, V)) <= t2_norm(U) * t2_norm(V) * (1 + 1e-12)
    assert t2_pairing(U, U).real == pytest.approx(t2_norm(U) ** 2, rel=1e-12)


@given(seed=st.integers(0, 2 ** 31))
def test_duality_ratio_bounded(seed):
    sp = build_circle(16)
    U, V = _field(sp, seed), _field(sp, seed + 3)
    assert duality_ratio(U, V) <= 5.0


def test_incompatible_fields():
    sp = build_circle(8)
    U = _field(sp, 0)
    V = _field(sp, 0, grid=LogGrid(0.1, 2.0, 11))
    with pytest.raises(IncompatibleFieldsError):
        U + V
    W = _field(build_circle(8, 3.0), 0)
    with pytest.raises(IncompatibleFieldsError):
        t2_pairing(U, W)
    with pytest.raises(IncompatibleFieldsError):
        TentField(sp, GRID, np.zeros((3, 8)))


def test_smooth_atom_is_tent_atom():
    op = circle_derivative(32)
    ball = Ball(5, 1.0)
    A = smooth_tent_atom(op, GRID, ball, np.array([[1.0], [0.5]]))
    chk = is_tent_atom(A.field, ball)
    assert chk.passed and chk.support_ok
    assert chk.norm == pytest.approx(chk.bound, rel=1e-12)


def test_tent_atom_support_violation():
    op = circle_derivative(32)
    ball = Ball(5, 1.0)
    A = smooth_tent_atom(op, GRID, ball, np.array([[1.0]]))
    vals = A.field.values.copy()
    vals[0, 20] = 1e-30
    chk = is_tent_atom(A.field.like(vals), ball)
    assert not chk.passed
    assert chk.violations == [(0, 20)]


def test_decompose_zero_field():
    sp = build_circle(8)
    dec = atomic_decompose(TentField(sp, GRID, np.zeros((GRID.count, 8))))
    assert dec.atoms == [] and dec.l1 == 0 and dec.C_dec == 0


def test_decompose_single_atom():
    op = circle_derivative(32)
    ball = Ball(10, 1.2)
    A = smooth_tent_atom(op, GRID, ball, np.array([[1.0], [-0.3]]))
    dec = atomic_decompose(A.field)
    assert dec.residual_t2 <= 1e-12 * t2_norm(A.field)
    for a in dec.atoms:
        assert is_tent_atom(a.field, a.ball).passed


@given(seed=st.integers(0, 2 ** 31))
def test_decompose_random_fields(seed):
    sp = build_circle(24)
    grid = LogGrid(0.05, 1.5, 12)
    V = random_bump_field(sp, grid, np.random.default_rng(seed), bumps=3)
    U = TentField(sp, grid, V)
    dec = atomic_decompose(U)
    assert dec.residual_t2 <= 1e-10 * max(t2_norm(U), 1e-300)
    assert all(is_tent_atom(a.field, a.ball).passed for a in dec.atoms)
    assert np.all(dec.lambdas > 0)
    assert dec.C_dec < 10
    recon = dec.reconstruct(U)
    assert np.allclose(recon.values, U.values, atol=1e-12 * np.abs(U.values).max())
