import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from hardyscope.calculus import group_apply
from hardyscope.errors import EvaluationError, InvalidModelError, NearSingularError
from hardyscope.mspace import build_circle
from hardyscope.specop import (SelfAdjointOperator, circle_derivative, divergence_form_1d, hodge_dirac_graph,
                               kernel_projector, masked_norm, random_hermitian, range_projector, resolvent,
                               spectral_apply)


def _vec(rng, dim):
    return rng.standard_normal(dim) + 1j * rng.standard_normal(dim)


@pytest.mark.parametrize("n", [7, 8, 32])
def test_circle_spectrum_is_integer(n):
    op = circle_derivative(n)
    lam = np.sort(op.eigenvalues)
    assert np.allclose(lam, np.round(lam), atol=1e-12)
    if n % 2 == 0:
        assert lam.max() == pytest.approx(n / 2)


def test_circle_group_is_shift(circle32, rng):
    u = _vec(rng, 32)
    h = 2 * np.pi / 32
    for k in (1, 3, -5):
        assert np.allclose(group_apply(circle32, k * h, u), np.roll(u, -k), atol=1e-12)


def test_circle_group_matches_expm(circle32, rng):
    u = _vec(rng, 32)
    ref = scipy.linalg.expm(0.37j * circle32.matrix) @ u
    assert np.allclose(group_apply(circle32, 0.37, u), ref, atol=1e-11)


@pytest.mark.parametrize("w", [0.5, 1.0, 3.0])
def test_single_edge_hodge_spectrum(w):
    op = hodge_dirac_graph(np.array([[-1.0, 1.0]]), [w])
    assert np.allclose(np.sort(op.eigenvalues), [-np.sqrt(2) * w, 0.0, np.sqrt(2) * w], atol=1e-14)


def test_hodge_square_is_block_laplacian(hodge8):
    M = hodge8.matrix @ hodge8.matrix
    nv = 8
    assert np.allclose(M[:nv, nv:], 0)
    # graph Laplacian of the cycle on the vertex block
    L = 2 * np.eye(nv) - np.roll(np.eye(nv), 1, 0) - np.roll(np.eye(nv), -1, 0)
    assert np.allclose(M[:nv, :nv], L)


def test_bd_square_is_block_diagonal(divergence16):
    assert divergence16.bd_square_residual() <= 1e-13


def test_ellipticity_enforced():
    with pytest.raises(InvalidModelError):
        divergence_form_1d(8, 0.05, 0.1)


def test_non_selfadjoint_rejected():
    with pytest.raises(InvalidModelError):
        SelfAdjointOperator(np.array([[0.0, 1.0], [0.0, 0.0]]))


@pytest.mark.parametrize("name", ["circle32", "hodge8", "divergence16"])
@given(seed=st.integers(0, 2 ** 31))
def test_selfadjoint_in_weighted_product(name, seed, request):
    op = request.getfixturevalue(name)
    op = op.BD if hasattr(op, "BD") else op
    r = np.random.default_rng(seed)
    u, v = _vec(r, op.dim), _vec(r, op.dim)
    lhs = op.inner(op.apply(u), v)
    rhs = op.inner(u, op.apply(v))
    assert abs(lhs - rhs) <= 1e-10 * op.norm(u) * op.norm(v) * max(op.norm_bound, 1)


def test_eigenbasis_orthonormal(divergence16):
    op = divergence16.BD
    V = op.eigenbasis
    G = op.to_sym(V).conj().T @ op.to_sym(V)
    assert np.allclose(G, np.eye(op.dim), atol=1e-12)


@given(seed=st.integers(0, 2 ** 31), dim=st.integers(1, 24))
def test_homomorphism(seed, dim):
    r = np.random.default_rng(seed)
    op = random_hermitian(dim, r)
    u = _vec(r, dim)
    f = lambda x: np.exp(-x ** 2)  # noqa: E731
    g = lambda x: np.cos(3 * x) + 1j * x  # noqa: E731
    fg = spectral_apply(op, lambda x: f(x) * g(x), u)
    assert np.allclose(fg, spectral_apply(op, f, spectral_apply(op, g, u)), atol=1e-10)
    assert np.allclose(spectral_apply(op, lambda x: np.ones_like(x), u), u, atol=1e-12)


@given(seed=st.integers(0, 2 ** 31))
def test_resolvent_identity(seed):
    r = np.random.default_rng(seed)
    op = random_hermitian(16, r)
    u = _vec(r, 16)
    z, w = 1.0 + 2.0j, -0.5 - 1.0j
    lhs = resolvent(op, z, u) - resolvent(op, w, u)
    rhs = (w - z) * resolvent(op, z, resolvent(op, w, u))
    assert np.allclose(lhs, rhs, atol=1e-10)
    ref = np.linalg.solve(z * np.eye(16) - op.matrix, u)
    assert np.allclose(resolvent(op, z, u), ref, atol=1e-10)


def test_resolvent_near_spectrum(circle32):
    with pytest.raises(NearSingularError):
        resolvent(circle32, 1.0 + 0j, np.ones(32))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonfinite_function_values(circle32):
    with pytest.raises(EvaluationError):
        spectral_apply(circle32, lambda x: 1.0 / x, np.ones(32))


def test_projectors(hodge8, rng):
    u = _vec(rng, hodge8.dim)
    P, K = range_projector(hodge8), kernel_projector(hodge8)
    assert np.allclose(P(u) + K(u), u)
    assert np.allclose(P(P(u)), P(u))
    assert np.allclose(hodge8.apply(K(u)), 0, atol=1e-12)


@pytest.mark.parametrize("t", [0.3, 1.0, 2.5])
def test_masked_norm_against_dense(circle32, t):
    # ||1_E e^{itD} 1_F|| with the dense exponential as oracle; W is a multiple of I here
    op = circle32
    E, F = np.arange(0, 5), np.arange(12, 20)
    vals = np.exp(1j * t * op.eigenvalues)
    G = scipy.linalg.expm(1j * t * op.matrix)
    ref = np.linalg.norm(G[np.ix_(E, F)], 2)
    assert masked_norm(op, vals, E, F) == pytest.approx(ref, rel=1e-10)


def test_dof_mask_on_bd(divergence16):
    op = divergence16.BD
    m = op.dof_mask(np.arange(16) < 3)
    assert m.sum() == 6


def test_random_hermitian_space():
    sp = build_circle(10)
    op = random_hermitian(10, np.random.default_rng(0), sp)
    assert op.space is sp and op.dim == 10
