import numpy as np
import pytest
from hypothesis import given, strategies as st

from hardyscope.calderon import LogGrid
from hardyscope.calculus import (bracket, check_two_param, contour_apply, engine_agreement, estimate_propagation,
                                 h4_chain, in_open_bisector, probe_band, probe_davies_gaffney, probe_resolvent,
                                 spectral_profile_apply, ultracontractive_g, wave_synthesis_apply)
from hardyscope.errors import PreconditionViolation
from hardyscope.mspace import set_pair
from hardyscope.profiles import bump_deriv_profile, poisson_profile, rational_profile

ETA = bump_deriv_profile(2)


def _pairs(op, length=4, gaps=(2, 6, 10)):
    return [set_pair(op.space, np.arange(length), np.arange(length + g, 2 * length + g)) for g in gaps]


@given(t=st.floats(0.05, 3.0), seed=st.integers(0, 2 ** 31))
def test_wave_synthesis_matches_spectral(circle32, t, seed):
    u = np.random.default_rng(seed).standard_normal(32)
    out = wave_synthesis_apply(circle32, ETA, t, u, check=False)
    ref = spectral_profile_apply(circle32, ETA, t, u)
    assert np.linalg.norm(out - ref) <= 1e-9 * max(np.linalg.norm(ref), 1e-12 * np.linalg.norm(u))


@pytest.mark.parametrize("psi", [poisson_profile(), rational_profile()], ids=["poisson", "rational"])
@pytest.mark.parametrize("t", [0.1, 1.0, 5.0])
def test_contour_matches_spectral(hodge8, psi, t, rng):
    u = rng.standard_normal(hodge8.dim)
    out = contour_apply(hodge8, psi, t, u, check=False)
    ref = spectral_profile_apply(hodge8, psi, t, u)
    scale = max(np.linalg.norm(ref), 1e-12 * np.linalg.norm(u))
    assert np.linalg.norm(out - ref) <= 1e-5 * scale


def test_engine_agreement_report(circle32, rng):
    rep = engine_agreement(circle32, ETA, poisson_profile(), 0.7, rng.standard_normal(32))
    assert rep["wave"] <= 1e-5 and rep["contour"] <= 1e-5


@pytest.mark.parametrize("mu", [0.0, -0.1, np.pi / 4, 1.0])
def test_contour_angle_precondition(circle32, mu):
    with pytest.raises(PreconditionViolation):
        contour_apply(circle32, poisson_profile(), 1.0, np.ones(32), mu=mu)


def test_circle_propagation_speed_is_one(circle32):
    cert = estimate_propagation(circle32)
    assert cert.c_D == pytest.approx(1.0)


def test_propagation_speed_hodge(hodge8):
    # one step of d or d* moves half an edge; the group spreads at a finite grid speed
    cert = estimate_propagation(hodge8, epsilon=1e-8)
    assert np.isfinite(cert.c_D) and cert.c_D > 0


@pytest.mark.parametrize("z,inside", [
    (1.0 + 0.1j, True), (-1.0 + 0.1j, True), (1j, False), (np.exp(3j * np.pi / 4), False),
    (np.exp(1j * np.pi / 4), False), (0.0, True), (2 * np.exp(1j * np.pi / 3), False),
])
def test_open_bisector(z, inside):
    assert in_open_bisector(complex(z), np.pi / 4) == inside


def test_resolvent_probe_rejects_sector(circle32):
    with pytest.raises(PreconditionViolation):
        probe_resolvent(circle32, _pairs(circle32), [0.5 + 0.1j], np.pi / 4, 1.0)


def test_resolvent_probe_on_circle(circle32):
    res = probe_resolvent(circle32, _pairs(circle32), [1j, 2j, np.exp(3j * np.pi / 4)], np.pi / 4, 1.0)
    assert res.passed
    assert len(res.rows) == 9


def test_band_probe_exact_zeros(circle64):
    # times above the discretization floor of about 13 h / delta
    pairs = _pairs(circle64, gaps=(4, 16, 28))
    times = [1.5, 2.0, 2.5]
    res = probe_band(circle64, ETA, pairs, times, 1.0)
    assert res.passed
    beyond = [r for r in res.rows if r.rho > ETA.delta * r.t]
    assert beyond
    for r in beyond:
        assert r.lhs <= 1e-10
        assert r.bound == 0.0


@pytest.mark.parametrize("num,den,expect", [(1, 2, 0.5), (3, 2, 1.0), (0, 1, 0.0), (5, 0, 1.0)])
def test_bracket(num, den, expect):
    assert bracket(num, den) == expect


@pytest.mark.parametrize("args", [
    (3, 1, 2, 5, 3, 0.5),  # m > N
    (1, 5, 2, 5, 3, 0.5),  # n >= sigma
    (1, 1, 2, 5, 3, 4.5),  # delta too large
    (3, 1, 3, 5, 3, 0.5),  # m >= tau
])
def test_two_param_preconditions(args):
    with pytest.raises(PreconditionViolation):
        check_two_param(*args)


def test_two_param_ok():
    check_two_param(1, 1, 2, 5, 3, 0.5)


def test_davies_gaffney_laplacian(divergence16):
    L = divergence16.L
    pairs = _pairs(L, length=2, gaps=(1, 3, 5, 7))
    res = probe_davies_gaffney(L, pairs, [0.002, 0.005, 0.01, 0.02])
    assert res.fitted["c"] > 0
    assert res.passed


def test_davies_gaffney_needs_nonnegative(circle32):
    with pytest.raises(PreconditionViolation):
        probe_davies_gaffney(circle32, _pairs(circle32), [0.1])


def test_ultracontractive_two_norm(divergence16):
    # e^{-tL} is a contraction on L^2 with the kernel giving norm exactly 1
    assert ultracontractive_g(divergence16.L, 0.3, 2) == pytest.approx(1.0)
    g = [ultracontractive_g(divergence16.L, t) for t in (1e-4, 1e-3, 1e-2)]
    assert g[0] >= g[1] >= g[2] >= 1.0 - 1e-12


@given(seed=st.integers(0, 2 ** 31))
def test_h4_chain_is_monotone(divergence16, seed):
    L = divergence16.L
    r = np.random.default_rng(seed)
    grid = LogGrid(0.01, 1.0, 12)
    F = np.zeros((grid.count, L.dim))
    lo, hi = sorted(r.integers(0, grid.count, 2))
    F[lo:hi + 1, :5] = r.standard_normal((hi - lo + 1, 5))
    res = h4_chain(L, F, grid)
    assert res.passed
    assert res.margin >= 0
