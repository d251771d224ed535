import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import gamma

from hardyscope.calderon import (LogGrid, build_partner, check_coverage, log_quad, normalize_profile,
                                 pairing_integral, quadratic_functional, quadratic_oracle, reproduce)
from hardyscope.errors import DegenerateProfileError, GridCoverageError, GridTooNarrowError
from hardyscope.profiles import BandlimitedProfile, bump_deriv_profile, heat_profile


def pair_f(x):
    # f g = 4 x^2 e^{-2|x|} integrates to 1 against dt/t on each half-line
    x = np.asarray(x)
    return 2 * x * np.exp(-np.abs(x))


@pytest.fixture(scope="module")
def partner():
    return build_partner(bump_deriv_profile(2), 5.0, 3.0, np.pi / 4)


def test_loggrid_basics():
    g = LogGrid(1e-2, 1e2, 5)
    assert np.allclose(g.nodes, [1e-2, 1e-1, 1, 10, 100])
    assert g.weights.sum() == pytest.approx(np.log(1e4))
    assert g.refined().count == 9
    assert LogGrid.from_dict(g.to_dict()) == g


@pytest.mark.parametrize("args", [(0.0, 1.0, 4), (1.0, 1.0, 4), (1.0, 2.0, 1)])
def test_loggrid_invalid(args):
    with pytest.raises(ValueError):
        LogGrid(*args)


@given(st.floats(1.0, 4.0), st.floats(0.5, 3.0))
def test_log_quad_gamma(s, c):
    # int_0^inf t^s e^{-c t} dt/t = Gamma(s) c^{-s}
    val = log_quad(lambda t: t ** s * np.exp(-c * t), 1e-17, 120.0)
    assert val == pytest.approx(gamma(s) * c ** -s, rel=1e-12)


def test_partner_pairings(partner):
    res = pairing_integral(partner.eta.eval, partner.psi.eval, LogGrid(1e-8, 1e3, 2000))
    assert abs(res.plus - 1) <= 1e-8
    assert abs(res.minus - 1) <= 1e-8


def test_partner_on_real_line(partner):
    t = np.array([0.3, 1.7, 4.0])
    c = 2 * partner.delta / np.cos(partner.theta)
    expect = partner.alpha_plus * t ** 5 * np.exp(-c * t) * np.abs(partner.eta.eval(t)) ** 2
    assert np.allclose(partner.psi.eval(t) * partner.eta.eval(t), expect, rtol=1e-12)


def test_pairing_grid_too_narrow(partner):
    with pytest.raises(GridTooNarrowError):
        pairing_integral(partner.eta.eval, partner.psi.eval, LogGrid(1e-1, 10.0, 200))


def test_degenerate_partner():
    zero = BandlimitedProfile(1.0, np.zeros(1025))
    with pytest.raises(DegenerateProfileError):
        build_partner(zero, 5.0, 3.0, np.pi / 4)


def test_normalize_profile():
    psi = normalize_profile(heat_profile())
    for sgn in (1, -1):
        val = log_quad(lambda t: np.abs(psi.eval(sgn * t)) ** 2, 1e-6, 1e4)
        assert val == pytest.approx(1.0, rel=1e-10)


def test_reproduce_on_circle(circle32, rng):
    u = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    res = reproduce(circle32, pair_f, pair_f, u, LogGrid(1e-7, 1e3, 500))
    assert res.relative_error <= 1e-6
    # the operator sum equals the scalar rule applied eigenvalue by eigenvalue
    assert res.error == pytest.approx(res.oracle_error, rel=1e-6, abs=1e-13)
    # kernel component is removed
    assert abs(np.sum(res.projected)) < 1e-10 * np.linalg.norm(u)


def test_reproduce_converges_with_grid(circle32, rng):
    u = rng.standard_normal(32)
    errs = [reproduce(circle32, pair_f, pair_f, u, LogGrid(1e-7, 1e3, n)).relative_error for n in (13, 25, 49, 97)]
    # geometric convergence until the rounding floor
    for a, b in zip(errs, errs[1:]):
        assert b <= a / 2
    assert errs[-1] <= 1e-10


def test_coverage_error(circle32):
    with pytest.raises(GridCoverageError):
        check_coverage(circle32, pair_f, pair_f, LogGrid(1.0, 2.0, 10))


@given(seed=st.integers(0, 2 ** 31))
def test_quadratic_matches_oracle(circle32, seed):
    u = np.random.default_rng(seed).standard_normal(32)
    g = LogGrid(1e-7, 1e3, 250)
    a = quadratic_functional(circle32, pair_f, u, g)
    b = quadratic_oracle(circle32, pair_f, u, g)
    assert a == pytest.approx(b, rel=1e-12)
