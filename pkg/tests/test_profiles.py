from math import factorial

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from hardyscope.errors import PreconditionViolation, ProfileError
from hardyscope.profiles import (BandlimitedProfile, bump_deriv_profile, divide_power, heat_profile, kaiser_window,
                                 multiply_power, poisson_profile, profile_from_dict, rational_profile,
                                 sqrtl_profile, verify_decay)


@pytest.fixture(scope="module")
def bumps():
    return {N: bump_deriv_profile(N) for N in range(4)}


def test_kaiser_window_shape():
    u = np.linspace(-1, 1, 201)
    w = kaiser_window(u)
    assert w[100] == pytest.approx(1.0)
    assert w[0] == 0 and w[-1] == 0
    assert np.allclose(w, w[::-1])
    assert np.all(np.diff(w[100:]) <= 1e-15)


@pytest.mark.parametrize("N", [0, 1, 2, 3])
def test_bump_deriv_moment_order(bumps, N):
    eta = bumps[N]
    assert eta.moment_order() == N
    assert eta.N == N
    assert eta.edge_mass() < 1e-12


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("N", [0, 2, 3])
def test_bump_deriv_matches_closed_form(bumps, N):
    eta = bumps[N]
    x = np.linspace(-40, 40, 97)
    ref = eta.closed_eval(x)
    assert np.abs(eta.eval(x) - ref).max() <= 1e-9 * np.abs(ref).max()


def test_fourier_synthesis_of_gaussian_window():
    # eta_hat = exp(-xi^2 / (2 s^2)) truncated far in its tail has eta(x) = s exp(-s^2 x^2 / 2) / sqrt(2 pi)
    s = 0.15
    xi = np.linspace(-1, 1, 4097)
    eta = BandlimitedProfile(1.0, np.exp(-xi ** 2 / (2 * s ** 2)))
    x = np.linspace(-20, 20, 41)
    ref = s * np.exp(-(s * x) ** 2 / 2) / np.sqrt(2 * np.pi)
    assert np.allclose(eta.eval(x), ref, atol=1e-14)


def test_eval_paths_agree(bumps):
    # the Horner path (large batch) and the dense path must coincide
    x = np.linspace(-30, 30, 4096)
    big = bumps[2].eval(x)
    small = np.concatenate([bumps[2].eval(x[i:i + 100]) for i in range(0, x.size, 100)])
    assert np.allclose(big, small, atol=1e-13)


@pytest.mark.parametrize("n", [1, 2])
def test_multiply_power(bumps, n):
    phi = bumps[0]
    out = multiply_power(phi, n)
    x = np.linspace(-25, 25, 51)
    assert np.allclose(out.eval(x), x ** n * phi.eval(x), atol=1e-10)
    assert out.moment_order() == n


@pytest.mark.parametrize("N,m", [(1, 1), (2, 1), (2, 2), (3, 2)])
def test_divide_power(bumps, N, m):
    eta = bumps[N]
    q, rep = divide_power(eta, m, report=True)
    assert rep.leakage <= 1e-8
    x = np.linspace(0.5, 30, 60)
    x = np.concatenate([-x, x])
    assert np.allclose(q.eval(x) * x ** m, eta.eval(x), atol=1e-10)
    # value at 0: the coefficient of x^m in a local polynomial fit of eta
    xs = np.linspace(-0.4, 0.4, 81)
    coef = np.polynomial.polynomial.polyfit(xs, eta.eval(xs).real, 10)
    assert q.eval(np.array([0.0]))[0].real == pytest.approx(coef[m], abs=1e-6)
    assert rep.value_at_zero.real == pytest.approx(coef[m], abs=1e-6)


def test_divide_needs_moments(bumps):
    with pytest.raises(PreconditionViolation):
        divide_power(bumps[1], 2)


def test_divide_multiply_roundtrip(bumps):
    phi = bumps[0]
    back = divide_power(multiply_power(phi, 2), 2)
    assert np.abs(back.fhat - phi.fhat).max() <= 1e-8 * phi.fhat_sup


def test_sqrtl_profile_normalized():
    N = 1
    prof, alpha = sqrtl_profile(N)
    assert prof.is_even()
    assert prof.moment_order() >= 2 * N
    # independent check of alpha int eta(t) t^2 e^{-t^2} dt/t = 1 with adaptive quadrature
    val = integrate.quad(lambda t: prof.eval(np.array([t]))[0].real * t * np.exp(-t ** 2), 0, 12,
                         limit=400, epsabs=1e-14)[0]
    assert val == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("factory,sigma,tau", [(poisson_profile, 1, 8), (rational_profile, 1, 3),
                                               (heat_profile, 1, 8)])
def test_decay_fit(factory, sigma, tau):
    p = factory()
    assert (p.sigma, p.tau) == (sigma, tau)
    rep = verify_decay(p)
    assert rep.nondegenerate
    assert verify_decay(p, C=rep.C).passed
    assert not verify_decay(p, C=0.5 * rep.C).passed


def test_decay_grid_too_short():
    with pytest.raises(ProfileError):
        verify_decay(heat_profile(), grid=np.geomspace(0.1, 10, 50))


def test_rational_profile_decay_constant():
    # |x / (1 + x^2)^2| <= C min(|x|, |x|^-3): the sup of the ratio is 1, attained at 0 and inf
    rep = verify_decay(rational_profile())
    assert rep.C <= 1.0 + 1e-12
    assert rep.C > 0.99


def test_scaled_and_holo_eval():
    p = heat_profile()
    z = np.array([1.0, -1.0, 0.5 + 0.2j])
    q = p.scaled(2.0, 3.0)
    v, w = p.eval(z), q.eval(z)
    assert w[0] == pytest.approx(2 * v[0])
    assert w[1] == pytest.approx(3 * v[1])


@pytest.mark.parametrize("data", [
    {"kind": "holo", "name": "poisson"},
    {"kind": "bandlimited", "name": "bump-deriv-2", "params": {"N": 2}},
])
def test_profile_roundtrip(data):
    p = profile_from_dict(data)
    x = np.linspace(-3, 3, 7)
    q = profile_from_dict(p.to_dict())
    assert np.allclose(p.eval(x), q.eval(x))


def test_profile_from_unknown():
    with pytest.raises(ProfileError):
        profile_from_dict({"kind": "holo", "name": "nope"})


def test_bad_samples():
    with pytest.raises(ProfileError):
        BandlimitedProfile(1.0, np.ones(4))
    with pytest.raises(ProfileError):
        BandlimitedProfile(1.0, np.array([1, 2, np.nan, 1, 1.0]))


@given(st.floats(0.1, 5.0), st.floats(-50, 50))
def test_scaled_profile_is_linear(c, x):
    eta = bump_deriv_profile(1, samples=1025)
    assert eta.scaled(c).eval(np.array([x]))[0] == pytest.approx(c * eta.eval(np.array([x]))[0], abs=1e-14)


def test_moments_of_known_polynomial(bumps):
    # d^k eta(0) for eta = x^N g: zero below N, N! g(0) at N
    eta = bumps[2]
    mom = eta.moments(3)
    g0 = bumps[0].eval(np.array([0.0]))[0]
    assert abs(mom[0]) < 1e-12 and abs(mom[1]) < 1e-12
    assert mom[2] == pytest.approx(factorial(2) * g0, rel=1e-8)
