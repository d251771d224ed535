"""Analysing and synthesising profiles.

Two classes are modelled:

* ``HoloProfile``: holomorphic on a bisector with ``|psi(z)| <= C min(|z|^sigma, |z|^-tau)``.
* ``BandlimitedProfile``: ``eta(x) = (1/2pi) int eta_hat(xi) e^{i xi x} d xi`` with
  ``eta_hat`` sampled on a uniform grid over ``[-delta, delta]`` and vanishing
  moments ``d^k eta(0) = 0`` for ``k < N``.

Multiplying a band-limited profile by ``x^n`` or dividing by ``x^m`` keeps the
band: the Fourier side becomes ``(i d/dxi)^n eta_hat`` or an ``m``-fold
antiderivative, computed spectrally on the sample grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import i0e

from .errors import PreconditionViolation, ProfileError, ResolutionError

SAMPLES = 4097
MOMENT_TOL = 1e-8


# ---------------------------------------------------------------------------
# holomorphic profiles


@dataclass(frozen=True, eq=False)
class HoloProfile:
    """Holomorphic profile on the bisector ``S_theta``.

    Parameters
    ----------
    func : callable
        Vectorized evaluation, valid for complex arguments in the bisector.
    sigma, tau : float
        Decay orders at 0 and at infinity.
    theta : float
        Bisector half-angle in ``(0, pi/2)``.
    name : str
    params : dict
        Serializable construction parameters.
    """

    func: Callable
    sigma: float
    tau: float
    theta: float
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def eval(self, z) -> np.ndarray:
        z = np.asarray(z)
        return np.asarray(self.func(z.astype(complex)), dtype=complex)

    def __call__(self, z):
        return self.eval(z)

    def scaled(self, plus: float, minus: float | None = None, name: str | None = None) -> "HoloProfile":
        """Multiply by ``plus`` on ``Re z >= 0`` and by ``minus`` on ``Re z < 0``."""
        minus = plus if minus is None else minus
        f = self.func

        def g(z):
            z = np.asarray(z, complex)
            return f(z) * np.where(z.real >= 0, plus, minus)

        return HoloProfile(g, self.sigma, self.tau, self.theta, name or self.name,
                           {**self.params, "scalePlus": plus, "scaleMinus": minus})

    def to_dict(self) -> dict:
        return {"kind": "holo", "name": self.name, "params": self.params,
                "sigma": self.sigma, "tau": self.tau, "theta": self.theta}


def _sectorwise(right: Callable, left: Callable) -> Callable:
    def f(z):
        z = np.asarray(z, complex)
        out = np.empty(z.shape, complex)
        m = z.real >= 0
        out[m] = right(z[m])
        out[~m] = left(z[~m])
        return out
    return f


def poisson_profile(theta: float = np.pi / 4) -> HoloProfile:
    """``-2 pi z e^{-2 pi z}`` on the right sector, ``2 pi z e^{2 pi z}`` on the left."""
    f = _sectorwise(lambda z: -2 * np.pi * z * np.exp(-2 * np.pi * z),
                    lambda z: 2 * np.pi * z * np.exp(2 * np.pi * z))
    return HoloProfile(f, 1.0, 8.0, theta, "poisson", {"theta": theta})


def gauss_decay_profile(theta: float = np.pi / 8) -> HoloProfile:
    """``z e^{-z^2}``; decays on bisectors of half-angle below ``pi/4``."""
    if not theta < np.pi / 4:
        raise ProfileError("gauss-decay needs theta < pi/4")
    return HoloProfile(lambda z: z * np.exp(-z * z), 1.0, 8.0, theta, "gauss-decay", {"theta": theta})


def rational_profile(theta: float = np.pi / 4) -> HoloProfile:
    """``z / (1 + z^2)^2``: orders ``sigma = 1``, ``tau = 3``."""
    return HoloProfile(lambda z: z / (1 + z * z) ** 2, 1.0, 3.0, theta, "rational", {"theta": theta})


def heat_profile(theta: float = np.pi / 4) -> HoloProfile:
    """``z e^{-z}`` on the right sector, ``z e^{z}`` on the left (``-z e^{-(-z)}`` mirrored)."""
    f = _sectorwise(lambda z: z * np.exp(-z), lambda z: -z * np.exp(z))
    return HoloProfile(f, 1.0, 8.0, theta, "heat", {"theta": theta})


def squared_heat_profile(theta: float = np.pi / 8) -> HoloProfile:
    """``z^2 e^{-z^2}``, the heat profile composed with ``z -> z^2``."""
    return HoloProfile(lambda z: z * z * np.exp(-z * z), 2.0, 8.0, theta, "squared-heat", {"theta": theta})


def zero_profile(theta: float = np.pi / 4) -> HoloProfile:
    return HoloProfile(lambda z: np.zeros(np.shape(z), complex), 1.0, 1.0, theta, "zero", {"theta": theta})


HOLO_REGISTRY: dict[str, Callable[..., HoloProfile]] = {
    "poisson": poisson_profile,
    "gauss-decay": gauss_decay_profile,
    "rational": rational_profile,
    "heat": heat_profile,
    "squared-heat": squared_heat_profile,
    "zero": zero_profile,
}


@dataclass
class DecayReport:
    """Outcome of ``verify_decay``."""

    C: float
    argmax: float
    nondegenerate: bool
    passed: bool
    max_ratio_plus: float
    max_ratio_minus: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def default_decay_grid() -> np.ndarray:
    return np.geomspace(1e-4, 1e4, 801)


def verify_decay(profile: HoloProfile, grid=None, C: float | None = None) -> DecayReport:
    """Fit ``C`` in ``|psi(x)| <= C min(|x|^sigma, |x|^-tau)`` on both half-lines.

    Parameters
    ----------
    profile : HoloProfile
    grid : array_like, optional
        Positive sample points spanning at least six decades around 1.
    C : float, optional
        If given, the report says whether this constant suffices.
    """
    x = default_decay_grid() if grid is None else np.asarray(grid, float)
    x = np.abs(x[x != 0])
    if np.log10(x.max() / x.min()) < 6 or not (x.min() <= 1 <= x.max()):
        raise ProfileError("decay grid must span at least six decades around 1")
    xs = np.concatenate([-x[::-1], x])
    vals = profile.eval(xs)
    if not np.all(np.isfinite(vals)):
        raise ProfileError("profile is not finite on the decay grid")
    env = np.minimum(np.abs(xs) ** profile.sigma, np.abs(xs) ** (-profile.tau))
    ratio = np.abs(vals) / env
    k = int(np.argmax(ratio))
    Cfit = float(ratio[k])
    half = len(x)
    nondeg = bool(np.abs(vals[half:]).max() > 0 and np.abs(vals[:half]).max() > 0)
    passed = True if C is None else bool(Cfit <= C)
    return DecayReport(Cfit, float(xs[k]), nondeg, passed,
                       float(ratio[half:].max()), float(ratio[:half].max()))


# ---------------------------------------------------------------------------
# band-limited profiles


def kaiser_window(u, beta: float = 40.0, taper: float = 0.25) -> np.ndarray:
    """Smooth window on ``[-1, 1]``, equal to 1 at the origin.

    ``(I0(beta sqrt(1-u^2)) - 1) / (I0(beta) - 1)`` times ``exp(-taper u^2 / (1 - u^2))``.
    The first factor concentrates the inverse transform; the second makes the
    window vanish to infinite order at the edges.
    """
    u = np.asarray(u, float)
    out = np.zeros_like(u)
    m = np.abs(u) < 1
    s = np.sqrt(1 - u[m] ** 2)
    core = (i0e(beta * s) * np.exp(beta * (s - 1)) - np.exp(-beta)) / (i0e(beta) - np.exp(-beta))
    out[m] = core * np.exp(-taper * u[m] ** 2 / (1 - u[m] ** 2))
    return out


@dataclass(frozen=True, eq=False)
class BandlimitedProfile:
    """Band-limited profile given by Fourier samples.

    Parameters
    ----------
    delta : float
        Band edge.
    fhat : ndarray, shape (SAMPLES,)
        Samples of ``eta_hat`` on ``linspace(-delta, delta, SAMPLES)``.
    N : int
        Certified number of vanishing derivatives at 0.
    name : str
    params : dict
    closed_eval : callable, optional
        Independent evaluation of ``eta`` used for cross-checks.
    """

    delta: float
    fhat: np.ndarray
    N: int = 0
    name: str = "samples"
    params: dict = field(default_factory=dict)
    closed_eval: Callable | None = None

    def __post_init__(self):
        fh = np.asarray(self.fhat, complex)
        if fh.ndim != 1 or fh.size < 5 or fh.size % 2 == 0:
            raise ProfileError("fhat needs an odd number (>= 5) of samples")
        if not np.all(np.isfinite(fh)):
            raise ProfileError("fhat has non-finite samples")
        fh.setflags(write=False)
        object.__setattr__(self, "fhat", fh)
        w = np.full(fh.size, self.step)
        w[0] = w[-1] = 0.5 * self.step
        object.__setattr__(self, "_qw", w * fh / (2 * np.pi))

    @property
    def xi(self) -> np.ndarray:
        return np.linspace(-self.delta, self.delta, self.fhat.size)

    @property
    def step(self) -> float:
        return 2 * self.delta / (self.fhat.size - 1)

    @property
    def fhat_sup(self) -> float:
        return float(np.abs(self.fhat).max())

    @property
    def fhat_l1(self) -> float:
        a = np.abs(self.fhat)
        return float(self.step * (a.sum() - 0.5 * (a[0] + a[-1])))

    def edge_mass(self) -> float:
        """Size of the samples at the band edges relative to the peak."""
        return float(max(abs(self.fhat[0]), abs(self.fhat[-1])) / max(self.fhat_sup, 1e-300))

    def eval(self, x) -> np.ndarray:
        """Inverse Fourier quadrature ``(1/2pi) sum w_j eta_hat_j e^{i xi_j x}``.

        Large real batches use a Horner recurrence in ``e^{i h x}``; small or
        complex batches use dense exponentials.
        """
        x = np.asarray(x)
        flat = x.ravel().astype(complex)
        out = np.empty(flat.shape, complex)
        if flat.size >= 2048 and np.all(flat.imag == 0):
            z = np.exp(1j * self.step * flat)
            acc = np.zeros(flat.shape, complex)
            for c in self._qw[::-1]:
                acc *= z
                acc += c
            out[:] = acc * np.exp(-1j * self.delta * flat)
        else:
            xi = self.xi
            for s in range(0, flat.size, 512):
                chunk = flat[s:s + 512]
                out[s:s + 512] = np.exp(1j * np.outer(chunk, xi)) @ self._qw
        return out.reshape(x.shape)

    def __call__(self, x):
        return self.eval(x)

    def moments(self, count: int) -> np.ndarray:
        """``d^k eta(0) = (1/2pi) int (i xi)^k eta_hat`` for ``k < count``."""
        xi = self.xi
        return np.array([np.sum(self._qw * (1j * xi) ** k) for k in range(count)])

    def moment_order(self, tol: float = MOMENT_TOL, kmax: int = 16) -> int:
        """Largest ``N`` with ``|d^k eta(0)| <= tol ||eta_hat||_1`` for ``k < N``."""
        mom = np.abs(self.moments(kmax)) <= tol * max(self.fhat_l1, 1e-300)
        bad = np.flatnonzero(~mom)
        return int(bad[0]) if bad.size else kmax

    def nondegenerate(self, X: float | None = None) -> tuple[bool, bool]:
        """Whether ``max |eta| > 1e-6 ||eta_hat||_1`` on each half-line."""
        X = 60.0 / self.delta if X is None else X
        x = np.linspace(X / 2000, X, 2000)
        thr = 1e-6 * self.fhat_l1
        return (bool(np.abs(self.eval(x)).max() > thr), bool(np.abs(self.eval(-x)).max() > thr))

    def is_even(self, tol: float = 1e-10) -> bool:
        return bool(np.abs(self.fhat - self.fhat[::-1]).max() <= tol * max(self.fhat_sup, 1e-300))

    def scaled(self, c: complex) -> "BandlimitedProfile":
        ce = self.closed_eval
        return BandlimitedProfile(self.delta, c * self.fhat, self.N, self.name,
                                  {**self.params, "scale": c if np.isrealobj(c) else [c.real, c.imag]},
                                  (lambda x: c * ce(x)) if ce is not None else None)

    def to_dict(self, include_samples: bool = True) -> dict:
        d = {"kind": "bandlimited", "name": self.name, "params": self.params,
             "delta": self.delta, "N": self.N}
        if include_samples:
            d["samples"] = np.stack([self.fhat.real, self.fhat.imag], -1).tolist()
        return d


def bump_deriv_profile(N: int, delta: float = 1.0, beta: float = 40.0, taper: float = 0.25,
                       samples: int = SAMPLES) -> BandlimitedProfile:
    """``eta(x) = x^N g(x)`` where ``g_hat(xi) = w(xi / delta)`` is the smooth window.

    On the Fourier side ``eta_hat = (i d/dxi)^N w(. / delta)``, still supported in
    ``[-delta, delta]``, and ``d^k eta(0) = 0`` for ``k < N``.  A reference
    evaluation by adaptive quadrature of the window transform is attached for
    cross-checks.
    """
    xi = np.linspace(-delta, delta, samples)
    fh = kaiser_window(xi / delta, beta, taper).astype(complex)

    def window_ref(x):
        x = np.atleast_1d(np.asarray(x, float))
        out = np.empty(x.shape, complex)
        for i, xv in enumerate(x.ravel()):
            # even window: the transform is a cosine integral over [0, delta]
            f = lambda s: kaiser_window(np.array([s / delta]), beta, taper)[0] * np.cos(s * xv)
            val = integrate.quad(f, 0, delta, limit=400, epsabs=1e-15, epsrel=1e-12)[0]
            out.flat[i] = val / np.pi
        return out

    base = BandlimitedProfile(delta, fh, 0, "window", {"delta": delta, "beta": beta, "taper": taper},
                              window_ref)
    prof = multiply_power(base, N) if N > 0 else base

    def reference(x):
        x = np.asarray(x, float)
        return x ** N * window_ref(x).reshape(x.shape)

    return BandlimitedProfile(delta, prof.fhat, prof.N, f"bump-deriv-{N}",
                              {"N": N, "delta": delta, "beta": beta, "taper": taper}, reference)


def _with_order(p: BandlimitedProfile, expected: int | None = None) -> BandlimitedProfile:
    N = p.moment_order()
    if expected is not None:
        N = min(N, expected) if N >= expected else N
    return BandlimitedProfile(p.delta, p.fhat, N, p.name, p.params, p.closed_eval)


# ---------------------------------------------------------------------------
# spectral calculus on the sample grid


def _fft_modes(n: int, length: float) -> np.ndarray:
    return 2 * np.pi * np.fft.fftfreq(n, d=length / n)


def _spectral_derivative(samples: np.ndarray, delta: float, order: int,
                         noise: float = 1e-13) -> tuple[np.ndarray, float]:
    """``order``-th derivative of a compactly supported smooth sample vector.

    The samples (endpoints included) are treated as one period.  Fourier modes
    below ``noise`` times the largest one are dropped before differentiation so
    rounding noise is not amplified.  Returns the derivative and an estimate of
    the amplified noise.
    """
    if order == 0:
        return samples.copy(), 0.0
    per = samples[:-1]
    n = per.size
    c = np.fft.fft(per)
    k = _fft_modes(n, 2 * delta)
    cut = np.abs(c) <= noise * np.abs(c).max()
    c[cut] = 0
    if n % 2 == 0:
        c[n // 2] = 0
    kept = np.abs(k[~cut]).max() if np.any(~cut) else 0.0
    d = np.fft.ifft(c * (1j * k) ** order)
    out = np.concatenate([d, d[:1]])
    err = noise * np.abs(np.fft.fft(per)).max() / n * kept ** order * np.sqrt(n)
    return out, float(err)


def _cumulative_integral(samples: np.ndarray, delta: float) -> np.ndarray:
    """``int_{-delta}^{y} f`` at every sample point, spectrally accurate.

    The mean of ``f`` contributes a linear ramp; the zero-mean part is
    integrated mode by mode.
    """
    per = samples[:-1]
    n = per.size
    length = 2 * delta
    c = np.fft.fft(per)
    mean = c[0] / n
    k = _fft_modes(n, length)
    ci = np.zeros_like(c)
    nz = k != 0
    ci[nz] = c[nz] / (1j * k[nz])
    if n % 2 == 0:
        ci[n // 2] = 0
    periodic = np.fft.ifft(ci)
    periodic = np.concatenate([periodic, periodic[:1]])
    y = np.linspace(0, length, n + 1)
    return mean * y + (periodic - periodic[0])


def multiply_power(phi: BandlimitedProfile, n: int, tol: float = 1e-9) -> BandlimitedProfile:
    """Return ``x -> x^n phi(x)``.

    With ``eta(x) = (1/2pi) int eta_hat e^{i xi x}``, multiplication by ``x``
    is ``i d/dxi`` on the Fourier side, so the new samples are
    ``(i d/dxi)^n phi_hat``.  The band edge is unchanged and the moment order
    grows by ``n``.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return phi
    deriv, err = _spectral_derivative(phi.fhat, phi.delta, n)
    new = (1j) ** n * deriv
    if err > tol * max(np.abs(new).max(), 1e-300):
        raise ResolutionError(f"differentiation noise {err:.1e} exceeds tolerance; use more samples")
    base = phi.eval

    def closed(x):
        x = np.asarray(x)
        return x ** n * base(x)

    out = BandlimitedProfile(phi.delta, new, 0, f"x^{n}*{phi.name}",
                             {"op": "multiply", "n": n, "base": phi.params}, closed)
    return BandlimitedProfile(out.delta, out.fhat, max(out.moment_order(), phi.N + n), out.name,
                              out.params, closed)


@dataclass(frozen=True)
class DivisionReport:
    """Diagnostics of ``divide_power``."""

    leakage: float
    value_at_zero: complex


def divide_power(eta: BandlimitedProfile, m: int, tol: float = MOMENT_TOL,
                 report: bool = False):
    """Return ``x -> x^{-m} eta(x)`` with the removable singularity filled in.

    The Fourier samples are ``(-i)^m F_m`` where ``F_m`` is the ``m``-fold
    antiderivative of ``eta_hat`` from ``-delta``, written as

        F_m(y) = sum_{j<m} c_{m,j} y^{m-1-j} int_{-delta}^{y} w^j eta_hat(w) dw,
        c_{m,j} = (-1)^j binom(m-1, j) / (m-1)!.

    The vanishing moments make every ``int w^j eta_hat`` over the full band
    zero, so ``F_m`` stays supported in ``[-delta, delta]``.  The leakage
    (the largest value of the polynomial continuation on ``[delta, 2 delta]``
    relative to the largest sample) is checked against ``tol``.

    Parameters
    ----------
    eta : BandlimitedProfile
        Input with at least ``m`` vanishing moments.
    m : int
    tol : float
    report : bool
        Also return a ``DivisionReport``.
    """
    if m < 0:
        raise ValueError("m must be nonnegative")
    if m == 0:
        return (eta, DivisionReport(0.0, complex(eta.eval(0.0)))) if report else eta
    order = eta.moment_order(tol)
    if order < m:
        raise PreconditionViolation(f"divide_power needs {m} vanishing moments, found {order}")
    xi = eta.xi
    F = np.zeros(xi.shape, complex)
    tails = []
    for j in range(m):
        J = _cumulative_integral(xi ** j * eta.fhat, eta.delta)
        c = (-1) ** j * comb(m - 1, j) / factorial(m - 1)
        F += c * xi ** (m - 1 - j) * J
        tails.append((c, m - 1 - j, J[-1]))
    y = np.linspace(eta.delta, 2 * eta.delta, 64)
    cont = sum(c * y ** p * Jend for c, p, Jend in tails)
    new = (-1j) ** m * F
    scale = max(np.abs(new).max(), 1e-300)
    leak = float(np.abs(cont).max() / scale)
    if leak > tol:
        raise PreconditionViolation(f"Fourier support leaks after division ({leak:.1e})")
    base = eta.eval
    v0 = eta.moments(m + 1)[m] / factorial(m)

    def closed(x):
        x = np.asarray(x, complex)
        out = np.empty(x.shape, complex)
        small = np.abs(x) < 1e-3
        out[~small] = base(x[~small]) / x[~small] ** m
        if np.any(small):
            # Taylor expansion from the Fourier moments
            mom = eta.moments(m + 8)
            xs = x[small]
            out[small] = sum(mom[m + k] / factorial(m + k) * xs ** k for k in range(8))
        return out

    out = BandlimitedProfile(eta.delta, new, max(eta.N - m, 0), f"x^-{m}*{eta.name}",
                             {"op": "divide", "m": m, "base": eta.params}, closed)
    return (out, DivisionReport(leak, complex(v0))) if report else out


def sqrtl_profile(N: int, delta: float = 1.0, normalize: bool = True) -> tuple[BandlimitedProfile, float]:
    """Even profile ``alpha x^{2N} phi_hat(x)^2`` with ``phi`` the smooth window on ``[-delta/2, delta/2]``.

    ``phi_hat(x) = int phi(y) e^{-ixy} dy``, so the Fourier samples are
    ``alpha (i d/dxi)^{2N} [2 pi (phi * phi)]``, supported in ``[-delta, delta]``.
    ``alpha`` is chosen so ``alpha int_0^inf t^{2N} phi_hat(t)^2 t^2 e^{-t^2} dt/t = 1``.

    Returns
    -------
    profile : BandlimitedProfile
    alpha : float
    """
    xi = np.linspace(-delta, delta, SAMPLES)
    h = xi[1] - xi[0]
    half = (SAMPLES - 1) // 4
    y = h * np.arange(-half, half + 1)
    phi = kaiser_window(2 * y / delta)
    conv = np.convolve(phi, phi) * h
    ghat = np.zeros(SAMPLES)
    ghat[:conv.size] = conv
    ghat = 2 * np.pi * ghat

    def phi_hat(x):
        x = np.asarray(x, float)
        w = np.full(y.size, h)
        w[0] = w[-1] = h / 2
        out = np.empty(x.shape)
        flat = x.ravel()
        for s in range(0, flat.size, 512):
            out.flat[s:s + 512] = np.cos(np.outer(flat[s:s + 512], y)) @ (w * phi)
        return out

    def weight(t):
        return t ** (2 * N) * phi_hat(t) ** 2 * t ** 2 * np.exp(-t ** 2)

    integral = integrate.quad(lambda t: weight(np.array([t]))[0] / t, 0, 12, limit=400,
                              epsabs=1e-15, epsrel=1e-13)[0]
    alpha = 1.0 / integral if normalize else 1.0
    base = BandlimitedProfile(delta, ghat, 0, "bump-square", {"delta": delta})
    prof = multiply_power(base, 2 * N)

    def closed(x):
        x = np.asarray(x)
        if np.iscomplexobj(x) and np.any(x.imag != 0):
            return alpha * x ** (2 * N) * _phi_hat_complex(x, y, phi, h) ** 2
        xr = np.asarray(x.real if np.iscomplexobj(x) else x, float)
        return (alpha * xr ** (2 * N) * phi_hat(xr) ** 2).astype(complex)

    out = BandlimitedProfile(delta, alpha * prof.fhat, prof.N, f"sqrtl-{N}",
                             {"N": N, "delta": delta, "alpha": alpha}, closed)
    return out, alpha


def _phi_hat_complex(x, y, phi, h):
    w = np.full(y.size, h)
    w[0] = w[-1] = h / 2
    x = np.asarray(x, complex)
    return (np.exp(-1j * np.outer(x.ravel(), y)) @ (w * phi)).reshape(x.shape)


def profile_from_dict(data: dict):
    """Rebuild a registered profile from its serialized form."""
    kind = data.get("kind")
    name = data.get("name", "")
    params = dict(data.get("params", {}))
    if kind == "holo":
        if name not in HOLO_REGISTRY:
            raise ProfileError(f"unknown holomorphic profile {name!r}")
        theta = params.get("theta", data.get("theta"))
        return HOLO_REGISTRY[name](theta) if theta is not None else HOLO_REGISTRY[name]()
    if kind == "bandlimited":
        if name.startswith("bump-deriv-"):
            return bump_deriv_profile(int(params["N"]), float(params.get("delta", 1.0)),
                                      float(params.get("beta", 40.0)), float(params.get("taper", 0.25)))
        if name.startswith("sqrtl-"):
            return sqrtl_profile(int(params["N"]), float(params.get("delta", 1.0)))[0]
        if "samples" in data:
            s = np.asarray(data["samples"], float)
            return _with_order(BandlimitedProfile(float(data["delta"]), s[:, 0] + 1j * s[:, 1], 0, name, params))
    raise ProfileError(f"cannot rebuild profile {name!r} of kind {kind!r}")
