"""Calderon partners, reproducing formulas and quadratic functionals.

Every integral ``int_0^inf ... dt/t`` is discretized by the trapezoid rule in
``log t`` on a ``LogGrid``.  For integrands analytic in ``log t`` with decay at
both ends this rule converges geometrically in the node count, so truncation
of the range, not the step, usually dominates the error; the truncation is
estimated from the log-slopes of the integrand at the two end nodes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateProfileError, GridCoverageError, GridTooNarrowError, ProfileError
from .profiles import BandlimitedProfile, HoloProfile
from .specop import SelfAdjointOperator, range_projector


@dataclass(frozen=True)
class LogGrid:
    """Geometric grid on ``[t_min, t_max]`` with trapezoid weights for ``dt/t``."""

    t_min: float
    t_max: float
    count: int

    def __post_init__(self):
        if not (0 < self.t_min < self.t_max) or self.count < 2:
            raise ValueError("LogGrid needs 0 < t_min < t_max and count >= 2")

    @property
    def nodes(self) -> np.ndarray:
        return np.geomspace(self.t_min, self.t_max, self.count)

    @property
    def step(self) -> float:
        """Constant ``dt/t`` spacing."""
        return float(np.log(self.t_max / self.t_min) / (self.count - 1))

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.count, self.step)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def refined(self) -> "LogGrid":
        """Same range with half the log-step."""
        return LogGrid(self.t_min, self.t_max, 2 * self.count - 1)

    def to_dict(self) -> dict:
        return {"tMin": self.t_min, "tMax": self.t_max, "count": self.count}

    @classmethod
    def from_dict(cls, d: dict) -> "LogGrid":
        return cls(float(d["tMin"]), float(d["tMax"]), int(d["count"]))


DEFAULT_GRID = LogGrid(1e-3, 1e3, 400)


def log_quad(h: Callable, a: float, b: float, rtol: float = 1e-13, start: int = 129,
             max_nodes: int = 1 << 17) -> float:
    """``int_a^b h(t) dt/t`` by log-trapezoid, halving the step until it settles."""
    grid = LogGrid(a, b, start)
    prev = float(np.sum(grid.weights * h(grid.nodes)))
    while grid.count < max_nodes:
        grid = grid.refined()
        cur = float(np.sum(grid.weights * h(grid.nodes)))
        if abs(cur - prev) <= rtol * max(abs(cur), 1e-300):
            return cur
        prev = cur
    return prev


def _end_tail(vals: np.ndarray, step: float, at_start: bool) -> float:
    """Tail beyond one end node assuming power-law decay ``t^s``.

    The slope ``s`` comes from the envelopes of the last eight nodes, which
    keeps oscillating integrands from faking growth.
    """
    a = np.abs(vals[:8] if at_start else vals[::-1][:8])
    if a[0] == 0 and a.max() == 0:
        return 0.0
    near = a[:4].max()
    far = a[4:8].max()
    if near == 0:
        return 0.0
    if far <= near:
        return np.inf
    slope = np.log(far / near) / (4 * step)
    return float(near / slope)


@dataclass(frozen=True)
class PairingResult:
    plus: float
    minus: float
    tail_plus: float
    tail_minus: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def pairing_integral(f: Callable, g: Callable, grid: LogGrid, tol: float = 1e-8) -> PairingResult:
    """``int_0^inf f(+-t) g(+-t) dt/t`` on both half-lines with tail estimates.

    Raises
    ------
    GridTooNarrowError
        If an estimated tail exceeds ``0.1 * tol``.
    """
    t = grid.nodes
    out = []
    for sgn in (1.0, -1.0):
        h = np.asarray(f(sgn * t)) * np.asarray(g(sgn * t))
        val = np.sum(grid.weights * h)
        tail = _end_tail(h, grid.step, True) + _end_tail(h, grid.step, False)
        if tail > 0.1 * tol:
            side = "positive" if sgn > 0 else "negative"
            raise GridTooNarrowError(f"{side} half-line tail {tail:.2e} exceeds {0.1 * tol:.1e}; widen the grid")
        out.append((float(np.real(val)) if abs(np.imag(val)) <= 1e-14 * abs(val) else complex(val), tail))
    return PairingResult(out[0][0], out[1][0], out[0][1], out[1][1])


# ---------------------------------------------------------------------------
# partners


@dataclass(frozen=True, eq=False)
class CalderonPair:
    """A band-limited ``eta`` with its holomorphic partner ``psi``."""

    eta: BandlimitedProfile
    psi: HoloProfile
    alpha_plus: float
    alpha_minus: float
    sigma: float
    tau: float
    theta: float
    delta: float

    def to_dict(self) -> dict:
        return {"etaRef": self.eta.to_dict(include_samples=False), "sigma": self.sigma, "tau": self.tau,
                "theta": self.theta, "alphaPlus": self.alpha_plus, "alphaMinus": self.alpha_minus}


def _alpha_range(delta: float, theta: float) -> tuple[float, float]:
    # t^sigma vanishes below, exp(-2 delta t sec theta) kills everything above
    return 1e-6 / delta, 40.0 * np.cos(theta) / delta


def partner_constants(eta: BandlimitedProfile, sigma: float, theta: float,
                      rtol: float = 1e-13) -> tuple[float, float]:
    """``alpha_+-`` with ``alpha int_0^inf t^sigma e^{-2 delta t sec theta} |eta(+-t)|^2 dt/t = 1``."""
    a, b = _alpha_range(eta.delta, theta)
    c = 2 * eta.delta / np.cos(theta)
    out = []
    for sgn in (1.0, -1.0):
        I = log_quad(lambda t: t ** sigma * np.exp(-c * t) * np.abs(eta.eval(sgn * t)) ** 2, a, b, rtol)
        out.append(1.0 / I)
    return out[0], out[1]


def build_partner(eta: BandlimitedProfile, sigma: float, tau: float, theta: float) -> CalderonPair:
    """Holomorphic partner ``psi`` of ``eta`` with unit pairing on both half-lines.

    ``psi(z) = alpha_+ z^sigma e^{-2 delta z sec theta} eta*(z)`` for ``Re z >= 0`` and
    ``psi(z) = alpha_- (-z)^sigma e^{2 delta z sec theta} eta*(z)`` otherwise, where
    ``eta*(z) = conj(eta(conj z))``.  On the real line ``psi eta`` is
    ``alpha |t|^sigma e^{-2 delta |t| sec theta} |eta(t)|^2``.

    Raises
    ------
    DegenerateProfileError
        If ``eta`` vanishes on a half-line.
    """
    if not (0 < theta < np.pi / 2) or sigma <= 0 or tau <= 0:
        raise ProfileError("need sigma, tau > 0 and theta in (0, pi/2)")
    pos, neg = eta.nondegenerate()
    if not (pos and neg):
        side = "positive" if not pos else "negative"
        raise DegenerateProfileError(f"eta vanishes on the {side} half-line")
    ap, am = partner_constants(eta, sigma, theta)
    c = 2 * eta.delta / np.cos(theta)
    ev = eta.eval

    def psi(z):
        z = np.asarray(z, complex)
        out = np.empty(z.shape, complex)
        right = z.real >= 0
        star = np.conj(ev(np.conj(z)))
        zr, zl = z[right], z[~right]
        out[right] = ap * zr ** sigma * np.exp(-c * zr) * star[right]
        out[~right] = am * (-zl) ** sigma * np.exp(c * zl) * star[~right]
        return out

    prof = HoloProfile(psi, float(sigma), float(tau), float(theta), f"partner({eta.name})",
                       {"sigma": sigma, "tau": tau, "theta": theta, "eta": eta.params})
    return CalderonPair(eta, prof, ap, am, float(sigma), float(tau), float(theta), eta.delta)


def normalize_profile(psi: HoloProfile, a: float = 1e-6, b: float = 1e4) -> HoloProfile:
    """Scale each half-line so ``int_0^inf |psi(+-t)|^2 dt/t = 1``."""
    norms = []
    for sgn in (1.0, -1.0):
        I = log_quad(lambda t: np.abs(psi.eval(sgn * t)) ** 2, a, b)
        if I <= 0:
            raise DegenerateProfileError("profile vanishes on a half-line")
        norms.append(1.0 / np.sqrt(I))
    return psi.scaled(norms[0], norms[1], name=f"normalized({psi.name})")


# ---------------------------------------------------------------------------
# operator-level formulas


def _node_values(f: Callable, grid: LogGrid, lam: np.ndarray) -> np.ndarray:
    """``f(t_j lambda_k)`` as a (nodes, eigenvalues) array, evaluated in one batch."""
    arg = np.outer(grid.nodes, lam)
    return np.asarray(f(arg.ravel())).reshape(arg.shape)


def scalar_quadrature(f: Callable, g: Callable, lam: np.ndarray, grid: LogGrid) -> np.ndarray:
    """``sum_j w_j f(t_j lam) g(t_j lam)`` for every ``lam`` (zero at ``lam = 0``)."""
    lam = np.asarray(lam, float)
    t = grid.nodes
    arg = np.outer(lam, t)
    vals = np.asarray(f(arg.ravel())).reshape(arg.shape) * np.asarray(g(arg.ravel())).reshape(arg.shape)
    return vals @ grid.weights


def check_coverage(op: SelfAdjointOperator, f: Callable, g: Callable, grid: LogGrid,
                   tol: float = 1e-6) -> None:
    """Ensure each nonzero eigenvalue's integrand is negligible at both grid ends.

    Raises
    ------
    GridCoverageError
        Naming the first offending eigenvalue.
    """
    lam = op.eigenvalues
    nz = np.abs(lam) > op.kernel_tol()
    for l in lam[nz]:
        ends = np.array([grid.t_min, grid.t_max]) * l
        v = np.abs(np.asarray(f(ends)) * np.asarray(g(ends)))
        if v[0] > tol:
            raise GridCoverageError(f"eigenvalue {l!r}: integrand {v[0]:.1e} at t_min; lower t_min")
        if v[1] > tol:
            raise GridCoverageError(f"eigenvalue {l!r}: integrand {v[1]:.1e} at t_max; raise t_max")


@dataclass
class ReproduceResult:
    """Output of ``reproduce``.

    ``per_eigen`` holds the scalar quadrature error ``m(lambda) - 1`` on the
    range and ``m(0) = 0`` on the kernel.
    """

    value: np.ndarray
    projected: np.ndarray
    error: float
    relative_error: float
    per_eigen: np.ndarray
    oracle_error: float

    def to_dict(self) -> dict:
        return {"error": self.error, "relativeError": self.relative_error,
                "oracleError": self.oracle_error, "perEigenvalueErrors": np.abs(self.per_eigen).tolist()}


def reproduce(op: SelfAdjointOperator, f: Callable, g: Callable, u, grid: LogGrid = DEFAULT_GRID,
              coverage_tol: float = 1e-6) -> ReproduceResult:
    """``sum_j w_j f(t_j D) g(t_j D) u`` compared with ``P_{R(D)} u``.

    The operators ``f(t_j D) g(t_j D)`` are applied node by node and summed in
    node order.  ``u`` may hold several sections as columns; errors are then
    Frobenius norms.
    """
    check_coverage(op, f, g, grid, coverage_tol)
    u = np.asarray(u)
    c = op.coefficients(u)
    shape = (-1,) + (1,) * (c.ndim - 1)
    lam = op.eigenvalues
    vals = _node_values(f, grid, lam) * _node_values(g, grid, lam)
    acc = np.zeros(c.shape, complex)
    for j, wj in enumerate(grid.weights):
        acc += wj * vals[j].reshape(shape) * c
    value = op.synthesize(acc)
    Pu = range_projector(op)(u)
    diff = op.to_sym(value - Pu)
    err = float(np.linalg.norm(diff))
    ref = float(np.linalg.norm(op.to_sym(Pu)))
    keep = np.abs(lam) > op.kernel_tol()
    m = scalar_quadrature(f, g, lam, grid)
    per = np.where(keep, m - 1.0, m)
    oracle = float(np.linalg.norm(per.reshape(shape) * c))
    return ReproduceResult(value, Pu, err, err / ref if ref > 0 else err, per, oracle)


def quadratic_functional(op: SelfAdjointOperator, psi: Callable, u, grid: LogGrid = DEFAULT_GRID,
                         coverage_tol: float = 1e-6) -> float:
    """``sum_j w_j ||psi(t_j D) u||^2``, the discrete square function."""
    check_coverage(op, psi, lambda x: np.conj(psi(x)), grid, coverage_tol)
    c = op.coefficients(np.asarray(u))
    vals = _node_values(psi, grid, op.eigenvalues)
    total = 0.0
    for j, wj in enumerate(grid.weights):
        total += wj * float(np.sum(np.abs(vals[j].reshape((-1,) + (1,) * (c.ndim - 1)) * c) ** 2))
    return total


def quadratic_oracle(op: SelfAdjointOperator, psi: Callable, u, grid: LogGrid = DEFAULT_GRID) -> float:
    """``sum_lambda |<u, v_lambda>|^2 int |psi(t lambda)|^2 dt/t`` via the scalar rule."""
    c = op.coefficients(np.asarray(u))
    m = scalar_quadrature(psi, lambda x: np.conj(psi(x)), op.eigenvalues, grid).real
    w = np.abs(c) ** 2
    return float(np.sum(m.reshape((-1,) + (1,) * (c.ndim - 1)) * w))
