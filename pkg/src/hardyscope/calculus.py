"""Functional-calculus engines, propagation speed and off-diagonal probes.

Three engines compute ``f(t D) u``:

* spectral: ``sum_j f(t lambda_j) <u, v_j> v_j``;
* wave synthesis: ``(1/2pi) int eta_hat(xi) e^{i xi t D} u d xi`` over the
  stored Fourier nodes of a band-limited profile;
* contour: ``(1/2 pi i) int psi(t z) (z - D)^{-1} u dz`` over the boundary of
  a bisector, with resolvents from a tridiagonal reduction.

Probes compare operator norms ``||1_E f(D) 1_F||`` of masked blocks with
closed-form off-diagonal bounds and report one row per sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg

from .errors import ContourResolutionError, EngineMismatch, PreconditionViolation
from .mspace import SetPair
from .profiles import BandlimitedProfile, HoloProfile
from .specop import SelfAdjointOperator, apply_values, group_values, masked_norm

CSV_HEADER = ("form", "t", "s", "rho", "lhs", "bound", "margin", "pass")


# ---------------------------------------------------------------------------
# engines


def group_apply(op: SelfAdjointOperator, t: float, u) -> np.ndarray:
    """``e^{i t D} u``."""
    return apply_values(op, group_values(op, t), u)


def spectral_profile_apply(op: SelfAdjointOperator, prof, t: float, u) -> np.ndarray:
    """``f(t D) u`` for a profile ``f`` through the spectral theorem."""
    return apply_values(op, prof.eval(t * op.eigenvalues), u)


def _relative(diff: np.ndarray, ref: np.ndarray, u: np.ndarray, op: SelfAdjointOperator) -> float:
    scale = max(op.norm(ref) if ref.ndim == 1 else float(np.linalg.norm(op.to_sym(ref))),
                1e-12 * float(np.linalg.norm(op.to_sym(u))))
    d = op.norm(diff) if diff.ndim == 1 else float(np.linalg.norm(op.to_sym(diff)))
    return d / scale if scale > 0 else d


def wave_synthesis_apply(op: SelfAdjointOperator, eta: BandlimitedProfile, t: float, u,
                         check: bool = True, tol: float = 1e-5) -> np.ndarray:
    """``eta_t(D) u = (1/2pi) int eta_hat(xi) e^{i xi t D} u d xi``.

    The group is applied at each of the stored Fourier nodes and combined
    with trapezoid weights.  With ``check`` the result is compared with the
    spectral engine.

    Raises
    ------
    EngineMismatch
        If the relative difference exceeds ``tol``.
    """
    u = np.asarray(u)
    if t == 0:
        return eta.eval(np.array([0.0]))[0] * u
    c = op.coefficients(u)
    lam = op.eigenvalues
    xi = eta.xi
    w = np.full(xi.size, eta.step / (2 * np.pi))
    w[0] *= 0.5
    w[-1] *= 0.5
    acc = np.zeros(lam.shape, complex)
    # accumulate e^{i s D} over nodes s = t xi_j, in blocks for memory
    for s in range(0, xi.size, 256):
        phase = np.exp(1j * t * np.outer(lam, xi[s:s + 256]))
        acc += phase @ (w[s:s + 256] * eta.fhat[s:s + 256])
    out = op.synthesize(acc.reshape((-1,) + (1,) * (c.ndim - 1)) * c)
    if check:
        ref = spectral_profile_apply(op, eta, t, u)
        rel = _relative(out - ref, ref, u, op)
        if rel > tol:
            raise EngineMismatch(f"wave synthesis differs from spectral engine by {rel:.2e}")
    return out


def _tridiagonal(op: SelfAdjointOperator):
    cached = getattr(op, "_tridiag_cache", None)
    if cached is None:
        H, P = linalg.hessenberg(op.sym_matrix, calc_q=True)
        n = H.shape[0]
        diag = np.real(np.diag(H)).astype(complex)
        upper = np.diag(H, 1) if n > 1 else np.zeros(0, complex)
        lower = np.diag(H, -1) if n > 1 else np.zeros(0, complex)
        cached = (P, diag, upper, lower)
        object.__setattr__(op, "_tridiag_cache", cached)
    return cached


@dataclass
class ContourInfo:
    """Node counts and truncation estimates of a contour evaluation."""

    mu: float
    step: float
    nodes: int
    tail: float
    ranges: list = field(default_factory=list)


def _scan(psi: HoloProfile, t: float, phi: float, mu: float, thresh: float, sign: int,
          step: float = 0.05, chunk: int = 32, min_decades: float = 1.0, max_decades: float = 16.0):
    """Walk outward from ``|t z| = 1`` until a whole chunk is below ``thresh``.

    Returns the log-radii scanned and the integrand bound ``|psi(t z)| / sin(mu)``.
    """
    xs, vals = [], []
    k = 0
    while True:
        x = -np.log(t) + sign * step * np.arange(k, k + chunk)
        a = np.abs(psi.eval(t * np.exp(x + 1j * phi))) / np.sin(mu)
        reached = step * (k + chunk) / np.log(10)
        if not np.all(np.isfinite(a)):
            raise ContourResolutionError(f"profile is not finite on the ray at angle {phi:.3f} before decaying")
        xs.append(x)
        vals.append(a)
        k += chunk
        if reached >= min_decades and a.max() < thresh:
            break
        if reached >= max_decades:
            raise ContourResolutionError(f"profile does not decay along the ray at angle {phi:.3f}")
    return np.concatenate(xs), np.concatenate(vals)


def _ray_range(psi: HoloProfile, t: float, phi: float, mu: float, thresh: float):
    """Log-radius interval outside of which the ray integrand is below ``thresh``.

    Returns ``None`` when the integrand is negligible everywhere, otherwise
    ``(x_lo, x_hi, tail)`` with a geometric estimate of the discarded mass.
    """
    xd, ad = _scan(psi, t, phi, mu, thresh, -1)
    xu, au = _scan(psi, t, phi, mu, thresh, +1)
    x = np.concatenate([xd[::-1], xu[1:]])
    a = np.concatenate([ad[::-1], au[1:]])
    big = np.flatnonzero(a >= thresh)
    if big.size == 0:
        return None
    lo, hi = max(big[0] - 1, 1), min(big[-1] + 1, x.size - 2)
    dx = x[1] - x[0]

    def tail(v0, v1):
        # geometric tail from two consecutive samples beyond the cut
        if v0 == 0:
            return 0.0
        if v1 >= v0:
            return np.inf
        return v0 / (np.log(v0 / v1) / dx) if v1 > 0 else v0 * dx

    return x[lo], x[hi], tail(a[lo], a[lo - 1]) + tail(a[hi], a[hi + 1])


def contour_apply(op: SelfAdjointOperator, psi: HoloProfile, t: float, u, mu: float | None = None,
                  tol: float = 1e-10, check: bool = True, engine_tol: float = 1e-5,
                  info: bool = False):
    """``psi(t D) u`` by the bisector contour integral.

    The boundary of ``S_mu`` is four rays: out along ``-mu``, in along ``+mu``,
    out along ``pi - mu`` and in along ``pi + mu``.  Each ray is parametrized
    by ``z = e^{x + i phi}`` and integrated with the trapezoid rule in ``x``;
    the step resolves the strip of analyticity of width ``min(mu, theta - mu)``.
    The rays are cut where ``|psi(t z)| / sin(mu)`` drops below ``1e-3 tol``.

    Raises
    ------
    ContourResolutionError
        If the estimated truncation residual exceeds ``tol * ||u||``.
    EngineMismatch
        With ``check``, if the spectral engine differs by more than ``engine_tol``.
    """
    theta = psi.theta
    mu = theta / 2 if mu is None else float(mu)
    if not 0 < mu < theta:
        raise PreconditionViolation(f"contour angle mu={mu} must lie in (0, theta={theta})")
    if t <= 0:
        raise PreconditionViolation("contour scale t must be positive")
    u = np.asarray(u)
    y = op.to_sym(u).astype(complex)
    P, diag, upper, lower = _tridiagonal(op)
    yp = P.conj().T @ y
    n = diag.size
    dx = 2 * np.pi * min(mu, theta - mu) / 50
    unorm = float(np.linalg.norm(y))
    thresh = 1e-3 * tol
    acc = np.zeros_like(yp)
    total_tail = 0.0
    nodes = 0
    ranges = []
    for phi, direction in ((-mu, 1.0), (mu, -1.0), (np.pi - mu, 1.0), (np.pi + mu, -1.0)):
        rng = _ray_range(psi, t, phi, mu, thresh)
        if rng is None:
            ranges.append(None)
            continue
        xlo, xhi, tail = rng
        total_tail += tail
        ranges.append((xlo, xhi))
        x = np.arange(xlo, xhi + dx, dx)
        w = np.full(x.size, dx)
        w[0] *= 0.5
        w[-1] *= 0.5
        z = np.exp(x + 1j * phi)
        coef = direction * w * psi.eval(t * z) * z
        ab = np.zeros((3, n), complex)
        ab[0, 1:] = -upper
        ab[2, :-1] = -lower
        for zk, ck in zip(z, coef):
            if ck == 0:
                continue
            ab[1] = zk - diag
            acc += ck * linalg.solve_banded((1, 1), ab, yp, check_finite=False)
        nodes += x.size
    # tails are operator-norm estimates, so they compare with tol directly
    if total_tail / (2 * np.pi) > tol:
        raise ContourResolutionError(f"estimated truncation residual {total_tail / (2 * np.pi):.1e} exceeds {tol:.1e}")
    out = op.from_sym(P @ acc) / (2j * np.pi)
    if check:
        ref = spectral_profile_apply(op, psi, t, u)
        rel = _relative(out - ref, ref, u, op)
        if rel > engine_tol:
            raise EngineMismatch(f"contour engine differs from spectral engine by {rel:.2e}")
    if info:
        return out, ContourInfo(mu, dx, nodes, total_tail * unorm / (2 * np.pi), ranges)
    return out


def engine_agreement(op: SelfAdjointOperator, eta: BandlimitedProfile, psi: HoloProfile,
                     t: float, u) -> dict:
    """Relative differences of the three engines on one case."""
    u = np.asarray(u)
    spec_eta = spectral_profile_apply(op, eta, t, u)
    wave = wave_synthesis_apply(op, eta, t, u, check=False)
    spec_psi = spectral_profile_apply(op, psi, t, u)
    cont = contour_apply(op, psi, t, u, check=False)
    return {"wave": _relative(wave - spec_eta, spec_eta, u, op),
            "contour": _relative(cont - spec_psi, spec_psi, u, op)}


# ---------------------------------------------------------------------------
# propagation


@dataclass
class PropagationCertificate:
    """Speed ``c_D`` with ``||1_{rho(x, .) > c |t|} e^{itD} 1_x|| <= epsilon`` on the probes."""

    c_D: float
    epsilon: float
    times: np.ndarray
    worst_ratio: float
    c_step: float
    rows: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"cD": self.c_D, "epsilon": self.epsilon, "times": np.asarray(self.times).tolist(),
                "worstRatio": self.worst_ratio, "cStep": self.c_step}


def default_times(op: SelfAdjointOperator, count: int = 5) -> np.ndarray:
    h = op.space.min_positive_distance if op.space.n > 1 else 1.0
    return h * 2.0 ** np.arange(count)


def estimate_propagation(op: SelfAdjointOperator, epsilon: float = 1e-8, times=None, probes=None,
                         c_step: float = 0.01, c_max: float = 1e3,
                         evolution: Callable | None = None) -> PropagationCertificate:
    """Smallest grid speed ``c`` (multiple of ``c_step``) with ``epsilon``-support growth.

    For each probe point ``x`` every dof at ``x`` is evolved as a unit mass;
    the needed radius is the smallest realized distance ``R`` with mass
    ``<= epsilon`` beyond it, and the needed speed is ``R / |t|``.
    ``evolution(op, t)`` gives the spectral values of the propagator
    (default ``e^{itD}``; e.g. ``cos(t sqrt(lambda))`` for a nonnegative ``L``).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    space = op.space
    times = default_times(op) if times is None else np.asarray(times, float)
    pts = np.arange(space.n) if probes is None else np.asarray(probes, int)
    dofs = [d for x in pts for d in np.flatnonzero(op.dof_points == x)]
    U = np.zeros((op.dim, len(dofs)), complex)
    for j, d in enumerate(dofs):
        U[d, j] = 1.0
    # unit norm in the weighted product
    U = U / np.sqrt(np.sum(np.abs(op.to_sym(U)) ** 2, axis=0))[None, :]
    worst = 0.0
    rows = []
    for t in times:
        if evolution is None:
            V = op.to_sym(group_apply(op, t, U))
        else:
            V = op.to_sym(apply_values(op, evolution(op, t), U))
        e2 = np.abs(V) ** 2
        for j, d in enumerate(dofs):
            x = op.dof_points[d]
            dd = space.dist[x][op.dof_points]
            levels = np.unique(dd)
            # mass strictly beyond each level
            tails = np.array([np.sqrt(e2[dd > r, j].sum()) for r in levels])
            ok = np.flatnonzero(tails <= epsilon)
            R = levels[ok[0]]
            need = R / abs(t) if t != 0 else (0.0 if R == 0 else np.inf)
            worst = max(worst, need)
            rows.append((float(t), int(x), float(R), float(need)))
    if worst == 0:
        c = 0.0
    else:
        k = np.ceil(worst / c_step * (1 - 1e-9))
        c = float(k * c_step)
        if c > c_max:
            c = np.inf
    return PropagationCertificate(c, float(epsilon), times, float(worst), c_step, rows)


# ---------------------------------------------------------------------------
# probes


def bracket(num: float, den: float) -> float:
    """``<num/den> = min(num/den, 1)`` with ``<a/0> = 1``."""
    if den == 0:
        return 1.0
    return min(num / den, 1.0)


@dataclass
class ProbeRow:
    form: str
    t: float
    s: float
    rho: float
    lhs: float
    bound: float
    slack: float

    @property
    def margin(self) -> float:
        return self.bound - self.lhs

    @property
    def passed(self) -> bool:
        return self.margin >= -self.slack

    def as_tuple(self) -> tuple:
        return (self.form, self.t, self.s, self.rho, self.lhs, self.bound, self.margin, self.passed)


@dataclass
class ProbeResult:
    """Rows of one probe plus fitted constants."""

    form: str
    rows: list
    fitted: dict = field(default_factory=dict)
    slack: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def worst_margin(self) -> float:
        return min((r.margin for r in self.rows), default=np.inf)

    def failing(self) -> list:
        return [r for r in self.rows if not r.passed]

    def summary(self) -> dict:
        return {"form": self.form, "rows": len(self.rows), "passCount": sum(r.passed for r in self.rows),
                "worstMargin": self.worst_margin if self.rows else None, "fitted": self.fitted,
                "slack": self.slack, "passed": self.passed}


def _pair_sep(p) -> float:
    return float(p.sep)


def probe_band(op: SelfAdjointOperator, eta: BandlimitedProfile, pairs: Sequence[SetPair], times,
               c_D: float, slack: float = 1e-8) -> ProbeResult:
    """``||1_E eta_t(D) 1_F||`` against ``(1/pi) ||eta_hat||_inf max(delta - rho/(c_D t), 0)``."""
    rows = []
    for t in times:
        vals = eta.eval(t * op.eigenvalues)
        for p in pairs:
            lhs = masked_norm(op, vals, p.E, p.F)
            rho = _pair_sep(p)
            reach = rho / (c_D * t) if c_D > 0 else (np.inf if rho > 0 else 0.0)
            bound = eta.fhat_sup / np.pi * max(eta.delta - reach, 0.0)
            rows.append(ProbeRow("band", float(t), 0.0, rho, lhs, bound, slack))
    return ProbeResult("band", rows, {"cD": c_D, "delta": eta.delta, "fhatSup": eta.fhat_sup}, slack)


def in_open_bisector(z: complex, theta: float) -> bool:
    """Whether ``z`` lies in the open bisector ``|arg z| < theta`` or ``|pi - arg z| < theta``."""
    a = abs(np.angle(z))
    return min(a, np.pi - a) < theta * (1 - 1e-12) or z == 0


def probe_resolvent(op: SelfAdjointOperator, pairs: Sequence[SetPair], zs, theta: float, c_D: float,
                    slack: float = 1e-8) -> ProbeResult:
    """``||1_E (zI - D)^{-1} 1_F||`` against ``(1/sin theta)/|z| exp(-rho |z| sin theta / c_D)``.

    Rows record ``t = |z|`` and ``s = arg z``.

    Raises
    ------
    PreconditionViolation
        If some ``z`` lies in the open bisector of half-angle ``theta``; the
        boundary rays are admissible since there ``dist(z, R) = |z| sin theta``.
    """
    for z in zs:
        if in_open_bisector(complex(z), theta):
            raise PreconditionViolation(f"z={complex(z)!r} lies in the open bisector of half-angle {theta}")
    C = 1.0 / np.sin(theta)
    rows = []
    for z in zs:
        z = complex(z)
        vals = 1.0 / (z - op.eigenvalues)
        for p in pairs:
            lhs = masked_norm(op, vals, p.E, p.F)
            rho = _pair_sep(p)
            expo = rho * abs(z) / (c_D * C) if c_D > 0 else (np.inf if rho > 0 else 0.0)
            bound = C / abs(z) * np.exp(-expo)
            rows.append(ProbeRow("resolvent", abs(z), float(np.angle(z)), rho, lhs, bound, slack))
    return ProbeResult("resolvent", rows, {"cD": c_D, "Ctheta": C}, slack)


def two_param_shape(s: float, t: float, rho: float, m: float, n: float, sigma: float,
                    delta: float) -> float:
    """``(s/t)^n <t/rho>^{sigma-n-delta}`` for ``s <= t``, ``(t/s)^m <s/rho>^{sigma+m-delta}`` otherwise."""
    if s <= t:
        return (s / t) ** n * bracket(t, rho) ** (sigma - n - delta)
    return (t / s) ** m * bracket(s, rho) ** (sigma + m - delta)


def check_two_param(m: float, n: float, N: int, sigma: float, tau: float, delta: float) -> None:
    failed = []
    if not m <= N:
        failed.append(f"m <= N ({m} > {N})")
    if not m < tau:
        failed.append(f"m < tau ({m} >= {tau})")
    if not n < sigma:
        failed.append(f"n < sigma ({n} >= {sigma})")
    if not 0 < delta < sigma - n:
        failed.append(f"0 < delta < sigma - n ({delta} not in (0, {sigma - n}))")
    if failed:
        raise PreconditionViolation("two-parameter hypotheses violated: " + "; ".join(failed))


def probe_two_param(op: SelfAdjointOperator, eta, psi, pairs: Sequence[SetPair], sgrid, tgrid,
                    m: float, n: float, N: int, sigma: float, tau: float, delta: float,
                    slack: float = 1e-8) -> ProbeResult:
    """``||1_E (eta_t psi_s)(D) 1_F||`` against ``C`` times the two-regime shape.

    ``C`` is fitted as the smallest constant making every row pass.
    """
    check_two_param(m, n, N, sigma, tau, delta)
    lam = op.eigenvalues
    raw = []
    for t in tgrid:
        et = eta.eval(t * lam)
        for s in sgrid:
            vals = et * psi.eval(s * lam)
            for p in pairs:
                rho = _pair_sep(p)
                lhs = masked_norm(op, vals, p.E, p.F)
                raw.append((float(t), float(s), rho, lhs, two_param_shape(s, t, rho, m, n, sigma, delta)))
    C = max((l / g for *_, l, g in raw if g > 0), default=0.0)
    rows = [ProbeRow("two-param", t, s, rho, lhs, C * g, slack) for t, s, rho, lhs, g in raw]
    return ProbeResult("two-param", rows, {"C": C, "m": m, "n": n, "N": N, "sigma": sigma,
                                           "tau": tau, "delta": delta}, slack)


def _expand(space, mask: np.ndarray, radius: float) -> np.ndarray:
    """``{x : rho(x, mask) <= radius}``."""
    return space.distance_to_set(mask) <= radius


def _fit_family(op, family: Callable, params, pairs, alpha: float, space) -> tuple[float, float]:
    """``max(sup ||f_t||, sup lhs / <t/rho>^alpha)`` including half-distance auxiliary pairs."""
    norm_sup = 0.0
    C = 0.0
    for t in params:
        vals = family(t)
        norm_sup = max(norm_sup, float(np.abs(vals).max()))
        for p in pairs:
            rho = _pair_sep(p)
            Et = _expand(space, p.E, rho / 2)
            aux = [(p.E, p.F, rho), (Et, p.F, space.separation(Et, p.F)),
                   (p.E, ~Et, space.separation(p.E, ~Et) if np.any(~Et) else np.inf)]
            for E, F, r in aux:
                if not np.any(E) or not np.any(F):
                    continue
                lhs = masked_norm(op, vals, E, F)
                C = max(C, lhs / bracket(t, r) ** alpha)
    return max(norm_sup, C), norm_sup


def probe_composed(op: SelfAdjointOperator, family_T: Callable, family_S: Callable, pairs, tgrid, sgrid,
                   alpha: float, slack: float = 1e-8) -> ProbeResult:
    """Composition bound ``||1_E T_t S_s 1_F|| <= 2^{alpha+1} C_T C_S <max(s,t)/rho>^alpha``.

    ``family_T(t)`` and ``family_S(s)`` return the values of the multipliers on
    the spectrum.  ``C_T`` and ``C_S`` are the fitted single-family constants
    (at least the uniform operator norms); the fitted composed constant
    ``C_tilde = max lhs / <max(s,t)/rho>^alpha`` is reported alongside.
    """
    space = op.space
    CT, nT = _fit_family(op, family_T, tgrid, pairs, alpha, space)
    CS, nS = _fit_family(op, family_S, sgrid, pairs, alpha, space)
    K = 2 ** (alpha + 1) * CT * CS
    raw = []
    for t in tgrid:
        vt = family_T(t)
        for s in sgrid:
            vals = vt * family_S(s)
            for p in pairs:
                rho = _pair_sep(p)
                lhs = masked_norm(op, vals, p.E, p.F)
                raw.append((float(t), float(s), rho, lhs, bracket(max(s, t), rho) ** alpha))
    Ct = max((l / g for *_, l, g in raw), default=0.0)
    rows = [ProbeRow("composed", t, s, rho, lhs, K * g, slack) for t, s, rho, lhs, g in raw]
    return ProbeResult("composed", rows, {"CT": CT, "CS": CS, "alpha": alpha, "Cconstructive": K,
                                          "Cfitted": Ct, "normT": nT, "normS": nS}, slack)


def probe_davies_gaffney(op: SelfAdjointOperator, pairs, times, slack: float = 1e-12,
                         floor: float = 1e-13) -> ProbeResult:
    """Fit ``||1_E e^{-tL} 1_F|| <= C e^{-c rho^2 / t}``.

    ``c`` is minus the least-squares slope of ``log lhs`` against ``rho^2 / t``
    over rows with positive separation above ``floor``; ``C`` is then the
    smallest constant covering every row.
    """
    if np.any(op.eigenvalues < -op.kernel_tol() - 1e-12):
        raise PreconditionViolation("operator must be nonnegative")
    raw = []
    for t in times:
        vals = np.exp(-t * op.eigenvalues)
        for p in pairs:
            rho = _pair_sep(p)
            raw.append((float(t), rho, masked_norm(op, vals, p.E, p.F)))
    xs = np.array([r ** 2 / t for t, r, l in raw if r > 0 and l > floor])
    ys = np.log([l for t, r, l in raw if r > 0 and l > floor])
    if xs.size >= 2 and np.ptp(xs) > 0:
        slope = np.polyfit(xs, ys, 1)[0]
        c = float(-slope)
    else:
        c = 0.0
    C = max(l * np.exp(c * r ** 2 / t) for t, r, l in raw) if raw else 0.0
    rows = [ProbeRow("davies-gaffney", t, 0.0, r, l, C * np.exp(-c * r ** 2 / t), slack) for t, r, l in raw]
    return ProbeResult("davies-gaffney", rows, {"C": C, "c": c}, slack)


def ultracontractive_g(op: SelfAdjointOperator, t: float, qprime=np.inf) -> float:
    """``||e^{-tL}||`` from ``L^2(mu)`` to ``L^{q'}(mu)`` for ``q'`` in ``{2, inf}``.

    For ``q' = inf`` this is ``max_x (sum_y |P_xy|^2 / mu_y)^{1/2}`` where ``P``
    is the semigroup matrix on point values.
    """
    vals = np.exp(-t * op.eigenvalues)
    if qprime == 2:
        return float(np.abs(vals).max())
    if qprime != np.inf:
        raise ValueError("q' must be 2 or inf")
    S = (op.sym_basis * vals) @ op.sym_basis.conj().T
    # sym frame: P = W^{1/2} S W^{-1/2}; rows weighted back to point values
    w = op.dof_weights
    Pm = np.sqrt(1 / w)[:, None] * S * np.sqrt(w)[None, :]
    return float(np.sqrt(np.max(np.sum(np.abs(Pm) ** 2 / w[None, :], axis=1))))


def _lq_norm(op: SelfAdjointOperator, v, qprime) -> float:
    if qprime == 2:
        return op.norm(v)
    return float(np.abs(v).max())


@dataclass
class ChainResult:
    """The five members of the ultracontractive chain plus the stated bound."""

    lines: list
    rhs: float
    margin: float

    @property
    def passed(self) -> bool:
        return self.margin >= 0 and all(a <= b * (1 + 1e-12) + 1e-300 for a, b in zip(self.lines, self.lines[1:]))


def h4_chain(op: SelfAdjointOperator, F: np.ndarray, grid, qprime=np.inf) -> ChainResult:
    """Chain for ``S F = sum_j w_j t_j^2 L e^{-t_j^2 L} F_j``.

    Lines: ``||S F||_{q'}``; triangle inequality; ultracontractive factor
    ``g(t^2/2)``; Cauchy-Schwarz; ``sup |z e^{-z/2}| = 2/e``.  The stated bound
    is ``(sum w g(t^2/2)^2)^{1/2} ||F||_{T^2}`` over the support nodes.
    """
    t = grid.nodes
    w = grid.weights
    lam = op.eigenvalues
    support = [j for j in range(t.size) if np.any(F[j] != 0)]
    total = np.zeros(op.dim, complex)
    line2 = line3 = 0.0
    g2 = 0.0
    inner2 = 0.0
    f2 = 0.0
    for j in support:
        half = apply_values(op, t[j] ** 2 * lam * np.exp(-0.5 * t[j] ** 2 * lam), F[j])
        term = apply_values(op, np.exp(-0.5 * t[j] ** 2 * lam), half)
        total += w[j] * term
        g = ultracontractive_g(op, 0.5 * t[j] ** 2, qprime)
        line2 += w[j] * _lq_norm(op, term, qprime)
        hn = op.norm(half)
        line3 += w[j] * g * hn
        g2 += w[j] * g ** 2
        inner2 += w[j] * hn ** 2
        f2 += w[j] * op.norm(F[j]) ** 2
    line1 = _lq_norm(op, total, qprime)
    line4 = np.sqrt(g2) * np.sqrt(inner2)
    line5 = np.sqrt(g2) * (2 / np.e) * np.sqrt(f2)
    rhs = np.sqrt(g2) * np.sqrt(f2)
    return ChainResult([line1, line2, line3, line4, line5], float(rhs), float(rhs - line1))


def probe_ultracontractive(op: SelfAdjointOperator, times, qprime=np.inf) -> ProbeResult:
    """Table of ``g(t)``; each row's bound is the small-time value ``max mu^{-1/2}``."""
    w = op.dof_weights
    g0 = float(np.max(np.sqrt(1 / w))) if qprime == np.inf else 1.0
    rows = [ProbeRow("ultracontractive", float(t), 0.0, 0.0, ultracontractive_g(op, t, qprime), g0, 1e-12)
            for t in times]
    return ProbeResult("ultracontractive", rows, {"qprime": "inf" if qprime == np.inf else 2, "g0": g0}, 1e-12)


def probe_psi_decay(op: SelfAdjointOperator, psi, pairs, times, sigma: float, delta: float,
                    slack: float = 1e-8) -> ProbeResult:
    """``||1_E psi_t(D) 1_F||`` against ``C <t/rho>^{sigma - delta}`` with fitted ``C``.

    The fitted decay exponent (slope of ``log lhs`` against ``log(t/rho)`` in
    the regime ``t < rho``) is reported.
    """
    raw = []
    for t in times:
        vals = psi.eval(t * op.eigenvalues)
        for p in pairs:
            rho = _pair_sep(p)
            raw.append((float(t), rho, masked_norm(op, vals, p.E, p.F), bracket(t, rho) ** (sigma - delta)))
    C = max((l / g for t, r, l, g in raw), default=0.0)
    pts = [(np.log(t / r), np.log(l)) for t, r, l, g in raw if 0 < t < r and l > 1e-14]
    expo = float(np.polyfit(*zip(*pts), 1)[0]) if len({x for x, _ in pts}) >= 2 else float("nan")
    rows = [ProbeRow("psi-od", t, 0.0, r, l, C * g, slack) for t, r, l, g in raw]
    return ProbeResult("psi-od", rows, {"C": C, "exponent": expo, "sigma": sigma, "delta": delta}, slack)
