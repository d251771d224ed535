"""Q/S operators, E^p norms, Hardy atoms and molecules, and the model bridges."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .calculus import PropagationCertificate
from .calderon import LogGrid, _node_values
from .errors import EvaluationError, IncompatibleFieldsError, InvalidModelError, PreconditionViolation
from .mspace import Ball
from .profiles import BandlimitedProfile, divide_power
from .specop import DivergenceFormModel, SelfAdjointOperator, apply_values, range_projector
from .tent import TentAtom, TentField, tent_norm

SUPPORT_EPS = 1e-10
RESIDUAL_TOL = 1e-12


# ---------------------------------------------------------------------------
# Q and S


@dataclass(frozen=True, eq=False)
class QSConfig:
    """Operator, profile, homogeneity and log grid for ``Q_psi`` and ``S_psi``.

    ``m = 1`` scales by ``t D``; ``m = 2`` by ``t^2 L``.
    """

    op: SelfAdjointOperator
    profile: Callable
    m: int = 1
    grid: LogGrid = field(default_factory=lambda: LogGrid(1e-3, 1e3, 400))

    def __post_init__(self):
        if self.m not in (1, 2):
            raise ValueError("m must be 1 or 2")

    def values(self, conjugate: bool = False) -> np.ndarray:
        """``psi(t_j^m lambda_k)`` as a (nodes, eigenvalues) array."""
        t = self.grid.nodes ** self.m
        arg = np.outer(t, self.op.eigenvalues)
        v = np.asarray(self.profile(arg.ravel()), complex).reshape(arg.shape)
        if not np.all(np.isfinite(v)):
            raise EvaluationError("profile is not finite on the scaled spectrum")
        return np.conj(v) if conjugate else v


def q_apply(cfg: QSConfig, u, conjugate: bool = False) -> TentField:
    """``(Q_psi u)_t = psi(t^m D) u`` at every node.

    ``conjugate=True`` uses ``psi*`` (``conj psi`` on the real spectrum).
    """
    op = cfg.op
    c = op.coefficients(np.asarray(u))
    vals = cfg.values(conjugate)
    rows = op.synthesize((vals * c[None, :]).T).T
    return TentField.for_operator(op, cfg.grid, rows)


def s_apply(cfg: QSConfig, U: TentField) -> np.ndarray:
    """``S_psi U = sum_j w_j psi(t_j^m D) U_{t_j}``."""
    op = cfg.op
    if U.grid != cfg.grid:
        raise IncompatibleFieldsError("field grid differs from the configuration grid")
    if U.values.shape[1] != op.dim:
        raise IncompatibleFieldsError("field width differs from the operator dimension")
    C = op.coefficients(U.values.T)
    vals = cfg.values()
    acc = np.sum(cfg.grid.weights[None, :] * vals.T * C, axis=1)
    return op.synthesize(acc)


def ep_norm(u, cfg: QSConfig, p: float) -> float:
    """``||Q_psi P u||_{T^p}``, the Q-representative of the E^p norm."""
    Pu = range_projector(cfg.op)(np.asarray(u))
    return tent_norm(q_apply(cfg, Pu), p)


def ep_norm_t2_optimal(u, cfg: QSConfig, p: float) -> float:
    """``||U||_{T^p}`` for the least-``T^2`` field with ``S_psi U = P u``.

    ``U = Q_{psi*} m(D)^{-1} P u`` with ``m(lambda) = sum_j w_j |psi(t_j^m lambda)|^2``.
    """
    op = cfg.op
    vals = cfg.values()
    m = cfg.grid.weights @ np.abs(vals) ** 2
    keep = np.abs(op.eigenvalues) > op.kernel_tol()
    inv = np.where(keep & (m > 0), 1.0 / np.where(m > 0, m, 1.0), 0.0)
    v = apply_values(op, inv, np.asarray(u))
    return tent_norm(q_apply(cfg, v, conjugate=True), p)


def norm_equivalence(us, cfg_a: QSConfig, cfg_b: QSConfig, p: float) -> tuple[float, np.ndarray]:
    """Ratios ``ep_norm_a / ep_norm_b`` and ``C = max(max r, 1 / min r)``."""
    r = []
    for u in us:
        a, b = ep_norm(u, cfg_a, p), ep_norm(u, cfg_b, p)
        if b > 0:
            r.append(a / b)
    r = np.array(r)
    if r.size == 0:
        return 1.0, r
    return float(max(r.max(), 1.0 / r.min())), r


@dataclass
class CauchyDiagnostic:
    ep_steps: np.ndarray
    lp_steps: np.ndarray
    ep_limit: float
    lp_limit: float


def completion_diagnostic(sections, cfg: QSConfig, p: float) -> CauchyDiagnostic:
    """Consecutive differences of a sequence in the E^p and L^p norms.

    On a finite space both sequences of steps tend to zero together; the
    limits reported are the norms of the last term.
    """
    op = cfg.op
    secs = [np.asarray(s) for s in sections]
    ep, lp = [], []
    for a, b in zip(secs[:-1], secs[1:]):
        ep.append(ep_norm(b - a, cfg, p))
        lp.append(_lp_norm(op, b - a, p))
    last = secs[-1]
    return CauchyDiagnostic(np.array(ep), np.array(lp), ep_norm(last, cfg, p), _lp_norm(op, last, p))


def _pointwise(op: SelfAdjointOperator, u) -> np.ndarray:
    """Fiber norms ``|u|_x`` (so ``||u||_2^2 = sum_x mu_x |u|_x^2``)."""
    if not op.diagonal_weight:
        raise InvalidModelError("pointwise norms need a diagonal weight")
    space = op.space
    e = np.zeros(space.n)
    np.add.at(e, op.dof_points, op.dof_weights * np.abs(np.asarray(u)) ** 2)
    return np.sqrt(e / space.mass)


def _lp_norm(op: SelfAdjointOperator, u, p: float) -> float:
    f = _pointwise(op, u)
    if np.isinf(p):
        return float(f.max())
    return float(np.sum(op.space.mass * f ** p) ** (1.0 / p))


# ---------------------------------------------------------------------------
# certificates


@dataclass
class AnnulusRow:
    k: int
    a_norm: float
    a_bound: float
    b_norm: float
    b_bound: float

    @property
    def a_margin(self) -> float:
        return self.a_bound - self.a_norm

    @property
    def b_margin(self) -> float:
        return self.b_bound - self.b_norm

    def to_dict(self) -> dict:
        return {"k": self.k, "aNorm": self.a_norm, "aBound": self.a_bound,
                "bNorm": self.b_norm, "bBound": self.b_bound}


@dataclass(eq=False)
class HardyCertificate:
    """``a = op^N b`` with annulus bounds around ``ball``.

    ``m`` is the homogeneity: ``op = D`` gives ``m = 1``, ``op = L`` with
    ``a = L^N b`` gives ``m = 2`` and the bound on ``b`` uses ``r^{2N}``.
    """

    kind: str
    N: int
    a: np.ndarray
    b: np.ndarray
    ball: Ball
    op: SelfAdjointOperator
    m: int = 1
    scale: float = 1.0
    alpha: float = 1.0
    annuli: list = field(default_factory=list)
    residual: float = 0.0
    support_leak: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def radius(self) -> float:
        return self.ball.radius

    def to_dict(self) -> dict:
        return {"kind": self.kind, "N": self.N, "m": self.m, "ball": self.ball.to_dict(),
                "alpha": self.alpha, "scale": self.scale,
                "annuli": [r.to_dict() for r in self.annuli],
                "residuals": {"power": self.residual, "supportLeak": self.support_leak},
                "diagnostics": self.diagnostics}


def annulus_masks(space, ball: Ball) -> list[np.ndarray]:
    """``1_0 = B``, ``1_k = 2^k B \\ 2^{k-1} B`` until ``2^k B`` covers the space."""
    d = space.dist[ball.center]
    r = ball.radius
    out = [d < r]
    k = 0
    while not np.all(d < r * 2.0 ** k):
        k += 1
        out.append((d < r * 2.0 ** k) & ~(d < r * 2.0 ** (k - 1)))
    return out


def _masked_norm(op: SelfAdjointOperator, u, mask: np.ndarray) -> float:
    sel = mask[op.dof_points]
    return float(np.sqrt(np.sum(op.dof_weights[sel] * np.abs(u[sel]) ** 2)))


def annulus_table(op: SelfAdjointOperator, a, b, ball: Ball, N: int, m: int) -> list[AnnulusRow]:
    space = op.space
    rows = []
    for k, mask in enumerate(annulus_masks(space, ball)):
        mu = space.measure(space.dist[ball.center] < ball.radius * 2.0 ** k)
        bound = 2.0 ** -k * mu ** -0.5
        rows.append(AnnulusRow(k, _masked_norm(op, a, mask), bound,
                               _masked_norm(op, b, mask), ball.radius ** (m * N) * bound))
    return rows


def _power_residual(op: SelfAdjointOperator, a, b, N: int) -> float:
    ref = op.norm(a)
    diff = op.norm(a - op.power_apply(b, N))
    return diff / ref if ref > 0 else diff


def _leak(op: SelfAdjointOperator, u, ball: Ball) -> float:
    """Norm outside ``ball`` relative to the total norm."""
    tot = op.norm(u)
    if tot == 0:
        return 0.0
    out = ~(op.space.dist[ball.center] < ball.radius)
    return _masked_norm(op, u, out) / tot


def _largest_scale(rows: list[AnnulusRow]) -> float:
    c = np.inf
    for r in rows:
        if r.a_norm > 0:
            c = min(c, r.a_bound / r.a_norm)
        if r.b_norm > 0:
            c = min(c, r.b_bound / r.b_norm)
    return float(c) if np.isfinite(c) else 1.0


def _certify(op, a, b, ball, N, m, alpha, support_eps, diagnostics) -> HardyCertificate:
    leak = max(_leak(op, a, ball), _leak(op, b, ball))
    kind = "atom" if leak <= support_eps else "molecule"
    rows = annulus_table(op, a, b, ball, N, m)
    c = _largest_scale(rows)
    a_c, b_c = c * a, c * b
    rows = annulus_table(op, a_c, b_c, ball, N, m)
    return HardyCertificate(kind, N, a_c, b_c, ball, op, m, c, alpha, rows,
                            _power_residual(op, a_c, b_c, N), leak, diagnostics)


def _speed(c) -> float:
    return c.c_D if isinstance(c, PropagationCertificate) else float(c)


def _tent_rows(A: TentAtom, op: SelfAdjointOperator):
    vals = A.field.values
    if vals.shape[1] != op.dim:
        raise IncompatibleFieldsError("tent atom width differs from the operator dimension")
    live = np.flatnonzero(np.any(vals != 0, axis=1))
    return vals, live


def build_hardy_atom(A: TentAtom, eta: BandlimitedProfile, N: int, op: SelfAdjointOperator,
                     c_D, support_eps: float = SUPPORT_EPS) -> HardyCertificate:
    """Certificate for ``a = S_eta A = D^N b``, ``b = sum_j w_j t_j^N eta~(t_j D) A_{t_j}``.

    ``eta~ = x^{-N} eta``.  The certificate ball is ``alpha B`` with
    ``alpha = 1 + c_D delta max(1, t_max / r)``, ``t_max`` the largest node
    carrying the atom.  The largest scale ``c`` for which all annulus bounds
    hold is applied to ``a`` and ``b``.

    Parameters
    ----------
    c_D : float or PropagationCertificate
        Propagation speed of ``e^{itD}``.
    """
    if eta.moment_order() < N:
        raise PreconditionViolation(f"eta has moment order {eta.moment_order()} < N={N}")
    grid = A.field.grid
    vals, live = _tent_rows(A, op)
    et = divide_power(eta, N)
    lam = op.eigenvalues
    t = grid.nodes
    w = grid.weights
    C = op.coefficients(vals.T)
    tilde = _node_values(et, grid, lam)
    full = _node_values(eta, grid, lam)
    bc = np.sum((w * t ** N)[None, :] * tilde.T * C, axis=1)
    sc = np.sum(w[None, :] * full.T * C, axis=1)
    b = op.synthesize(bc)
    a = op.power_apply(b, N)
    s_eta = op.synthesize(sc)
    r = A.ball.radius
    t_max = float(t[live].max()) if live.size else 0.0
    alpha = 1.0 + _speed(c_D) * eta.delta * max(1.0, t_max / r)
    big = Ball(A.ball.center, alpha * r)
    na = op.norm(a)
    diag = {"synthesisResidual": op.norm(a - s_eta) / na if na > 0 else 0.0, "cD": _speed(c_D)}
    return _certify(op, a, b, big, N, 1, alpha, support_eps, diag)


@dataclass
class MoleculeCheck:
    passed: bool
    rows: list
    failing: list
    residual: float
    support_violations: list

    def to_dict(self) -> dict:
        return {"passed": self.passed, "failing": self.failing, "residual": self.residual,
                "supportViolations": self.support_violations,
                "rows": [dict(r.to_dict(), aMargin=r.a_margin, bMargin=r.b_margin) for r in self.rows]}


def verify_molecule(cert: HardyCertificate, tol: float = 1e-12,
                    support_eps: float = SUPPORT_EPS) -> MoleculeCheck:
    """Recompute the annulus bounds and ``a = op^N b`` from the stored sections.

    Atom certificates also need ``a`` and ``b`` (epsilon-)supported in the ball;
    out-of-ball points carrying more than ``support_eps`` of the norm are listed.
    """
    op = cert.op
    rows = annulus_table(op, cert.a, cert.b, cert.ball, cert.N, cert.m)
    failing = [r.k for r in rows if r.a_norm > r.a_bound * (1 + tol) or r.b_norm > r.b_bound * (1 + tol)]
    res = _power_residual(op, cert.a, cert.b, cert.N)
    viol = []
    if cert.kind == "atom":
        out = ~(op.space.dist[cert.ball.center] < cert.ball.radius)
        for u in (cert.a, cert.b):
            tot = op.norm(u)
            if tot == 0:
                continue
            for x in np.flatnonzero(out):
                if _masked_norm(op, u, np.arange(op.space.n) == x) > support_eps * tot:
                    viol.append(int(x))
        viol = sorted(set(viol))
    passed = not failing and res <= RESIDUAL_TOL and not viol
    return MoleculeCheck(passed, rows, failing, res, viol)


@dataclass
class L1Check:
    l1: float
    annulus_sum: float

    @property
    def passed(self) -> bool:
        return self.l1 <= self.annulus_sum * (1 + 1e-12) and self.annulus_sum <= 2 * (1 + 1e-12)

    @property
    def margin(self) -> float:
        return 2.0 - self.annulus_sum


def molecule_l1_check(cert: HardyCertificate) -> L1Check:
    """``||a||_1`` against ``sum_k mu(2^k B)^{1/2} ||1_k a||_2``."""
    op = cert.op
    space = op.space
    l1 = float(np.sum(space.mass * _pointwise(op, cert.a)))
    total = 0.0
    for r in annulus_table(op, cert.a, cert.b, cert.ball, cert.N, cert.m):
        mu = space.measure(space.dist[cert.ball.center] < cert.ball.radius * 2.0 ** r.k)
        total += np.sqrt(mu) * r.a_norm
    return L1Check(l1, float(total))


# ---------------------------------------------------------------------------
# sqrt(L) atoms and the BD bridge


def cosine_values(op: SelfAdjointOperator, prof: BandlimitedProfile, t: float) -> np.ndarray:
    """``eta_t(sqrt(lambda)) = (1/pi) int_0^delta eta_hat(s) cos(s t sqrt(lambda)) ds`` for even ``eta``."""
    root = np.sqrt(np.clip(op.eigenvalues, 0.0, None))
    mid = prof.fhat.size // 2
    xi = prof.xi[mid:]
    wq = np.full(xi.size, prof.step)
    wq[0] = wq[-1] = prof.step / 2
    return np.cos(np.outer(t * root, xi)) @ (wq * prof.fhat[mid:]) / np.pi


def group_synthesis_values(op: SelfAdjointOperator, prof: BandlimitedProfile, t: float) -> np.ndarray:
    """``(1/2pi) int eta_hat(s) e^{i s t sqrt(lambda)} ds`` over the full band."""
    root = np.sqrt(np.clip(op.eigenvalues, 0.0, None))
    wq = np.full(prof.xi.size, prof.step)
    wq[0] = wq[-1] = prof.step / 2
    return np.exp(1j * np.outer(t * root, prof.xi)) @ (wq * prof.fhat) / (2 * np.pi)


def cosine_evolution(op: SelfAdjointOperator, t: float) -> np.ndarray:
    """Spectral values of ``cos(t sqrt(L))`` for ``estimate_propagation``."""
    return np.cos(t * np.sqrt(np.clip(op.eigenvalues, 0.0, None)))


def build_sqrtL_atom(A: TentAtom, eta: BandlimitedProfile, N: int, L: SelfAdjointOperator,
                     c_L, support_eps: float = SUPPORT_EPS) -> HardyCertificate:
    """Certificate of type ``N`` for ``L``: ``b = sum_j w_j t_j^{2N} eta~(t_j sqrt L) A_{t_j}``, ``a = L^N b``.

    ``eta~ = x^{-2N} eta`` is applied through the cosine formula; the
    full-group synthesis of the same samples is kept as a cross-check.
    """
    if not eta.is_even(1e-10):
        raise PreconditionViolation("eta must be even")
    if eta.moment_order() < 2 * N:
        raise PreconditionViolation(f"eta has moment order {eta.moment_order()} < 2N={2 * N}")
    if L.eigenvalues.min() < -L.kernel_tol():
        raise PreconditionViolation("L must be nonnegative")
    grid = A.field.grid
    vals, live = _tent_rows(A, L)
    et = divide_power(eta, 2 * N)
    t = grid.nodes
    w = grid.weights
    C = L.coefficients(vals.T)
    cosv = np.array([cosine_values(L, et, tj) for tj in t])
    grpv = np.array([group_synthesis_values(L, et, tj) for tj in t])
    scale = max(np.abs(grpv).max(), 1e-300)
    agreement = float(np.abs(cosv - grpv).max() / scale)
    b = L.synthesize(np.sum((w * t ** (2 * N))[None, :] * cosv.T * C, axis=1))
    a = L.power_apply(b, N)
    r = A.ball.radius
    t_max = float(t[live].max()) if live.size else 0.0
    alpha = 1.0 + _speed(c_L) * eta.delta * max(1.0, t_max / r)
    big = Ball(A.ball.center, alpha * r)
    diag = {"cosineGroupAgreement": agreement, "cL": _speed(c_L)}
    return _certify(L, a, b, big, N, 2, alpha, support_eps, diag)


def heat_phi(z):
    """``phi(z) = z e^{-z}``."""
    z = np.asarray(z)
    return z * np.exp(-z)


def heat_phi_tilde(z):
    """``phi~(z) = phi(z^2) = z^2 e^{-z^2}``."""
    z = np.asarray(z)
    return z ** 2 * np.exp(-z ** 2)


@dataclass
class BridgeReport:
    block_residual: float
    second_block: float
    norm_L: float
    norm_BD: float
    bd_square_residual: float

    @property
    def ratio(self) -> float:
        if self.norm_L == 0 and self.norm_BD == 0:
            return 1.0
        return self.norm_BD / self.norm_L

    def to_dict(self) -> dict:
        return {"blockResidual": self.block_residual, "secondBlock": self.second_block,
                "normL": self.norm_L, "normBD": self.norm_BD, "ratio": self.ratio,
                "bdSquareResidual": self.bd_square_residual}


def bd_bridge_check(model: DivergenceFormModel, u, grid: LogGrid, p: float = 1.0) -> BridgeReport:
    """Compare ``phi(t^2 L) u`` with the first block of ``phi~(t BD) [u; 0]``.

    Both sides are assembled from their own eigendecompositions.
    """
    u = np.asarray(u, complex)
    n = model.n
    cfg_L = QSConfig(model.L, heat_phi, 2, grid)
    cfg_BD = QSConfig(model.BD, heat_phi_tilde, 1, grid)
    UL = q_apply(cfg_L, u)
    UB = q_apply(cfg_BD, np.concatenate([u, np.zeros(n)]))
    first = UB.values[:, :n]
    ref = np.abs(UL.values).max()
    res = np.abs(first - UL.values).max()
    second = float(np.abs(UB.values[:, n:]).max())
    return BridgeReport(float(res / ref) if ref > 0 else float(res),
                        second / ref if ref > 0 else second,
                        tent_norm(UL, p), tent_norm(UB, p), model.bd_square_residual())


def bd_to_L_certificate(cert: HardyCertificate, model: DivergenceFormModel) -> HardyCertificate:
    """First block of a ``BD`` certificate of type ``2N`` as an ``L`` certificate of type ``N``.

    ``(BD)^{2N} = diag(L^N, L~^N)``, so ``a_1 = L^N b_1``; the bounds carry over
    with ``r^{2N}`` and restricted norms.
    """
    if cert.N % 2:
        raise PreconditionViolation("BD certificate must have even type")
    n = model.n
    N = cert.N // 2
    a, b = cert.a[:n], cert.b[:n]
    L = model.L
    rows = annulus_table(L, a, b, cert.ball, N, 2)
    leak = max(_leak(L, a, cert.ball), _leak(L, b, cert.ball))
    kind = "atom" if leak <= SUPPORT_EPS else "molecule"
    return HardyCertificate(kind, N, a, b, cert.ball, L, 2, cert.scale, cert.alpha, rows,
                            _power_residual(L, a, b, N), leak, {"from": "BD"})


def build_bd_atom(A: TentAtom, eta: BandlimitedProfile, N2: int, model: DivergenceFormModel,
                  c_BD, support_eps: float = SUPPORT_EPS) -> HardyCertificate:
    """Hardy certificate of type ``N2`` for ``BD`` (fields of width ``2n``)."""
    return build_hardy_atom(A, eta, N2, model.BD, c_BD, support_eps)
