"""Tent fields on ``M x (0, inf)``, tent-space norms and atomic decomposition.

A field stores ``U_t`` at the nodes of a ``LogGrid`` for every degree of
freedom of a section.  The pointwise energy

    e_t(y) = sum_{d at y} w_d |U_{t,d}|^2

already carries the measure, so ``||U||_{T^2}^2 = sum_t w_t sum_y e_t(y)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .calderon import LogGrid
from .errors import DegenerateGeometryError, IncompatibleFieldsError
from .mspace import Ball, MetricMeasureSpace, canonical_balls, tent_mask


@dataclass(frozen=True, eq=False)
class TentField:
    """Section ``U_t(x)`` sampled on a log grid.

    Parameters
    ----------
    space : MetricMeasureSpace
    grid : LogGrid
    values : ndarray, shape (count, dim)
    dof_points : ndarray of int, optional
        Point of each dof; defaults to one dof per point.
    dof_weights : ndarray, optional
        Gram weights of the dofs; defaults to the point masses.
    """

    space: MetricMeasureSpace
    grid: LogGrid
    values: np.ndarray
    dof_points: np.ndarray | None = None
    dof_weights: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2 or v.shape[0] != self.grid.count:
            raise IncompatibleFieldsError("values must have one row per grid node")
        if not np.all(np.isfinite(v)):
            raise ValueError("tent field has non-finite entries")
        object.__setattr__(self, "values", v)
        pts = np.arange(v.shape[1]) if self.dof_points is None else np.asarray(self.dof_points, int)
        if pts.shape != (v.shape[1],):
            raise IncompatibleFieldsError("dof_points do not match the field width")
        object.__setattr__(self, "dof_points", pts)
        w = self.space.mass[pts] if self.dof_weights is None else np.asarray(self.dof_weights, float)
        object.__setattr__(self, "dof_weights", w)

    @classmethod
    def for_operator(cls, op, grid: LogGrid, values) -> "TentField":
        """Field with the dof layout and Gram weights of an operator."""
        return cls(op.space, grid, values, op.dof_points, op.dof_weights)

    def like(self, values) -> "TentField":
        return TentField(self.space, self.grid, values, self.dof_points, self.dof_weights)

    @property
    def fiber_dim(self) -> int:
        return self.values.shape[1] // self.space.n

    @property
    def tgrid(self) -> np.ndarray:
        return self.grid.nodes

    def energy(self) -> np.ndarray:
        """``e_t(y)``, shape ``(count, n)``."""
        e = np.zeros((self.grid.count, self.space.n))
        np.add.at(e.T, self.dof_points, (self.dof_weights[None, :] * np.abs(self.values) ** 2).T)
        return e

    def point_support(self) -> np.ndarray:
        """Cells ``(t, y)`` where some dof at ``y`` is nonzero."""
        s = np.zeros((self.grid.count, self.space.n), bool)
        nz = self.values != 0
        for d, p in enumerate(self.dof_points):
            s[:, p] |= nz[:, d]
        return s

    def __add__(self, other: "TentField") -> "TentField":
        _check_compatible(self, other)
        return self.like(self.values + other.values)

    def __mul__(self, c) -> "TentField":
        return self.like(c * self.values)

    __rmul__ = __mul__

    def to_dict(self) -> dict:
        v = self.values
        return {"n": self.space.n, "tCount": self.grid.count, "fiberDim": self.fiber_dim,
                "grid": self.grid.to_dict(), "dofPoints": self.dof_points.tolist(),
                "values": np.stack([v.real.ravel(), v.imag.ravel()], -1).tolist()}


def _check_compatible(U: TentField, V: TentField) -> None:
    if U.space is not V.space and not (U.space.n == V.space.n and np.array_equal(U.space.dist, V.space.dist)):
        raise IncompatibleFieldsError("fields live on different spaces")
    if U.grid != V.grid:
        raise IncompatibleFieldsError("fields live on different grids")
    if U.values.shape != V.values.shape or not np.array_equal(U.dof_points, V.dof_points):
        raise IncompatibleFieldsError("fields have different dof layouts")


# ---------------------------------------------------------------------------
# norms


def ball_volumes(space: MetricMeasureSpace, tgrid) -> np.ndarray:
    """``V(y, t)`` for every node and point, shape ``(count, n)``."""
    t = np.asarray(tgrid, float)
    order = np.argsort(space.dist, axis=1)
    ds = np.take_along_axis(space.dist, order, 1)
    cm = np.cumsum(space.mass[order], axis=1)
    out = np.empty((t.size, space.n))
    for y in range(space.n):
        k = np.searchsorted(ds[y], t, side="left")
        out[:, y] = np.where(k > 0, cm[y][np.maximum(k - 1, 0)], 0.0)
    return out


def area_functional(U: TentField) -> np.ndarray:
    """``A U(x) = (sum_t w_t sum_{rho(x,y) < t} e_t(y) / V(y,t))^{1/2}``."""
    space = U.space
    t = U.tgrid
    e = U.energy()
    V = ball_volumes(space, t)
    live = e > 0
    if np.any(live & (V <= 0)):
        raise DegenerateGeometryError("zero-volume ball under an occupied cell")
    dens = np.divide(e, V, out=np.zeros_like(e), where=live)
    A2 = np.zeros(space.n)
    w = U.grid.weights
    for j in range(t.size):
        if not np.any(live[j]):
            continue
        A2 += w[j] * ((space.dist < t[j]) @ dens[j])
    return np.sqrt(A2)


def tent_norm(U: TentField, p: float) -> float:
    """``||U||_{T^p} = (sum_x mu(x) A U(x)^p)^{1/p}`` for ``p >= 1``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    A = area_functional(U)
    return float(np.sum(U.space.mass * A ** p) ** (1.0 / p))


def t2_norm(U: TentField) -> float:
    """``(sum_t w_t sum_y e_t(y))^{1/2}``."""
    return float(np.sqrt(np.sum(U.grid.weights[:, None] * U.energy())))


def t2_pairing(U: TentField, V: TentField) -> complex:
    """``sum_t w_t sum_d w_d U_{t,d} conj(V_{t,d})``."""
    _check_compatible(U, V)
    return complex(np.sum(U.grid.weights[:, None] * U.dof_weights[None, :] * U.values * np.conj(V.values)))


def tent_norm_inf(U: TentField) -> float:
    """Supremum over the canonical balls of ``(mu(B)^{-1} sum_{T(B)} w_t e_t(y))^{1/2}``."""
    space = U.space
    t = U.tgrid
    we = U.grid.weights[:, None] * U.energy()
    if not np.any(we):
        return 0.0
    _, _, masks = canonical_balls(space, float(t.max()))
    best = 0.0
    for m in masks:
        T = tent_mask(space, m, t)
        val = we[T].sum() / space.measure(m)
        best = max(best, val)
    return float(np.sqrt(best))


def duality_ratio(U: TentField, V: TentField) -> float:
    """``|<U, V>| / (||U||_{T^1} ||V||_{T^inf})``."""
    den = tent_norm(U, 1) * tent_norm_inf(V)
    return abs(t2_pairing(U, V)) / den if den > 0 else 0.0


# ---------------------------------------------------------------------------
# atoms


@dataclass(frozen=True, eq=False)
class TentAtom:
    field: TentField
    ball: Ball

    def to_dict(self) -> dict:
        return {"ball": self.ball.to_dict(), "field": self.field.to_dict()}


@dataclass
class AtomCheck:
    passed: bool
    support_ok: bool
    violations: list
    norm: float
    bound: float

    @property
    def margin(self) -> float:
        return self.bound - self.norm


def is_tent_atom(U: TentField, ball: Ball, tol: float = 1e-12) -> AtomCheck:
    """Exact support in ``T(ball)`` and ``||U||_{T^2} <= mu(ball)^{-1/2} (1 + tol)``.

    Violating cells are reported as ``(node index, point)`` pairs.
    """
    space = U.space
    T = tent_mask(space, ball, U.tgrid)
    bad = U.point_support() & ~T
    viol = [(int(j), int(y)) for j, y in zip(*np.nonzero(bad))]
    mu = ball.measure(space)
    if mu <= 0:
        raise DegenerateGeometryError("ball of zero measure")
    bound = mu ** -0.5
    nrm = t2_norm(U)
    return AtomCheck(not viol and nrm <= bound * (1 + tol), not viol, viol, nrm, bound)


@dataclass
class AtomicDecomposition:
    """``U = sum_j lambda_j A_j`` with diagnostics."""

    lambdas: np.ndarray
    atoms: list
    levels: list
    residual_t2: float
    residual_t1: float
    t1_norm: float

    @property
    def l1(self) -> float:
        return float(np.sum(np.abs(self.lambdas)))

    @property
    def C_dec(self) -> float:
        return self.l1 / self.t1_norm if self.t1_norm > 0 else 0.0

    def reconstruct(self, like: TentField) -> TentField:
        total = np.zeros_like(like.values, dtype=complex)
        for lam, a in zip(self.lambdas, self.atoms):
            total = total + lam * a.field.values
        return like.like(total)

    def to_dict(self) -> dict:
        return {"lambdas": [float(x) for x in self.lambdas],
                "ballRefs": [a.ball.to_dict() for a in self.atoms],
                "levels": [int(k) for k in self.levels],
                "C_dec": self.C_dec, "residuals": {"T2": self.residual_t2, "T1": self.residual_t1}}


def _maximal_enlargement(space: MetricMeasureSpace, O: np.ndarray, balls, gamma: float) -> np.ndarray:
    """``{x : sup_{B containing x} mu(B cap O) / mu(B) > gamma}`` over the canonical balls."""
    masks, mus = balls
    frac = (masks @ (space.mass * O)) / mus
    hit = masks & (frac > gamma)[:, None]
    return hit.any(axis=0)


def atomic_decompose(U: TentField, gamma: float = 0.5) -> AtomicDecomposition:
    """Stopping-time atomic decomposition on the finite grid.

    With ``O_k = {A U > 2^k}`` and its enlargement ``O*_k`` (points where the
    canonical-ball maximal function of ``1_{O_k}`` exceeds ``gamma``), every
    occupied cell ``(y, t)`` gets the level ``max k`` with
    ``rho(y, M \\ O*_k) >= t``.  Within a level the balls ``B(y, t)`` of its
    cells are selected greedily, largest ``t`` first, keeping only balls
    disjoint from the selected ones.  Each cell goes to the first selected
    ball of radius ``>= t`` meeting ``B(y, t)``, which puts it in the tent of
    the tripled ball.  The piece on ``T(3 B_i)`` normalized in ``T^2`` is the
    atom, with ``lambda_i = ||piece||_{T^2} mu(3 B_i)^{1/2}``.
    """
    space = U.space
    t = U.tgrid
    occ = U.point_support()
    t1 = tent_norm(U, 1)
    if not np.any(occ):
        return AtomicDecomposition(np.zeros(0), [], [], 0.0, 0.0, t1)
    A = area_functional(U)
    pos = A[A > 0]
    k_lo = int(np.floor(np.log2(pos.min()))) - 1
    k_hi = int(np.floor(np.log2(A.max()))) + 1
    _, _, masks = canonical_balls(space, float(t.max()))
    balls = (masks, masks @ space.mass)
    level = np.full(occ.shape, k_lo - 1)
    for k in range(k_lo, k_hi + 1):
        Ostar = _maximal_enlargement(space, A > 2.0 ** k, balls, gamma)
        dc = space.distance_to_set(~Ostar)
        in_tent = dc[None, :] >= t[:, None]
        level[in_tent & occ] = k
    if np.any(occ & (level < k_lo)):
        raise DegenerateGeometryError("an occupied cell is not covered by any level tent")

    lambdas, atoms, levels = [], [], []
    vals = U.values
    dof_cells = U.dof_points
    for k in sorted(set(level[occ].tolist()), reverse=True):
        cells = np.argwhere(occ & (level == k))
        # largest t first, then point index
        order = np.lexsort((cells[:, 1], -cells[:, 0]))
        cells = cells[order]
        chosen = []
        for j, y in cells:
            ball = space.dist[y] < t[j]
            if all(not np.any(ball & cb) for _, _, cb in chosen):
                chosen.append((int(y), float(t[j]), ball))
        assign = {i: [] for i in range(len(chosen))}
        for j, y in cells:
            ball = space.dist[y] < t[j]
            for i, (c, r, cb) in enumerate(chosen):
                if r >= t[j] and np.any(ball & cb):
                    assign[i].append((j, y))
                    break
            else:
                raise DegenerateGeometryError("cell without a covering ball")
        for i, (c, r, _) in enumerate(chosen):
            if not assign[i]:
                continue
            cellmask = np.zeros(occ.shape, bool)
            for j, y in assign[i]:
                cellmask[j, y] = True
            piece = np.where(cellmask[:, dof_cells], vals, 0)
            pf = U.like(piece)
            nrm = t2_norm(pf)
            if nrm == 0:
                continue
            big = Ball(c, 3 * r)
            lam = nrm * np.sqrt(big.measure(space))
            atoms.append(TentAtom(U.like(piece / lam), big))
            lambdas.append(lam)
            levels.append(k)
    dec = AtomicDecomposition(np.array(lambdas), atoms, levels, 0.0, 0.0, t1)
    R = dec.reconstruct(U)
    diff = U.like(U.values - R.values)
    dec.residual_t2 = t2_norm(diff)
    dec.residual_t1 = tent_norm(diff, 1)
    return dec
