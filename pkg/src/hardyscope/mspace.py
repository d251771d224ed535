"""Finite metric measure spaces: balls, separations, cones, tents and doubling.

A space is a finite point set with a metric matrix and positive point masses.
Balls are open (``dist < radius``); tents use the closed condition
``dist(y, M \\ B) >= t`` with the convention that the distance to the empty
set is infinite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .errors import InvalidModelError

DEFAULT_KAPPAS = np.arange(0.0, 4.0 + 1e-12, 0.25)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MetricMeasureSpace:
    """Finite metric measure space.

    Parameters
    ----------
    dist : array_like, shape (n, n)
        Symmetric metric matrix, zero exactly on the diagonal.
    mass : array_like, shape (n,)
        Positive point masses.
    labels : sequence of str, optional
        Point identifiers.
    check : bool
        Validate the metric axioms (triangle inequality included).
    """

    dist: np.ndarray
    mass: np.ndarray
    labels: tuple | None = None
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        dist = _readonly(self.dist)
        mass = _readonly(self.mass)
        object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "mass", mass)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))
        if self.check:
            validate_metric(dist, mass, self.labels)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    @property
    def diameter(self) -> float:
        return float(self.dist.max())

    @property
    def min_positive_distance(self) -> float:
        d = self.dist[self.dist > 0]
        return float(d.min()) if d.size else np.inf

    def ball_mask(self, center: int, radius: float) -> np.ndarray:
        """Membership mask of the open ball ``B(center, radius)``."""
        return self.dist[center] < radius

    def volume(self, center: int, radius: float) -> float:
        """``V(x, r) = mu(B(x, r))``."""
        return float(self.mass[self.ball_mask(center, radius)].sum())

    def measure(self, mask: np.ndarray) -> float:
        return float(self.mass[np.asarray(mask, bool)].sum())

    def separation(self, E, F) -> float:
        """``rho(E, F)``, the minimum pairwise distance (``inf`` if a set is empty)."""
        E = _as_mask(E, self.n)
        F = _as_mask(F, self.n)
        if not E.any() or not F.any():
            return np.inf
        return float(self.dist[np.ix_(E, F)].min())

    def distance_to_set(self, mask) -> np.ndarray:
        """``rho(y, S)`` for every point ``y``; ``+inf`` when ``S`` is empty."""
        mask = _as_mask(mask, self.n)
        if not mask.any():
            return np.full(self.n, np.inf)
        return self.dist[:, mask].min(axis=1)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "dist": self.dist.ravel().tolist(),
            "mass": self.mass.tolist(),
            "labels": list(self.labels) if self.labels is not None else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricMeasureSpace":
        n = int(data["n"])
        dist = np.asarray(data["dist"], dtype=float)
        if dist.size != n * n:
            raise InvalidModelError(f"dist has {dist.size} entries, expected {n * n}")
        return cls(dist.reshape(n, n), np.asarray(data["mass"], float), data.get("labels"))


def _as_mask(S, n: int) -> np.ndarray:
    S = np.asarray(S)
    if S.dtype == bool:
        if S.shape != (n,):
            raise ValueError("mask has wrong length")
        return S
    m = np.zeros(n, bool)
    m[S.astype(int)] = True
    return m


def validate_metric(dist: np.ndarray, mass: np.ndarray, labels=None, rng_seed: int = 0) -> None:
    """Check the metric axioms and the mass vector; raise ``InvalidModelError``."""
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        raise InvalidModelError("dist must be square")
    n = dist.shape[0]
    if mass.shape != (n,):
        raise InvalidModelError("mass length does not match dist")
    if labels is not None and len(labels) != n:
        raise InvalidModelError("labels length does not match dist")
    if not (np.all(np.isfinite(dist)) and np.all(np.isfinite(mass))):
        raise InvalidModelError("non-finite entries")
    if np.any(mass <= 0):
        raise InvalidModelError("masses must be positive")
    if not np.array_equal(dist, dist.T):
        raise InvalidModelError("dist is not symmetric")
    off = ~np.eye(n, dtype=bool)
    if np.any(np.diag(dist) != 0) or np.any(dist[off] <= 0):
        raise InvalidModelError("dist must vanish exactly on the diagonal only")
    tol = 1e-12 * max(dist.max(initial=0.0), 1.0)
    if n <= 256:
        for k in range(n):
            if np.any(dist[:, k, None] + dist[None, k, :] < dist - tol):
                raise InvalidModelError("triangle inequality violated")
    else:
        rng = np.random.default_rng(rng_seed)
        i, j, k = rng.integers(0, n, size=(3, 100_000))
        if np.any(dist[i, k] + dist[k, j] < dist[i, j] - tol):
            raise InvalidModelError("triangle inequality violated")


def build_circle(n: int, circumference: float = 2 * np.pi) -> MetricMeasureSpace:
    """Uniform ``n``-point circle with the arc-length metric.

    Distances are integer multiples of the step ``circumference / n`` computed
    from integer index gaps, so the triangle inequality holds exactly.
    """
    if n < 2:
        raise InvalidModelError("circle needs n >= 2")
    if not circumference > 0:
        raise InvalidModelError("circumference must be positive")
    h = circumference / n
    idx = np.arange(n)
    gap = np.abs(idx[:, None] - idx[None, :])
    gap = np.minimum(gap, n - gap)
    return MetricMeasureSpace(gap * h, np.full(n, h))


def build_graph(edges, masses, n: int | None = None) -> MetricMeasureSpace:
    """Shortest-path metric of a weighted undirected graph.

    Parameters
    ----------
    edges : iterable of (i, j, w)
        Edge list with positive lengths ``w``.
    masses : array_like
        Per-vertex masses.
    n : int, optional
        Vertex count (defaults to ``len(masses)``).
    """
    masses = np.asarray(masses, float)
    n = len(masses) if n is None else n
    edges = [(int(i), int(j), float(w)) for i, j, w in edges]
    if any(w <= 0 for _, _, w in edges):
        raise InvalidModelError("edge weights must be positive")
    if any(not (0 <= i < n and 0 <= j < n) or i == j for i, j, _ in edges):
        raise InvalidModelError("edge endpoints out of range")
    if n == 1:
        return MetricMeasureSpace(np.zeros((1, 1)), masses)
    rows = [i for i, j, _ in edges] + [j for i, j, _ in edges]
    cols = [j for i, j, _ in edges] + [i for i, j, _ in edges]
    vals = [w for *_, w in edges] * 2
    # keep the lightest of parallel edges
    best: dict[tuple[int, int], float] = {}
    for r, c, v in zip(rows, cols, vals):
        best[(r, c)] = min(v, best.get((r, c), np.inf))
    r, c = zip(*best) if best else ((), ())
    adj = csr_matrix((list(best.values()), (list(r), list(c))), shape=(n, n))
    ncomp, _ = connected_components(adj, directed=False)
    if ncomp != 1:
        raise InvalidModelError("graph is disconnected")
    dist = shortest_path(adj, method="D", directed=False)
    dist = np.minimum(dist, dist.T)
    np.fill_diagonal(dist, 0.0)
    return MetricMeasureSpace(dist, masses)


@dataclass(frozen=True)
class Ball:
    """Open ball ``{y : dist(center, y) < radius}``."""

    center: int
    radius: float

    def mask(self, space: MetricMeasureSpace) -> np.ndarray:
        return space.ball_mask(self.center, self.radius)

    def scaled(self, alpha: float) -> "Ball":
        return Ball(self.center, alpha * self.radius)

    def measure(self, space: MetricMeasureSpace) -> float:
        return space.volume(self.center, self.radius)

    def to_dict(self) -> dict:
        return {"center": int(self.center), "radius": float(self.radius)}


@dataclass(frozen=True, eq=False)
class SetPair:
    """Two point sets and their separation ``rho(E, F)``."""

    E: np.ndarray
    F: np.ndarray
    sep: float

    def to_dict(self) -> dict:
        return {"E": np.flatnonzero(self.E).tolist(), "F": np.flatnonzero(self.F).tolist(), "sep": self.sep}


def set_pair(space: MetricMeasureSpace, E, F) -> SetPair:
    E = _as_mask(E, space.n).copy()
    F = _as_mask(F, space.n).copy()
    return SetPair(E, F, space.separation(E, F))


# ---------------------------------------------------------------------------
# doubling


@dataclass(frozen=True, eq=False)
class DoublingCertificate:
    """Doubling constants with the sampled box they were certified on.

    ``A`` is the supremum of ``V(x, a r) / (a^kappa V(x, r))`` over every
    ``x`` and every ``(r, a)`` in the box spanned by the radius and ratio grids,
    so any finer sampling inside the same box is covered as well.
    """

    A: float
    kappa: float
    radii: np.ndarray
    alphas: np.ndarray
    kappa_grid: np.ndarray
    A_by_kappa: np.ndarray
    violations: int = 0

    def to_dict(self) -> dict:
        return {
            "A": self.A,
            "kappa": self.kappa,
            "radii": np.asarray(self.radii).tolist(),
            "alphas": np.asarray(self.alphas).tolist(),
            "kappaGrid": np.asarray(self.kappa_grid).tolist(),
            "AByKappa": np.asarray(self.A_by_kappa).tolist(),
            "violations": self.violations,
        }


def _box_sup(space: MetricMeasureSpace, kappas, rmin, rmax, amin, amax) -> np.ndarray:
    """Exact supremum of the doubling ratio over the box, for each kappa.

    Volumes are step functions of the radius, so the supremum is approached at
    radii equal to realized distances (or the box ends) and at ratios that
    place ``a r`` just above a realized distance.  Right limits are used for
    the enlarged ball, which can only overestimate.
    """
    kappas = np.asarray(kappas, float)
    best = np.ones_like(kappas)
    for x in range(space.n):
        d = space.dist[x]
        order = np.argsort(d)
        ds = d[order]
        cms = np.concatenate([[0.0], np.cumsum(space.mass[order])])
        levels = np.unique(ds)

        def v_lt(r):
            return cms[np.searchsorted(ds, r, side="left")]

        def v_le(r):
            return cms[np.searchsorted(ds, r, side="right")]

        rc = np.unique(np.concatenate([[rmin, rmax], levels[(levels > rmin) & (levels <= rmax)]]))
        vr = v_lt(rc)
        cand_a = [np.full(len(rc), amin)]
        cand_v = [v_lt(amin * rc)]
        for lev in levels[levels > 0]:
            a = lev / rc
            ok = (a >= amin) & (a < amax)
            cand_a.append(np.where(ok, a, amin))
            cand_v.append(np.where(ok, v_le(lev), 0.0))
        A = np.array(cand_a)
        V = np.array(cand_v)
        logratio = np.full(V.shape, -np.inf)
        np.log(V / vr[None, :], where=V > 0, out=logratio)
        loga = np.log(A)
        for i, k in enumerate(kappas):
            best[i] = max(best[i], float(np.exp((logratio - k * loga).max())))
    return best


def estimate_doubling(space: MetricMeasureSpace, radii, alphas, kappas=None,
                      knee: float = 1.5) -> DoublingCertificate:
    """Fit doubling constants ``(A, kappa)``.

    For each ``kappa`` on the grid the smallest valid ``A`` is computed over
    the whole box ``[min radii, max radii] x [min alphas, max alphas]``.  Since
    ``A(kappa)`` only decreases as ``kappa`` grows, the reported pair is the
    smallest ``kappa`` whose constant is within ``knee`` times the best
    constant on the grid.

    Parameters
    ----------
    radii, alphas : array_like
        Positive radii and ratios ``alpha >= 1`` spanning the certified box.
    kappas : array_like, optional
        Exponent grid, default ``0:0.25:4``.
    knee : float
        Tolerance factor used to select ``kappa``.
    """
    radii = np.asarray(radii, float)
    alphas = np.asarray(alphas, float)
    if radii.size == 0 or alphas.size == 0:
        raise ValueError("empty grids")
    if np.any(alphas < 1) or np.any(radii <= 0):
        raise ValueError("need radii > 0 and alphas >= 1")
    kappas = DEFAULT_KAPPAS if kappas is None else np.asarray(kappas, float)
    A_k = _box_sup(space, kappas, radii.min(), radii.max(), alphas.min(), alphas.max())
    target = knee * A_k.min()
    i = int(np.flatnonzero(A_k <= target * (1 + 1e-12))[0])
    cert = DoublingCertificate(float(A_k[i]), float(kappas[i]), radii, alphas, kappas, A_k)
    return DoublingCertificate(cert.A, cert.kappa, radii, alphas, kappas, A_k,
                               violations=check_doubling(space, cert, radii, alphas))


def check_doubling(space: MetricMeasureSpace, cert: DoublingCertificate, radii, alphas) -> int:
    """Count sampled ``(x, r, alpha)`` triples violating the certificate."""
    radii = np.asarray(radii, float)
    alphas = np.asarray(alphas, float)
    viol = 0
    for x in range(space.n):
        d = space.dist[x]
        V = np.array([space.mass[d < r].sum() for r in radii])
        Va = np.array([[space.mass[d < a * r].sum() for a in alphas] for r in radii])
        bound = cert.A * alphas[None, :] ** cert.kappa * V[:, None]
        viol += int(np.sum(Va > bound * (1 + 1e-12)))
    return viol


# ---------------------------------------------------------------------------
# cones and tents


def cone_mask(space: MetricMeasureSpace, x: int, tgrid) -> np.ndarray:
    """Mask of ``Gamma(x) = {(y, t) : rho(x, y) < t}``, shape ``(len(tgrid), n)``."""
    t = np.asarray(tgrid, float)
    return space.dist[x][None, :] < t[:, None]


def tent_mask(space: MetricMeasureSpace, region, tgrid) -> np.ndarray:
    """Mask of ``T(B) = {(y, t) : rho(y, M \\ B) >= t}``, shape ``(len(tgrid), n)``.

    ``region`` is a ``Ball`` or a point mask.
    """
    mask = region.mask(space) if isinstance(region, Ball) else _as_mask(region, space.n)
    dc = space.distance_to_set(~mask)
    t = np.asarray(tgrid, float)
    return dc[None, :] >= t[:, None]


@dataclass(frozen=True, eq=False)
class TentCone:
    """Cone and tent membership for a fixed space and t-grid."""

    space: MetricMeasureSpace
    tgrid: np.ndarray

    def cone(self, x: int) -> np.ndarray:
        return cone_mask(self.space, x, self.tgrid)

    def tent(self, region) -> np.ndarray:
        return tent_mask(self.space, region, self.tgrid)


def tent_and_cone(space: MetricMeasureSpace, tgrid) -> TentCone:
    return TentCone(space, np.asarray(tgrid, float))


def canonical_balls(space: MetricMeasureSpace, t_max: float = 0.0):
    """Distinct balls of the canonical family.

    Radii run over the realized positive distances, plus ``diameter + t_max``
    which gives the whole space.  Balls with identical point sets are kept
    once (smallest radius wins).

    Returns
    -------
    centers, radii : ndarray
    masks : ndarray of bool, shape (count, n)
    """
    levels = np.unique(space.dist[space.dist > 0])
    radii_all = np.concatenate([levels, [space.diameter + max(t_max, 0.0) + 1.0]])
    seen: dict[bytes, int] = {}
    centers, radii, masks = [], [], []
    for c in range(space.n):
        for r in radii_all:
            m = space.dist[c] < r
            key = np.packbits(m).tobytes()
            if key in seen:
                continue
            seen[key] = len(masks)
            centers.append(c)
            radii.append(r)
            masks.append(m)
    return np.array(centers), np.array(radii), np.array(masks)
