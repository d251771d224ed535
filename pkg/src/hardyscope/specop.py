"""Self-adjoint model operators with full spectral data.

An operator acts on sections sampled at degrees of freedom (dofs); each dof
sits at a point of a ``MetricMeasureSpace``.  The Hilbert structure is

    <u, v>_w = v^* W^{-1} u

with a positive weight ``W``.  When a space is attached and no weight is
given, ``W = diag(1 / mass)`` so that ``<u, u>_w`` is the discrete L^2(mu)
norm.  Operators are diagonalized through the symmetrized matrix
``S = W^{-1/2} D W^{1/2}``; eigenvectors ``V = W^{1/2} Q`` are orthonormal for
the weighted product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import EvaluationError, InvalidModelError, NearSingularError
from .mspace import MetricMeasureSpace, build_circle, build_graph


@dataclass(frozen=True, eq=False)
class SelfAdjointOperator:
    """Self-adjoint operator in a weighted inner product.

    Parameters
    ----------
    matrix : ndarray, shape (dim, dim)
        The operator in the dof basis.
    space : MetricMeasureSpace, optional
        Geometry used by masks, norms and tent fields.
    dof_points : ndarray of int, optional
        Point index of each dof (defaults to ``arange(dim)``).
    weight : ndarray, optional
        The weight ``W``; a vector means a diagonal weight.
    eigenvalues, sym_basis : ndarray, optional
        Precomputed spectral data of the symmetrized matrix.
    meta : dict
        Model name and construction parameters.
    """

    matrix: np.ndarray
    space: MetricMeasureSpace | None = None
    dof_points: np.ndarray | None = None
    weight: np.ndarray | None = None
    eigenvalues: np.ndarray | None = None
    sym_basis: np.ndarray | None = None
    meta: dict = field(default_factory=dict)
    fiber_dim: int = 1
    omega: float = 0.0

    def __post_init__(self):
        D = np.asarray(self.matrix)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise InvalidModelError("operator matrix must be square")
        dim = D.shape[0]
        object.__setattr__(self, "matrix", D)
        pts = np.arange(dim) if self.dof_points is None else np.asarray(self.dof_points, int)
        if pts.shape != (dim,):
            raise InvalidModelError("dof_points length does not match the operator")
        if self.space is not None and (pts.min() < 0 or pts.max() >= self.space.n):
            raise InvalidModelError("dof_points out of range")
        object.__setattr__(self, "dof_points", pts)

        W = self.weight
        if W is None:
            W = 1.0 / self.space.mass[pts] if self.space is not None else np.ones(dim)
        W = np.asarray(W)
        if W.ndim == 1:
            if W.shape != (dim,) or np.any(W <= 0):
                raise InvalidModelError("diagonal weight must be positive with matching length")
            w_half, w_ihalf = np.sqrt(W), 1.0 / np.sqrt(W)
        else:
            if W.shape != (dim, dim) or not np.allclose(W, W.conj().T, rtol=0, atol=1e-14 * abs(W).max()):
                raise InvalidModelError("weight must be Hermitian with matching shape")
            ev, U = np.linalg.eigh(W)
            if ev.min() <= 0:
                raise InvalidModelError("weight must be positive definite")
            w_half = (U * np.sqrt(ev)) @ U.conj().T
            w_ihalf = (U / np.sqrt(ev)) @ U.conj().T
        object.__setattr__(self, "weight", W)
        object.__setattr__(self, "_w_half", w_half)
        object.__setattr__(self, "_w_ihalf", w_ihalf)

        if self.eigenvalues is None or self.sym_basis is None:
            S = self._sym(D)
            herm_err = np.abs(S - S.conj().T).max()
            if herm_err > 1e-10 * max(np.abs(S).max(), 1.0):
                raise InvalidModelError(f"operator is not self-adjoint in the declared inner product ({herm_err:.2e})")
            S = 0.5 * (S + S.conj().T)
            lam, Q = np.linalg.eigh(S)
            object.__setattr__(self, "eigenvalues", lam)
            object.__setattr__(self, "sym_basis", Q)
        else:
            lam = np.asarray(self.eigenvalues, float)
            order = np.argsort(lam, kind="stable")
            object.__setattr__(self, "eigenvalues", lam[order])
            object.__setattr__(self, "sym_basis", np.asarray(self.sym_basis)[:, order])
        self.eigenvalues.setflags(write=False)

    # -- frames -------------------------------------------------------------
    def _sym(self, D: np.ndarray) -> np.ndarray:
        """``W^{-1/2} D W^{1/2}``."""
        if self.weight.ndim == 1:
            return (self._w_ihalf[:, None] * D) * self._w_half[None, :]
        return self._w_ihalf @ D @ self._w_half

    def to_sym(self, u: np.ndarray) -> np.ndarray:
        """Map a section to the frame where the inner product is Euclidean."""
        if self.weight.ndim == 1:
            return self._w_ihalf.reshape((-1,) + (1,) * (np.ndim(u) - 1)) * u
        return self._w_ihalf @ u

    def from_sym(self, y: np.ndarray) -> np.ndarray:
        if self.weight.ndim == 1:
            return self._w_half.reshape((-1,) + (1,) * (np.ndim(y) - 1)) * y
        return self._w_half @ y

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def eigenbasis(self) -> np.ndarray:
        """Eigenvectors (columns), orthonormal for ``<., .>_w``."""
        return self.from_sym(self.sym_basis)

    @property
    def sym_matrix(self) -> np.ndarray:
        return self._sym(self.matrix)

    @property
    def diagonal_weight(self) -> bool:
        return self.weight.ndim == 1

    @property
    def dof_weights(self) -> np.ndarray:
        """Per-dof Gram weights ``1 / W_dd`` (diagonal weights only)."""
        if not self.diagonal_weight:
            raise InvalidModelError("per-dof weights need a diagonal weight")
        return 1.0 / self.weight

    @property
    def norm_bound(self) -> float:
        return float(np.abs(self.eigenvalues).max()) if self.dim else 0.0

    # -- Hilbert structure ----------------------------------------------------
    def inner(self, u, v) -> complex:
        """``<u, v>_w = v^* W^{-1} u``."""
        return complex(np.vdot(self.to_sym(v), self.to_sym(u)))

    def norm(self, u) -> float:
        return float(np.linalg.norm(self.to_sym(np.asarray(u))))

    def coefficients(self, u) -> np.ndarray:
        """``<u, v_j>_w`` for every eigenvector."""
        return self.sym_basis.conj().T @ self.to_sym(np.asarray(u))

    def synthesize(self, c) -> np.ndarray:
        return self.from_sym(self.sym_basis @ c)

    def apply(self, u) -> np.ndarray:
        return self.matrix @ u

    def power_apply(self, u, N: int) -> np.ndarray:
        """``D^N u`` by repeated matrix application."""
        for _ in range(int(N)):
            u = self.matrix @ u
        return u

    def kernel_tol(self) -> float:
        return 1e-10 * self.norm_bound

    # -- masks ----------------------------------------------------------------
    def dof_mask(self, point_mask) -> np.ndarray:
        """Dof mask of a set of points."""
        point_mask = np.asarray(point_mask)
        if point_mask.dtype != bool:
            m = np.zeros(self.space.n, bool)
            m[point_mask] = True
            point_mask = m
        return point_mask[self.dof_points]

    def to_dict(self) -> dict:
        V = self.eigenbasis
        W = self.weight
        return {
            "dim": self.dim,
            "eigenvalues": self.eigenvalues.tolist(),
            "eigenbasis": np.stack([V.real.ravel(), V.imag.ravel()], axis=-1).tolist(),
            "ipWeight": W.tolist() if W.ndim == 1 else np.stack([W.real.ravel(), W.imag.ravel()], -1).tolist(),
            "fiberDim": self.fiber_dim,
            "dofPoints": self.dof_points.tolist(),
            "model": self.meta,
        }


def function_values(op: SelfAdjointOperator, f: Callable, lam=None) -> np.ndarray:
    """Evaluate ``f`` on the spectrum, raising ``EvaluationError`` when non-finite."""
    lam = op.eigenvalues if lam is None else lam
    vals = np.asarray(f(lam))
    if vals.shape == ():
        vals = np.full(lam.shape, vals)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        raise EvaluationError(f"function is not finite at eigenvalue {lam[np.flatnonzero(bad)[0]]!r}")
    return vals


def spectral_apply(op: SelfAdjointOperator, f: Callable, u) -> np.ndarray:
    """``f(D) u = sum_j f(lambda_j) <u, v_j>_w v_j``.

    ``u`` may hold several sections as columns.
    """
    vals = function_values(op, f)
    c = op.coefficients(u)
    shape = (-1,) + (1,) * (c.ndim - 1)
    return op.synthesize(vals.reshape(shape) * c)


def apply_values(op: SelfAdjointOperator, vals: np.ndarray, u) -> np.ndarray:
    """Spectral application with precomputed values on the spectrum."""
    c = op.coefficients(u)
    return op.synthesize(np.asarray(vals).reshape((-1,) + (1,) * (c.ndim - 1)) * c)


def sym_function_matrix(op: SelfAdjointOperator, vals, rows=None, cols=None) -> np.ndarray:
    """Block of ``W^{-1/2} f(D) W^{1/2} = Q diag(f) Q^*`` on selected dofs."""
    Q = op.sym_basis
    Qr = Q if rows is None else Q[rows]
    Qc = Q if cols is None else Q[cols]
    return (Qr * vals[None, :]) @ Qc.conj().T


def masked_norm(op: SelfAdjointOperator, vals, E, F) -> float:
    """``||1_E f(D) 1_F||`` in the weighted norm for point sets ``E`` and ``F``.

    With a diagonal weight the masks commute with ``W`` and the norm is the
    largest singular value of a block of the symmetrized matrix.
    """
    if not op.diagonal_weight:
        raise InvalidModelError("masked norms need a diagonal weight")
    rows = np.flatnonzero(op.dof_mask(E))
    cols = np.flatnonzero(op.dof_mask(F))
    if rows.size == 0 or cols.size == 0:
        return 0.0
    return block_norm(sym_function_matrix(op, vals, rows, cols))


def block_norm(block: np.ndarray) -> float:
    """Largest singular value (dense)."""
    if block.size == 0:
        return 0.0
    return float(np.linalg.norm(block, 2))


def range_projector(op: SelfAdjointOperator, lambda_tol: float | None = None) -> Callable:
    """Projector onto the span of eigenvectors with ``|lambda| > lambda_tol``.

    The default tolerance is ``1e-10 * max |lambda|``.
    """
    tol = op.kernel_tol() if lambda_tol is None else float(lambda_tol)
    keep = (np.abs(op.eigenvalues) > tol).astype(float)
    return lambda u: apply_values(op, keep, u)


def kernel_projector(op: SelfAdjointOperator, lambda_tol: float | None = None) -> Callable:
    """Projector onto ``N(D)``, the indicator of ``{|lambda| <= tol}`` applied spectrally."""
    tol = op.kernel_tol() if lambda_tol is None else float(lambda_tol)
    keep = (np.abs(op.eigenvalues) <= tol).astype(float)
    return lambda u: apply_values(op, keep, u)


def resolvent(op: SelfAdjointOperator, z: complex, u) -> np.ndarray:
    """``(z I - D)^{-1} u`` through the spectral calculus."""
    gap = np.abs(z - op.eigenvalues).min() if op.dim else np.inf
    if gap <= 1e-12:
        raise NearSingularError(f"z={z!r} is within {gap:.1e} of the spectrum")
    return apply_values(op, 1.0 / (z - op.eigenvalues), u)


def group_values(op: SelfAdjointOperator, t: float) -> np.ndarray:
    return np.exp(1j * t * op.eigenvalues)


# ---------------------------------------------------------------------------
# models


def zero_operator(space: MetricMeasureSpace) -> SelfAdjointOperator:
    n = space.n
    return SelfAdjointOperator(np.zeros((n, n)), space, eigenvalues=np.zeros(n),
                               sym_basis=np.eye(n), meta={"model": "zero", "n": n})


def circle_derivative(n: int, circumference: float = 2 * np.pi) -> SelfAdjointOperator:
    """``-i d/dx`` on the uniform ``n``-point circle, diagonal in the DFT basis.

    Frequencies are ``k = 0, 1, ..., n//2, -(n-1)//2, ..., -1`` (the Nyquist mode
    of even ``n`` carries ``+n/2``) and eigenvalues are ``2 pi k / circumference``.
    ``exp(i t D)`` is the exact circular shift when ``t`` is a multiple of the
    grid step.
    """
    space = build_circle(n, circumference)
    k = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        k[n // 2] = n // 2
    lam = 2 * np.pi * k / circumference
    j = np.arange(n)
    Q = np.exp(2j * np.pi * np.outer(j, k) / n) / np.sqrt(n)
    D = (Q * lam) @ Q.conj().T
    return SelfAdjointOperator(D, space, eigenvalues=lam, sym_basis=Q,
                               meta={"model": "circle", "n": n, "circumference": circumference})


def hodge_dirac_graph(incidence, weights=None, edge_length: float = 1.0) -> SelfAdjointOperator:
    """Hodge-Dirac operator ``[[0, d^T], [d, 0]]`` of a weighted graph.

    Parameters
    ----------
    incidence : array_like, shape (edges, vertices)
        Signed incidence matrix (the coboundary on 0-forms).
    weights : array_like, optional
        Edge weights; rows of the incidence matrix are scaled by them.
    edge_length : float
        Geometric length of every edge.  Dofs of 1-forms sit at edge
        midpoints, so the underlying space is the subdivided graph.
    """
    d = np.asarray(incidence, float)
    if d.ndim != 2:
        raise InvalidModelError("incidence must be a matrix")
    ne, nv = d.shape
    w = np.ones(ne) if weights is None else np.asarray(weights, float)
    if w.shape != (ne,):
        raise InvalidModelError("weights length must match the number of edges")
    dw = w[:, None] * d
    D = np.block([[np.zeros((nv, nv)), dw.T], [dw, np.zeros((ne, ne))]])
    half = 0.5 * edge_length
    edges = [(v, nv + e, half) for e in range(ne) for v in np.flatnonzero(d[e])]
    space = build_graph(edges, np.ones(nv + ne))
    return SelfAdjointOperator(D, space, meta={"model": "hodge-dirac", "vertices": nv, "edges": ne,
                                               "weights": w.tolist()})


def cycle_incidence(n: int) -> np.ndarray:
    """Incidence matrix of the ``n``-cycle with edges ``k -> k+1``."""
    d = np.zeros((n, n))
    for k in range(n):
        d[k, k] = -1.0
        d[k, (k + 1) % n] = 1.0
    return d


@dataclass(frozen=True, eq=False)
class DivergenceFormModel:
    """Periodic 1-D divergence-form model ``L = -div A grad`` and its ``BD`` system.

    Nodes ``x_j = j h`` carry scalar values; cell ``j`` (between nodes ``j`` and
    ``j+1``) carries the flux component and ``A_j``.  With the forward
    difference ``G``, ``L = G^T A G``, ``Ltilde = A G G^T`` and
    ``BD = [[0, G^T], [A G, 0]]`` so ``(BD)^2 = diag(L, Ltilde)``.
    """

    n: int
    coeff: np.ndarray
    lam: float
    L: SelfAdjointOperator
    Ltilde: np.ndarray
    B: np.ndarray
    BD: SelfAdjointOperator
    grad: np.ndarray

    def bd_square_residual(self) -> float:
        """Relative Frobenius norm of ``(BD)^2 - diag(L, Ltilde)``."""
        M = self.BD.matrix @ self.BD.matrix
        n = self.n
        target = np.block([[self.L.matrix, np.zeros((n, n))], [np.zeros((n, n)), self.Ltilde]])
        return float(np.linalg.norm(M - target) / max(np.linalg.norm(target), 1e-300))


def divergence_form_1d(n: int, coeff, lam: float) -> DivergenceFormModel:
    """Assemble the 1-D periodic divergence-form model on ``[0, 1)``.

    Parameters
    ----------
    n : int
        Number of nodes (and cells), mesh size ``h = 1/n``.
    coeff : array_like or callable
        Cell values of ``A`` or a function evaluated at cell midpoints.
    lam : float
        Ellipticity constant; ``A >= lam > 0`` is required.
    """
    if n < 2:
        raise InvalidModelError("need n >= 2")
    h = 1.0 / n
    if callable(coeff):
        A = np.asarray(coeff((np.arange(n) + 0.5) * h), float)
    else:
        A = np.asarray(coeff, float) * np.ones(n)
    if A.shape != (n,):
        raise InvalidModelError("coeff must have one value per cell")
    if not lam > 0 or np.any(A < lam):
        raise InvalidModelError(f"ellipticity violated: min A = {A.min():.3g}, lambda = {lam}")
    space = build_circle(n, 1.0)
    G = np.zeros((n, n))
    idx = np.arange(n)
    G[idx, idx] = -1.0 / h
    G[idx, (idx + 1) % n] = 1.0 / h
    AG = A[:, None] * G
    Lmat = G.T @ AG
    Lt = AG @ G.T
    L = SelfAdjointOperator(Lmat, space, meta={"model": "divergence-L", "n": n, "coeff": A.tolist()})
    BDm = np.block([[np.zeros((n, n)), G.T], [AG, np.zeros((n, n))]])
    Bdiag = np.concatenate([np.ones(n), A])
    weight = Bdiag / np.concatenate([space.mass, space.mass])
    BD = SelfAdjointOperator(BDm, space, dof_points=np.concatenate([idx, idx]), weight=weight,
                             fiber_dim=2, meta={"model": "divergence-BD", "n": n, "coeff": A.tolist()})
    return DivergenceFormModel(n, A, float(lam), L, Lt, np.diag(Bdiag), BD, G)


def random_hermitian(dim: int, rng: np.random.Generator, space: MetricMeasureSpace | None = None,
                     scale: float = 1.0) -> SelfAdjointOperator:
    """Random Hermitian test operator (identity weight)."""
    X = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    H = scale * (X + X.conj().T) / (2 * np.sqrt(dim))
    return SelfAdjointOperator(H, space, weight=np.ones(dim), meta={"model": "random", "dim": dim})
