"""
Least-squares patch reconstruction.

For every cell K a polynomial of degree m is fitted, in the least-squares
sense, to the cell values sampled at the collocation points of the patch
S(K).  The fit is linear in the samples, so each cell stores a small
matrix M_K mapping patch values to the coefficients of a local monomial
basis; columns of M_K are the restrictions of the global basis functions
lambda_K' to K.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial

import numpy as np
import scipy.linalg

from .patch import Patch, dim_poly
from .quadrature import cell_quadrature

RANK_TOL = 1e-10
MAX_DERIV = 3


class UniquenessViolation(ValueError):
    """The collocation points of a patch do not determine a unique polynomial."""

    def __init__(self, msg, cell=None):
        super().__init__(msg if cell is None else f"cell {cell}: {msg}")
        self.cell = cell


@lru_cache(maxsize=None)
def monomial_exponents(m: int, dim: int = 2) -> np.ndarray:
    """Graded-lexicographic exponents, e.g. 1, x, y, x^2, xy, y^2 for m = 2."""
    if dim == 1:
        e = np.arange(m + 1)[:, None]
    else:
        e = np.array([(k - j, j) for k in range(m + 1) for j in range(k + 1)], dtype=np.int64)
    e.setflags(write=False)
    return e


@lru_cache(maxsize=None)
def _falling(m: int, d: int) -> np.ndarray:
    """k! / (k - d)! for k = 0..m (zero where k < d)."""
    return np.array([factorial(k) / factorial(k - d) if k >= d else 0.0 for k in range(m + 1)])


@dataclass(frozen=True)
class LocalBasis:
    """Monomials in the shifted, scaled variables (x - center) / scale."""

    degree: int
    center: np.ndarray
    scale: float

    @property
    def dim(self) -> int:
        return np.size(self.center)

    @property
    def exponents(self) -> np.ndarray:
        return monomial_exponents(self.degree, self.dim)

    def __len__(self):
        return dim_poly(self.degree, self.dim)

    def _powers(self, points):
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        s = (pts - np.reshape(self.center, -1)) / self.scale
        return [s[:, ax, None] ** np.arange(self.degree + 1) for ax in range(self.dim)]

    def _eval_from_powers(self, pows, deriv):
        e = self.exponents
        out = None
        for ax, d in enumerate(deriv):
            a = e[:, ax]
            term = _falling(self.degree, d)[a] * pows[ax][:, np.maximum(a - d, 0)]
            out = term if out is None else out * term
        if sum(deriv):
            out = out / self.scale ** sum(deriv)
        return out

    def eval(self, points, deriv=None) -> np.ndarray:
        """Derivative ``deriv`` (one order per axis) of each monomial at ``points``.

        Returns an array of shape (n_points, dim P_m), chain-rule scaling included.
        """
        deriv = (0,) * self.dim if deriv is None else tuple(deriv)
        if len(deriv) != self.dim or min(deriv) < 0:
            raise ValueError(f"bad derivative order {deriv}")
        return self._eval_from_powers(self._powers(points), deriv)

    def eval_many(self, points, derivs) -> list[np.ndarray]:
        pows = self._powers(points)
        return [self._eval_from_powers(pows, tuple(d)) for d in derivs]


def local_operator(points, basis: LocalBasis, cell=None):
    """Least-squares solution operator for samples at ``points``.

    Returns (M, sigma_min, sigma_max), M of shape (dim P_m, n_points).
    Uses a column-pivoted QR of the design matrix.
    """
    A = basis.eval(points)
    if A.shape[0] < A.shape[1]:
        raise UniquenessViolation(
            f"{A.shape[0]} collocation points cannot determine dim P_{basis.degree} = {A.shape[1]}",
            cell)
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] < RANK_TOL * sv[0]:
        raise UniquenessViolation(
            f"design matrix is rank deficient (sigma_min/sigma_max = {sv[-1] / sv[0]:.3e}); "
            "the collocation points do not determine a unique polynomial", cell)
    Q, R, perm = scipy.linalg.qr(A, mode="economic", pivoting=True)
    Mp = scipy.linalg.solve_triangular(R, Q.T)
    M = np.empty_like(Mp)
    M[perm] = Mp
    return M, float(sv[-1]), float(sv[0])


def fit_local(points, samples, basis: LocalBasis, cell=None) -> np.ndarray:
    """Coefficients of the least-squares polynomial through ``samples``."""
    M, _, _ = local_operator(points, basis, cell)
    return M @ np.asarray(samples, dtype=float)


@dataclass(eq=False)
class ReconOperator:
    """Per-cell maps from global DOF values to local polynomial coefficients.

    In ``reconstructed`` mode the DOFs of cell K are the values at the patch
    collocation points and ``coeffs[K]`` is the least-squares operator.  In
    ``baseline-full-dg`` mode every cell owns dim P_m coefficients directly
    and ``coeffs[K]`` is the identity.
    """

    degree: int
    mode: str
    n_dofs: int
    dofs: list[np.ndarray]
    coeffs: list[np.ndarray]
    bases: list[LocalBasis]
    sigma_min: np.ndarray = field(default=None)
    sigma_max: np.ndarray = field(default=None)
    patches: list[Patch] | None = None

    @property
    def n_cells(self) -> int:
        return len(self.bases)

    def eval_basis(self, cell: int, points, deriv=(0, 0)) -> np.ndarray:
        """Values of d^deriv lambda_j at ``points`` in ``cell`` for j in ``dofs[cell]``."""
        if sum(deriv) > MAX_DERIV:
            raise ValueError(f"derivatives above order {MAX_DERIV} are not supported")
        return self.bases[cell].eval(points, deriv) @ self.coeffs[cell]

    def local_coefficients(self, cell: int, u) -> np.ndarray:
        return self.coeffs[cell] @ np.asarray(u)[self.dofs[cell]]

    def evaluate(self, cell: int, points, u, deriv=(0, 0)) -> np.ndarray:
        """The reconstructed function R u (or a derivative of it) on ``cell``."""
        return self.bases[cell].eval(points, deriv) @ self.local_coefficients(cell, u)

    def interpolate(self, mesh, func) -> np.ndarray:
        """DOF vector representing ``func``: cell values at barycenters, or local L2 fits."""
        if self.mode == "reconstructed":
            return np.asarray(func(mesh.barycenter[:, 0], mesh.barycenter[:, 1]), dtype=float)
        u = np.empty(self.n_dofs)
        for k, basis in enumerate(self.bases):
            pts, w = cell_quadrature(mesh, k, max(2 * self.degree, 1))
            B = basis.eval(pts)
            G = B.T @ (w[:, None] * B)
            u[self.dofs[k]] = np.linalg.solve(G, B.T @ (w * func(pts[:, 0], pts[:, 1])))
        return u

    def support_pattern(self):
        """Sparse boolean (cells x dofs): True where lambda_dof may be nonzero on the cell."""
        import scipy.sparse as sp
        rows = np.concatenate([np.full(len(d), k) for k, d in enumerate(self.dofs)])
        cols = np.concatenate(self.dofs)
        return sp.csr_matrix((np.ones(len(rows), dtype=bool), (rows, cols)),
                             shape=(self.n_cells, self.n_dofs))


def build_recon(mesh, patches: list[Patch], m: int) -> ReconOperator:
    if m < 0:
        raise ValueError("polynomial degree must be >= 0")
    need = dim_poly(m)
    dofs, coeffs, bases = [], [], []
    smin = np.empty(mesh.n_cells)
    smax = np.empty(mesh.n_cells)
    for k, p in enumerate(patches):
        if len(p) < need:
            raise UniquenessViolation(f"patch has {len(p)} cells, fewer than dim P_{m} = {need}", k)
        basis = LocalBasis(m, mesh.barycenter[k].copy(), float(mesh.diameter[k]))
        M, smin[k], smax[k] = local_operator(p.points, basis, k)
        dofs.append(p.members)
        coeffs.append(M)
        bases.append(basis)
    return ReconOperator(m, "reconstructed", mesh.n_cells, dofs, coeffs, bases,
                         smin, smax, list(patches))


def build_full_dg(mesh, m: int) -> ReconOperator:
    """Standard DG space: dim P_m independent coefficients per cell."""
    n = dim_poly(m)
    eye = np.eye(n)
    bases = [LocalBasis(m, mesh.barycenter[k].copy(), float(mesh.diameter[k]))
             for k in range(mesh.n_cells)]
    dofs = [np.arange(k * n, (k + 1) * n) for k in range(mesh.n_cells)]
    return ReconOperator(m, "baseline-full-dg", n * mesh.n_cells, dofs, [eye] * mesh.n_cells,
                         bases, np.ones(mesh.n_cells), np.ones(mesh.n_cells))


def eval_basis(op: ReconOperator, cell: int, point, deriv=(0, 0)) -> np.ndarray:
    return op.eval_basis(cell, point, deriv)


@dataclass(frozen=True)
class LambdaReport:
    per_cell: np.ndarray

    @property
    def max(self) -> float:
        return float(self.per_cell.max())


def _sample_points(mesh, members, degree):
    pts = [mesh.vertices[np.unique(np.concatenate([mesh.cells[j] for j in members]))]]
    for j in members:
        pts.append(cell_quadrature(mesh, j, degree)[0])
    return np.concatenate(pts)


def estimate_lambda(op: ReconOperator, mesh, patches=None, steps: int = 50,
                    tol: float = 1e-8) -> LambdaReport:
    """Sampled lower bound of max_p max_{S(K)}|p| / max_{I_K}|p| for each cell.

    Power iteration finds the polynomial with the largest ratio of RMS values
    on patch sample points (quadrature nodes and vertices) to RMS values at
    the collocation points; its sup-norm ratio is reported, floored by the
    constant polynomial's ratio of 1.
    """
    patches = op.patches if patches is None else patches
    out = np.ones(len(patches))
    if op.degree == 0:
        return LambdaReport(out)
    qdeg = max(2 * op.degree, 1)
    for k, p in enumerate(patches):
        basis = op.bases[k]
        M = op.coeffs[k]
        Z = basis.eval(_sample_points(mesh, p.members, qdeg))
        A = basis.eval(p.points)
        G = M @ M.T            # (A^T A)^{-1}
        H = Z.T @ Z
        c = np.ones(len(basis)) / np.sqrt(len(basis))
        rq = 0.0
        for _ in range(steps):
            c_new = G @ (H @ c)
            c_new /= np.linalg.norm(c_new)
            rq_new = float(c_new @ H @ c_new) / float(c_new @ (A.T @ (A @ c_new)))
            c = c_new
            if abs(rq_new - rq) <= tol * abs(rq_new):
                break
            rq = rq_new
        ratio = np.abs(Z @ c).max() / np.abs(A @ c).max()
        out[k] = max(1.0, float(ratio))
    return LambdaReport(out)
