"""
Symmetric interior-penalty assembly for the biharmonic problem.

Jumps and averages on a face e with normal n (left -> right):

    [[v]]      = n (v_L - v_R)            {grad lap v} . n   averaged
    [[grad v]] = n . (grad v_L - grad v_R) {lap v}           averaged

On boundary faces only the left trace exists, the average is the trace and
n is outward.  Face contributions are written in terms of four scalar trace
operators per face: the value jump, the normal-derivative jump, the average
Laplacian and the average normal derivative of the Laplacian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .problems import CLAMPED, SIMPLY_SUPPORTED, ManufacturedCase
from .quadrature import cell_quadrature, face_quadrature
from .solve import FactorizationError, SymmetricFactor

_CHUNK = 4096


@dataclass(frozen=True)
class PenaltyConfig:
    mu: float
    eta: float

    def __post_init__(self):
        if not (self.mu > 0 and self.eta > 0):
            raise ValueError(f"penalties must be positive, got mu={self.mu}, eta={self.eta}")

    @classmethod
    def default(cls, m: int, mode: str = "reconstructed") -> PenaltyConfig:
        """mu = m^4, eta = m^2 for the reconstructed space.

        The full DG space has many more high-frequency modes on each cell and
        needs the m^6 growth of the trace-inverse bound for third derivatives.
        """
        if mode == "baseline-full-dg":
            return cls(5.0 * m ** 6, 5.0 * m ** 2)
        return cls(float(m ** 4), float(m ** 2))

    def alpha(self, h_e):
        return self.mu / h_e ** 3

    def beta(self, h_e):
        return self.eta / h_e


@dataclass(eq=False)
class DiscreteSystem:
    A: sp.csr_matrix
    b: np.ndarray
    dofs: list[np.ndarray]
    mode: str
    bc: str
    degree: int
    penalties: PenaltyConfig

    @property
    def n_dofs(self) -> int:
        return self.A.shape[0]


class _Triplets:
    """COO buffer that is periodically compressed, keeping memory bounded."""

    def __init__(self, n):
        self.n = n
        self.rows, self.cols, self.vals = [], [], []
        self.count = 0
        self.acc = sp.csr_matrix((n, n))

    def add(self, dofs, K):
        nd = len(dofs)
        self.rows.append(np.repeat(dofs, nd))
        self.cols.append(np.tile(dofs, nd))
        self.vals.append(K.ravel())
        self.count += 1
        if self.count >= _CHUNK:
            self.flush()

    def flush(self):
        if self.rows:
            r = np.concatenate(self.rows)
            c = np.concatenate(self.cols)
            v = np.concatenate(self.vals)
            self.acc = self.acc + sp.csr_matrix((v, (r, c)), shape=(self.n, self.n))
        self.rows, self.cols, self.vals = [], [], []
        self.count = 0

    def matrix(self):
        self.flush()
        A = self.acc.tocsr()
        A.sum_duplicates()
        A.sort_indices()
        return A


_TRACE_DERIVS = ((0, 0), (1, 0), (0, 1), (2, 0), (0, 2), (3, 0), (1, 2), (2, 1), (0, 3))


def _traces(op, cell, pts, n):
    """Value, normal derivative, Laplacian and normal derivative of the Laplacian."""
    v, dx, dy, dxx, dyy, dxxx, dxyy, dxxy, dyyy = op.bases[cell].eval_many(pts, _TRACE_DERIVS)
    C = op.coeffs[cell]
    return (v @ C,
            (n[0] * dx + n[1] * dy) @ C,
            (dxx + dyy) @ C,
            (n[0] * (dxxx + dxyy) + n[1] * (dxxy + dyyy)) @ C)


def _face_operators(mesh, op, f, pts):
    """Trace operators on face f as matrices over the concatenated DOF list."""
    n = mesh.face_normal[f]
    l, r = mesh.face_cells[f]
    vL, dnL, lapL, dnlapL = _traces(op, l, pts, n)
    if r < 0:
        return op.dofs[l], vL, dnL, lapL, dnlapL
    vR, dnR, lapR, dnlapR = _traces(op, r, pts, n)
    dofs = np.concatenate([op.dofs[l], op.dofs[r]])
    jump = np.hstack([vL, -vR])
    jump_dn = np.hstack([dnL, -dnR])
    avg_lap = 0.5 * np.hstack([lapL, lapR])
    avg_dnlap = 0.5 * np.hstack([dnlapL, dnlapR])
    return dofs, jump, jump_dn, avg_lap, avg_dnlap


def assemble(mesh, op, case: ManufacturedCase, penalties: PenaltyConfig,
             bc: str | None = None, quad_degree: int | None = None) -> DiscreteSystem:
    """Stiffness matrix and load vector of B(R u, R v) = l(R v)."""
    bc = case.bc if bc is None else bc
    if bc not in (CLAMPED, SIMPLY_SUPPORTED):
        raise ValueError(f"unknown boundary condition {bc!r}")
    if bc == SIMPLY_SUPPORTED and getattr(case, "lap", None) is None:
        raise ValueError("simply supported boundary needs Laplacian boundary data")
    if bc == CLAMPED and getattr(case, "grad", None) is None:
        raise ValueError("clamped boundary needs normal-derivative boundary data")
    m = op.degree
    deg = quad_degree or max(2 * m, 1)
    N = op.n_dofs
    trip = _Triplets(N)
    b = np.zeros(N)

    for k in range(mesh.n_cells):
        pts, w = cell_quadrature(mesh, k, deg)
        basis = op.bases[k]
        C = op.coeffs[k]
        V, dxx, dyy = basis.eval_many(pts, ((0, 0), (2, 0), (0, 2)))
        V = V @ C
        L = (dxx + dyy) @ C
        trip.add(op.dofs[k], L.T @ (w[:, None] * L))
        np.add.at(b, op.dofs[k], (w * case.f(pts[:, 0], pts[:, 1])) @ V)

    for f in range(mesh.n_faces):
        pts, w = face_quadrature(mesh, f, deg)
        he = mesh.face_length[f]
        alpha, beta = penalties.alpha(he), penalties.beta(he)
        dofs, J0, J1, AL, D3 = _face_operators(mesh, op, f, pts)
        boundary = mesh.face_cells[f, 1] < 0
        drop_grad = boundary and bc == SIMPLY_SUPPORTED
        WJ0 = w[:, None] * J0
        S = WJ0.T @ D3
        K = alpha * (J0.T @ WJ0)
        if not drop_grad:
            WJ1 = w[:, None] * J1
            S -= WJ1.T @ AL
            K += beta * (J1.T @ WJ1)
        trip.add(dofs, K + S + S.T)
        if boundary:
            x, y = pts[:, 0], pts[:, 1]
            gD = case.g_D(x, y)
            rhs = (w * gD) @ (D3 + alpha * J0)
            if bc == CLAMPED:
                gN = case.g_N(x, y, mesh.face_normal[f])
                rhs += (w * gN) @ (beta * J1 - AL)
            else:
                rhs += (w * case.g_lap(x, y)) @ J1
            np.add.at(b, dofs, rhs)

    return DiscreteSystem(trip.matrix(), b, op.dofs, op.mode, bc, m, penalties)


def symmetry_defect(A) -> float:
    """max |A - A^T| / max |A|."""
    A = sp.csr_matrix(A)
    d = abs(A - A.T)
    top = abs(A).max()
    return float(d.max() / top) if top else 0.0


@dataclass
class ProbeResult:
    estimate: float
    iterations: int
    converged: bool
    negative_pivots: int

    @property
    def positive(self) -> bool:
        return self.negative_pivots == 0 and self.estimate > 0


def coercivity_probe(system, tol: float = 1e-6, maxiter: int = 500, seed: int = 0) -> ProbeResult:
    """Smallest eigenvalue of A by inverse power iteration.

    The pivots of the symmetric factorization count the negative eigenvalues
    (Sylvester's law of inertia); an indefinite matrix is reported through
    ``negative_pivots`` together with the eigenvalue of smallest magnitude.
    """
    A = system.A if hasattr(system, "A") else sp.csr_matrix(system)
    try:
        fac = SymmetricFactor(A)
    except FactorizationError:
        return ProbeResult(0.0, 0, True, 1)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(A.shape[0])
    x /= np.linalg.norm(x)
    lam = np.inf
    for it in range(1, maxiter + 1):
        y = fac.solve(x)
        y /= np.linalg.norm(y)
        new = float(y @ (A @ y))
        x = y
        if abs(new - lam) <= tol * abs(new):
            return ProbeResult(new, it, True, fac.negative_pivots)
        lam = new
    return ProbeResult(lam, maxiter, False, fac.negative_pivots)
