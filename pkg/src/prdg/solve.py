"""Linear solves, error norms and convergence rates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .quadrature import cell_quadrature, face_quadrature

RESIDUAL_TOL = 1e-9
DIRECT_LIMIT = 200_000


class FactorizationError(ArithmeticError):
    pass


class SymmetricFactor:
    """Sparse LDL^T-style factorization of a symmetric matrix.

    SuperLU in symmetric mode with diagonal pivoting only: the row and column
    permutations coincide, so the diagonal of U carries the pivots of a
    symmetric elimination and their signs give the inertia of A.
    """

    def __init__(self, A):
        A = sp.csc_matrix(A)
        try:
            self.lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                                options=dict(SymmetricMode=True))
        except RuntimeError as exc:
            raise FactorizationError(f"sparse factorization failed ({exc}); "
                                     "the system may be singular, try larger mu, eta") from None
        self.symmetric = bool(np.array_equal(self.lu.perm_r, self.lu.perm_c))
        self.pivots = self.lu.U.diagonal()

    @property
    def negative_pivots(self) -> int:
        return int((self.pivots <= 0).sum())

    def solve(self, b):
        return self.lu.solve(np.asarray(b, dtype=float))


@dataclass
class SolveReport:
    x: np.ndarray
    solver: str
    iterations: int | None
    residual: float


def _relres(A, x, b):
    nb = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    return r / nb if nb > 0 else r


def solve(system_or_matrix, b=None, method: str = "auto", refine: int = 2) -> SolveReport:
    """Solve A x = b.  ``method`` is ``direct-cholesky``, ``cg`` or ``auto``.

    The direct path stops with FactorizationError on a non-positive pivot.
    """
    if b is None:
        A, b = system_or_matrix.A, system_or_matrix.b
    else:
        A = system_or_matrix
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if not np.any(b):
        return SolveReport(np.zeros(n), "direct-cholesky" if method != "cg" else "cg", 0, 0.0)
    if method == "auto":
        method = "direct-cholesky" if n <= DIRECT_LIMIT else "cg"
    if method == "direct-cholesky":
        fac = SymmetricFactor(A)
        if fac.symmetric and fac.negative_pivots:
            raise FactorizationError(
                f"matrix is not positive definite ({fac.negative_pivots} non-positive pivots); "
                "increase the penalty parameters mu and eta")
        x = fac.solve(b)
        # a couple of refinement sweeps absorb the conditioning of fourth-order systems
        for _ in range(refine):
            if _relres(A, x, b) < 1e-14:
                break
            x = x + fac.solve(b - A @ x)
        return SolveReport(x, method, None, _relres(A, x, b))
    if method == "cg":
        d = A.diagonal()
        if np.any(d <= 0):
            raise FactorizationError("non-positive diagonal entry; increase mu and eta")
        M = sp.diags(1.0 / d)
        its = [0]

        def cb(_):
            its[0] += 1

        x, info = spla.cg(A, b, rtol=1e-12, atol=0.0, maxiter=10 * n, M=M, callback=cb)
        if info != 0:
            raise FactorizationError(f"CG did not converge in {10 * n} iterations")
        return SolveReport(x, "cg", its[0], _relres(A, x, b))
    raise ValueError(f"unknown solver {method!r}")


# -- errors ---------------------------------------------------------------

@dataclass
class ErrorReport:
    l2: float
    energy: float
    h2_broken: float
    energy_volume: float
    energy_jump: float
    energy_grad_jump: float
    dofs: int
    h: float


def compute_errors(mesh, op, u, case, quad_degree: int | None = None) -> ErrorReport:
    """Norms of the error u_exact - R u over the mesh.

    The energy norm is the broken Laplacian L2 norm plus h_e^-3 weighted
    value jumps and h_e^-1 weighted normal-derivative jumps on all faces,
    boundary faces included (where the jump is the one-sided trace).
    """
    deg = min(quad_degree or 2 * op.degree + 4, 20)
    u = np.asarray(u, dtype=float)
    l2 = lap2 = h2 = 0.0
    for k in range(mesh.n_cells):
        pts, w = cell_quadrature(mesh, k, deg)
        x, y = pts[:, 0], pts[:, 1]
        c = op.local_coefficients(k, u)
        basis = op.bases[k]
        B0, Bxx, Bxy, Byy = basis.eval_many(pts, ((0, 0), (2, 0), (1, 1), (0, 2)))
        e0 = case.u(x, y) - B0 @ c
        H = case.hess(x, y)
        exx = H[:, 0, 0] - Bxx @ c
        exy = H[:, 0, 1] - Bxy @ c
        eyy = H[:, 1, 1] - Byy @ c
        l2 += w @ e0 ** 2
        lap2 += w @ (exx + eyy) ** 2
        h2 += w @ (exx ** 2 + 2 * exy ** 2 + eyy ** 2)

    j0 = j1 = 0.0
    fdeg = min(2 * op.degree + 4, 20)
    for f in range(mesh.n_faces):
        pts, w = face_quadrature(mesh, f, fdeg)
        x, y = pts[:, 0], pts[:, 1]
        n = mesh.face_normal[f]
        l, r = mesh.face_cells[f]
        ex = case.u(x, y)
        dex = case.grad(x, y) @ n
        cl = op.local_coefficients(l, u)
        bl = op.bases[l]
        B0, Bx, By = bl.eval_many(pts, ((0, 0), (1, 0), (0, 1)))
        jv = ex - B0 @ cl
        jd = dex - (Bx * n[0] + By * n[1]) @ cl
        if r >= 0:
            cr = op.local_coefficients(r, u)
            B0, Bx, By = op.bases[r].eval_many(pts, ((0, 0), (1, 0), (0, 1)))
            jv = jv - (ex - B0 @ cr)
            jd = jd - (dex - (Bx * n[0] + By * n[1]) @ cr)
        he = mesh.face_length[f]
        j0 += (w @ jv ** 2) / he ** 3
        j1 += (w @ jd ** 2) / he
    comps = np.sqrt(np.maximum([l2, lap2, j0, j1, h2], 0.0))
    return ErrorReport(
        l2=float(comps[0]),
        energy=float(math.sqrt(lap2 + j0 + j1)),
        h2_broken=float(comps[4]),
        energy_volume=float(comps[1]),
        energy_jump=float(comps[2]),
        energy_grad_jump=float(comps[3]),
        dofs=int(op.n_dofs),
        h=float(mesh.h),
    )


def convergence_rates(errors, hs) -> list[float]:
    """Pairwise rates log(e_i / e_{i+1}) / log(h_i / h_{i+1}).

    A level with zero error on either side gives ``inf`` (exact) rather than
    a number.
    """
    errors = [float(e) for e in errors]
    hs = [float(h) for h in hs]
    if len(errors) != len(hs) or len(errors) < 2:
        raise ValueError("need at least two levels")
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise ValueError("mesh sizes must be strictly decreasing")
    rates = []
    for (e0, e1), (h0, h1) in zip(zip(errors, errors[1:]), zip(hs, hs[1:])):
        if e0 == 0.0 or e1 == 0.0:
            rates.append(math.inf)
        else:
            rates.append(math.log(e0 / e1) / math.log(h0 / h1))
    return rates
