"""
Manufactured solutions for the biharmonic problem.

Every case carries closed-form u, grad u, Hessian, Laplacian, grad of the
Laplacian and f = Laplacian^2 u, all as vectorised callables of (x, y).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as P

CLAMPED = "clamped"
SIMPLY_SUPPORTED = "simply-supported"

R_FLOOR = 1e-14

Func = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ManufacturedCase:
    name: str
    u: Func
    grad: Func   # -> (..., 2)
    hess: Func   # -> (..., 2, 2)
    lap: Func
    grad_lap: Func  # -> (..., 2)
    f: Func
    bc: str = CLAMPED
    domain: str = "unit-square"

    # boundary data are the traces of the exact solution
    def g_D(self, x, y):
        return self.u(x, y)

    def g_N(self, x, y, n):
        return (self.grad(x, y) * n).sum(-1)

    def g_lap(self, x, y):
        return self.lap(x, y)


def _sin2_case() -> ManufacturedCase:
    pi = np.pi

    def a(t): return np.sin(pi * t) ** 2
    def a1(t): return pi * np.sin(2 * pi * t)
    def a2(t): return 2 * pi ** 2 * np.cos(2 * pi * t)
    def a3(t): return -4 * pi ** 3 * np.sin(2 * pi * t)
    def a4(t): return -8 * pi ** 4 * np.cos(2 * pi * t)

    return ManufacturedCase(
        "ex1-sin2",
        u=lambda x, y: a(x) * a(y),
        grad=lambda x, y: np.stack([a1(x) * a(y), a(x) * a1(y)], -1),
        hess=lambda x, y: np.stack([np.stack([a2(x) * a(y), a1(x) * a1(y)], -1),
                                    np.stack([a1(x) * a1(y), a(x) * a2(y)], -1)], -2),
        lap=lambda x, y: a2(x) * a(y) + a(x) * a2(y),
        grad_lap=lambda x, y: np.stack([a3(x) * a(y) + a1(x) * a2(y),
                                        a2(x) * a1(y) + a(x) * a3(y)], -1),
        f=lambda x, y: a4(x) * a(y) + 2 * a2(x) * a2(y) + a(x) * a4(y),
    )


def _sin_ss_case() -> ManufacturedCase:
    k = 2 * np.pi
    s, c = np.sin, np.cos
    return ManufacturedCase(
        "ex3-ss",
        u=lambda x, y: s(k * x) * s(k * y),
        grad=lambda x, y: k * np.stack([c(k * x) * s(k * y), s(k * x) * c(k * y)], -1),
        hess=lambda x, y: k ** 2 * np.stack(
            [np.stack([-s(k * x) * s(k * y), c(k * x) * c(k * y)], -1),
             np.stack([c(k * x) * c(k * y), -s(k * x) * s(k * y)], -1)], -2),
        lap=lambda x, y: -2 * k ** 2 * s(k * x) * s(k * y),
        grad_lap=lambda x, y: -2 * k ** 3 * np.stack([c(k * x) * s(k * y), s(k * x) * c(k * y)], -1),
        f=lambda x, y: 4 * k ** 4 * s(k * x) * s(k * y),
        bc=SIMPLY_SUPPORTED,
    )


def _lshape_case() -> ManufacturedCase:
    """u = r^{5/3} sin(5 theta / 3), theta in [0, 3 pi / 2].

    u is the imaginary part of z^{5/3}, hence harmonic: Laplacian, its
    gradient and f all vanish.  Derivatives follow from those of z^alpha.
    """
    alpha = 5.0 / 3.0

    def zpow(x, y, p, c):
        # c * z^p with the branch cut along the excluded quadrant's bisector
        r = np.maximum(np.hypot(x, y), R_FLOOR)
        th = np.arctan2(y, x)
        th = np.where(th < -0.25 * np.pi, th + 2 * np.pi, th)
        return c * r ** p * np.exp(1j * p * th)

    def u(x, y):
        return zpow(x, y, alpha, 1.0).imag

    def grad(x, y):
        d = zpow(x, y, alpha - 1, alpha)
        return np.stack([d.imag, d.real], -1)

    def hess(x, y):
        d2 = zpow(x, y, alpha - 2, alpha * (alpha - 1))
        return np.stack([np.stack([d2.imag, d2.real], -1),
                         np.stack([d2.real, -d2.imag], -1)], -2)

    def zero(x, y):
        return np.zeros(np.broadcast(x, y).shape)

    def zero2(x, y):
        return np.zeros(np.broadcast(x, y).shape + (2,))

    return ManufacturedCase("lshape-singular", u, grad, hess, zero, zero2, zero,
                            domain="lshape")


def poly_coefficients(m: int) -> np.ndarray:
    """Fixed coefficient table c[a, b] of x^a y^b, every monomial of degree <= m present."""
    c = np.zeros((m + 1, m + 1))
    for a in range(m + 1):
        for b in range(m + 1 - a):
            c[a, b] = (-1) ** (a + 2 * b) * (1.0 + 0.5 * a + 0.25 * b) / (1 + a + b)
    return c


def polynomial_case(c: np.ndarray, name: str = "poly", bc: str = CLAMPED) -> ManufacturedCase:
    c = np.asarray(c, dtype=float)

    def d(ax, ay):
        cc = c
        if ax:
            cc = P.polyder(cc, ax, axis=0)
        if ay:
            cc = P.polyder(cc, ay, axis=1)
        return lambda x, y: P.polyval2d(x, y, cc) if cc.size else np.zeros(np.broadcast(x, y).shape)

    ux, uy = d(1, 0), d(0, 1)
    uxx, uxy, uyy = d(2, 0), d(1, 1), d(0, 2)
    uxxx, uxyy, uxxy, uyyy = d(3, 0), d(1, 2), d(2, 1), d(0, 3)
    u4x, u2x2y, u4y = d(4, 0), d(2, 2), d(0, 4)
    return ManufacturedCase(
        name,
        u=d(0, 0),
        grad=lambda x, y: np.stack([ux(x, y), uy(x, y)], -1),
        hess=lambda x, y: np.stack([np.stack([uxx(x, y), uxy(x, y)], -1),
                                    np.stack([uxy(x, y), uyy(x, y)], -1)], -2),
        lap=lambda x, y: uxx(x, y) + uyy(x, y),
        grad_lap=lambda x, y: np.stack([uxxx(x, y) + uxyy(x, y), uxxy(x, y) + uyyy(x, y)], -1),
        f=lambda x, y: u4x(x, y) + 2 * u2x2y(x, y) + u4y(x, y),
        bc=bc,
    )


CATALOG = ("ex1-sin2", "ex3-ss", "lshape-singular", "poly-exact-m")


def get_case(name: str, m: int | None = None) -> ManufacturedCase:
    """Look up a case.  ``poly-exact-m`` takes its degree from ``m`` (or use ``poly-exact-3``)."""
    if name == "ex1-sin2":
        return _sin2_case()
    if name == "ex3-ss":
        return _sin_ss_case()
    if name == "lshape-singular":
        return _lshape_case()
    if name.startswith("poly-exact-"):
        tail = name[len("poly-exact-"):]
        deg = m if tail == "m" else (int(tail) if tail.isdigit() else None)
        if deg is None:
            raise KeyError(f"case {name!r} needs a polynomial degree")
        return polynomial_case(poly_coefficients(deg), name=f"poly-exact-{deg}")
    if name == "zero":
        return polynomial_case(np.zeros((1, 1)), name="zero")
    raise KeyError(f"unknown case {name!r}; available: {', '.join(CATALOG)}")


def fd_consistency(case: ManufacturedCase, points, step: float = 1e-4) -> dict[str, float]:
    """Worst relative mismatch of each stored derivative against central differences.

    Each derivative is differenced from the next-lower stored quantity, so
    higher derivatives are checked one order at a time.
    """
    pts = np.asarray(points, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    ex, ey = step, step

    def cd(fun):
        gx = (fun(x + ex, y) - fun(x - ex, y)) / (2 * step)
        gy = (fun(x, y + ey) - fun(x, y - ey)) / (2 * step)
        return np.stack([gx, gy], -1)

    def rel(a, b):
        a, b = np.asarray(a), np.asarray(b)
        scale = max(np.abs(b).max(), 1.0)
        return float(np.abs(a - b).max() / scale)

    out = {}
    out["grad"] = rel(cd(case.u), case.grad(x, y))
    hx = cd(lambda a, b: case.grad(a, b)[..., 0])
    hy = cd(lambda a, b: case.grad(a, b)[..., 1])
    out["hess"] = rel(np.stack([hx, hy], -2), case.hess(x, y))
    H = case.hess(x, y)
    out["lap"] = rel(H[..., 0, 0] + H[..., 1, 1], case.lap(x, y))
    out["grad_lap"] = rel(cd(case.lap), case.grad_lap(x, y))
    gx = cd(lambda a, b: case.grad_lap(a, b)[..., 0])[..., 0]
    gy = cd(lambda a, b: case.grad_lap(a, b)[..., 1])[..., 1]
    out["f"] = rel(gx + gy, case.f(x, y))
    return out
