"""Quadrature on the reference triangle and segment, mapped onto polygon cells."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

MAX_DEGREE = 20


@dataclass(frozen=True)
class QuadRule:
    nodes: np.ndarray    # (n, dim) on the reference element
    weights: np.ndarray  # (n,)
    degree: int


def _check_degree(degree):
    if not (isinstance(degree, (int, np.integer)) and 1 <= degree <= MAX_DEGREE):
        raise ValueError(f"quadrature degree must be an integer in [1, {MAX_DEGREE}], got {degree!r}")


@lru_cache(maxsize=None)
def segment_rule(degree: int) -> QuadRule:
    """Gauss-Legendre on [0, 1], exact for polynomials of the given degree."""
    _check_degree(degree)
    n = degree // 2 + 1
    x, w = np.polynomial.legendre.leggauss(n)
    nodes = 0.5 * (x + 1.0)
    nodes.setflags(write=False)
    w = 0.5 * w
    w.setflags(write=False)
    return QuadRule(nodes[:, None], w, degree)


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadRule:
    """Collapsed Gauss rule on the triangle (0,0), (1,0), (0,1).

    The Duffy map x = u, y = v (1 - u) has Jacobian (1 - u); the u-direction
    uses Gauss-Jacobi with weight (1 - u) so that both 1D rules only have to
    integrate polynomials of the target degree.
    """
    _check_degree(degree)
    n = degree // 2 + 1
    # Gauss-Jacobi(alpha=1, beta=0) on [-1, 1] with weight (1 - s)
    su, wu = roots_jacobi(n, 1.0, 0.0)
    u = 0.5 * (su + 1.0)
    wu = 0.25 * wu  # (1 - u) = (1 - s)/2 and du = ds/2
    sv, wv = np.polynomial.legendre.leggauss(n)
    v = 0.5 * (sv + 1.0)
    wv = 0.5 * wv
    U, V = np.meshgrid(u, v, indexing="ij")
    nodes = np.column_stack([U.ravel(), (V * (1.0 - U)).ravel()])
    weights = np.outer(wu, wv).ravel()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadRule(nodes, weights, degree)


def map_triangle(rule: QuadRule, tri: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map a reference-triangle rule onto the triangle with vertex rows ``tri``."""
    a, b, c = tri
    J = np.column_stack([b - a, c - a])
    det = abs(J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0])
    return a + rule.nodes @ J.T, rule.weights * det


def cell_quadrature(mesh, cell: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights over a polygon cell, from its sub-triangles."""
    rule = triangle_rule(degree)
    pts, wts = [], []
    for t in mesh.subtriangles[cell]:
        p, w = map_triangle(rule, mesh.vertices[t])
        pts.append(p)
        wts.append(w)
    return np.concatenate(pts), np.concatenate(wts)


def face_quadrature(mesh, face: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    rule = segment_rule(degree)
    a, b = mesh.vertices[mesh.faces[face]]
    t = rule.nodes[:, 0]
    return a + t[:, None] * (b - a), rule.weights * mesh.face_length[face]
