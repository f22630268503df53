from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prdg.mesh import generate_structured_mixed, generate_structured_tri
from prdg.quadrature import (MAX_DEGREE, cell_quadrature, face_quadrature, map_triangle,
                             segment_rule, triangle_rule)

from .helpers import voronoi_mesh


def triangle_monomial(a, b):
    """Exact integral of x^a y^b over the unit right triangle (Dirichlet formula)."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)


@pytest.mark.parametrize("degree", range(1, MAX_DEGREE + 1))
def test_triangle_rule_exact(degree):
    rule = triangle_rule(degree)
    x, y = rule.nodes.T
    worst = 0.0
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            exact = triangle_monomial(a, b)
            worst = max(worst, abs(rule.weights @ (x ** a * y ** b) - exact) / exact)
    assert worst < 1e-12


@pytest.mark.parametrize("degree", range(1, MAX_DEGREE + 1))
def test_segment_rule_exact(degree):
    rule = segment_rule(degree)
    t = rule.nodes[:, 0]
    for k in range(degree + 1):
        assert rule.weights @ t ** k == pytest.approx(1.0 / (k + 1), rel=1e-13)


@pytest.mark.parametrize("degree", [1, 5, 12, 20])
def test_rules_inside_with_positive_weights(degree):
    rule = triangle_rule(degree)
    x, y = rule.nodes.T
    assert np.all(rule.weights > 0)
    assert np.all(x > 0) and np.all(y > 0) and np.all(x + y < 1)
    seg = segment_rule(degree)
    assert np.all((seg.nodes > 0) & (seg.nodes < 1))


@pytest.mark.parametrize("bad", [0, -1, MAX_DEGREE + 1, 2.5])
def test_bad_degree_rejected(bad):
    with pytest.raises(ValueError):
        triangle_rule(bad)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=6, max_size=6),
       st.integers(0, 3), st.integers(0, 3))
def test_mapped_rule_matches_affine_pullback(coords, a, b):
    """On any non-degenerate triangle, monomials of degree <= 6 are integrated exactly.

    Oracle: the degree-20 rule, whose error is at rounding level, mapped the same way.
    """
    tri = np.array(coords).reshape(3, 2)
    e1, e2 = tri[1] - tri[0], tri[2] - tri[0]
    area = 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
    if area < 1e-3:
        return
    p, w = map_triangle(triangle_rule(max(a + b, 1)), tri)
    q, v = map_triangle(triangle_rule(MAX_DEGREE), tri)
    got = w @ (p[:, 0] ** a * p[:, 1] ** b)
    ref = v @ (q[:, 0] ** a * q[:, 1] ** b)
    assert got == pytest.approx(ref, rel=1e-11, abs=1e-11 * max(1.0, np.abs(tri).max() ** (a + b)) * area)
    assert w.sum() == pytest.approx(area, rel=1e-13)


@pytest.mark.parametrize("mesh", [generate_structured_tri(3), generate_structured_mixed(3),
                                  voronoi_mesh(12, seed=2)], ids=["tri", "mixed", "voronoi"])
def test_cell_quadrature_over_square(mesh):
    # the cells tile the unit square, where int x^a y^b = 1 / ((a+1)(b+1))
    for a, b in [(0, 0), (1, 0), (2, 3), (5, 1), (4, 4)]:
        total = 0.0
        for k in range(mesh.n_cells):
            p, w = cell_quadrature(mesh, k, a + b if a + b else 1)
            total += w @ (p[:, 0] ** a * p[:, 1] ** b)
        assert total == pytest.approx(1.0 / ((a + 1) * (b + 1)), rel=1e-12)


def test_face_quadrature_perimeter():
    mesh = generate_structured_tri(4)
    total = sum(face_quadrature(mesh, f, 3)[1].sum() for f in mesh.boundary_faces)
    assert total == pytest.approx(4.0, rel=1e-14)
    # int over the bottom side of x^3 = 1/4
    f = [f for f in mesh.boundary_faces if np.all(mesh.vertices[mesh.faces[f], 1] == 0)]
    s = sum(face_quadrature(mesh, i, 3)[1] @ face_quadrature(mesh, i, 3)[0][:, 0] ** 3 for i in f)
    assert s == pytest.approx(0.25, rel=1e-13)
