import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from prdg.problems import CATALOG, CLAMPED, SIMPLY_SUPPORTED, fd_consistency, get_case, poly_coefficients


def lshape_points(n, seed=0, margin=0.05):
    """Random points of (-1,1)^2 minus [0,1)x(-1,0], at least ``margin`` from the corner."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        x, y = rng.uniform(-0.99, 0.99, 2)
        if (x > 0 and y < 0) or np.hypot(x, y) < margin:
            continue
        out.append((x, y))
    return np.array(out)


def square_points(n, seed=0):
    return np.random.default_rng(seed).uniform(0.02, 0.98, (n, 2))


def test_catalog_names():
    for name in CATALOG:
        get_case(name, m=3)
    with pytest.raises(KeyError):
        get_case("no-such-case")
    with pytest.raises(KeyError):
        get_case("poly-exact-m")


def test_sin2_center_value():
    case = get_case("ex1-sin2")
    assert case.u(0.5, 0.5) == pytest.approx(1.0, abs=1e-15)
    assert case.bc == CLAMPED


def test_simply_supported_traces_vanish():
    case = get_case("ex3-ss")
    assert case.bc == SIMPLY_SUPPORTED
    t = np.linspace(0, 1, 17)
    for x, y in [(t, 0 * t), (t, 0 * t + 1), (0 * t, t), (0 * t + 1, t)]:
        assert np.abs(case.g_D(x, y)).max() < 1e-12
        assert np.abs(case.g_lap(x, y)).max() < 1e-9


@pytest.mark.parametrize("name", ["ex1-sin2", "ex3-ss", "poly-exact-4"])
def test_fd_consistency_square(name):
    errs = fd_consistency(get_case(name), square_points(25, seed=3))
    assert max(errs.values()) < 1e-4, errs


def test_fd_consistency_lshape():
    errs = fd_consistency(get_case("lshape-singular"), lshape_points(25, seed=4))
    assert max(errs.values()) < 1e-4, errs


def test_lshape_against_symbolic_oracle():
    x, y = sympy.symbols("x y", real=True)
    r, th = sympy.symbols("r theta", positive=True)
    up = r ** sympy.Rational(5, 3) * sympy.sin(5 * th / 3)
    # polar Laplacian applied twice
    lap = lambda f: sympy.diff(r * sympy.diff(f, r), r) / r + sympy.diff(f, th, 2) / r ** 2
    assert sympy.simplify(lap(up)) == 0
    assert sympy.simplify(lap(lap(up))) == 0

    case = get_case("lshape-singular")
    pts = lshape_points(10, seed=9)
    ufun = sympy.lambdify((r, th), up)
    ur, uth = sympy.lambdify((r, th), sympy.diff(up, r)), sympy.lambdify((r, th), sympy.diff(up, th))
    for px, py in pts:
        rr = np.hypot(px, py)
        tt = np.arctan2(py, px) % (2 * np.pi)          # theta in [0, 2 pi)
        assert case.u(px, py) == pytest.approx(ufun(rr, tt), rel=1e-12, abs=1e-14)
        gx = np.cos(tt) * ur(rr, tt) - np.sin(tt) * uth(rr, tt) / rr
        gy = np.sin(tt) * ur(rr, tt) + np.cos(tt) * uth(rr, tt) / rr
        np.testing.assert_allclose(case.grad(px, py), [gx, gy], rtol=1e-11, atol=1e-13)
    assert np.all(case.f(pts[:, 0], pts[:, 1]) == 0.0)
    assert np.all(case.lap(pts[:, 0], pts[:, 1]) == 0.0)


def test_lshape_boundary_values():
    case = get_case("lshape-singular")
    assert case.u(1.0, 0.0) == pytest.approx(0.0, abs=1e-15)      # theta = 0
    assert case.u(0.0, -1.0) == pytest.approx(1.0, rel=1e-14)     # theta = 3 pi / 2
    assert case.u(-1.0, 0.0) == pytest.approx(np.sin(5 * np.pi / 3), rel=1e-14)
    # corner: finite, guarded
    assert np.isfinite(case.u(0.0, 0.0)) and np.all(np.isfinite(case.hess(0.0, 0.0)))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 6), st.floats(-1, 1), st.floats(-1, 1))
def test_polynomial_case_derivatives(m, x, y):
    case = get_case("poly-exact-m", m=m)
    c = poly_coefficients(m)
    u = sum(c[a, b] * x ** a * y ** b for a in range(m + 1) for b in range(m + 1 - a))
    assert case.u(x, y) == pytest.approx(u, rel=1e-12, abs=1e-12)
    if m < 4:
        assert case.f(x, y) == 0.0
    n = np.array([0.6, 0.8])
    assert case.g_N(x, y, n) == pytest.approx(case.grad(x, y) @ n, rel=1e-14, abs=1e-14)


def test_poly_biharmonic_oracle():
    # f = u_xxxx + 2 u_xxyy + u_yyyy against sympy
    x, y = sympy.symbols("x y")
    c = poly_coefficients(5)
    u = sum(sympy.Float(c[a, b]) * x ** a * y ** b for a in range(6) for b in range(6 - a))
    f = sympy.lambdify((x, y), sympy.diff(u, x, 4) + 2 * sympy.diff(u, x, 2, y, 2) + sympy.diff(u, y, 4))
    case = get_case("poly-exact-5")
    for px, py in square_points(5, seed=1):
        assert case.f(px, py) == pytest.approx(f(px, py), rel=1e-12)
