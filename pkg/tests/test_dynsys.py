import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from centeq.dynsys import (
    LinearCenterIsometry, NotACenterIsometry, TorusPoint, bowen_ball_contains, cat_map, center_plaque,
    dist_n, dist_pm, load_system, plaque_expansivity_probe, reduce, t3_system, torus_dist,
)

GOLDEN_SQ = (3 + np.sqrt(5)) / 2

coords2 = st.lists(st.floats(0, 1, exclude_max=True), min_size=2, max_size=2)
coords3 = st.lists(st.floats(0, 1, exclude_max=True), min_size=3, max_size=3)


@pytest.fixture(scope="module")
def cat():
    return cat_map()


@pytest.fixture(scope="module")
def t3():
    return t3_system()


@pytest.mark.parametrize("x, k, expected", [
    ((0.0, 0.0), 5, (0.0, 0.0)),
    ((0.5, 0.5), 1, (0.5, 0.0)),
])
def test_apply_cat_examples(cat, x, k, expected):
    assert np.allclose(cat.apply(np.array(x), k), expected)


def test_apply_t3_column_action(t3):
    assert np.allclose(t3.apply(np.array([0.25, 0, 0]), 1), [0.0, 0.25, 0.0])


@settings(max_examples=50, deadline=None)
@given(coords2, st.integers(-6, 6), st.integers(-6, 6))
def test_apply_composes(x, a, b):
    sys = cat_map()
    x = np.array(x)
    lhs = sys.apply(sys.apply(x, a), b)
    assert torus_dist(lhs, sys.apply(x, a + b)) < 1e-9


def test_large_powers_stay_in_the_torus(cat):
    y = cat.apply(np.array([0.1, 0.2]), 200)
    assert np.all((0 <= y) & (y < 1))
    assert cat.apply(np.array([0.0, 0.0]), 200).tolist() == [0.0, 0.0]


def test_exact_apply_matches_float_for_short_orbits(cat):
    from fractions import Fraction
    x = [Fraction(1, 7), Fraction(3, 7)]
    exact = cat.apply_exact(x, 6)
    assert torus_dist(np.array([float(v) for v in exact]), cat.apply(np.array([1 / 7, 3 / 7]), 6)) < 1e-9


def test_torus_point_reduces_and_compares_mod_one():
    p = TorusPoint([1.25, -0.5])
    assert np.allclose(np.asarray(p), [0.25, 0.5])
    assert p == TorusPoint([0.25 + 1e-12, 0.5])


def test_splitting_moduli(cat, t3):
    assert cat.dim_c == 0 and cat.dim_s == cat.dim_u == 1
    assert t3.dim_c == 1 and t3.dim_s == t3.dim_u == 1
    assert cat.entropy == pytest.approx(np.log(GOLDEN_SQ), abs=1e-12)
    assert t3.entropy == pytest.approx(np.log(GOLDEN_SQ), abs=1e-12)
    assert t3.lam == pytest.approx(1 / GOLDEN_SQ, abs=1e-10)


def test_t3_characteristic_polynomial(t3):
    x = sp.symbols("x")
    poly = sp.Matrix(t3.matrix.tolist()).charpoly(x).as_expr()
    assert sp.expand(poly - (x - 1) * (x**2 - 3 * x + 1)) == 0
    moduli = sorted(abs(np.linalg.eigvals(t3.matrix.astype(float))))
    assert np.allclose(moduli, sorted([1, GOLDEN_SQ, 1 / GOLDEN_SQ]), atol=1e-10)


def test_t3_center_direction_is_rational(t3):
    v = t3.splitting.center[:, 0]
    assert np.allclose(np.abs(v / v[0]), [1, 3, 1])
    rc = t3.rational_center
    assert rc["annihilator"].shape == (2, 3)
    assert np.allclose(rc["annihilator"] @ v, 0)


@pytest.mark.parametrize("matrix, message", [
    ([[2, 0], [0, 1]], "det"),
    ([[1, 0], [0, 1]], "hyperbolic"),
    ([[0.5, 0], [0, 2]], "integer"),
])
def test_rejects_non_center_isometries(matrix, message):
    with pytest.raises(ValueError, match=message):
        LinearCenterIsometry(matrix)


def test_rejects_center_with_non_unit_modulus_jordan_rotation():
    # the rotation by 90 degrees has modulus-one eigenvalues but no hyperbolic part
    with pytest.raises(NotACenterIsometry):
        LinearCenterIsometry([[0, -1], [1, 0]])


def test_dist_n_examples(cat):
    assert dist_n(cat, np.zeros(2), np.zeros(2), 7) == 0
    assert dist_n(cat, np.zeros(2), np.array([0.5, 0.0]), 1) == pytest.approx(0.5)
    y = np.array([0.01, 0.0])
    brute = max(torus_dist(cat.apply(np.zeros(2), i), cat.apply(y, i)) for i in range(4))
    assert dist_n(cat, np.zeros(2), y, 4) == pytest.approx(brute)


@settings(max_examples=40, deadline=None)
@given(coords2, coords2, st.integers(1, 8))
def test_dist_n_monotone_and_symmetric(x, y, n):
    sys = cat_map()
    x, y = np.array(x), np.array(y)
    assert dist_n(sys, x, y, n) == pytest.approx(dist_n(sys, y, x, n))
    assert dist_n(sys, x, y, n + 1) >= dist_n(sys, x, y, n) - 1e-15
    assert dist_pm(sys, x, y, n) >= dist_n(sys, x, y, n + 1) - 1e-15


def test_bowen_ball_examples(cat, t3):
    x = np.array([0.3, 0.4])
    assert bowen_ball_contains(cat, x, 5, 0.01, x)
    assert not bowen_ball_contains(cat, x, 1, 0.01, x + 0.02)
    with pytest.raises(ValueError):
        bowen_ball_contains(cat, x, 3, 0.0, x)
    # center offsets never grow under the isometric center
    p = np.array([0.2, 0.7, 0.1])
    q = reduce(p + 0.03 * t3.splitting.center[:, 0])
    assert all(bowen_ball_contains(t3, p, n, 0.05, q) for n in (1, 5, 10))
    assert bowen_ball_contains(t3, p, 10, 0.05, q, two_sided=True)


def test_center_offsets_stay_in_bowen_balls_exactly(t3):
    # float orbits lose all accuracy after ~30 steps, so iterate in rationals
    from fractions import Fraction
    p = [Fraction(1, 5), Fraction(7, 10), Fraction(1, 10)]
    c = Fraction(9, 1000)
    q = [p[0] + c, p[1] - 3 * c, p[2] + c]
    for n in range(51):
        a, b = t3.apply_exact(p, n), t3.apply_exact(q, n)
        diff = np.array([float((y - x + Fraction(1, 2)) % 1 - Fraction(1, 2)) for x, y in zip(a, b)])
        assert np.linalg.norm(diff) == pytest.approx(float(c) * np.sqrt(11), abs=1e-15)
        assert np.linalg.norm(diff) < 0.05


@settings(max_examples=30, deadline=None)
@given(coords3, st.floats(-0.2, 0.2))
def test_center_isometry_property(x, t):
    sys = t3_system()
    x = np.array(x)
    y = reduce(x + t * sys.splitting.center[:, 0])
    d = sys.center_distance(sys.apply(x, 1), sys.apply(y, 1), tol=1e-9)
    assert abs(d - abs(t)) < 1e-10


def test_stable_contraction(cat):
    x = np.array([0.1, 0.6])
    e_s = cat.splitting.stable[:, 0]
    y = reduce(x + 1e-3 * e_s)
    for n in range(1, 10):
        assert torus_dist(cat.apply(x, n), cat.apply(y, n)) <= cat.lam**n * 1e-3 + 1e-14


def test_center_plaque_chart(t3):
    pl = center_plaque(t3, np.array([0.1, 0.2, 0.3]), 0.3)
    p = pl.point(0.2)
    assert t3.center_distance(pl.base, p) == pytest.approx(0.2, abs=1e-12)
    with pytest.raises(ValueError):
        pl.point(0.31)


@pytest.mark.parametrize("factory", [cat_map, t3_system])
def test_plaque_expansivity_probe_passes(factory):
    rep = plaque_expansivity_probe(factory(), 0.05, 30, 10_000, seed=1)
    assert rep.passed
    assert rep.surviving > 20
    if factory is cat_map:
        assert rep.max_center_distance == 0


def test_plaque_probe_rejects_delta_above_c_exp(cat):
    with pytest.raises(ValueError):
        plaque_expansivity_probe(cat, 0.5, 10, 100)


def test_load_system(tmp_path):
    assert load_system("builtin:t3").matrix.tolist() == t3_system().matrix.tolist()
    f = tmp_path / "sys.txt"
    f.write_text("name = mine\nrow = 2 1\nrow = 1 1\nc_exp = 0.2\n")
    sys = load_system(str(f))
    assert sys.name == "mine" and sys.c_exp == 0.2 and sys.matrix.tolist() == [[2, 1], [1, 1]]
    with pytest.raises(ValueError, match="unknown builtin"):
        load_system("builtin:nope")
