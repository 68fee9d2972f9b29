import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from centeq.dynsys import cat_map, t3_system
from centeq.quasicocycle import (
    QuasiCocycle, TrigPotential, birkhoff, bowen_variation, compose_linear, defect_estimate, from_table,
    is_cohomologous, perturbed, zero_cocycle,
)


@pytest.fixture(scope="module")
def cat():
    return cat_map()


@pytest.fixture(scope="module")
def t3():
    return t3_system()


def phi_cat():
    return TrigPotential([[1, 0], [1, 1]], [0.2, 0.0], [0.0, 0.1])


def test_trig_potential_evaluation():
    phi = phi_cat()
    assert phi(np.zeros(2)) == pytest.approx(0.2)
    assert phi(np.array([0.25, 0.0])) == pytest.approx(0.1, abs=1e-12)
    assert phi.mean == 0.0
    assert TrigPotential.constant(0.3, 2).mean == 0.3
    assert (phi + 1.0).mean == 1.0
    assert phi.lipschitz == pytest.approx(2 * np.pi * (0.2 + np.sqrt(2) * 0.1))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 1, exclude_max=True), min_size=2, max_size=2))
def test_compose_matches_pullback(x):
    sys = cat_map()
    phi = phi_cat()
    x = np.array(x)
    assert phi.compose(sys.matrix)(x) == pytest.approx(phi(sys.apply(x, 1)), abs=1e-9)


def test_potential_from_file(tmp_path):
    f = tmp_path / "phi.txt"
    f.write_text("# k1 k2 cos sin\n1 0 0.2 0\n1 1 0 0.1\nconst 0.5\n")
    phi = TrigPotential.from_file(str(f), 2)
    x = np.random.default_rng(0).random((50, 2))
    assert np.allclose(phi(x), phi_cat()(x) + 0.5)
    f.write_text("1 0 0.2\n")
    with pytest.raises(ValueError):
        TrigPotential.from_file(str(f), 2)


def test_birkhoff_sum_by_hand(cat):
    phi = phi_cat()
    qc = birkhoff(cat, phi)
    x = np.array([0.13, 0.71])
    hand = sum(phi(cat.apply(x, k)) for k in range(5))
    assert qc(x, 5) == pytest.approx(hand, abs=1e-12)
    assert qc(x, 0) == 0
    assert zero_cocycle(cat)(np.zeros((3, 2)), 7).tolist() == [0.0, 0.0, 0.0]
    assert birkhoff(cat, 0.5)(x, 4) == pytest.approx(2.0)


@pytest.mark.parametrize("factory", [cat_map, t3_system])
def test_birkhoff_sums_are_exact_cocycles(factory):
    sys = factory()
    phi = TrigPotential(np.eye(sys.d, dtype=int)[:1], [0.3], [0.1], d=sys.d)
    assert defect_estimate(birkhoff(sys, phi), sys, samples=2000) < 1e-9


def test_perturbed_defect_bounded_by_three_sup(cat):
    b = TrigPotential([[0, 1]], [0.2], [0.0])
    qc = perturbed(birkhoff(cat, phi_cat()), b, drift=0.01)
    d = defect_estimate(qc, cat, samples=3000, seed=2)
    assert 0.1 < d <= 3 * b.sup_norm_bound + 1e-9


def test_compose_linear_vector_family(cat):
    phis = [phi_cat(), TrigPotential([[0, 1]], [0.15], [0.0])]

    def evaluate(pts, n):
        return np.stack([birkhoff(cat, p).evaluator(pts, n) for p in phis], axis=-1)

    vec = QuasiCocycle(evaluate, "vector")
    scalar = compose_linear(vec, [2.0, -1.0])
    direct = birkhoff(cat, phis[0].scale(2.0) - phis[1])
    x = np.random.default_rng(1).random((20, 2))
    assert np.allclose(scalar(x, 6), direct(x, 6))


def test_from_table_lookup():
    pts = np.array([[0.1, 0.1], [0.6, 0.6]])
    qc = from_table(np.vstack([pts, pts]), [1, 1, 2, 2], [1.0, 2.0, 3.0, 4.0])
    assert qc(np.array([[0.12, 0.09], [0.98, 0.02]]), 1).tolist() == [1.0, 1.0]
    assert qc(np.array([0.61, 0.58]), 2) == 4.0


def test_bowen_variation_within_lipschitz_budget(cat):
    phi = phi_cat()
    qc = birkhoff(cat, phi)
    v = bowen_variation(qc, cat, 6, eps=0.05, samples=300)
    assert 0 < v
    # contraction in both directions from the ends of the orbit segment
    assert v <= 2 * phi.lipschitz * 0.05 / (1 - cat.lam)
    with pytest.raises(ValueError):
        bowen_variation(qc, cat, 6, eps=0.2)


def test_cohomology_verdicts(cat):
    phi = phi_cat()
    psi = TrigPotential([[0, 1]], [0.15], [0.0])
    base = birkhoff(cat, phi)
    cob = birkhoff(cat, phi + psi.coboundary(cat.matrix))
    assert is_cohomologous(base, cob, cat, samples=500).verdict == "trivial-difference"
    shifted = birkhoff(cat, phi + 0.05)
    res = is_cohomologous(base, shifted, cat, samples=500)
    assert res.verdict == "growing-difference"
    assert res.slope == pytest.approx(0.05, abs=1e-9)
    assert is_cohomologous(base, base, cat, samples=50).max_difference == 0


def test_t3_center_coboundary_constant_on_center_circle(t3):
    # the invariant coordinate x1 + x2 + x3 gives a potential whose Birkhoff sums are n * phi
    phi = TrigPotential([[1, 1, 1]], [0.3], [0.0], d=3)
    qc = birkhoff(t3, phi)
    x = np.random.default_rng(4).random((100, 3))
    assert np.allclose(qc(x, 9), 9 * phi(x))
