import numpy as np
import pytest

from centeq.dynsys import cat_map, t3_system
from centeq.equilibrium import (
    BallMassIndex, HaarMeasure, PlaqueMeasure, ball_mass, cesaro_measure, commuting_battery,
    commuting_invariance_check, empirical_measure, frequency_battery, gibbs_report, haar_comparison,
    invariance_defect, point_mass, translation_defect, variational,
)
from centeq.netting import PLAQUE_MULT, build_quasiperiodic_family
from centeq.quasicocycle import TrigPotential, birkhoff, zero_cocycle


@pytest.fixture(scope="module")
def cat():
    return cat_map()


@pytest.fixture(scope="module")
def t3():
    return t3_system()


@pytest.fixture(scope="module")
def cat_family(cat):
    return build_quasiperiodic_family(cat, [6, 8], 0.05)


@pytest.fixture(scope="module")
def t3_family(t3):
    return build_quasiperiodic_family(t3, [4, 5, 6], 0.05)


def segment(d=3, radius=0.1):
    v = np.zeros((1, d, 1))
    v[0, 0, 0] = 1.0
    return PlaqueMeasure(np.zeros((1, d)), np.ones(1), v, radius)


def test_weights_must_be_normalized():
    with pytest.raises(ValueError):
        PlaqueMeasure(np.zeros((2, 2)), np.array([0.5, 0.6]), np.zeros((2, 2, 0)), 0.0)


@pytest.mark.parametrize("k", [[1, 0, 0], [3, 1, 0], [0, 2, 5]])
def test_segment_fourier_matches_quadrature(k):
    mu = segment()
    k = np.array(k)
    exact = mu.fourier(k)[0]
    quad = mu.integrate(lambda x: np.cos(2 * np.pi * x @ k), count=4096)
    assert exact.real == pytest.approx(quad, abs=1e-6)
    assert exact.real == pytest.approx(np.sinc(2 * 0.1 * k[0]), abs=1e-12)


def test_point_mass(cat):
    mu = point_mass(cat, [0.25, 1.5])
    assert mu.is_atomic and len(mu) == 1
    assert mu.fourier([[1, 1]])[0] == pytest.approx(np.exp(2j * np.pi * 0.75))
    assert mu.integrate(lambda x: x[:, 0]) == pytest.approx(0.25)


def test_pushforward_rotates_directions(t3):
    mu = segment()
    img = mu.pushforward(t3, 1)
    f = lambda x: np.cos(2 * np.pi * x @ np.array([1, 2, 0]))
    lhs = img.integrate(f, count=512)
    rhs = mu.integrate(lambda x: f(t3.apply(x, 1)), count=512)
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_empirical_measure_weights(cat, cat_family):
    phi = TrigPotential([[1, 0]], [0.3], [0.0])
    qc = birkhoff(cat, phi)
    mu = empirical_measure(cat, qc, cat_family, 6)
    s = qc(cat_family.members[6].points, 6)
    assert np.allclose(mu.weights, np.exp(s) / np.exp(s).sum())
    assert mu.radius == 0
    with pytest.raises(KeyError):
        empirical_measure(cat, qc, cat_family, 7)


def test_t3_plaques_have_family_radius(t3, t3_family):
    mu = empirical_measure(t3, zero_cocycle(t3), t3_family, 5)
    assert mu.radius == pytest.approx(PLAQUE_MULT * 0.05)
    assert np.allclose(mu.weights, 1 / len(mu))


def test_cesaro_measure_is_nearly_invariant(cat, cat_family):
    nu = cesaro_measure(cat, zero_cocycle(cat), cat_family, 8)
    assert len(nu) == 8 * len(cat_family.members[8])
    # members are periodic, so the average over a full period is exactly invariant
    assert invariance_defect(cat, nu, frequency_battery(2, 3)) < 2 / 8


def test_haar_comparison_and_batteries(cat, cat_family):
    assert len(frequency_battery(2, 3)) == 48
    battery = commuting_battery(3, 20)
    assert len(battery) == 20 and np.all(np.sum(battery**2, axis=1)[:6] == 1)
    rep = haar_comparison(HaarMeasure(cat), 2)
    assert rep.passed and rep.max_coefficient == 0
    nu = cesaro_measure(cat, zero_cocycle(cat), cat_family, 8)
    assert haar_comparison(nu, 2).max_coefficient < 0.2
    assert not haar_comparison(point_mass(cat, [0.1, 0.2]), 2).passed


def test_ball_mass_of_point_mass(cat):
    mu = point_mass(cat, [0.3, 0.3])
    assert ball_mass(mu, cat, np.array([0.31, 0.3]), 1, 0.05) == 1.0
    assert ball_mass(mu, cat, np.array([0.31, 0.3]), 4, 0.05) == 0.0


def test_ball_mass_of_segment_is_its_covered_fraction(t3):
    sys = t3
    v = sys.splitting.center[:, :1][None]
    mu = PlaqueMeasure(np.full((1, 3), 0.5), np.ones(1), v, 0.1)
    # the center is isometric, so the Bowen ball meets the segment in a centered interval of radius eps
    m, err = BallMassIndex(mu, sys, 6).mass(np.full(3, 0.5), 0.05)
    assert m == pytest.approx(0.5, abs=0.02)


def test_gibbs_report_on_haar_like_measure(cat):
    fam = build_quasiperiodic_family(cat, [10], 0.05)
    nu = cesaro_measure(cat, zero_cocycle(cat), fam, 10)
    rep = gibbs_report(cat, zero_cocycle(cat), nu, cat.entropy, 0.04, range(2, 5), 40)
    assert rep.zero_mass == 0 and rep.c > 0
    assert rep.spread < 100
    assert len(rep.table) == 40


def test_gibbs_report_flags_empty_balls(cat):
    rep = gibbs_report(cat, zero_cocycle(cat), point_mass(cat, [0.5, 0.5]), cat.entropy, 0.04, [3], 10)
    assert not rep.passed and rep.zero_mass > 0 and rep.witness is not None


def test_translation_invariance_on_t3(t3, t3_family):
    qc = zero_cocycle(t3)
    measures = {n: cesaro_measure(t3, qc, t3_family, n) for n in (4, 5, 6)}
    R = 0.3 * t3.splitting.center[:, 0]
    rep = commuting_invariance_check(t3, measures, R)
    assert set(rep.defects) == {4, 5, 6}
    assert all(0 <= v <= 2 for v in rep.defects.values())
    assert translation_defect(measures[4], np.zeros(3), commuting_battery(3)) == 0
    with pytest.raises(ValueError, match="center"):
        commuting_invariance_check(t3, measures, np.array([0.1, 0.0, 0.0]))


def test_invariance_check_vacuous_without_center(cat):
    assert commuting_invariance_check(cat, {}, np.zeros(2)).vacuous


def test_variational_value_of_haar(cat):
    phi = TrigPotential([[1, 0]], [0.3], [0.0], const=0.1)
    val = variational(cat, birkhoff(cat, phi), HaarMeasure(cat))
    assert val == pytest.approx(cat.entropy + 0.1, abs=5e-3)
    assert variational(cat, birkhoff(cat, 0.2), point_mass(cat, [0, 0])) == pytest.approx(0.2)
