from fractions import Fraction

import numpy as np
import pytest

from centeq.acceptance import random_two_segment_specs, shadow_trials
from centeq.dynsys import LinearCenterIsometry, cat_map, t3_system
from centeq.specification import (
    InfeasibleShadowing, OrbitSpec, UnstableReach, density_probe, exact_dist, exact_orbit, j_csu_set_contains,
    periodic_point_closed_form, quasiperiodize, shadow, to_fractions, verify_shadowing,
)

EPS = 0.05


@pytest.fixture(scope="module")
def cat():
    return cat_map()


@pytest.fixture(scope="module")
def t3():
    return t3_system()


def test_orbit_spec_validation():
    spec = OrbitSpec([([0.5, 0.5], (10, 12)), ([0.1, 0.2], (0, 3))], gap=5)
    assert [iv for _, iv in spec.segments] == [(0, 3), (10, 12)]
    assert spec.gaps == [7]
    with pytest.raises(ValueError, match="gap"):
        OrbitSpec([([0, 0], (0, 3)), ([0, 0], (5, 6))], gap=5)
    with pytest.raises(ValueError):
        OrbitSpec([([0, 0], (4, 3))])


def test_exact_orbit_is_periodic_for_rational_points(cat):
    x = [Fraction(1, 5), Fraction(2, 5)]
    orb = exact_orbit(cat, x, 20)
    # the cat map has period 10 on the 5-division points
    assert orb[10] == orb[0] and orb[20] == orb[0]
    assert exact_dist(orb[3], orb[3]) == 0
    assert to_fractions([1.25, -0.5]) == [Fraction(1, 4), Fraction(1, 2)]


def test_j_csu_set_membership(cat):
    x = np.array([0.3, 0.3])
    e_s, e_u = cat.splitting.stable[:, 0], cat.splitting.unstable[:, 0]
    assert j_csu_set_contains(cat, x, EPS, 4, x + 0.04 * e_s)
    near_u = x + 0.04 * cat.lam**4 * e_u
    assert j_csu_set_contains(cat, x, EPS, 4, near_u)
    assert not j_csu_set_contains(cat, x, EPS, 4, x + 0.04 * e_u)
    with pytest.raises(ValueError):
        j_csu_set_contains(cat, x, 0, 1, x)


def test_unstable_reach_corrections(cat):
    reach = UnstableReach(cat, 2.0)
    rng = np.random.default_rng(3)
    for delta in rng.random((20, 2)) * 3 - 1:
        found = reach.find(delta, 0.05)
        if found is None:
            continue
        k, v = found
        resid = k - delta - v * reach.e_u
        assert abs(v) <= 2.0 and np.linalg.norm(resid) <= 0.05 + 1e-9



def test_unstable_reach_needs_one_unstable_direction():
    # block sum of two cat maps has two expanding directions
    double = LinearCenterIsometry([[2, 1, 0, 0], [1, 1, 0, 0], [0, 0, 2, 1], [0, 0, 1, 1]])
    with pytest.raises(NotImplementedError):
        UnstableReach(double, 1.0)


def test_density_probe_cat(cat):
    assert density_probe(cat, EPS) == 8


def test_density_probe_t3_finds_no_gap(t3):
    # the invariant coordinate x1 + x2 + x3 keeps unstable disks on one level set
    assert density_probe(t3, EPS, m_max=8) is None


def test_shadow_and_close(cat):
    rng = np.random.default_rng(0)
    spec = OrbitSpec([(rng.random(2), (0, 4)), (rng.random(2), (12, 16))])
    res = shadow(cat, spec, EPS, M=8)
    assert res.achieved_eps <= 2 * EPS
    assert res.meta["return_time"] == 24
    q = quasiperiodize(cat, res.z_exact, 24)
    assert q.center_return == 0 and q.transverse_return == 0
    assert verify_shadowing(cat, spec, q.z_exact) <= 5 * EPS
    cf = periodic_point_closed_form(cat, q.z_exact, 24)
    assert np.max(np.abs((cf - q.z + 0.5) % 1 - 0.5)) < 1e-12


def test_shadow_rejects_short_gaps(cat):
    spec = OrbitSpec([([0.1, 0.1], (0, 2)), ([0.7, 0.2], (5, 6))])
    with pytest.raises(InfeasibleShadowing, match="gap"):
        shadow(cat, spec, EPS, M=8)


def test_shadowing_across_level_sets_is_infeasible(t3):
    # x1 + x2 + x3 differs by 0.9 between the segments, and no gap can bridge it
    spec = OrbitSpec([(np.zeros(3), (0, 1)), (np.full(3, 0.3), (40, 41))])
    with pytest.raises(InfeasibleShadowing):
        shadow(t3, spec, EPS, M=10)


def test_fiber_restricted_shadowing_on_t3(t3):
    rng = np.random.default_rng(1)
    specs = random_two_segment_specs(t3, 4, 10, rng, fiber=np.ones(3))
    for s in specs:
        (x1, _), (x2, _) = s.segments
        assert abs(((x1.sum() - x2.sum()) + 0.5) % 1 - 0.5) < 1e-9
    worst, transverse, _, failures = shadow_trials(t3, specs, EPS, 10, False)
    assert failures == 0
    assert worst <= 5 and transverse <= 1e-9


def test_quasiperiodize_t3_leaves_pure_center_return(t3):
    z = [Fraction(1, 7), Fraction(2, 9), Fraction(3, 11)]
    q = quasiperiodize(t3, z, 5)
    assert q.transverse_return < 1e-9
    assert q.center_return == pytest.approx(q.meta["center_displacement"], abs=1e-12)


def test_quasiperiodize_checks_near_return(cat):
    with pytest.raises(ValueError):
        quasiperiodize(cat, [Fraction(1, 3), Fraction(1, 7)], 1, eps=1e-6)
