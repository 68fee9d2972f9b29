"""End-to-end acceptance checks, shared by ``centeq selftest`` and the test suite.

Each ``criterion_*`` function returns a :class:`CriterionResult`; the
tolerances are fixed here and never relaxed at run time.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dynsys import cat_map, reduce, t3_system
from .equilibrium import cesaro_measure, commuting_invariance_check, gibbs_report, haar_comparison
from .latticebridge import (
    BridgeCocycle, boundedness_gap, builtin_root_system, expression_quasimorphism, haar_average_H,
    homogenize, rotation, twisted_cocycle, weyl_kernel_check,
)
from .netting import build_quasiperiodic_family
from .pressure import NetCache, multiplicativity_check, partition_series, pressure_estimate, scale_robustness_check
from .quasicocycle import TrigPotential, birkhoff, is_cohomologous, zero_cocycle
from .specification import (
    InfeasibleShadowing, OrbitSpec, density_probe, periodic_point_closed_form, quasiperiodize, shadow,
    verify_shadowing,
)

ENTROPY = math.log((3 + math.sqrt(5)) / 2)
GIBBS_N = 15
GIBBS_EPS = 0.04


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        summary = ", ".join(f"{k}={_fmt(v)}" for k, v in self.detail.items() if not isinstance(v, (dict, list)))
        return f"[{status}] criterion {self.number}: {self.title} ({summary}; {self.seconds:.1f}s)"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


class Context:
    """Shared systems, net caches and measures so criteria reuse expensive objects."""

    def __init__(self, seed=0):
        self.seed = seed
        self.cat = cat_map()
        self.t3 = t3_system()
        self.nets = {"cat": NetCache(self.cat), "t3": NetCache(self.t3)}
        self._families = {}
        self._pressures = {}

    def family(self, name, n_range, delta=0.05):
        key = (name, tuple(n_range), delta)
        if key not in self._families:
            sys = self.cat if name == "cat" else self.t3
            self._families[key] = build_quasiperiodic_family(sys, list(n_range), delta)
        return self._families[key]

    def pressure(self, name, qc, eps, n_range, tag):
        key = (name, tag, eps, tuple(n_range))
        if key not in self._pressures:
            sys = self.cat if name == "cat" else self.t3
            self._pressures[key] = pressure_estimate(sys, qc, eps, n_range, self.nets[name])
        return self._pressures[key]


def _timed(fn):
    def wrapper(ctx=None):
        ctx = ctx or Context()
        t0 = time.perf_counter()
        res = fn(ctx)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def criterion_1(ctx):
    """Entropy from partition sums of maximal separated nets, both systems, 5% tolerance."""
    detail, ok = {}, True
    for name, window in (("cat", range(4, 10)), ("t3", range(3, 9))):
        sys = ctx.cat if name == "cat" else ctx.t3
        t0 = time.perf_counter()
        est = ctx.pressure(name, zero_cocycle(sys), 0.05, window, "zero")
        rel = est.P / ENTROPY - 1
        detail[f"{name}_P"] = est.P
        detail[f"{name}_rel_err"] = rel
        detail[f"{name}_seconds"] = time.perf_counter() - t0
        ok &= abs(rel) < 0.05
    return CriterionResult(1, "entropy via partition sums", bool(ok), detail)


@_timed
def criterion_2(ctx):
    """``P(S + nc) - P(S) = c`` for constant shifts on the cat map."""
    window = range(4, 10)
    base = ctx.pressure("cat", zero_cocycle(ctx.cat), 0.05, window, "zero").P
    detail, ok = {}, True
    for c in (-0.5, 0.3):
        qc = birkhoff(ctx.cat, TrigPotential.constant(c, 2))
        shift = ctx.pressure("cat", qc, 0.05, window, f"const{c}").P - base
        detail[f"shift_{c}"] = shift
        ok &= abs(shift - c) < 1e-2
    return CriterionResult(2, "constant-shift exactness", bool(ok), detail)


@_timed
def criterion_3(ctx):
    """Multiplicativity band on held-out pairs and two-scale robustness (cat map)."""
    qc = zero_cocycle(ctx.cat)
    series = partition_series(ctx.cat, qc, 0.05, range(1, 11), ctx.nets["cat"])
    mult = multiplicativity_check(series, fit_max=8, holdout=(9, 10))
    scale = scale_robustness_check(ctx.cat, qc, 0.03, 0.06, range(4, 10), nets=ctx.nets["cat"])
    held = mult.holdout_ratios.values()
    detail = {
        "band_lo": mult.band[0], "band_hi": mult.band[1],
        "holdout_min": min(held), "holdout_max": max(held),
        "P_eps003": scale.P_fine, "P_eps006": scale.P_coarse, "log_ratio_trend": scale.ratio_trend,
    }
    return CriterionResult(3, "Z_n growth laws", bool(mult.passed and scale.passed), detail)


def _gibbs(ctx, potential, tag):
    sys = ctx.cat
    qc = birkhoff(sys, potential) if potential is not None else zero_cocycle(sys)
    fam = ctx.family("cat", [GIBBS_N])
    nu = cesaro_measure(sys, qc, fam, GIBBS_N)
    P = ctx.pressure("cat", qc, GIBBS_EPS, range(4, 10), tag).P
    return gibbs_report(sys, qc, nu, P, GIBBS_EPS, range(3, 10), 200, seed=ctx.seed)


@_timed
def criterion_4(ctx):
    """Two-sided Gibbs bounds of the Cesaro family measure for ``qc = 0`` on the cat map."""
    rep = _gibbs(ctx, None, "zero")
    detail = {"c": rep.c, "C": rep.C, "spread": rep.spread, "trend": rep.trend, "P": rep.P,
              "measure_n": GIBBS_N, "eps": GIBBS_EPS, "zero_mass": rep.zero_mass}
    return CriterionResult(4, "Gibbs two-sided bounds", bool(rep.passed and rep.c > 0), detail)


@_timed
def criterion_5(ctx):
    """``log N_n(delta) / n`` within 10% of the entropy for every ``n`` in ``[3, 8]`` (3-torus)."""
    fam = ctx.family("t3", range(3, 9))
    counts = fam.counts()
    rel = {n: math.log(c) / n / ENTROPY - 1 for n, c in counts.items()}
    worst = max(rel, key=lambda n: abs(rel[n]))
    detail = {"counts": counts, "rel_err": rel, "worst_n": worst, "worst_rel_err": rel[worst]}
    return CriterionResult(5, "quasiperiodic counting", all(abs(v) < 0.1 for v in rel.values()), detail)


def random_two_segment_specs(sys, count, M, rng, fiber=None):
    specs = []
    for _ in range(count):
        x1, x2 = rng.random(sys.d), rng.random(sys.d)
        if fiber is not None:
            # move x2 onto the invariant level set of x1
            x2 = reduce(x2 + ((fiber @ x1 - fiber @ x2 + 0.5) % 1 - 0.5) * fiber / (fiber @ fiber))
        l1, l2 = rng.integers(2, 6, 2)
        specs.append(OrbitSpec([(x1, (0, int(l1))), (x2, (int(l1) + M, int(l1) + M + int(l2)))], gap=M))
    return specs


def shadow_trials(sys, specs, eps, M, closed_form):
    worst_shadow, worst_transverse, worst_closed, failures = 0.0, 0.0, 0.0, 0
    for spec in specs:
        try:
            res = shadow(sys, spec, eps, M)
        except InfeasibleShadowing:
            failures += 1
            continue
        q = quasiperiodize(sys, res.z_exact, res.meta["return_time"])
        worst_shadow = max(worst_shadow, verify_shadowing(sys, spec, q.z_exact) / eps)
        worst_transverse = max(worst_transverse, q.transverse_return)
        if closed_form:
            cf = periodic_point_closed_form(sys, q.z_exact, res.meta["return_time"])
            worst_closed = max(worst_closed, float(np.max(np.abs(((cf - q.z) + 0.5) % 1 - 0.5))))
    return worst_shadow, worst_transverse, worst_closed, failures


@_timed
def criterion_6(ctx):
    """Shadowing of 50 random two-segment specifications per system at the measured ``M(eps)``."""
    eps = 0.05
    rng = np.random.default_rng(ctx.seed)
    detail, ok = {}, True
    for name, sys in (("cat", ctx.cat), ("t3", ctx.t3)):
        M = density_probe(sys, eps)
        detail[f"{name}_M"] = M
        if M is None:
            detail[f"{name}_status"] = "no M: unstable disks never eps-dense"
            ok = False
            # restricted diagnostic: specifications inside one invariant level set
            if sys.rational_center is not None:
                fiber = np.ones(sys.d) if name == "t3" else None
                specs = random_two_segment_specs(sys, 10, 10, rng, fiber)
                s, t, _, f = shadow_trials(sys, specs, eps, 10, False)
                detail[f"{name}_fiber_diag_failures"] = f
                detail[f"{name}_fiber_diag_shadow_over_eps"] = s
            continue
        specs = random_two_segment_specs(sys, 50, M, rng)
        s, t, c, f = shadow_trials(sys, specs, eps, M, name == "cat")
        detail.update({f"{name}_failures": f, f"{name}_shadow_over_eps": s, f"{name}_transverse_return": t})
        good = f == 0 and s <= 5 and t <= 1e-9
        if name == "cat":
            detail["cat_closed_form_err"] = c
            good &= c <= 1e-9
        ok &= good
    return CriterionResult(6, "specification shadowing", bool(ok), detail)


@_timed
def criterion_7(ctx):
    """Bridge defect below the assembled bound, and ``sup |S - H| <= 1`` for ``L(n) = n``."""
    golden = 2 * math.pi * (math.sqrt(5) - 1) / 2
    sq2 = expression_quasimorphism("floor(n*sqrt(2))")
    tw = twisted_cocycle(rotation(golden), [1.0, 0.0])
    r1 = BridgeCocycle(sq2).defect_report([math.sqrt(3)], samples=100_000, seed=ctx.seed)
    r2 = BridgeCocycle(tw).defect_report([1 / math.sqrt(2)], samples=100_000, seed=ctx.seed)
    ident = expression_quasimorphism("n")
    H = haar_average_H(ident, [1.0], n_limit=10**7).H
    gap = boundedness_gap(ident, np.atleast_2d(H), box=1000, seed=ctx.seed)
    detail = {"sqrt2_measured": r1.measured, "sqrt2_K": r1.bound.K,
              "twisted_measured": r2.measured, "twisted_K": r2.bound.K, "identity_gap": gap}
    return CriterionResult(7, "bridge quasicocycle bound", bool(r1.passed and r2.passed and gap <= 1), detail)


@_timed
def criterion_8(ctx):
    """Homogenization of ``floor(n sqrt 2)`` and Haar averages ``H`` with additivity."""
    sq2 = expression_quasimorphism("floor(n*sqrt(2))")
    hom = homogenize(sq2, probes=range(-10, 11), n_limit=10**7)
    hom_err = max(abs(v - k * math.sqrt(2)) for k, v in hom.values.items())
    ident = expression_quasimorphism("n")
    errs, adds = [], []
    for a in (0.37, 1.0, -2.25, math.sqrt(3)):
        est = haar_average_H(ident, [a], n_limit=10**7)
        errs.append(abs(float(est.H[0]) - a))
        adds.append(est.additivity_error)
    detail = {"homogenize_err": hom_err, "H_err": max(errs), "H_additivity_err": max(adds)}
    ok = hom_err <= 1e-6 and max(errs) <= 1e-6 and max(adds) <= 1e-6
    return CriterionResult(8, "homogenization and H", bool(ok), detail)


@_timed
def criterion_9(ctx):
    """Exact reflection-span rank 2 for ``A2, B2, G2`` and rank 1 for a single root pair."""
    ranks = {name: weyl_kernel_check(builtin_root_system(name)).rank for name in ("A2", "B2", "G2", "single")}
    ok = ranks["A2"] == ranks["B2"] == ranks["G2"] == 2 and ranks["single"] == 1
    return CriterionResult(9, "Weyl kernel", bool(ok), dict(ranks))


@_timed
def criterion_10(ctx):
    """Fourier coefficients of the cat ``nu_9`` and center-translation invariance on the 3-torus."""
    cat_fam = ctx.family("cat", [9])
    nu9 = cesaro_measure(ctx.cat, zero_cocycle(ctx.cat), cat_fam, 9)
    four = haar_comparison(nu9, 2, 3, 0.05)
    t3 = ctx.t3
    fam = ctx.family("t3", range(3, 10))
    qc = zero_cocycle(t3)
    measures = {n: cesaro_measure(t3, qc, fam, n) for n in range(3, 10)}
    R = 0.3 * t3.splitting.center[:, 0]
    inv = commuting_invariance_check(t3, measures, R, count=20, tol=0.05)
    detail = {"cat_max_fourier": four.max_coefficient, "t3_final_defect": inv.defects[max(inv.defects)],
              "t3_log_defect_slope": inv.slope, "t3_defects": inv.defects}
    return CriterionResult(10, "Haar convergence", bool(four.passed and inv.passed), detail)


def cohomology_potentials():
    phi = TrigPotential([[1, 0], [1, 1]], [0.2, 0.0], [0.0, 0.1], d=2)
    psi = TrigPotential([[0, 1]], [0.15], [0.0], d=2)
    return phi, phi + psi.coboundary(cat_map().matrix), psi


@_timed
def criterion_11(ctx):
    """Cohomologous potentials: trivial difference, equal pressure, proportional Gibbs tables."""
    sys = ctx.cat
    phi, phi2, psi = cohomology_potentials()
    q1, q2 = birkhoff(sys, phi), birkhoff(sys, phi2)
    verdict = is_cohomologous(q1, q2, sys, seed=ctx.seed)
    P1 = ctx.pressure("cat", q1, 0.05, range(4, 10), "phi")
    P2 = ctx.pressure("cat", q2, 0.05, range(4, 10), "phi_cob")
    g1 = _gibbs(ctx, phi, "phi")
    g2 = _gibbs(ctx, phi2, "phi_cob")
    quot = np.array([b[3] / a[3] for a, b in zip(g1.table, g2.table)])
    q_spread = float(quot.max() / quot.min())
    detail = {"verdict": verdict.verdict, "P_phi": P1.P, "P_cohomologous": P2.P,
              "gibbs_quotient_spread": q_spread, "gibbs_spread_phi": g1.spread, "gibbs_spread_cob": g2.spread}
    ok = (verdict.verdict == "trivial-difference" and abs(P1.P - P2.P) < 1e-2
          and q_spread < 100 and g1.passed and g2.passed)
    return CriterionResult(11, "cohomology coherence", bool(ok), detail)


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 12)}


def run_all(only=None, seed=0, echo=print):
    ctx = Context(seed)
    results = []
    for i, fn in CRITERIA.items():
        if only and i not in only:
            continue
        res = fn(ctx)
        if echo:
            echo(res.line())
        results.append(res)
    return results
