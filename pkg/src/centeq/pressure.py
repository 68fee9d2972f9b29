"""Partition sums, pressure fits and growth-law checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .netting import build_quasiperiodic_family, greedy_separated
from .quasicocycle import zero_cocycle

RESIDUAL_TOL = 0.25


@dataclass
class PartitionEntry:
    n: int
    eps: float
    log_z: float
    size: int

    @property
    def z(self):
        return float(np.exp(self.log_z))


@dataclass
class PartitionSumSeries:
    entries: list
    source: str = "separated-net"

    def table(self):
        return {e.n: e.log_z for e in self.entries}

    @property
    def eps(self):
        values = {e.eps for e in self.entries}
        if len(values) > 1:
            raise ValueError(f"series mixes eps values {sorted(values)}")
        return values.pop() if values else None


@dataclass
class PressureEstimate:
    P: float
    window: tuple
    residual: float
    eps: float
    intercept: float
    series: PartitionSumSeries
    unstable: bool = False


def log_partition_sum(qc, points, n):
    """``log sum_x exp(S_n(x))`` evaluated with log-sum-exp."""
    if len(points) == 0:
        raise ValueError("empty point set")
    return float(logsumexp(qc(points, n)))


def partition_sum(sys, qc, net):
    """``Z_n = sum_{x in net} exp(S_n(x))`` (may overflow to ``inf``; see :func:`log_partition_sum`)."""
    return float(np.exp(log_partition_sum(qc, net.points, net.n)))


class NetCache:
    """Memoized greedy nets keyed by ``(n, eps)`` so several potentials share one net."""

    def __init__(self, sys):
        self.sys = sys
        self._nets = {}

    def get(self, n, eps):
        key = (int(n), float(eps))
        if key not in self._nets:
            self._nets[key] = greedy_separated(self.sys, n, eps)
        return self._nets[key]


def partition_series(sys, qc, eps, n_range, nets=None):
    nets = nets or NetCache(sys)
    entries = []
    for n in n_range:
        net = nets.get(n, eps)
        entries.append(PartitionEntry(int(n), float(eps), log_partition_sum(qc, net.points, n), len(net)))
    return PartitionSumSeries(entries, "separated-net")


def family_series(sys, qc, family):
    entries = []
    for n, qp in sorted(family.members.items()):
        entries.append(PartitionEntry(n, family.delta, log_partition_sum(qc, qp.points, n), len(qp)))
    return PartitionSumSeries(entries, "quasiperiodic-family")


def fit_pressure(series, residual_tol=RESIDUAL_TOL):
    """Least-squares slope of ``log Z_n`` against ``n``.

    ``residual`` is the largest absolute deviation from the fitted line, a
    proxy for ``max(log D, -log E)``.  The fit is flagged ``unstable`` when
    the residual exceeds ``residual_tol`` times the total rise over the window.
    """
    ns = np.array([e.n for e in series.entries], dtype=float)
    lz = np.array([e.log_z for e in series.entries])
    if len(ns) < 4:
        raise ValueError("pressure fit needs at least 4 values of n")
    slope, intercept = np.polyfit(ns, lz, 1)
    resid = float(np.max(np.abs(lz - (slope * ns + intercept))))
    rise = abs(slope) * (ns.max() - ns.min())
    unstable = resid > residual_tol * max(rise, 1e-12)
    return PressureEstimate(float(slope), (int(ns.min()), int(ns.max())), resid, series.eps, float(intercept), series, unstable)


def default_window(sys):
    return (4, 12) if sys.d == 2 else (3, 9)


def pressure_estimate(sys, qc=None, eps=0.05, n_range=None, nets=None):
    """Pressure as the slope of ``log Z_n(eps)`` over a window of ``n``.

    Parameters
    ----------
    sys : LinearCenterIsometry
    qc : QuasiCocycle, optional
        Defaults to the zero cocycle (topological entropy).
    eps : float
    n_range : iterable of int, optional
        Defaults to ``4..12`` for ``d = 2`` and ``3..9`` for ``d = 3``.
    nets : NetCache, optional
        Shared net cache.
    """
    qc = qc or zero_cocycle(sys)
    if n_range is None:
        lo, hi = default_window(sys)
        n_range = range(lo, hi + 1)
    return fit_pressure(partition_series(sys, qc, eps, list(n_range), nets))


def family_pressure(sys, qc, n_range, delta):
    fam = build_quasiperiodic_family(sys, n_range, delta)
    return fit_pressure(family_series(sys, qc, fam)), fam


@dataclass
class MultiplicativityReport:
    passed: bool
    band: tuple
    fit_ratios: dict
    holdout_ratios: dict
    slack: float = 1.0
    failures: list = field(default_factory=list)


def multiplicativity_check(series, fit_max=8, holdout=(9, 10), slack=1.0):
    """Ratios ``Z_{n+m} / (Z_n Z_m)`` and a band ``[E, D]`` that must bound them.

    The band is the range of ratios with ``n + m <= fit_max`` (widened by the
    multiplicative ``slack``) and is re-verified on pairs whose sum lies in
    ``holdout``.
    """
    series.eps  # raises on mixed eps
    lz = series.table()
    if len(lz) < 2:
        return MultiplicativityReport(True, (np.nan, np.nan), {}, {})
    fit, held = {}, {}
    for n in lz:
        for m in lz:
            if m < n or n + m not in lz:
                continue
            ratio = lz[n + m] - lz[n] - lz[m]
            if n + m <= fit_max:
                fit[(n, m)] = ratio
            elif n + m in holdout:
                held[(n, m)] = ratio
    if not fit:
        return MultiplicativityReport(True, (np.nan, np.nan), fit, held)
    # the 1e-9 pad absorbs log-sum-exp rounding when the band has zero width
    lo, hi = min(fit.values()) - np.log(slack) - 1e-9, max(fit.values()) + np.log(slack) + 1e-9
    failures = [k for k, v in held.items() if not lo <= v <= hi]
    return MultiplicativityReport(
        not failures, (float(np.exp(lo)), float(np.exp(hi))),
        {k: float(np.exp(v)) for k, v in fit.items()}, {k: float(np.exp(v)) for k, v in held.items()},
        slack, failures,
    )


@dataclass
class ScaleReport:
    passed: bool
    P_fine: float
    P_coarse: float
    log_ratios: dict
    ratio_trend: float
    tolerance: float


def scale_robustness_check(sys, qc, eps1, eps2, n_range, tol=0.05, nets=None):
    """Compare ``Z_n(eps1)`` and ``Z_n(eps2)`` for ``eps1 < eps2``.

    Passes when the two pressure fits differ by less than ``tol`` and the
    log-ratio ``log Z_n(eps1) - log Z_n(eps2)`` has fitted drift over the
    window below ``tol`` per step (bounded ratio, no trend).
    """
    if not eps1 <= eps2:
        raise ValueError("expected eps1 <= eps2")
    n_range = list(n_range)
    nets = nets or NetCache(sys)
    fine = fit_pressure(partition_series(sys, qc, eps1, n_range, nets))
    coarse = fit_pressure(partition_series(sys, qc, eps2, n_range, nets))
    ratios = {n: fine.series.table()[n] - coarse.series.table()[n] for n in n_range}
    trend = float(np.polyfit(n_range, list(ratios.values()), 1)[0])
    passed = abs(fine.P - coarse.P) < tol and abs(trend) < tol
    return ScaleReport(passed, fine.P, coarse.P, ratios, trend, tol)


@dataclass
class VariationalReport:
    value: float
    entropy: float
    integral: float
    P_est: float
    passed: bool
    equality: bool


def variational_check(sys, qc, measure, P_est, tol=0.05, n_avg=12):
    """``h_mu + mu(S) <= P`` for a supplied invariant measure.

    ``measure`` is ``"haar"`` (entropy ``log lambda_u`` summed over unstable
    moduli) or any object exposing ``entropy`` and ``integrate(f)``; atomic
    measures carry entropy 0.  ``mu(S)`` is ``(1/n) int S_n dmu`` at
    ``n = n_avg`` (exact for Birkhoff sums of invariant measures).
    """
    if measure == "haar":
        h = sys.entropy
        if qc.potential is not None:
            integral = qc.potential.mean
        else:
            rng = np.random.default_rng(0)
            integral = float(np.mean(qc(rng.random((20000, sys.d)), n_avg)) / n_avg)
    else:
        h = float(measure.entropy)
        integral = float(measure.integrate(lambda pts: qc(pts, n_avg))) / n_avg
    value = h + integral
    equality = abs(value - P_est) <= tol
    return VariationalReport(value, h, integral, P_est, value <= P_est + tol, equality)
