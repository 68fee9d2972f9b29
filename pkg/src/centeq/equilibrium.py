"""Weighted plaque measures, their Cesaro averages, Gibbs ratios and Fourier tests."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp
from scipy.spatial import cKDTree

from .dynsys import reduce, torus_diff
from .netting import PLAQUE_MULT

QUAD_NODES = 64
QUAD_TOL = 0.01


@dataclass
class PlaqueMeasure:
    """Convex combination of normalized Lebesgue measures on center segments.

    Atom ``i`` is the segment ``points[i] + t * direction`` for
    ``|t| <= radius`` (a point mass when ``radius == 0`` or the system has
    no center).  Each segment keeps its own direction so that pushforwards by
    center isometries that rotate the center stay exact.
    """

    points: np.ndarray
    weights: np.ndarray
    directions: np.ndarray
    radius: float
    entropy: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        total = float(np.sum(self.weights))
        if not np.isclose(total, 1.0, atol=1e-12, rtol=0):
            raise ValueError(f"weights sum to {total}, expected 1")

    def __len__(self):
        return len(self.points)

    @property
    def is_atomic(self):
        return self.radius == 0 or self.directions.shape[-1] == 0

    def nodes(self, count=QUAD_NODES):
        """Midpoint-rule nodes ``(K, count, d)`` and offsets ``t`` on every segment."""
        if self.is_atomic:
            return self.points[:, None, :], np.zeros(1)
        t = (np.arange(count) + 0.5) / count * 2 * self.radius - self.radius
        pts = self.points[:, None, :] + t[None, :, None] * self.directions[:, None, :, 0]
        return reduce(pts), t

    def integrate(self, f, count=QUAD_NODES):
        """``int f d mu`` for vectorized ``f`` on ``(N, d)`` arrays (midpoint quadrature on segments)."""
        pts, t = self.nodes(count)
        vals = f(pts.reshape(-1, pts.shape[-1])).reshape(pts.shape[:2])
        return float(self.weights @ vals.mean(axis=1))

    def fourier(self, k):
        """Exact ``int e(<k, x>) d mu``: segment averages are ``e(<k, p>) sinc(2 pi r <k, v>)``."""
        k = np.atleast_2d(np.asarray(k, dtype=float))
        phase = np.exp(2j * np.pi * (self.points @ k.T))
        if not self.is_atomic:
            a = 2 * np.pi * self.radius * (self.directions[:, :, 0] @ k.T)
            phase = phase * np.sinc(a / np.pi)
        return self.weights @ phase

    def pushforward(self, sys, j=1):
        mj = np.linalg.matrix_power(sys.matrix.astype(float), j) if j >= 0 else None
        pts = sys.apply(self.points, j)
        dirs = self.directions
        if not self.is_atomic:
            m = mj if mj is not None else np.linalg.matrix_power(sys.inverse.astype(float), -j)
            dirs = np.einsum("ij,kjl->kil", m, dirs)
        return PlaqueMeasure(pts, self.weights.copy(), dirs, self.radius, self.entropy, dict(self.meta))

    def translate(self, v):
        return PlaqueMeasure(reduce(self.points + np.asarray(v)), self.weights.copy(), self.directions,
                             self.radius, self.entropy, dict(self.meta))


class HaarMeasure:
    """Lebesgue measure on ``T^d``; Fourier coefficients vanish off ``k = 0``."""

    def __init__(self, sys):
        self.sys = sys
        self.entropy = sys.entropy

    def fourier(self, k):
        k = np.atleast_2d(k)
        return np.all(k == 0, axis=1).astype(complex)

    def integrate(self, f, samples=200_000, seed=0):
        rng = np.random.default_rng(seed)
        return float(np.mean(f(rng.random((samples, self.sys.d)))))


def point_mass(sys, x):
    x = np.atleast_2d(reduce(x))
    return PlaqueMeasure(x, np.ones(1), np.zeros((1, sys.d, 0)), 0.0)


def empirical_measure(sys, qc, family, n, plaque_mult=PLAQUE_MULT):
    """``sum_x exp(S_n x) lambda_x / Z_n`` over the family members at ``n``.

    ``lambda_x`` is normalized Lebesgue measure on the center segment of
    radius ``plaque_mult * delta`` (a point mass for zero center).
    """
    if n not in family.members:
        raise KeyError(f"family has no entry at n={n}")
    pts = family.members[n].points
    logw = qc(pts, n)
    w = np.exp(logw - logsumexp(logw))
    w = w / w.sum()
    radius = plaque_mult * family.delta if sys.dim_c else 0.0
    if sys.dim_c > 1:
        raise NotImplementedError("plaque measures are implemented for center dimension <= 1")
    dirs = np.broadcast_to(sys.splitting.center, (len(pts), sys.d, sys.dim_c)).copy()
    return PlaqueMeasure(pts, w, dirs, radius, 0.0, {"n": n, "delta": family.delta})


def cesaro_measure(sys, qc, family, n, plaque_mult=PLAQUE_MULT):
    """``(1/n) sum_{j<n} T^j_* mu_n``."""
    mu = empirical_measure(sys, qc, family, n, plaque_mult)
    pts, dirs = [], []
    cur = mu
    for _ in range(n):
        pts.append(cur.points)
        dirs.append(cur.directions)
        cur = cur.pushforward(sys, 1)
    w = np.tile(mu.weights / n, n)
    return PlaqueMeasure(np.vstack(pts), w / w.sum(), np.concatenate(dirs), mu.radius, 0.0, dict(mu.meta))


class BallMassIndex:
    """Repeated Bowen-ball mass queries against one measure.

    Atoms are indexed by the pair ``(p, T^{n-1} p)`` in a periodic KD-tree, so
    a query only inspects segments that can meet ``B(x, n, eps)``.
    """

    def __init__(self, measure, sys, n):
        self.measure, self.sys, self.n = measure, sys, n
        orb_first = measure.points
        orb_last = sys.apply(measure.points, n - 1)
        self.tree = cKDTree(np.hstack([orb_first, orb_last]), boxsize=1.0)

    def mass(self, x, eps, count=QUAD_NODES, max_count=4096):
        mu, sys, n = self.measure, self.sys, self.n
        x = reduce(x)
        feat = np.concatenate([x, sys.apply(x, n - 1)])
        cand = np.asarray(self.tree.query_ball_point(feat, eps + mu.radius, p=np.inf), dtype=np.int64)
        if len(cand) == 0:
            return 0.0, 0.0
        w = mu.weights[cand]
        sub = PlaqueMeasure(mu.points[cand], w / w.sum(), mu.directions[cand], mu.radius)
        scale = float(w.sum())
        prev = scale * _segment_mass(sys, sub, x, n, eps, count)
        if mu.is_atomic:
            return prev, 0.0
        while count < max_count:
            count *= 2
            cur = scale * _segment_mass(sys, sub, x, n, eps, count)
            if abs(cur - prev) <= QUAD_TOL * max(cur, 1e-300):
                return cur, abs(cur - prev)
            prev = cur
        warnings.warn("ball mass quadrature did not stabilize to 1%", RuntimeWarning)
        return prev, float("nan")


def _segment_mass(sys, sub, x, n, eps, count):
    pts, _ = sub.nodes(count)
    k, c, d = pts.shape
    flat = pts.reshape(-1, d)
    inside = np.ones(len(flat), dtype=bool)
    cur, cx = flat, x
    mf = sys.matrix.astype(float)
    for _ in range(n):
        inside &= np.linalg.norm(torus_diff(cx, cur), axis=-1) <= eps
        cur, cx = reduce(cur @ mf.T), reduce(mf @ cx)
    return float(sub.weights @ inside.reshape(k, c).mean(axis=1))


def ball_mass(measure, sys, center, n, eps):
    """``measure(B(center, n, eps))``."""
    return BallMassIndex(measure, sys, n).mass(center, eps)[0]


@dataclass
class GibbsReport:
    passed: bool
    c: float
    C: float
    spread: float
    trend: float
    P: float
    table: list
    zero_mass: int
    witness: tuple | None = None


def gibbs_report(sys, qc, measure, P, eps, n_range, sample_points, seed=0, spread_max=100.0, trend_max=0.1):
    """Ratios ``mu(B(x, n, eps)) / exp(S_n(x) - n P)`` over sampled ``(x, n)``.

    ``n`` is drawn uniformly from ``n_range``.  Passes when every ratio is
    positive, ``max/min < spread_max`` and the least-squares slope of
    ``log ratio`` against ``n`` is below ``trend_max`` in absolute value.
    """
    rng = np.random.default_rng(seed)
    ns = np.asarray(list(n_range))
    xs = rng.random((sample_points, sys.d))
    nn = rng.choice(ns, sample_points)
    table = []
    for n in np.unique(nn):
        index = BallMassIndex(measure, sys, int(n))
        sel = np.flatnonzero(nn == n)
        s_n = qc(xs[sel], int(n))
        for i, s in zip(sel, s_n):
            m, _ = index.mass(xs[i], eps)
            table.append((xs[i].tolist(), int(n), m, m / np.exp(s - n * P)))
    ratios = np.array([row[3] for row in table])
    zero = int(np.sum(ratios <= 0))
    if zero:
        i = int(np.argmin(ratios))
        return GibbsReport(False, 0.0, float(ratios.max()), np.inf, np.nan, P, table, zero, (table[i][0], table[i][1]))
    lo, hi = float(ratios.min()), float(ratios.max())
    trend = float(np.polyfit([row[1] for row in table], np.log(ratios), 1)[0])
    passed = hi / lo < spread_max and abs(trend) < trend_max
    return GibbsReport(passed, lo, hi, hi / lo, trend, P, table, 0)


def frequency_battery(d, cutoff):
    """All nonzero integer vectors with ``|k|_inf <= cutoff`` (lexicographic)."""
    axis = np.arange(-cutoff, cutoff + 1)
    ks = np.array(np.meshgrid(*([axis] * d), indexing="ij")).reshape(d, -1).T
    return ks[np.any(ks != 0, axis=1)]


@dataclass
class FourierReport:
    passed: bool
    max_coefficient: float
    worst_k: tuple
    threshold: float
    coefficients: dict


def haar_comparison(measure, d, frequency_cutoff=3, threshold=0.05):
    ks = frequency_battery(d, frequency_cutoff)
    coef = np.abs(measure.fourier(ks))
    i = int(np.argmax(coef))
    return FourierReport(bool(coef.max() < threshold), float(coef.max()), tuple(ks[i].tolist()), threshold,
                         {tuple(k): float(c) for k, c in zip(ks.tolist(), coef)})


def commuting_battery(d, count=20):
    """The ``count`` smallest nonzero frequencies, ordered by Euclidean length then lexicographically."""
    ks = frequency_battery(d, 2)
    order = sorted(range(len(ks)), key=lambda i: (float(np.dot(ks[i], ks[i])), tuple(ks[i])))
    return ks[order[:count]]


@dataclass
class InvarianceReport:
    passed: bool
    defects: dict
    slope: float
    vacuous: bool = False


def translation_defect(measure, translation, ks):
    """``max_k |int e_k d(R_* nu) - int e_k d nu|`` with ``R x = x + translation``."""
    coef = measure.fourier(ks)
    shift = np.exp(2j * np.pi * (np.asarray(ks, dtype=float) @ np.asarray(translation)))
    return float(np.max(np.abs((shift - 1) * coef)))


def commuting_invariance_check(sys, measures, translation, count=20, tol=0.05):
    """Defects of ``R``-invariance for a sequence of measures ``{n: nu_n}``.

    ``translation`` must lie in the center.  Passes when the defect at the
    largest ``n`` is below ``tol`` and the fitted slope of ``log defect``
    against ``n`` is negative (decay).
    """
    translation = np.asarray(translation, dtype=float)
    if sys.dim_c == 0:
        return InvarianceReport(True, {}, 0.0, vacuous=True)
    _, c, _ = sys.components(translation)
    if np.linalg.norm(translation - c) > 1e-9 * max(1.0, np.linalg.norm(translation)):
        raise ValueError("translation is not a center vector")
    ks = commuting_battery(sys.d, count)
    defects = {n: translation_defect(mu, translation, ks) for n, mu in sorted(measures.items())}
    if np.allclose(translation, 0):
        return InvarianceReport(all(v == 0 for v in defects.values()), defects, 0.0)
    ns = np.array(list(defects))
    vals = np.maximum(np.array(list(defects.values())), 1e-300)
    slope = float(np.polyfit(ns, np.log(vals), 1)[0]) if len(ns) > 1 else 0.0
    passed = vals[-1] < tol and slope < 0
    return InvarianceReport(bool(passed), defects, slope)


def invariance_defect(sys, measure, ks):
    """``max_k |int e_k o T dnu - int e_k dnu|``; for Cesaro averages at most ``2/n``."""
    ks = np.asarray(ks)
    pushed = np.asarray(ks) @ sys.matrix
    return float(np.max(np.abs(measure.fourier(pushed) - measure.fourier(ks))))


def variational(sys, qc, measure, n_avg=12):
    """``h_mu + (1/n) int S_n dmu`` for the supplied measure."""
    h = sys.entropy if isinstance(measure, HaarMeasure) else float(measure.entropy)
    return h + measure.integrate(lambda pts: qc(pts, n_avg)) / n_avg
