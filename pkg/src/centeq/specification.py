"""Shadowing of orbit segments and closing of shadowing orbits into quasiperiodic ones.

All constructions are exact: points are vectors of :class:`fractions.Fraction`
and the map is iterated in rational arithmetic, so re-verification of long
orbits does not suffer from the ``lambda^n`` growth of float errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import sympy as sp
from scipy.spatial import cKDTree

from .dynsys import reduce, torus_diff


class InfeasibleShadowing(RuntimeError):
    """The unstable disk does not reach the next cs-ball within the given gap."""


@dataclass
class OrbitSpec:
    """Orbit segments ``x_i`` prescribed on integer intervals ``[a_i, b_i]``.

    The requested orbit ``z`` follows ``T^{j - a_i} x_i`` for ``j`` in
    ``[a_i, b_i]``.
    """

    segments: list
    gap: int = 0

    def __post_init__(self):
        segs = []
        for x, (a, b) in self.segments:
            if b < a:
                raise ValueError("interval end before start")
            segs.append((np.asarray(x, dtype=float), (int(a), int(b))))
        segs.sort(key=lambda s: s[1][0])
        for (_, (_, b0)), (_, (a1, _)) in zip(segs, segs[1:]):
            if a1 - b0 < self.gap:
                raise ValueError(f"intervals closer than the gap requirement {self.gap}")
        self.segments = segs

    @property
    def gaps(self):
        return [a1 - b0 for (_, (_, b0)), (_, (a1, _)) in zip(self.segments, self.segments[1:])]


@dataclass
class ShadowResult:
    z: np.ndarray
    z_exact: list
    achieved_eps: float
    period: int | None = None
    center_return: float | None = None
    transverse_return: float | None = None
    meta: dict = field(default_factory=dict)


def to_fractions(x):
    """Exact rational copy of a float (or Fraction) vector, reduced mod 1."""
    return [Fraction(v) % 1 if not isinstance(v, Fraction) else v % 1 for v in np.asarray(x, dtype=object)]


def _centered(q):
    return [v - math.floor(v + Fraction(1, 2)) for v in q]


def _matvec(m, v):
    return [sum((int(a) * b for a, b in zip(row, v)), Fraction(0)) for row in m]


def exact_orbit(sys, x, n):
    """``[T^j x for j in 0..n]`` as Fraction vectors."""
    cur = [v % 1 for v in x]
    out = [cur]
    rows = sys.matrix.tolist()
    for _ in range(n):
        cur = [v % 1 for v in _matvec(rows, cur)]
        out.append(cur)
    return out


def exact_dist(x, y):
    """Flat torus distance between Fraction vectors (float result)."""
    return float(np.linalg.norm([float(v) for v in _centered([b - a for a, b in zip(x, y)])]))


def j_csu_set_contains(sys, x, eps, d, y):
    """Membership of ``y`` in the union of ``T^{-d} B^u_eps(T^d y')`` over ``y'`` in ``B^cs_eps(x)``.

    ``y - x`` is lifted over the neighbouring lattice translates and split in
    eigen-coordinates; ``y`` belongs when some lift has a center-stable part
    of length at most ``eps`` and an unstable part ``v`` with
    ``|M^d v| <= eps``.
    """
    if eps <= 0 or d < 0:
        raise ValueError("need eps > 0 and d >= 0")
    base = torus_diff(x, y)
    shifts = np.array(np.meshgrid(*([[-1, 0, 1]] * sys.d), indexing="ij")).reshape(sys.d, -1).T
    lifts = base + shifts
    s, c, u = sys.components(lifts)
    cs = np.linalg.norm(s + c, axis=-1)
    grown = np.linalg.norm(u @ np.linalg.matrix_power(sys.matrix.astype(float), d).T, axis=-1)
    return bool(np.any((cs <= eps + 1e-12) & (grown <= eps + 1e-12)))


class UnstableReach:
    """Lattice points reachable from a point by an unstable vector of length at most ``reach``.

    ``find(delta, tol)`` returns an integer ``k`` and a scalar ``v`` with
    ``k - delta = v e_u + c`` where ``c`` is a center-stable vector of length
    at most ``tol`` and ``|v| <= reach``.  By ``Z^d``-periodicity only the
    fractional part of ``delta`` matters, so the admissible ``k`` lie in a
    fixed tube around the unstable line, enumerated once and indexed by a
    KD-tree on their center-stable components.
    """

    def __init__(self, sys, reach, max_points=50_000_000):
        if sys.dim_u != 1:
            raise NotImplementedError("shadowing search is implemented for one unstable direction")
        self.sys, self.reach = sys, float(reach)
        e_u = sys.splitting.unstable[:, 0]
        row_u = sys.basis_inv[-1]
        p_cs = np.eye(sys.d) - np.outer(e_u, row_u)
        r_cs = float(np.sum(np.linalg.norm(p_cs, axis=0))) + 1.0
        half = self.reach + float(np.sum(np.abs(row_u)))
        box = int(math.ceil(r_cs)) + 1
        t = np.arange(-half, half + 0.5, 0.5)
        axis = np.arange(-box, box + 1)
        shifts = np.array(np.meshgrid(*([axis] * sys.d), indexing="ij")).reshape(sys.d, -1).T
        if len(t) * len(shifts) > max_points:
            raise MemoryError("unstable reach too long to enumerate")
        parts = []
        step = max(1, 2_000_000 // len(shifts))
        for lo in range(0, len(t), step):
            base = np.floor(t[lo : lo + step, None] * e_u[None, :]).astype(np.int64)
            cand = (base[:, None, :] + shifts[None]).reshape(-1, sys.d)
            u = cand @ row_u
            cs = cand - np.outer(u, e_u)
            parts.append(cand[(np.abs(u) <= half) & (np.linalg.norm(cs, axis=1) <= r_cs)])
        cand = np.unique(np.vstack(parts), axis=0)
        u = cand @ row_u
        self.k, self.u, self.cs = cand, u, cand - np.outer(u, e_u)
        self.tree = cKDTree(self.cs)
        self.e_u, self.row_u = e_u, row_u

    def find(self, delta, tol):
        delta = np.asarray(delta, dtype=float)
        shift = np.floor(delta)
        frac = delta - shift
        du = frac @ self.row_u
        dcs = frac - du * self.e_u
        hits = np.asarray(self.tree.query_ball_point(dcs, tol), dtype=np.int64)
        if len(hits) == 0:
            return None
        v = self.u[hits] - du
        ok = np.abs(v) <= self.reach
        if not ok.any():
            return None
        i = hits[ok][np.argmin(np.abs(v[ok]))]
        return (self.k[i] + shift).astype(np.int64), float(self.u[i] - du)

    def covers(self, probes, tol):
        """True when every probe point admits a correction."""
        return all(self.find(p, tol) is not None for p in probes)


def density_probe(sys, eps, m_max=40, seed=0, probes=400):
    """Smallest gap ``m`` after which unstable disks reach every center-stable ``eps/4``-ball.

    For each ``m`` an unstable segment of half-length ``(eps/2) lambda_u^m``
    (the image of an ``eps/2``-disk) is tested against random probe points
    and a grid of spacing comparable to ``eps``.  Returns ``None`` when no
    ``m <= m_max`` works or the segment becomes too long to enumerate, which
    means the unstable lamination is not ``eps``-dense at this scale.
    """
    rng = np.random.default_rng(seed)
    side = max(2, int(math.ceil(2 * math.sqrt(sys.d) / eps)))
    side = min(side, int(20000 ** (1 / sys.d)))
    grid = (np.array(np.meshgrid(*([np.arange(side)] * sys.d), indexing="ij")).reshape(sys.d, -1).T + 0.5) / side
    pts = np.vstack([rng.random((probes, sys.d)), grid])
    for m in range(m_max + 1):
        try:
            reach = UnstableReach(sys, eps / 2 * sys.lambda_u**m)
        except MemoryError:
            return None
        if reach.covers(pts, eps / 4):
            return m
    return None


def _rows(mat):
    return [[int(v) for v in row] for row in mat]


def shadow(sys, spec, eps, M=None, close=True):
    """Orbit ``z`` that ``2 eps``-shadows every prescribed segment.

    The construction is inductive.  A shadowing point ``u`` for the first
    ``i`` segments (at time ``a_1``) is corrected by a short unstable vector so
    that at time ``a_{i+1}`` it lands in the center-stable ``eps``-ball of
    ``x_{i+1}``.  Corrections shrink exponentially when pulled back, which
    keeps the earlier segments within ``2 eps``.

    Parameters
    ----------
    sys : LinearCenterIsometry
    spec : OrbitSpec
    eps : float
    M : int, optional
        Gap length that makes an unstable ``eps``-disk ``eps``-dense.  Measured with
        :func:`density_probe` when omitted.
    close : bool
        Append a return segment to ``x_1`` at time ``b_k + M`` so that
        ``T^l z`` is near ``z`` with ``l = b_k + M - a_1``; needed by
        :func:`quasiperiodize`.
    """
    if M is None:
        M = density_probe(sys, eps)
        if M is None:
            raise InfeasibleShadowing(
                "unstable disks never become eps-dense: the unstable lamination is not minimal at this scale"
            )
    gaps = spec.gaps
    if any(g < M for g in gaps):
        raise InfeasibleShadowing(f"gap {min(gaps)} below the required M={M}")
    segs = list(spec.segments)
    a1 = segs[0][1][0]
    targets = [(to_fractions(x), a, b) for x, (a, b) in segs]
    if close:
        end = segs[-1][1][1] + M
        targets.append((targets[0][0], end, end))
    u = list(targets[0][0])
    e_u = [Fraction(float(c)) for c in sys.splitting.unstable[:, 0]]
    reaches = {}
    for idx in range(1, len(targets)):
        x_next, a_next, _ = targets[idx]
        gap = a_next - targets[idx - 1][2]
        q = exact_orbit(sys, u, a_next - a1)[-1]
        delta = np.array([float(v) for v in _centered([qi - xi for qi, xi in zip(q, x_next)])])
        # a correction of length (eps/2) lambda_u^m at a_next shrinks below eps/2 across a gap >= m
        m = min(gap, M)
        if m not in reaches:
            reaches[m] = UnstableReach(sys, eps / 2 * sys.lambda_u**m)
        found = reaches[m].find(delta, eps / 2)
        if found is None:
            raise InfeasibleShadowing(f"no admissible unstable correction for segment {idx} (gap {gap})")
        _, v = found
        back = Fraction(v * sys.lambda_u ** -(a_next - a1))
        u = [(ui + back * ei) % 1 for ui, ei in zip(u, e_u)]
    # z is the point at time 0; segments are indexed from a_1
    z_exact = u if a1 == 0 else _pull_back(sys, u, a1)
    res = ShadowResult(np.array([float(v) for v in z_exact]), z_exact, 0.0, meta={"M": M, "a1": a1})
    res.achieved_eps = verify_shadowing(sys, spec, z_exact)
    if close:
        res.meta["return_time"] = targets[-1][1] - a1
    return res


def _pull_back(sys, u, k):
    rows = _rows(sys.inverse)
    cur = list(u)
    for _ in range(k):
        cur = [v % 1 for v in _matvec(rows, cur)]
    return cur


def verify_shadowing(sys, spec, z_exact, start=0):
    """``max_i max_{j in I_i} d(T^j z, T^{j - a_i} x_i)`` in exact arithmetic."""
    last = max(b for _, (_, b) in spec.segments)
    orb = exact_orbit(sys, z_exact, last - start)
    worst = 0.0
    for x, (a, b) in spec.segments:
        xo = exact_orbit(sys, to_fractions(x), b - a)
        for j in range(a, b + 1):
            worst = max(worst, exact_dist(orb[j - start], xo[j - a]))
    return worst


def _rational_projectors(sys):
    rc = sys.rational_center
    if rc is None:
        return None
    return rc["P_c"]


def quasiperiodize(sys, z, n, eps=None):
    """Close a near-return ``T^n z ~ z`` into an exact center return.

    Writes ``r = T^n z - z`` (shortest lift) as ``r_cs + r_u``-style
    components, solves ``(M^n - I) e = -r_su`` with ``e`` in ``E^s + E^u``
    and returns ``w = z + e``.  Then ``T^n w - w = r_c``: a pure center
    displacement of length ``|r_c|``, so ``w`` is ``(n, |r_c|)``-quasiperiodic.
    With zero center ``w`` is an exact periodic point.  When the center is a
    rational subspace the solve is exact in rational arithmetic; otherwise it
    falls back to floating point.
    """
    z_exact = to_fractions(z) if not isinstance(z, list) else z
    if eps is not None:
        back = exact_orbit(sys, z_exact, n)[-1]
        if exact_dist(back, z_exact) > eps + 1e-12:
            raise ValueError("T^n z is not within eps of z")
    q = exact_orbit(sys, z_exact, n)[-1]
    r = _centered([qi - zi for qi, zi in zip(q, z_exact)])
    p_c = _rational_projectors(sys)
    a = sys.matrix_power(n) - sp.eye(sys.d)
    if p_c is not None:
        r_vec = sp.Matrix([sp.Rational(v.numerator, v.denominator) for v in r])
        r_c = p_c * r_vec
        r_su = r_vec - r_c
        p_su = sp.eye(sys.d) - p_c
        op = a * p_su + p_c
        e = op.LUsolve(-r_su)
        e = p_su * e
        w = [(zi + Fraction(int(sp.fraction(ei)[0]), int(sp.fraction(ei)[1]))) % 1 for zi, ei in zip(z_exact, e)]
        center_len = float(sp.sqrt(sum(v**2 for v in r_c)).evalf(30))
    else:
        rf = np.array([float(v) for v in r])
        s, c, u = sys.components(rf)
        af = np.array(a.tolist(), dtype=float)
        b = sys.basis
        idx = list(range(sys.dim_s)) + list(range(sys.dim_s + sys.dim_c, sys.d))
        bsu = b[:, idx]
        coeff = np.linalg.lstsq(af @ bsu, -(s + u), rcond=None)[0]
        e = bsu @ coeff
        w = [(zi + Fraction(float(ei))) % 1 for zi, ei in zip(z_exact, e)]
        center_len = float(np.linalg.norm(c))
    w_float = np.array([float(v) for v in w])
    ret = exact_orbit(sys, w, n)[-1]
    off = np.array([float(v) for v in _centered([ri - wi for ri, wi in zip(ret, w)])])
    s, c, u = sys.components(off)
    return ShadowResult(
        w_float, w, exact_dist(w, z_exact), period=n,
        center_return=float(np.linalg.norm(c)), transverse_return=float(np.linalg.norm(s + u)),
        meta={"center_displacement": center_len},
    )


def periodic_point_closed_form(sys, z, n, dps=60):
    """High-precision ``(M^n - I)^{-1} k mod 1`` for the lattice vector ``k`` nearest ``(M^n - I) z``."""
    import mpmath as mp

    with mp.workdps(dps):
        a = mp.matrix((sys.matrix_power(n) - sp.eye(sys.d)).tolist())
        zz = mp.matrix([mp.mpf(float(v)) if not isinstance(v, Fraction) else mp.mpf(v.numerator) / v.denominator for v in z])
        k = a * zz
        k = mp.matrix([mp.nint(v) for v in k])
        w = mp.lu_solve(a, k)
        return np.array([float(v - mp.floor(v)) for v in w])
