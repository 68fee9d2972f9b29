"""Separated nets on grids, exact quasiperiodic points and quasiperiodic families."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numba
import numpy as np
import sympy as sp
from scipy.spatial import cKDTree
from sympy.matrices.normalforms import smith_normal_decomp

from .dynsys import LinearCenterIsometry, dist_n, reduce, torus_diff

SEP_MULT = 3
PLAQUE_MULT = 6
QP_TOL = 1e-9


@dataclass
class SeparatedNet:
    """Finite ``(n, eps)``-separated set.

    ``resolution`` is the grid denominator ``r`` (points are ``index / r``);
    ``maximal`` records that every grid point lies within ``eps`` of the net
    in ``d_n``.
    """

    points: np.ndarray
    n: int
    eps: float
    kind: str = "separated"
    resolution: int | None = None
    indices: np.ndarray | None = None
    maximal: bool = False

    def __len__(self):
        return len(self.points)


def _centered_mod(a, r):
    return (a + r // 2) % r - r // 2


def bowen_offsets(sys: LinearCenterIsometry, n, eps, r):
    """Integer offsets ``a`` with ``d_n(x, x + a/r) <= eps`` for grid points ``x``.

    On the subgroup ``(1/r) Z^d`` the map acts as ``a -> M a mod r``, so the
    Bowen distance between grid points depends only on their difference and
    is computed here in exact integer arithmetic.
    """
    rad = int(math.floor(eps * r))
    axis = np.arange(-rad, rad + 1, dtype=np.int64)
    cand = np.array(np.meshgrid(*([axis] * sys.d), indexing="ij")).reshape(sys.d, -1).T
    cand = cand[np.sum(cand.astype(float) ** 2, axis=1) <= (eps * r) ** 2]
    cur = cand.copy()
    keep = np.ones(len(cand), dtype=bool)
    for _ in range(1, n):
        cur = (cur @ sys.matrix.T) % r
        c = _centered_mod(cur, r).astype(float)
        keep &= np.sum(c**2, axis=1) <= (eps * r) ** 2
        cur = cur[keep]
        cand = cand[keep]
        keep = np.ones(len(cand), dtype=bool)
    return cand


def auto_resolution(sys, n, eps, target=40, max_points=2**29, search=0.03):
    """Grid denominator ``r > 4/eps`` whose Bowen-ball offset set has about ``target`` elements.

    A scaling estimate is refined by scanning ``r`` within ``search`` (relative)
    of it and keeping the value whose offset count is closest to ``target``.
    """
    floor_r = int(math.ceil(4 / eps)) + 1
    r = max(floor_r, 8)
    for _ in range(6):
        size = len(bowen_offsets(sys, n, eps, r))
        new = max(int(math.ceil(r * (target / max(size, 1)) ** (1 / sys.d))), floor_r)
        if abs(new - r) <= max(1, r // 100):
            r = new
            break
        r = new
    span = max(1, int(search * r))
    cands = range(max(floor_r, r - span), r + span + 1)
    r = min(cands, key=lambda q: (abs(len(bowen_offsets(sys, n, eps, q)) - target), q))
    if r**sys.d > max_points:
        raise ValueError(f"grid with r={r} exceeds {max_points} points; lower n or raise eps")
    return r


@numba.njit(cache=True)
def _permute(i, bits, salt):
    """Bijection of ``[0, 2^bits)``: odd multiplications and xor-shifts, seeded by ``salt``."""
    mask = (np.uint64(1) << np.uint64(bits)) - np.uint64(1)
    half = np.uint64(max(bits // 2, 1))
    x = (np.uint64(i) ^ np.uint64(salt)) & mask
    for c in (np.uint64(0x1E3779B97F4A7C15), np.uint64(0x3F58476D1CE4E5B9), np.uint64(0x14D049BB133111EB)):
        x = (x * c) & mask
        x ^= x >> half
    return np.int64(x)


@numba.njit(cache=True)
def _try_insert(occupied, coord, r, d, offsets, strides):
    for t in range(offsets.shape[0]):
        flat = 0
        for j in range(d):
            flat += ((coord[j] + offsets[t, j]) % r) * strides[j]
        if occupied[flat]:
            return
    flat = 0
    for j in range(d):
        flat += coord[j] * strides[j]
    occupied[flat] = True


@numba.njit(cache=True)
def _greedy_scan(r, d, offsets, strides, shuffled, salt):
    """Greedy insertion over the grid in lexicographic or seeded pseudo-random order."""
    total = r**d
    occupied = np.zeros(total, dtype=np.bool_)
    coord = np.zeros(d, dtype=np.int64)
    bits = 1
    while (1 << bits) < total:
        bits += 1
    span = (1 << bits) if shuffled else total
    for step in range(span):
        if shuffled:
            # cycle walking restricts the bijection of [0, 2^bits) to [0, total)
            idx = _permute(step, bits, salt)
            if idx >= total:
                continue
        else:
            idx = step
        rem = idx
        for j in range(d - 1, -1, -1):
            coord[j] = rem % r
            rem //= r
        _try_insert(occupied, coord, r, d, offsets, strides)
    return occupied


SCAN_ORDER = {2: "shuffled"}
OFFSET_TARGET = {2: 80}


def greedy_separated(sys, n, eps, grid_resolution=None, order=None, seed=0, target=None):
    """Maximal ``(n, eps)``-separated subset of the grid ``(1/r) Z^d``.

    Grid points are scanned in a seeded pseudo-random order (``"shuffled"``,
    the default for ``d = 2``) or lexicographically (``"lex"``, the default
    otherwise, where the random scan is cache-bound) and inserted when no
    previously accepted point is within ``eps`` in ``d_n``.  The result is
    maximal under inclusion on the grid, hence also ``(n, eps)``-spanning
    up to the grid spacing.

    Parameters
    ----------
    sys : LinearCenterIsometry
    n : int
        Window length (``n >= 1``).
    eps : float
    grid_resolution : int, optional
        Grid denominator ``r``; chosen by :func:`auto_resolution` when omitted.
        Must satisfy ``1/r < eps/4``.
    order : {"shuffled", "lex"}, optional
    seed : int
        Seed of the shuffled scan.
    target : int, optional
        Bowen-ball offset count used to pick ``r`` (80 for ``d = 2``, 40 otherwise).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if eps <= 0:
        raise ValueError("eps must be positive")
    order = order or SCAN_ORDER.get(sys.d, "lex")
    target = target or OFFSET_TARGET.get(sys.d, 40)
    r = auto_resolution(sys, n, eps, target) if grid_resolution is None else int(grid_resolution)
    if 1.0 / r >= eps / 4:
        raise ValueError(f"grid spacing 1/{r} is not below eps/4 = {eps / 4}")
    offsets = bowen_offsets(sys, n, eps, r)
    strides = np.array([r ** (sys.d - 1 - j) for j in range(sys.d)], dtype=np.int64)
    if order not in ("lex", "shuffled"):
        raise ValueError(f"unknown scan order {order!r}")
    salt = int(np.random.default_rng(seed).integers(0, 2**31))
    occupied = _greedy_scan(r, sys.d, offsets.astype(np.int64), strides, order == "shuffled", salt)
    idx = np.flatnonzero(occupied)
    coords = np.empty((len(idx), sys.d), dtype=np.int64)
    rem = idx.copy()
    for j in range(sys.d - 1, -1, -1):
        coords[:, j] = rem % r
        rem //= r
    return SeparatedNet(coords / r, n, float(eps), "separated", r, idx, True)


def _orbit_features(sys, points, n):
    orb = sys.orbit(points, n)
    return np.concatenate([orb[0], orb[-1]], axis=1), orb


def close_pairs(sys, points, n, eps):
    """All index pairs ``i < j`` with ``d_n(points[i], points[j]) <= eps``."""
    feats, orb = _orbit_features(sys, points, n)
    tree = cKDTree(feats, boxsize=1.0)
    cand = tree.query_pairs(eps, p=np.inf, output_type="ndarray")
    if len(cand) == 0:
        return cand
    dist = np.max(np.linalg.norm(torus_diff(orb[:, cand[:, 0]], orb[:, cand[:, 1]]), axis=-1), axis=0)
    return cand[dist <= eps]


def validate_separated(sys, net):
    """True when every pair of net points is more than ``eps`` apart in ``d_n``."""
    return len(close_pairs(sys, net.points, net.n, net.eps)) == 0


def spanning_defect(sys, net, probes):
    """Fraction of probe points not within ``eps`` (in ``d_n``) of any net point."""
    feats, orb = _orbit_features(sys, net.points, net.n)
    tree = cKDTree(feats, boxsize=1.0)
    pf, porb = _orbit_features(sys, np.atleast_2d(probes), net.n)
    hits = tree.query_ball_point(pf, net.eps, p=np.inf)
    missed = 0
    for i, cand in enumerate(hits):
        if not cand:
            missed += 1
            continue
        cand = np.asarray(cand)
        dist = np.max(np.linalg.norm(torus_diff(orb[:, cand], porb[:, i : i + 1]), axis=-1), axis=0)
        missed += int(dist.min() > net.eps)
    return missed / len(pf)


def brute_force_separated(sys, n, eps, r):
    """Reference greedy net via pairwise ``dist_n`` on the grid (small grids only)."""
    grid = np.array(list(itertools.product(range(r), repeat=sys.d))) / r
    chosen = []
    for g in grid:
        if not chosen or np.all(dist_n(sys, np.array(chosen), np.broadcast_to(g, (len(chosen), sys.d)), n) > eps):
            chosen.append(g)
    return np.array(chosen)


# -- quasiperiodic points ------------------------------------------------------


@dataclass
class QuasiperiodicPoints:
    """Exact rational points ``x = numerators / denominator`` with ``T^n x - x`` in ``E^c + Z^d``.

    ``lattice`` holds ``k = (M^n - I) x_lift`` (integer for exact solutions).
    ``drift`` is the center displacement ``T^n x - x`` reduced to the shortest
    lift; it is zero for points found by the exact lattice solve.
    """

    n: int
    numerators: np.ndarray
    denominator: int
    lattice: np.ndarray
    drift: np.ndarray

    @property
    def points(self):
        return self.numerators / self.denominator

    def __len__(self):
        return len(self.numerators)


def smith_data(sys, n):
    """Smith decomposition ``S = U (M^n - I) V`` as integer numpy arrays plus the diagonal."""
    a = sys.matrix_power(n) - sp.eye(sys.d)
    s, u, v = smith_normal_decomp(a, domain=sp.ZZ)
    if u * a * v != s:
        raise ArithmeticError("Smith decomposition failed to verify")
    diag = [int(s[i, i]) for i in range(sys.d)]
    return np.array(a.tolist(), dtype=object), diag, np.array(u.tolist(), dtype=object), np.array(v.tolist(), dtype=object)


def quasiperiodic_points(sys, n, delta=None, max_points=10**7):
    """All solutions of ``(M^n - I) x in Z^d`` with the kernel coordinate fixed to 0.

    Via the Smith form ``S = U A V`` of ``A = M^n - I``, solutions are
    ``x = V y`` with ``y_i = a_i / s_i`` for each nonzero diagonal entry and
    ``y_i = 0`` along directions where ``s_i = 0``; the latter span the
    kernel of ``A``, which lies in the center.  Each point represents one
    solution family (a whole center leaf when the kernel is nontrivial) and
    satisfies ``T^n x = x`` exactly, so it is ``(n, delta)``-quasiperiodic for
    every ``delta``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    a, diag, _, v = smith_data(sys, n)
    nonzero = [i for i, s in enumerate(diag) if s != 0]
    zero = [i for i, s in enumerate(diag) if s == 0]
    if len(zero) > sys.dim_c:
        raise ArithmeticError("M^n - I is singular on E^s + E^u; a center eigenvalue was missed")
    count = math.prod(abs(diag[i]) for i in nonzero)
    if count > max_points:
        raise ValueError(f"{count} solutions exceed max_points={max_points}")
    den = math.lcm(*[abs(diag[i]) for i in nonzero]) if nonzero else 1
    grids = [np.arange(abs(diag[i]), dtype=np.int64) * (den // abs(diag[i])) for i in nonzero]
    ys = np.zeros((count, sys.d), dtype=np.int64)
    if nonzero:
        mesh = np.meshgrid(*grids, indexing="ij")
        for j, i in enumerate(nonzero):
            ys[:, i] = mesh[j].ravel()
    vv = v.astype(np.int64)
    if np.abs(vv).max() * den * sys.d >= 2**62:
        raise OverflowError("lattice arithmetic exceeds int64; lower n")
    nums = (ys @ vv.T) % den
    big = max(abs(int(v)) for v in a.ravel()) * den * sys.d >= 2**62
    prod = nums.astype(object) @ a.T if big else nums @ a.astype(np.int64).T
    if np.any(prod % den != 0):
        raise ArithmeticError("lattice solve is not exact")
    lattice = prod // den
    return QuasiperiodicPoints(n, nums, den, lattice, np.zeros((count, sys.d)))


def quasiperiodic_points_box(sys, n, delta, lattice_bound=None):
    """Reference enumeration through a box of lattice vectors ``k``.

    For every ``k`` with ``|k|_inf <= lattice_bound`` solve ``(M^n - I) x = k``
    on ``E^s + E^u`` (the center coordinate of ``x`` is 0), keep the solution
    when the leftover center displacement is at most ``delta``, and keep one
    point per center leaf.  Expensive: the box grows like ``lambda_u^{nd}``.
    """
    if lattice_bound is None:
        lattice_bound = int(math.floor(sys.lambda_u**n + 1))
    a = sys.matrix_power(n).evalf() - sp.eye(sys.d)
    af = np.array(a.tolist(), dtype=float)
    b = sys.basis
    s_idx = list(range(sys.dim_s)) + list(range(sys.dim_s + sys.dim_c, sys.d))
    bsu = b[:, s_idx]
    restricted = np.linalg.lstsq(bsu, af @ bsu, rcond=None)[0]
    if np.linalg.cond(restricted) > 1e12:
        raise ArithmeticError("M^n - I is numerically singular on E^s + E^u")
    axis = np.arange(-lattice_bound, lattice_bound + 1)
    ks = np.array(np.meshgrid(*([axis] * sys.d), indexing="ij")).reshape(sys.d, -1).T
    _, kc, _ = sys.eigcoords(ks)
    kc_vec = kc @ sys.splitting.center.T if sys.dim_c else np.zeros_like(ks, dtype=float)
    drift = -kc_vec
    ok = np.linalg.norm(drift, axis=1) <= delta + QP_TOL
    ks, drift = ks[ok], drift[ok]
    ksu = ks - (kc_vec[ok] if sys.dim_c else 0)
    coeff = np.linalg.solve(restricted, np.linalg.lstsq(bsu, ksu.T, rcond=None)[0]).T
    x = reduce(coeff @ bsu.T)
    keys = leaf_keys(sys, x)
    _, first = np.unique(keys, axis=0, return_index=True)
    first.sort()
    return x[first], ks[first], drift[first]


def leaf_keys(sys, x, digits=7):
    """Rounded coordinates transverse to the center; equal keys mean a common center leaf."""
    rc = sys.rational_center
    if sys.dim_c == 0:
        w = np.eye(sys.d)
    elif rc is not None:
        w = rc["annihilator"].astype(float)
    else:
        raise ValueError("leaf keys need a rational center")
    key = np.mod(np.asarray(x) @ w.T, 1.0)
    key = np.round(key, digits) % 1.0
    return key


# -- quasiperiodic families ----------------------------------------------------


@dataclass
class QuasiperiodicFamily:
    delta: float
    members: dict = field(default_factory=dict)
    sep_mult: float = SEP_MULT

    def counts(self):
        return {n: len(pts) for n, pts in sorted(self.members.items())}


def conflict_pairs(sys, qp, delta, sep_mult=SEP_MULT):
    """Pairs ``(i, j)`` such that some ``T^k x_i`` (``k < n``) lies in ``B^c_{sep_mult*delta}(x_j)``.

    Points are bucketed by their leaf key (the annihilator of ``E^c`` applied
    to the exact numerators), so only points on a common center leaf are
    compared.
    """
    n, den, nums = qp.n, qp.denominator, qp.numerators
    rc = sys.rational_center
    if rc is None:
        raise ValueError("families with an irrational center are not supported")
    w = rc["annihilator"]
    vc = sys.splitting.center
    reach = sep_mult * delta
    buckets = {}
    for j, key in enumerate(map(tuple, ((nums @ w.T) % den).tolist())):
        buckets.setdefault(key, []).append(j)
    pairs = set()
    cur = nums
    for k in range(n):
        keys = ((cur @ w.T) % den).tolist()
        for i, key in enumerate(map(tuple, keys)):
            for j in buckets.get(key, ()):
                if j == i and k == 0:
                    continue
                off = torus_diff(nums[j] / den, cur[i] / den)
                along = vc.T @ off
                if np.linalg.norm(along) <= reach + QP_TOL and np.linalg.norm(off - vc @ along) < 1e-7:
                    if i != j:
                        pairs.add((min(i, j), max(i, j)))
        cur = (cur @ sys.matrix.T) % den
    return sorted(pairs)


def _select_separated_exact(sys, qp, delta, sep_mult, order="min_degree"):
    """Indices of a maximal conflict-free subset of ``qp``.

    ``order="scan"`` inserts candidates in enumeration order; ``"min_degree"``
    repeatedly keeps the remaining candidate with the fewest remaining
    conflicts, which targets the maximal-cardinality reading of the count.
    """
    n, den = qp.n, qp.denominator
    nums = qp.numerators
    if sys.dim_c == 0:
        # T^k x lands on a kept y only if it equals y, i.e. one point per orbit
        rep = _flat_key(nums, den)
        cur = nums
        for _ in range(1, n):
            cur = (cur @ sys.matrix.T) % den
            rep = np.minimum(rep, _flat_key(cur, den))
        _, first = np.unique(rep, return_index=True)
        return np.sort(first)
    adj = [set() for _ in range(len(nums))]
    for i, j in conflict_pairs(sys, qp, delta, sep_mult):
        adj[i].add(j)
        adj[j].add(i)
    alive = np.ones(len(nums), dtype=bool)
    kept = []
    if order == "scan":
        for i in range(len(nums)):
            if alive[i]:
                kept.append(i)
                alive[list(adj[i])] = False
        return np.asarray(kept, dtype=np.int64)
    if order != "min_degree":
        raise ValueError(f"unknown order {order!r}")
    degree = np.array([len(a) for a in adj])
    while alive.any():
        cand = np.flatnonzero(alive)
        i = int(cand[np.argmin(degree[cand])])
        kept.append(i)
        removed = [i] + [j for j in adj[i] if alive[j]]
        alive[removed] = False
        for r in removed:
            for j in adj[r]:
                degree[j] -= 1
    return np.sort(np.asarray(kept, dtype=np.int64))


def _flat_key(p, den):
    if float(den) ** p.shape[1] < 2.0**62:
        key = np.zeros(len(p), dtype=np.int64)
        for j in range(p.shape[1]):
            key = key * den + p[:, j]
        return key
    key = np.zeros(len(p), dtype=object)
    for j in range(p.shape[1]):
        key = key * den + p[:, j].astype(object)
    return key


def build_quasiperiodic_family(sys, n_range, delta, delta_0=0.1, sep_mult=SEP_MULT, order="min_degree"):
    """Greedy maximal separated subfamilies of the exact quasiperiodic points, one per ``n``."""
    if delta > delta_0:
        raise ValueError(f"delta={delta} exceeds delta_0={delta_0}")
    fam = QuasiperiodicFamily(float(delta), {}, sep_mult)
    for n in n_range:
        qp = quasiperiodic_points(sys, n, delta)
        keep = _select_separated_exact(sys, qp, delta, sep_mult, order)
        if len(keep) == 0:
            raise RuntimeError(f"empty quasiperiodic family at n={n}")
        fam.members[n] = QuasiperiodicPoints(n, qp.numerators[keep], qp.denominator, qp.lattice[keep], qp.drift[keep])
    return fam


def verify_quasiperiodic(sys, points, n, delta):
    """Max center displacement of ``T^n x`` from ``x`` and max transverse residual."""
    x = np.atleast_2d(points)
    off = torus_diff(x, sys.apply(x, n))
    s, c, u = sys.components(off)
    return float(np.linalg.norm(c, axis=-1).max()), float(np.linalg.norm(s + u, axis=-1).max())


def verify_family_separation(sys, pts, n, delta, sep_mult=SEP_MULT):
    """True when no ``T^k x`` lies on the ``sep_mult*delta`` center plaque of another member."""
    orb = sys.orbit(pts, n)
    for k in range(n):
        for j in range(len(pts)):
            dist = sys.center_distance(pts[j], orb[k], tol=1e-7)
            dist[j] = np.inf
            if np.any(dist <= sep_mult * delta):
                return False
    return True


def growth_rate(counts):
    """``log(count)/n`` for each entry of a dict ``{n: count}``."""
    return {n: math.log(c) / n for n, c in counts.items()}
