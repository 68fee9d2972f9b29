"""Integer-part maps, twisted quasimorphisms and the induced cocycles for ``Z^d < R^d``.

The fundamental domain is the unit cube ``[0, 1)^d``, so the integer part
of ``g`` is its componentwise floor and ``x * g = (x + g) mod 1``.  A
quasimorphism ``L: Z^d -> R^N`` twisted by an orthogonal representation
``pi`` induces the cocycle ``S((x, A), g) = A^{-1} L([x + g])`` on
``[0, 1)^d x C`` with ``C`` the closure of ``pi(Z^d)``.
"""

from __future__ import annotations

import ast
import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import sympy

from .quasicocycle import QuasiCocycle

ORTHO_TOL = 1e-9
DEFECT_ATOL = 1e-9
EXHAUSTIVE_PAIRS = 5_000_000


def integer_part(g):
    """Componentwise floor as an integer array, so that ``g - [g]`` lies in ``[0, 1)^d``."""
    return np.floor(np.asarray(g, dtype=float)).astype(np.int64)


def star_action(x, g):
    """``x * g = [x + g]^{-1} (x + g)``, i.e. ``(x + g) mod 1``."""
    y = np.asarray(x, dtype=float) + np.asarray(g, dtype=float)
    return y - np.floor(y)


def rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


class PiQuasimorphism:
    """A map ``L: Z^d -> R^N`` with an orthogonal representation ``pi`` of ``Z^d``.

    ``L`` is vectorized: it maps an ``(M, d)`` integer array to ``(M, N)``.
    ``generators[i]`` is ``pi(e_i)``; the generators must commute.
    """

    def __init__(self, L, generators, d=None, name="L"):
        gens = [np.atleast_2d(np.asarray(g, dtype=float)) for g in generators]
        if not gens:
            raise ValueError("need one generator matrix per lattice direction")
        self.d = len(gens) if d is None else int(d)
        if len(gens) != self.d:
            raise ValueError(f"{len(gens)} generators for a rank-{self.d} lattice")
        self.N = gens[0].shape[0]
        self.generators = gens
        self._L = L
        self.name = name
        self._powers = [dict() for _ in gens]
        self.validate()

    @classmethod
    def trivial(cls, L, d=1, N=1, name="L"):
        return cls(L, [np.eye(N)] * d, d, name)

    @property
    def is_trivial(self):
        return all(np.allclose(g, np.eye(self.N), atol=ORTHO_TOL) for g in self.generators)

    def validate(self):
        eye = np.eye(self.N)
        for i, g in enumerate(self.generators):
            if g.shape != (self.N, self.N):
                raise ValueError(f"generator {i} has shape {g.shape}, expected {(self.N, self.N)}")
            if not np.allclose(g.T @ g, eye, atol=ORTHO_TOL):
                raise ValueError(f"generator {i} is not orthogonal")
            for j, h in enumerate(self.generators[:i]):
                if not np.allclose(g @ h, h @ g, atol=ORTHO_TOL):
                    raise ValueError(f"generators {j} and {i} do not commute")

    def L(self, a):
        a = np.atleast_2d(np.asarray(a, dtype=np.int64))
        out = np.asarray(self._L(a), dtype=float)
        return out.reshape(len(a), self.N)

    def _power(self, i, k):
        cache = self._powers[i]
        if k not in cache:
            g = self.generators[i] if k >= 0 else self.generators[i].T
            cache[k] = np.linalg.matrix_power(g, abs(int(k)))
        return cache[k]

    def pi(self, a):
        """``pi(a)`` for an ``(M, d)`` integer array, shape ``(M, N, N)``."""
        a = np.atleast_2d(np.asarray(a, dtype=np.int64))
        out = None
        for i in range(self.d):
            keys, inv = np.unique(a[:, i], return_inverse=True)
            mats = np.stack([self._power(i, int(k)) for k in keys])[inv.reshape(-1)]
            out = mats if out is None else out @ mats
        return out

    def delta(self, a, b):
        """``delta_pi L(a, b) = L(a + b) - pi(a) L(b) - L(a)`` row by row."""
        a = np.atleast_2d(np.asarray(a, dtype=np.int64))
        b = np.atleast_2d(np.asarray(b, dtype=np.int64))
        return self.L(a + b) - np.einsum("mij,mj->mi", self.pi(a), self.L(b)) - self.L(a)

    def C(self, a):
        """``C(a) = pi(a) L(-a) + L(a)``."""
        a = np.atleast_2d(np.asarray(a, dtype=np.int64))
        return np.einsum("mij,mj->mi", self.pi(a), self.L(-a)) + self.L(a)

    def defect(self, box=1000, samples=200_000, seed=0):
        """``sup |delta_pi L(a, b)|`` over ``|a|_inf, |b|_inf <= box``.

        Exhaustive when the box has at most a few million pairs, sampled
        otherwise (a lower bound for the sup).
        """
        side = 2 * box + 1
        if side ** (2 * self.d) <= EXHAUSTIVE_PAIRS:
            axis = np.arange(-box, box + 1)
            pts = np.array(np.meshgrid(*([axis] * self.d), indexing="ij")).reshape(self.d, -1).T
            worst = 0.0
            for a in pts:
                rows = self.delta(np.broadcast_to(a, pts.shape), pts)
                worst = max(worst, float(np.max(np.linalg.norm(rows, axis=1))))
            return worst
        rng = np.random.default_rng(seed)
        a = rng.integers(-box, box + 1, (samples, self.d))
        b = rng.integers(-box, box + 1, (samples, self.d))
        return float(np.max(np.linalg.norm(self.delta(a, b), axis=1)))

    def defect_growth(self, boxes=(10, 100, 1000), samples=200_000, seed=0):
        """Defects over nested boxes; a ratio far above 1 across a decade signals an unbounded defect."""
        return {b: self.defect(b, samples, seed) for b in boxes}

    def C_bound(self, box=1000):
        axis = np.arange(-box, box + 1)
        pts = np.array(np.meshgrid(*([axis] * self.d), indexing="ij")).reshape(self.d, -1).T
        return float(np.max(np.linalg.norm(self.C(pts), axis=1)))

    def closure_samples(self, count=64):
        """Dense sample of the closure of ``pi(Z^d)``: ``pi(k)`` for ``k`` in a small box."""
        per = max(1, int(round(count ** (1.0 / self.d))))
        axis = np.arange(-(per // 2), per - per // 2)
        pts = np.array(np.meshgrid(*([axis] * self.d), indexing="ij")).reshape(self.d, -1).T
        return self.pi(pts)


def twisted_cocycle(generator, w):
    """Exact twisted cocycle ``L(n) = sum_{k<n} pi(k) w`` on ``Z`` (requires ``I - pi(1)`` invertible).

    Closed form ``(I - R)^{-1} (I - R^n) w``, valid for all integers ``n``.
    """
    R = np.asarray(generator, dtype=float)
    w = np.asarray(w, dtype=float)
    inv = np.linalg.inv(np.eye(len(w)) - R)
    holder = {}

    def value(k):
        if k not in holder:
            p = np.linalg.matrix_power(R if k >= 0 else R.T, abs(k))
            holder[k] = inv @ (w - p @ w)
        return holder[k]

    def L(a):
        keys, idx = np.unique(a[:, 0], return_inverse=True)
        return np.stack([value(int(k)) for k in keys])[idx.reshape(-1)]

    return PiQuasimorphism(L, [R], 1, "twisted-cocycle")


# --- quasimorphism fixtures from expressions or tables ---------------------

_FUNCS = {"floor": np.floor, "ceil": np.ceil, "round": np.round, "sqrt": np.sqrt, "abs": np.abs,
          "sin": np.sin, "cos": np.cos}
_CONSTS = {"pi": math.pi, "e": math.e}
_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
          ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd, ast.FloorDiv, ast.Mod)


def compile_expression(text, d=1):
    """Vectorized evaluator for an arithmetic expression in ``n`` (``d = 1``) or ``n1..nd``.

    Only arithmetic, numeric constants, ``pi``, ``e`` and the functions
    ``floor, ceil, round, sqrt, abs, sin, cos`` are accepted.
    """
    tree = ast.parse(text, mode="eval")
    names = {"n"} if d == 1 else {f"n{i + 1}" for i in range(d)}
    for node in ast.walk(tree):
        if not isinstance(node, _NODES):
            raise ValueError(f"disallowed syntax {type(node).__name__} in {text!r}")
        if isinstance(node, ast.Name) and node.id not in names | set(_FUNCS) | set(_CONSTS):
            raise ValueError(f"unknown name {node.id!r} in {text!r}")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS):
            raise ValueError(f"disallowed call in {text!r}")
    code = compile(tree, "<quasimorphism>", "eval")

    def evaluate(a):
        a = np.asarray(a, dtype=np.int64)
        env = dict(_FUNCS, **_CONSTS)
        if d == 1:
            env["n"] = a[:, 0].astype(float)
        else:
            env.update({f"n{i + 1}": a[:, i].astype(float) for i in range(d)})
        val = eval(code, {"__builtins__": {}}, env)
        return np.broadcast_to(np.asarray(val, dtype=float), (len(a),))

    return evaluate


def expression_quasimorphism(exprs, d=1, generators=None, name=None):
    """``PiQuasimorphism`` whose components are expression strings (see :func:`compile_expression`)."""
    if isinstance(exprs, str):
        exprs = [e.strip() for e in exprs.split(";") if e.strip()]
    parts = [compile_expression(e, d) for e in exprs]

    def L(a):
        return np.stack([p(a) for p in parts], axis=1)

    gens = generators if generators is not None else [np.eye(len(parts))] * d
    return PiQuasimorphism(L, gens, d, name or "; ".join(exprs))


def table_quasimorphism(path, d=1, generators=None):
    """Quasimorphism read from a CSV of rows ``k1..kd, v1..vN``; lookups outside the table raise ``KeyError``."""
    table = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            table[tuple(int(v) for v in row[:d])] = [float(v) for v in row[d:]]
    if not table:
        raise ValueError(f"{path}: empty table")
    N = len(next(iter(table.values())))

    def L(a):
        return np.array([table[tuple(int(v) for v in row)] for row in np.asarray(a)])

    return PiQuasimorphism(L, generators or [np.eye(N)] * d, d, str(path))


# --- coboundary operator ---------------------------------------------------

def coboundary(f, pi, n):
    """``d^n f`` for ``f: (Z^d)^{n-1} -> R^N`` (single points, tuples of integer vectors).

    ``(d f)(x_1..x_n) = pi(x_1) f(x_2..x_n) + sum_{i<n} (-1)^i f(.., x_i + x_{i+1}, ..)
    + (-1)^n f(x_1..x_{n-1})``.  ``pi`` maps an integer vector to an ``N x N`` matrix.
    """
    if n < 1:
        raise ValueError("n must be >= 1")

    def df(*xs):
        if len(xs) != n:
            raise TypeError(f"expected {n} arguments, got {len(xs)}")
        xs = [np.asarray(x, dtype=np.int64) for x in xs]
        total = np.asarray(pi(xs[0])) @ np.asarray(f(*xs[1:]), dtype=float)
        for i in range(1, n):
            merged = xs[: i - 1] + [xs[i - 1] + xs[i]] + xs[i + 1:]
            total = total + (-1) ** i * np.asarray(f(*merged), dtype=float)
        return total + (-1) ** n * np.asarray(f(*xs[:-1]), dtype=float)

    return df


def pi_callable(qm):
    return lambda a: qm.pi(np.atleast_2d(a))[0]


def L_callable(qm):
    return lambda a: qm.L(np.atleast_2d(a))[0]


# --- the induced cocycle ---------------------------------------------------

@dataclass
class BridgeBound:
    K1: float
    K2: float
    box: int

    @property
    def K(self):
        return self.K1 + self.K2


@dataclass
class BridgeDefectReport:
    measured: float
    bound: BridgeBound
    samples: int
    decomposition_residual: float
    passed: bool
    meta: dict = field(default_factory=dict)


class BridgeCocycle:
    """``S((x, A), g) = A^{-1} L([x + g])`` on ``[0, 1)^d x C``.

    The translation by ``a`` acts by ``T(x, A) = (x * a, pi([x + a])^{-1} A)``,
    and ``S_n(x, A) = ell(S((x, A), n a))`` is the induced quasicocycle.
    """

    def __init__(self, qm, ell=None):
        self.qm = qm
        self.ell = None if ell is None else np.asarray(ell, dtype=float).reshape(-1)
        if self.ell is not None and len(self.ell) != qm.N:
            raise ValueError(f"functional has length {len(self.ell)}, expected {qm.N}")

    def S(self, x, A, g):
        """Vector value ``A^{-1} L([x + g])`` for batches ``x (M, d)``, ``A (M, N, N)``, ``g (M, d)``."""
        h = integer_part(np.asarray(x) + np.asarray(g))
        return np.einsum("mji,mj->mi", A, self.qm.L(h))

    def step(self, x, A, g):
        """``(x, A) . g = (x * g, pi([x + g])^{-1} A)``."""
        h = integer_part(np.asarray(x) + np.asarray(g))
        return star_action(x, g), np.einsum("mji,mjk->mik", self.qm.pi(h), A)

    def along(self, a, x, A, n):
        """``S_n(x, A)`` along the translation ``a``; scalar when a functional is set."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        g = np.broadcast_to(n * np.asarray(a, dtype=float), x.shape)
        v = self.S(x, A, g)
        return v @ self.ell if self.ell is not None else v

    def bound(self, box=1000):
        """``K = K1 + K2`` with ``K1 = sup |delta_pi L|`` and ``K2 = sup |C(a)|`` over the box.

        The defect of the induced cocycle at ``g1, g2`` equals
        ``-A^{-1} (pi(h1) delta_pi L(-h1, h12) + C(h1))`` with ``h1 = [x + g1]``
        and ``h12 = [x + g1 + g2]``, so ``K`` bounds it whenever the integer
        parts stay in the box.
        """
        scale = 1.0 if self.ell is None else float(np.linalg.norm(self.ell))
        return BridgeBound(scale * self.qm.defect(box), scale * self.qm.C_bound(box), box)

    def defect_report(self, a, samples=100_000, box=1000, closure=64, seed=0, bound=None):
        """Measured ``sup |S_{n+m}(p) - S_n(p) - S_m(T^n p)|`` against the assembled ``K``.

        ``n, m`` are drawn with ``(n + m) |a|_inf + 1 <= box`` so the integer
        parts stay within the box on which ``K`` was assembled.  The
        three-term decomposition of the defect is re-evaluated on every
        sample and its residual reported.
        """
        a = np.asarray(a, dtype=float).reshape(-1)
        qm = self.qm
        rng = np.random.default_rng(seed)
        n_max = int((box - 1) // max(np.max(np.abs(a)), 1e-12))
        if n_max < 2:
            raise ValueError("box too small for this translation")
        n_max = min(n_max, 10**6)
        x = rng.random((samples, qm.d))
        zs = qm.closure_samples(closure)
        A = zs[rng.integers(0, len(zs), samples)]
        n = rng.integers(0, n_max + 1, samples)
        m = (rng.random(samples) * (n_max - n + 1)).astype(np.int64)
        g1, g2 = n[:, None] * a, m[:, None] * a
        lhs = self.S(x, A, g1 + g2)
        xn, An = self.step(x, A, g1)
        rhs = self.S(x, A, g1) + self.S(xn, An, g2)
        diff = lhs - rhs
        h1, h12 = integer_part(x + g1), integer_part(x + g1 + g2)
        pred = -np.einsum("mji,mj->mi", A,
                          np.einsum("mij,mj->mi", qm.pi(h1), qm.delta(-h1, h12)) + qm.C(h1))
        resid = float(np.max(np.abs(diff - pred)))
        if self.ell is not None:
            diff = diff @ self.ell
            measured = float(np.max(np.abs(diff)))
        else:
            measured = float(np.max(np.linalg.norm(diff, axis=1)))
        bound = bound or self.bound(box)
        return BridgeDefectReport(measured, bound, samples, resid, measured <= bound.K + DEFECT_ATOL,
                                  {"n_max": n_max, "translation": a.tolist()})

    def as_quasicocycle(self, a):
        """Scalar ``Z``-quasicocycle on ``[0, 1)^d`` along ``a`` (trivial ``pi`` only)."""
        if not self.qm.is_trivial:
            raise ValueError("the Z-cocycle on the cube alone needs a trivial representation")
        ell = self.ell if self.ell is not None else np.eye(self.qm.N)[0]
        a = np.asarray(a, dtype=float)
        L = self.qm.L

        def evaluate(pts, n):
            return L(integer_part(pts + n * a)) @ ell

        return QuasiCocycle(evaluate, f"bridge({self.qm.name})", meta={"translation": a.tolist()})


class TranslationSystem:
    """``x -> (x + a) mod 1`` on ``[0, 1)^d`` (the base of the induced cocycle)."""

    def __init__(self, a):
        self.a = np.asarray(a, dtype=float).reshape(-1)
        self.d = len(self.a)

    def apply(self, x, k=1):
        return star_action(x, k * self.a)


# --- homogenization and Haar averages --------------------------------------

@dataclass
class HomogeneousEstimate:
    values: dict
    n_limit: int
    converged: bool
    additivity_error: float
    defect: float

    def __call__(self, gamma):
        return self.values[int(gamma)]


def homogenize(qm, probes=range(-10, 11), n_limit=10**7, defect_box=1000):
    """``L_bar(gamma) = lim_k L(k gamma) / k`` evaluated at ``k = n_limit``.

    Requires ``d = N = 1`` and trivial ``pi``.  The result is flagged as not
    converged when the estimates at ``n_limit / 2`` and ``n_limit`` differ by
    more than ``2 |delta L| / n_limit``.
    """
    if qm.d != 1 or qm.N != 1 or not qm.is_trivial:
        raise ValueError("homogenization is implemented for real quasimorphisms on Z")
    dL = qm.defect(defect_box)
    probes = np.asarray(list(probes), dtype=np.int64)
    half = n_limit // 2
    full = qm.L((n_limit * probes)[:, None])[:, 0] / n_limit
    coarse = qm.L((half * probes)[:, None])[:, 0] / half
    converged = bool(np.all(np.abs(full - coarse) <= 2 * max(dL, 1e-12) / half + 1e-12))
    values = {int(p): float(v) for p, v in zip(probes, full)}
    base = values.get(1, None)
    add = max((abs(values[p] - p * base) for p in values), default=0.0) if base is not None else float("nan")
    return HomogeneousEstimate(values, n_limit, converged, add, dL)


@dataclass
class HaarAverage:
    H: np.ndarray
    per_unit: np.ndarray
    n_limit: int
    additivity_error: float
    converged: bool


def _cube_average(qm, c, method="exact", nodes=10_000):
    """``int_{[0,1)^d} L([x + c]) dx``.

    ``exact`` sums ``L`` over the ``2^d`` corner cells weighted by products of
    fractional parts (the integrand is piecewise constant); ``quadrature``
    uses a midpoint grid of about ``nodes`` points.
    """
    c = np.asarray(c, dtype=float)
    if method == "exact":
        base = np.floor(c).astype(np.int64)
        frac = c - base
        corners = np.array(np.meshgrid(*([[0, 1]] * qm.d), indexing="ij")).reshape(qm.d, -1).T
        w = np.prod(np.where(corners == 1, frac, 1 - frac), axis=1)
        return w @ qm.L(base + corners)
    per = max(1, int(round(nodes ** (1.0 / qm.d))))
    axis = (np.arange(per) + 0.5) / per
    pts = np.array(np.meshgrid(*([axis] * qm.d), indexing="ij")).reshape(qm.d, -1).T
    return qm.L(integer_part(pts + c)).mean(axis=0)


def haar_average_H(qm, a, n_limit=1000, method="exact", nodes=10_000):
    """``H(a) = lim_n (1/n) int L([x + n a]) dx`` at ``n = n_limit``.

    Needs a trivial representation (or an already split fixed component).
    Additivity ``H(k a) = k H(a)`` is checked for ``k = 1..5`` using the
    same finite-``n`` estimate.
    """
    if not qm.is_trivial:
        raise ValueError("H is defined for trivial pi; split off the fixed space first")
    a = np.asarray(a, dtype=float).reshape(-1)
    est = _cube_average(qm, n_limit * a, method, nodes) / n_limit
    half = _cube_average(qm, (n_limit // 2) * a, method, nodes) / (n_limit // 2)
    multiples = [_cube_average(qm, n_limit * k * a, method, nodes) / n_limit for k in range(1, 6)]
    add = max(float(np.max(np.abs(mk - k * est))) for k, mk in zip(range(1, 6), multiples))
    scale = max(1.0, float(np.max(np.abs(est))))
    converged = bool(np.max(np.abs(est - half)) <= 1e-2 * scale)
    return HaarAverage(est, est, n_limit, add, converged)


def boundedness_gap(qm, H, box=1000, samples=20_000, seed=0):
    """``sup |S(x, g) - H(g)|`` over random ``x`` in the cube and ``g`` with ``|g|_inf <= box``.

    ``H`` is the linear map ``g -> H @ g`` (an ``N x d`` array).
    """
    if not qm.is_trivial:
        raise ValueError("the boundedness comparison is for trivial pi")
    rng = np.random.default_rng(seed)
    x = rng.random((samples, qm.d))
    g = rng.uniform(-box, box, (samples, qm.d))
    vals = qm.L(integer_part(x + g)) - g @ np.atleast_2d(H).T
    return float(np.max(np.linalg.norm(vals, axis=1)))


def closure_drift(qm, box=200, closure=64):
    """``sup |(z^{-1} - 1) L(h)|`` over sampled ``z`` in the closure of ``pi(Z^d)`` and ``|h|_inf <= box``."""
    axis = np.arange(-box, box + 1)
    pts = np.array(np.meshgrid(*([axis] * qm.d), indexing="ij")).reshape(qm.d, -1).T
    vals = qm.L(pts)
    worst = 0.0
    for z in qm.closure_samples(closure):
        worst = max(worst, float(np.max(np.linalg.norm(vals @ z - vals, axis=1))))
    return worst


# --- fixed space splitting --------------------------------------------------

@dataclass
class FixedSplit:
    E: np.ndarray
    F: np.ndarray
    verified: bool


def split_fixed_space(qm_or_generators, tol=1e-9):
    """``R^N = E + F`` with ``E`` the common fixed space of the generators and ``F = E^perp``.

    ``verified`` records that no nonzero vector of ``F`` is fixed by every generator.
    """
    gens = qm_or_generators.generators if isinstance(qm_or_generators, PiQuasimorphism) else \
        [np.atleast_2d(np.asarray(g, dtype=float)) for g in qm_or_generators]
    N = gens[0].shape[0]
    stack = np.vstack([g - np.eye(N) for g in gens])
    _, s, vt = np.linalg.svd(stack)
    s = np.concatenate([s, np.zeros(N - len(s))])
    null = s <= tol * max(1.0, s.max(initial=0.0))
    E, F = vt[null].T, vt[~null].T
    if F.shape[1]:
        sf = np.linalg.svd(stack @ F, compute_uv=False)
        verified = bool(sf.min() > tol)
    else:
        verified = True
    return FixedSplit(E.reshape(N, -1), F.reshape(N, -1), verified)


# --- root systems and the reflection span ----------------------------------

class RootSystem:
    """Roots as rational coordinate vectors with an inner product given by ``gram``.

    Validation checks closure under negation and that every reflection
    permutes the roots; ``spans`` records whether the roots span the space
    (equivalently the kernels of the roots meet only in 0).
    """

    def __init__(self, name, roots, gram=None):
        self.name = name
        self.roots = [sympy.Matrix([sympy.Rational(v) for v in r]) for r in roots]
        self.r = len(self.roots[0])
        self.gram = sympy.eye(self.r) if gram is None else sympy.Matrix(gram).applyfunc(sympy.Rational)
        if self.gram != self.gram.T or any(ev <= 0 for ev in self.gram.eigenvals()):
            raise ValueError(f"{name}: inner product must be symmetric positive definite")
        self.validate()

    def inner(self, a, b):
        return (a.T * self.gram * b)[0, 0]

    def reflect(self, alpha, a):
        return a - 2 * self.inner(a, alpha) / self.inner(alpha, alpha) * alpha

    def validate(self):
        keys = {tuple(r) for r in self.roots}
        for r in self.roots:
            if tuple(-r) not in keys:
                raise ValueError(f"{self.name}: root {tuple(r)} has no negative")
            if all(v == 0 for v in r):
                raise ValueError(f"{self.name}: zero root")
            for s in self.roots:
                if tuple(self.reflect(r, s)) not in keys:
                    raise ValueError(f"{self.name}: reflection in {tuple(r)} does not preserve the roots")

    @property
    def spans(self):
        return sympy.Matrix.hstack(*self.roots).rank() == self.r

    @classmethod
    def from_positive(cls, name, positive, gram=None):
        pos = [list(p) for p in positive]
        return cls(name, pos + [[-v for v in p] for p in pos], gram)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            data = json.load(fh)
        if "positive_roots" in data:
            return cls.from_positive(data.get("name", str(path)), data["positive_roots"], data.get("gram"))
        return cls(data.get("name", str(path)), data["roots"], data.get("gram"))


def builtin_root_system(name):
    """``A2``, ``B2``, ``G2`` in simple-root coordinates, or ``single`` (one pair ``+-e_1`` in ``R^2``)."""
    key = name.upper()
    if key == "A2":
        return RootSystem.from_positive("A2", [[1, 0], [0, 1], [1, 1]], [[2, -1], [-1, 2]])
    if key == "B2":
        return RootSystem.from_positive("B2", [[1, 0], [0, 1], [1, 1], [1, 2]], [[2, -1], [-1, 1]])
    if key == "G2":
        return RootSystem.from_positive("G2", [[1, 0], [0, 1], [1, 1], [2, 1], [3, 1], [3, 2]],
                                        [[2, -3], [-3, 6]])
    if key == "SINGLE":
        return RootSystem.from_positive("single", [[1, 0]])
    raise KeyError(f"unknown root system {name!r}")


@dataclass
class WeylReport:
    name: str
    rank: int
    ambient: int
    spans: bool
    passed: bool
    vectors: list


def weyl_kernel_check(rs):
    """Exact rank of ``{a - s_alpha(a)}`` over roots ``alpha`` and a basis ``a``.

    Full rank means a linear functional vanishing on all these differences is zero.
    """
    vecs = []
    for alpha in rs.roots:
        for i in range(rs.r):
            a = sympy.zeros(rs.r, 1)
            a[i] = 1
            vecs.append(a - rs.reflect(alpha, a))
    rank = sympy.Matrix.hstack(*vecs).rank()
    as_lists = [[str(Fraction(str(v))) for v in vec] for vec in vecs]
    return WeylReport(rs.name, int(rank), rs.r, rs.spans, rank == rs.r, as_lists)
