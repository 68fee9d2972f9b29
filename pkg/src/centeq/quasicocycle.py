"""Quasicocycles over toral maps: Birkhoff sums, defects, Bowen variation, cohomology."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynsys import dist_n, reduce

N_MAX = 24
SAMPLES = 10_000
EPS_0 = 0.05
CHUNK = 1 << 18

TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class TrigPotential:
    """``phi(x) = const + sum_j a_j cos(2 pi k_j.x) + b_j sin(2 pi k_j.x)``."""

    freqs: np.ndarray
    cos: np.ndarray
    sin: np.ndarray
    const: float = 0.0

    def __init__(self, freqs=(), cos=(), sin=(), const=0.0, d=None):
        freqs = np.asarray(freqs, dtype=np.int64)
        if freqs.size == 0:
            freqs = np.zeros((0, d or 2), dtype=np.int64)
        freqs = np.atleast_2d(freqs)
        cos = np.broadcast_to(np.asarray(cos, dtype=float), (len(freqs),)).copy() if len(freqs) else np.zeros(0)
        sin = np.broadcast_to(np.asarray(sin, dtype=float), (len(freqs),)).copy() if len(freqs) else np.zeros(0)
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "cos", cos)
        object.__setattr__(self, "sin", sin)
        object.__setattr__(self, "const", float(const))

    @classmethod
    def constant(cls, c, d):
        return cls(np.zeros((0, d), dtype=np.int64), (), (), c, d=d)

    @property
    def d(self):
        return self.freqs.shape[1]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape[:-1], self.const)
        if len(self.freqs):
            phase = TWO_PI * (x @ self.freqs.T)
            out = out + np.cos(phase) @ self.cos + np.sin(phase) @ self.sin
        return out

    def __add__(self, other):
        if not isinstance(other, TrigPotential):
            return TrigPotential(self.freqs, self.cos, self.sin, self.const + float(other), d=self.d)
        return TrigPotential(
            np.vstack([self.freqs, other.freqs]), np.concatenate([self.cos, other.cos]),
            np.concatenate([self.sin, other.sin]), self.const + other.const, d=self.d,
        )

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-other if isinstance(other, TrigPotential) else -float(other))

    def scale(self, a):
        return TrigPotential(self.freqs, a * self.cos, a * self.sin, a * self.const, d=self.d)

    def compose(self, matrix):
        """``phi o T`` for ``T x = M x mod 1``: frequencies ``k -> M^T k``."""
        m = np.asarray(matrix, dtype=np.int64)
        return TrigPotential(self.freqs @ m, self.cos, self.sin, self.const, d=self.d)

    def coboundary(self, matrix):
        """``psi o T - psi``."""
        return self.compose(matrix) - self

    @property
    def mean(self):
        """Haar integral: the constant plus the zero-frequency cosine terms."""
        zero = np.all(self.freqs == 0, axis=1)
        return self.const + float(self.cos[zero].sum())

    @property
    def lipschitz(self):
        """Upper bound ``sum_j 2 pi |k_j| sqrt(a_j^2 + b_j^2)`` for the Euclidean Lipschitz constant."""
        if not len(self.freqs):
            return 0.0
        return float(np.sum(TWO_PI * np.linalg.norm(self.freqs, axis=1) * np.hypot(self.cos, self.sin)))

    @property
    def sup_norm_bound(self):
        return abs(self.const) + float(np.sum(np.hypot(self.cos, self.sin)))

    @classmethod
    def from_file(cls, path, d):
        """Read ``k_1 ... k_d cos sin`` rows; a row ``const c`` sets the constant."""
        freqs, cs, ss, const = [], [], [], 0.0
        with open(path) as fh:
            for raw in fh:
                parts = raw.split("#", 1)[0].split()
                if not parts:
                    continue
                if parts[0] == "const":
                    const = float(parts[1])
                    continue
                if len(parts) != d + 2:
                    raise ValueError(f"expected {d} integers and two coefficients, got {raw.strip()!r}")
                freqs.append([int(p) for p in parts[:d]])
                cs.append(float(parts[d]))
                ss.append(float(parts[d + 1]))
        return cls(np.array(freqs, dtype=np.int64).reshape(-1, d), cs, ss, const, d=d)


@dataclass
class QuasiCocycle:
    """Evaluable family ``S_n``.

    ``evaluator(points, n)`` takes an array ``(N, d)`` and returns ``(N,)``
    values (or ``(N, k)`` for vector-valued families).
    """

    evaluator: object
    provenance: str
    potential: TrigPotential | None = None
    defect: float | None = None
    bowen_constant: float | None = None
    meta: dict = field(default_factory=dict)

    def __call__(self, x, n):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        if n == 0:
            out = np.zeros(len(pts))
        else:
            out = self.evaluator(pts, int(n))
        return out[0] if single else out


def birkhoff(sys, potential):
    """Birkhoff sums ``S_n = sum_{k<n} phi o T^k`` of a potential.

    ``potential`` may be a :class:`TrigPotential`, a number (constant
    potential) or any vectorized callable on ``(N, d)`` arrays.
    """
    if np.isscalar(potential):
        potential = TrigPotential.constant(float(potential), sys.d)
    mf = sys.matrix.astype(float)

    def evaluate(pts, n):
        out = np.empty(len(pts))
        for lo in range(0, len(pts), CHUNK):
            y = reduce(pts[lo : lo + CHUNK])
            acc = np.zeros(len(y))
            for _ in range(n):
                acc += potential(y)
                y = reduce(y @ mf.T)
            out[lo : lo + CHUNK] = acc
        return out

    pot = potential if isinstance(potential, TrigPotential) else None
    return QuasiCocycle(evaluate, "birkhoff", pot, defect=0.0)


def zero_cocycle(sys):
    return birkhoff(sys, 0.0)


def perturbed(qc, bounded, drift=0.0):
    """``S_n + b + n*drift`` with ``b`` a bounded function; defect at most ``3 sup|b|``."""

    def evaluate(pts, n):
        return qc.evaluator(pts, n) + bounded(pts) + n * drift

    return QuasiCocycle(evaluate, "perturbed", None, meta={"base": qc.provenance})


def compose_linear(qc, ell):
    """Scalar family ``ell(S_n)`` for a vector-valued quasicocycle."""
    ell = np.asarray(ell, dtype=float)

    def evaluate(pts, n):
        return np.asarray(qc.evaluator(pts, n)) @ ell

    return QuasiCocycle(evaluate, "linear-functional composition", None, meta={"ell": ell.tolist()})


def from_table(points, ns, values):
    """Nearest-neighbour lookup in a table of ``(point, n, value)``; for test fixtures."""
    from scipy.spatial import cKDTree

    points = np.asarray(points, dtype=float)
    ns = np.asarray(ns, dtype=int)
    values = np.asarray(values, dtype=float)
    trees = {n: (cKDTree(points[ns == n] % 1.0, boxsize=1.0), values[ns == n]) for n in np.unique(ns)}

    def evaluate(pts, n):
        tree, vals = trees[n]
        _, idx = tree.query(np.mod(pts, 1.0))
        return vals[idx]

    return QuasiCocycle(evaluate, "file table")


def defect_estimate(qc, sys, samples=SAMPLES, n_max=N_MAX, seed=0):
    """Sampled lower bound for ``sup |S_{n+m}(x) - S_n(x) - S_m(T^n x)|`` over ``n + m <= n_max``."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.random((samples, sys.d))
    n = rng.integers(0, n_max + 1, samples)
    m = rng.integers(0, n_max + 1 - n)
    worst = 0.0
    for nn in np.unique(n):
        for mm in np.unique(m[n == nn]):
            sel = (n == nn) & (m == mm)
            pts = x[sel]
            lhs = qc(pts, nn + mm)
            rhs = qc(pts, nn) + qc(sys.apply(pts, nn), mm)
            worst = max(worst, float(np.max(np.abs(np.atleast_1d(lhs - rhs)))))
    qc.defect = worst if qc.defect is None else max(qc.defect, worst)
    return worst


def bowen_variation(qc, sys, n, eps=EPS_0, samples=200, seed=0, eps_0=EPS_0):
    """Sampled ``max |S_n(x) - S_n(y)|`` over ``y`` in ``B(x, n, eps)``."""
    if eps > eps_0:
        raise ValueError(f"eps={eps} exceeds eps_0={eps_0}")
    rng = np.random.default_rng(seed)
    x = rng.random((samples, sys.d))
    sp_ = sys.splitting
    reach = eps * np.linalg.norm(sys.basis_inv, 2)
    s = rng.uniform(-reach, reach, (samples, sys.dim_s))
    c = rng.uniform(-reach, reach, (samples, sys.dim_c))
    u = rng.uniform(-1, 1, (samples, sys.dim_u)) * reach * sys.lam ** (n - 1)
    y = reduce(x + s @ sp_.stable.T + c @ sp_.center.T + u @ sp_.unstable.T)
    ok = dist_n(sys, x, y, n) <= eps
    if not ok.any():
        return 0.0
    return float(np.max(np.abs(qc(x[ok], n) - qc(y[ok], n))))


@dataclass
class CohomologyVerdict:
    verdict: str
    slope: float
    intercept: float
    max_difference: float
    residual: float
    sup_by_n: dict


def is_cohomologous(qc1, qc2, sys, n_max=N_MAX, samples=2000, seed=0, ratio=0.5, residual_tol=0.25):
    """Fit ``sup_x |S_n - S'_n|`` against ``n``.

    The verdict is ``"trivial-difference"`` when the fitted linear growth over
    the window, ``|slope| * n_max``, is below ``ratio`` times the largest
    observed difference, ``"growing-difference"`` otherwise, and
    ``"inconclusive"`` when the linear fit leaves a relative residual above
    ``residual_tol``.
    """
    rng = np.random.default_rng(seed)
    x = rng.random((samples, sys.d))
    ns = np.arange(1, n_max + 1)
    sups = np.array([np.max(np.abs(qc1(x, n) - qc2(x, n))) for n in ns])
    slope, intercept = np.polyfit(ns, sups, 1)
    top = float(sups.max())
    resid = float(np.sqrt(np.mean((sups - (slope * ns + intercept)) ** 2)))
    if top == 0.0:
        verdict = "trivial-difference"
    elif abs(slope) * n_max < ratio * top:
        verdict = "trivial-difference"
    elif resid > residual_tol * top:
        verdict = "inconclusive"
    else:
        verdict = "growing-difference"
    return CohomologyVerdict(verdict, float(slope), float(intercept), top, resid, dict(zip(ns.tolist(), sups.tolist())))
