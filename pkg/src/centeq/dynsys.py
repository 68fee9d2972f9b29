"""Linear center isometries of tori: splittings, metrics, Bowen balls, plaques.

Points are numpy arrays whose last axis has length ``d``; every function accepts
a single point ``(d,)`` or a batch ``(..., d)``.  Coordinates are kept reduced
to ``[0, 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
import sympy as sp
from sympy.matrices.normalforms import smith_normal_decomp

EQ_TOL = 1e-9
SPLIT_TOL = 1e-12
# moduli closer than this to 1 are classified as center
CENTER_TOL = 1e-8


def reduce(x):
    """Reduce coordinates modulo 1 into ``[0, 1)``."""
    y = np.mod(np.asarray(x, dtype=float), 1.0)
    # np.mod maps -tiny to exactly 1.0
    y[y >= 1.0] = 0.0
    return y


def torus_diff(x, y):
    """Shortest lift of ``y - x``: each coordinate in ``[-1/2, 1/2)``."""
    v = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    return v - np.floor(v + 0.5)


def torus_dist(x, y):
    """Flat quotient metric on ``R^d / Z^d``.

    For the standard lattice, minimising over the ``3^d`` neighbouring
    translates is the same as centering each coordinate, which is what
    :func:`torus_diff` does.
    """
    return np.linalg.norm(torus_diff(x, y), axis=-1)


def torus_equal(x, y, tol=EQ_TOL):
    return bool(np.all(torus_dist(x, y) <= tol))


@dataclass(frozen=True)
class TorusPoint:
    """A single point of ``T^d``; equality is tested modulo 1."""

    coords: tuple

    def __init__(self, coords):
        object.__setattr__(self, "coords", tuple(float(c) for c in reduce(np.atleast_1d(coords))))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, TorusPoint):
            return NotImplemented
        return torus_equal(self.coords, other.coords)

    def __hash__(self):  # pragma: no cover - points are compared with a tolerance
        raise TypeError("TorusPoint equality is tolerance based; use it as a value, not a key")


@dataclass(frozen=True)
class Splitting:
    """Columns of ``stable``/``center``/``unstable`` are unit vectors spanning each bundle."""

    stable: np.ndarray
    center: np.ndarray
    unstable: np.ndarray
    stable_moduli: np.ndarray
    center_moduli: np.ndarray
    unstable_moduli: np.ndarray

    @property
    def basis(self):
        return np.hstack([self.stable, self.center, self.unstable])


class NotACenterIsometry(ValueError):
    pass


def _real_eigenbasis(m, eigvals, eigvecs):
    """Real basis for a spectral group; complex pairs contribute Re and Im parts."""
    cols, mods, seen = [], [], np.zeros(len(eigvals), dtype=bool)
    for i, lam in enumerate(eigvals):
        if seen[i]:
            continue
        seen[i] = True
        v = eigvecs[:, i]
        if abs(lam.imag) < 1e-12:
            v = np.real(v)
            # one step of inverse iteration with a tiny shift off the eigenvalue
            shift = lam.real + 1e-10 * max(1.0, abs(lam.real))
            try:
                v = np.linalg.solve(m - shift * np.eye(len(m)), v)
            except np.linalg.LinAlgError:
                pass
            cols.append(v / np.linalg.norm(v))
            mods.append(abs(lam))
        else:
            j = next(j for j in range(len(eigvals)) if not seen[j] and abs(eigvals[j] - lam.conjugate()) < 1e-9)
            seen[j] = True
            re, im = np.real(v), np.imag(v)
            q, _ = np.linalg.qr(np.column_stack([re, im]))
            cols.extend([q[:, 0], q[:, 1]])
            mods.extend([abs(lam)] * 2)
    if not cols:
        return np.zeros((len(m), 0)), np.zeros(0)
    return np.column_stack(cols), np.asarray(mods)


def _integer_rows(vectors):
    """Scale rational sympy vectors to primitive integer vectors."""
    out = []
    for v in vectors:
        den = sp.ilcm(*[sp.Rational(x).q for x in v])
        w = [int(sp.Rational(x) * den) for x in v]
        g = 0
        for a in w:
            g = sp.igcd(g, a)
        out.append([a // g for a in w])
    return out


class LinearCenterIsometry:
    """Integer unimodular matrix acting on ``T^d`` with an s/c/u splitting.

    Parameters
    ----------
    matrix : array_like of int
        ``d x d`` integer matrix with ``|det| = 1``.
    name : str, optional
    c_exp : float
        Candidate plaque expansivity constant used by probes and reports.
    """

    def __init__(self, matrix, name=None, c_exp=0.1):
        m = np.asarray(matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("matrix must be square")
        if not np.all(np.equal(np.mod(m, 1), 0)):
            raise ValueError("matrix must have integer entries")
        self.matrix = m.astype(np.int64)
        self.d = m.shape[0]
        self.name = name or "custom"
        self.c_exp = float(c_exp)
        sym = sp.Matrix(self.matrix.tolist())
        det = int(sym.det())
        if abs(det) != 1:
            raise NotACenterIsometry(f"|det| = {abs(det)}, expected 1")
        self.inverse = np.array(sym.inv().tolist(), dtype=np.int64)
        self._sym = sym
        self.splitting = self._compute_splitting()
        if self.splitting.stable.shape[1] + self.splitting.unstable.shape[1] == 0:
            raise NotACenterIsometry("no hyperbolic directions")

    def __repr__(self):
        return f"LinearCenterIsometry({self.name!r}, {self.matrix.tolist()})"

    def _compute_splitting(self):
        mf = self.matrix.astype(float)
        vals, vecs = np.linalg.eig(mf)
        mods = np.abs(vals)
        groups = {}
        for key, mask in (
            ("stable", mods < 1 - CENTER_TOL),
            ("center", np.abs(mods - 1) <= CENTER_TOL),
            ("unstable", mods > 1 + CENTER_TOL),
        ):
            order = np.argsort(mods[mask])
            groups[key] = _real_eigenbasis(mf, vals[mask][order], vecs[:, mask][:, order])
        basis = np.hstack([groups[k][0] for k in ("stable", "center", "unstable")])
        if np.linalg.matrix_rank(basis, tol=1e-8) != self.d:
            raise NotACenterIsometry("eigenvectors do not span R^d (defective matrix)")
        return Splitting(
            stable=groups["stable"][0], center=groups["center"][0], unstable=groups["unstable"][0],
            stable_moduli=groups["stable"][1], center_moduli=groups["center"][1],
            unstable_moduli=groups["unstable"][1],
        )

    # -- dimensions and constants -------------------------------------------------

    @property
    def dim_s(self):
        return self.splitting.stable.shape[1]

    @property
    def dim_c(self):
        return self.splitting.center.shape[1]

    @property
    def dim_u(self):
        return self.splitting.unstable.shape[1]

    @cached_property
    def basis(self):
        return self.splitting.basis

    @cached_property
    def basis_inv(self):
        return np.linalg.inv(self.basis)

    @cached_property
    def lam(self):
        """``max(||DT|E^s||, ||DT^-1|E^u||)`` in the Euclidean metric."""
        mf = self.matrix.astype(float)
        norms = []
        if self.dim_s:
            q, _ = np.linalg.qr(self.splitting.stable)
            norms.append(np.linalg.norm(mf @ q, 2))
        if self.dim_u:
            q, _ = np.linalg.qr(self.splitting.unstable)
            norms.append(np.linalg.norm(self.inverse.astype(float) @ q, 2))
        return max(norms)

    @cached_property
    def entropy(self):
        """Topological entropy: sum of log-moduli of expanding eigenvalues."""
        return float(np.sum(np.log(self.splitting.unstable_moduli)))

    @cached_property
    def lambda_u(self):
        """Largest eigenvalue modulus."""
        return float(np.max(self.splitting.unstable_moduli))

    # -- exact rational structure of the center -----------------------------------

    @cached_property
    def rational_center(self):
        """Exact data when ``E^c`` and ``E^s + E^u`` are rational subspaces, else ``None``.

        Returns a dict with the rational center projector ``P_c`` (sympy matrix),
        its common denominator, and an integer matrix ``annihilator`` whose rows
        are a saturated basis of ``Z^d`` intersected with the annihilator of ``E^c``
        (``x - y`` lies in ``E^c + Z^d`` iff ``annihilator @ (x - y)`` is integral).
        """
        x = sp.Symbol("x")
        _, factors = sp.factor_list(self._sym.charpoly(x).as_expr(), x)
        center_poly, hyper_poly = sp.Integer(1), sp.Integer(1)
        for f, mult in factors:
            roots = np.roots([float(c) for c in sp.Poly(f, x).all_coeffs()])
            on_circle = np.abs(np.abs(roots) - 1) <= CENTER_TOL
            if on_circle.all():
                center_poly *= f**mult
            elif not on_circle.any():
                hyper_poly *= f**mult
            else:
                return None
        eye = sp.eye(self.d)

        def evaluate(poly):
            coeffs = sp.Poly(poly, x).all_coeffs()
            acc = sp.zeros(self.d)
            for c in coeffs:
                acc = acc * self._sym + c * eye
            return acc

        c_basis = evaluate(center_poly).nullspace() if center_poly != 1 else []
        su_basis = evaluate(hyper_poly).nullspace()
        if len(c_basis) + len(su_basis) != self.d:
            return None
        cols = [sp.Matrix(v) for v in (_integer_rows(c_basis) + _integer_rows(su_basis))]
        change = sp.Matrix.hstack(*cols)
        k = len(c_basis)
        sel = sp.diag(*([1] * k + [0] * (self.d - k)))
        p_c = change * sel * change.inv()
        if k:
            c_int = sp.Matrix.hstack(*[sp.Matrix(v) for v in _integer_rows(c_basis)])
            _, u, _ = smith_normal_decomp(c_int, domain=sp.ZZ)
            annihilator = np.array(u[k:, :].tolist(), dtype=np.int64)
        else:
            annihilator = np.eye(self.d, dtype=np.int64)
        den = sp.ilcm(1, *[sp.Rational(e).q for e in p_c])
        return {
            "P_c": p_c,
            "P_c_int": np.array((p_c * den).tolist(), dtype=object),
            "denominator": int(den),
            "annihilator": annihilator,
        }

    # -- dynamics -----------------------------------------------------------------

    def apply(self, x, k=1):
        """``T^k x``, applied one step at a time with reduction after each step."""
        y = reduce(x)
        step = self.matrix if k >= 0 else self.inverse
        mf = step.astype(float)
        for _ in range(abs(int(k))):
            y = reduce(y @ mf.T)
        return y

    def orbit(self, x, n):
        """Array ``(n, ..., d)`` of ``T^i x`` for ``0 <= i < n``."""
        y = reduce(x)
        out = np.empty((n,) + y.shape)
        mf = self.matrix.astype(float)
        for i in range(n):
            out[i] = y
            y = reduce(y @ mf.T)
        return out

    def apply_exact(self, x, k=1):
        """Exact ``T^k x mod 1`` for a vector of :class:`fractions.Fraction`."""
        y = [Fraction(c) % 1 for c in x]
        step = (self.matrix if k >= 0 else self.inverse).tolist()
        for _ in range(abs(int(k))):
            y = [sum((a * c for a, c in zip(row, y)), Fraction(0)) % 1 for row in step]
        return y

    def matrix_power(self, k):
        """Exact integer ``M^k`` (python ints; ``k`` may be negative)."""
        base = self._sym if k >= 0 else self._sym.inv()
        return base ** abs(int(k))

    # -- eigen-coordinates --------------------------------------------------------

    def eigcoords(self, v):
        """Split vectors into (stable, center, unstable) coordinate arrays."""
        c = np.asarray(v, dtype=float) @ self.basis_inv.T
        s, cc = self.dim_s, self.dim_s + self.dim_c
        return c[..., :s], c[..., s:cc], c[..., cc:]

    def components(self, v):
        """Split vectors into their E^s, E^c, E^u components (as ambient vectors)."""
        s, c, u = self.eigcoords(v)
        sp_ = self.splitting
        return s @ sp_.stable.T, c @ sp_.center.T, u @ sp_.unstable.T

    def center_distance(self, x, y, tol=EQ_TOL):
        """Intrinsic center-leaf distance, ``inf`` off the local center plaque.

        Valid for plaque radii below 1/2, where the local leaf segment is the
        shortest lift of ``y - x``.
        """
        v = torus_diff(x, y)
        s, c, u = self.components(v)
        off = np.linalg.norm(s + u, axis=-1)
        dist = np.linalg.norm(c, axis=-1)
        return np.where((off <= tol) & (dist < 0.5), dist, np.inf)


def dist_n(sys, x, y, n):
    """Bowen metric ``max_{0<=i<n} d(T^i x, T^i y)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    xo, yo = sys.orbit(x, n), sys.orbit(y, n)
    return np.max(torus_dist(xo, yo), axis=0)


def dist_pm(sys, x, y, n):
    """Two-sided metric ``max_{|i|<=n} d(T^i x, T^i y)``."""
    fwd = dist_n(sys, x, y, n + 1)
    back = np.max(torus_dist(_backward_orbit(sys, x, n), _backward_orbit(sys, y, n)), axis=0)
    return np.maximum(fwd, back)


def _backward_orbit(sys, x, n):
    y = reduce(x)
    out = np.empty((n + 1,) + y.shape)
    mi = sys.inverse.astype(float)
    for i in range(n + 1):
        out[i] = y
        y = reduce(y @ mi.T)
    return out


def bowen_ball_contains(sys, center, n, eps, y, two_sided=False):
    """Membership in ``B(x, n, eps)`` (closed), or ``B^pm(x, n, eps)``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    dist = dist_pm(sys, center, y, n) if two_sided else dist_n(sys, center, y, n)
    return dist <= eps


@dataclass(frozen=True)
class CenterPlaque:
    """Local center plaque ``B^c_radius(base)`` with an isometric chart."""

    base: np.ndarray
    directions: np.ndarray
    radius: float

    def point(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.linalg.norm(t) > self.radius:
            raise ValueError("parameter outside the plaque")
        return reduce(self.base + self.directions @ t)


def center_plaque(sys, x, radius):
    return CenterPlaque(reduce(x), sys.splitting.center.copy(), float(radius))


@dataclass
class ExpansivityReport:
    passed: bool
    delta: float
    n_max: int
    samples: int
    surviving: int
    max_center_distance: float
    max_transverse: float
    transverse_bound: float
    witness: tuple | None = field(default=None)


def plaque_expansivity_probe(sys, delta, n_max, sample_count, seed=0):
    """Check that two-sided ``delta``-shadowing pairs lie on a common center plaque.

    Pairs are drawn as ``y = x + v`` with ``v`` mixing uniform small offsets and
    offsets scaled per eigen-direction so that a fair share survive the
    ``d_{+-n_max} <= delta`` filter.  A surviving pair passes when its center
    component is at most ``3 delta`` and its transverse component is below the
    residual allowed after ``n_max`` steps of contraction.
    """
    if delta > sys.c_exp:
        raise ValueError(f"delta={delta} exceeds the configured C_exp={sys.c_exp}")
    rng = np.random.default_rng(seed)
    x = rng.random((sample_count, sys.d))
    half = sample_count // 2
    v = np.empty_like(x)
    ball = rng.normal(size=(half, sys.d))
    ball *= (delta * rng.random((half, 1)) ** (1 / sys.d)) / np.linalg.norm(ball, axis=1, keepdims=True)
    v[:half] = ball
    rest = sample_count - half
    sp_ = sys.splitting
    hyper_scale = delta * sys.lam ** (n_max * rng.random((rest, 1)))
    v[half:] = (
        (rng.uniform(-1, 1, (rest, sys.dim_s)) * hyper_scale) @ sp_.stable.T
        + rng.uniform(-1.5 * delta, 1.5 * delta, (rest, sys.dim_c)) @ sp_.center.T
        + (rng.uniform(-1, 1, (rest, sys.dim_u)) * hyper_scale) @ sp_.unstable.T
    )
    y = reduce(x + v)
    keep = dist_pm(sys, x, y, n_max) <= delta
    s, c, u = sys.components(torus_diff(x[keep], y[keep]))
    center = np.linalg.norm(c, axis=-1)
    transverse = np.linalg.norm(s + u, axis=-1)
    # s/u parts surviving n_max steps are at most delta * lam^n_max in eigen-norms
    bound = 2.0 * delta * sys.lam**n_max * np.linalg.cond(sys.basis) + 1e-12
    bad = (center > 3 * delta) | (transverse > bound)
    witness = None
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        witness = (x[keep][i].tolist(), y[keep][i].tolist())
    return ExpansivityReport(
        passed=not bad.any(), delta=delta, n_max=n_max, samples=sample_count, surviving=int(keep.sum()),
        max_center_distance=float(center.max(initial=0.0)), max_transverse=float(transverse.max(initial=0.0)),
        transverse_bound=float(bound), witness=witness,
    )


CAT_MATRIX = ((2, 1), (1, 1))
T3_MATRIX = ((0, 0, 1), (1, 0, -4), (0, 1, 4))


def cat_map(c_exp=0.1):
    return LinearCenterIsometry(CAT_MATRIX, name="cat", c_exp=c_exp)


def t3_system(c_exp=0.1):
    """3-torus center isometry with characteristic polynomial ``(x - 1)(x^2 - 3x + 1)``."""
    return LinearCenterIsometry(T3_MATRIX, name="t3", c_exp=c_exp)


BUILTINS = {"cat": cat_map, "t3": t3_system}


def load_system(spec, c_exp=0.1):
    """Resolve ``builtin:<name>`` or a key-value system file.

    File format::

        name = my_system
        row = 2 1
        row = 1 1
    """
    if spec.startswith("builtin:"):
        key = spec.split(":", 1)[1]
        if key not in BUILTINS:
            raise ValueError(f"unknown builtin system {key!r}; choose from {sorted(BUILTINS)}")
        return BUILTINS[key](c_exp=c_exp)
    rows, name = [], None
    with open(spec) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key == "row":
                rows.append([int(t) for t in value.replace(",", " ").split()])
            elif key == "name":
                name = value
            elif key == "c_exp":
                c_exp = float(value)
            else:
                raise ValueError(f"unknown key {key!r} in system file")
    if not rows:
        raise ValueError("system file has no matrix rows")
    return LinearCenterIsometry(rows, name=name, c_exp=c_exp)
