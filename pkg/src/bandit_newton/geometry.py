"""Convex bodies given by membership oracles, gauges and positioning.

Every body used by the optimiser is expressed in coordinates where the
origin is interior, so the Minkowski functional (gauge) is well defined.
The built-in bodies (ellipsoid/ball, box, H-polytope, simplex) carry a
closed-form gauge and an exact Euclidean projection; a generic body only
has a membership oracle and falls back to bisection.
"""

from __future__ import annotations

import dataclasses
import logging

import numpy as np
from scipy.optimize import linprog, nnls

from .errors import (
    DegenerateBodyError,
    InvalidInputError,
    PositioningViolation,
    UnsupportedBodyError,
)

log = logging.getLogger(__name__)

BISECTION_ITERS = 60
GAUGE_TOL = 1e-9


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (dim,):
        raise InvalidInputError(f"expected points of dimension {dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("non-finite coordinates")
    return x


class ConvexBody:
    """A convex body described by its membership oracle.

    Parameters
    ----------
    membership : callable
        Maps a point (or a batch of points if ``vectorized``) to a boolean.
    dim : int
    exact_gauge, euclidean_projection : callable, optional
        Closed forms when available.
    vectorized : bool
        Whether ``membership`` accepts arrays of shape ``(n, dim)``.
    """

    builtin = False

    def __init__(self, membership, dim, exact_gauge=None, euclidean_projection=None,
                 vectorized=False):
        if int(dim) < 1:
            raise InvalidInputError("dimension must be positive")
        self.dim = int(dim)
        self._membership = membership
        self._exact_gauge = exact_gauge
        self._projection = euclidean_projection
        self._vectorized = vectorized

    @property
    def has_exact_gauge(self):
        return self._exact_gauge is not None

    @property
    def has_projection(self):
        return self._projection is not None

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return bool(self._membership(x))
        if self._vectorized:
            return np.asarray(self._membership(x), dtype=bool)
        flat = x.reshape(-1, self.dim)
        out = np.fromiter((bool(self._membership(p)) for p in flat), dtype=bool, count=len(flat))
        return out.reshape(x.shape[:-1])

    def exact_gauge(self, x):
        if self._exact_gauge is None:
            raise NotImplementedError("body has no closed-form gauge")
        return self._exact_gauge(x)

    def project(self, x):
        if self._projection is None:
            raise NotImplementedError("body has no exact Euclidean projection")
        return self._projection(x)

    def affine_image(self, T, c):
        """The body in coordinates ``y = T (x - c)``."""
        T = np.asarray(T, dtype=float)
        c = np.asarray(c, dtype=float)
        Tinv = np.linalg.inv(T)
        inner = self

        def member(y):
            y = np.asarray(y, dtype=float)
            return inner.contains(c + y @ Tinv.T)

        return ConvexBody(member, self.dim, vectorized=True)

    def interior_point(self):
        return np.zeros(self.dim)


class Ellipsoid(ConvexBody):
    """``{x : (x - center)ᵀ shape (x - center) <= 1}`` with ``shape`` positive definite."""

    builtin = True

    def __init__(self, shape, center=None):
        shape = np.atleast_2d(np.asarray(shape, dtype=float))
        d = shape.shape[0]
        if shape.shape != (d, d) or not np.allclose(shape, shape.T, atol=1e-12):
            raise InvalidInputError("ellipsoid shape must be a symmetric matrix")
        shape = 0.5 * (shape + shape.T)
        evals, evecs = np.linalg.eigh(shape)
        if evals[0] <= 0:
            raise InvalidInputError("ellipsoid shape must be positive definite")
        self.shape = shape
        self.center = np.zeros(d) if center is None else np.asarray(center, dtype=float).reshape(d)
        self._evals = evals
        self._evecs = evecs
        super().__init__(None, d)
        self._exact_gauge = self._gauge
        self._projection = self._project
        self._vectorized = True

    def contains(self, x):
        diff = np.asarray(x, dtype=float) - self.center
        val = np.einsum("...i,ij,...j->...", diff, self.shape, diff)
        return val <= 1.0 if np.ndim(val) else bool(val <= 1.0)

    def _gauge(self, x):
        x = np.asarray(x, dtype=float)
        A, m = self.shape, self.center
        mAm = m @ A @ m
        if mAm >= 1.0:
            raise PositioningViolation("origin is not interior to the ellipsoid")
        xAx = np.einsum("...i,ij,...j->...", x, A, x)
        xAm = x @ (A @ m)
        disc = xAm ** 2 + xAx * (1.0 - mAm)
        return (np.sqrt(np.maximum(disc, 0.0)) - xAm) / (1.0 - mAm)

    def _project(self, x):
        if self._evals[-1] - self._evals[0] <= 1e-14 * self._evals[-1]:
            # a ball: radial projection is exact
            diff = np.asarray(x, dtype=float) - self.center
            norm = np.linalg.norm(diff, axis=-1, keepdims=True)
            radius = self._evals[0] ** -0.5
            return self.center + diff * np.minimum(1.0, radius / np.maximum(norm, 1e-300))
        return project_ellipsoid(x, self.center, self._evals, self._evecs)

    def chord(self, x, u):
        """Per row, the largest t with x + t u inside (x inside, u nonzero)."""
        diff = np.asarray(x, dtype=float) - self.center
        Au = u @ self.shape
        a = np.sum(Au * u, axis=-1)
        b = np.sum(Au * diff, axis=-1)
        c = np.einsum("...i,ij,...j->...", diff, self.shape, diff) - 1.0
        return np.maximum((-b + np.sqrt(np.maximum(b * b - a * c, 0.0))) / a, 0.0)

    def affine_image(self, T, c):
        T = np.asarray(T, dtype=float)
        Tinv = np.linalg.inv(T)
        shape = Tinv.T @ self.shape @ Tinv
        return Ellipsoid(0.5 * (shape + shape.T), T @ (self.center - np.asarray(c, dtype=float)))

    def interior_point(self):
        return self.center.copy()

    def max_distance(self, a):
        """Upper bound on ``max_{x in K} ||x - a||``."""
        return float(np.linalg.norm(np.asarray(a) - self.center) + self._evals[0] ** -0.5)

    def covariance(self):
        """Covariance of the uniform law on the ellipsoid."""
        return np.linalg.inv(self.shape) / (self.dim + 2)


class Ball(Ellipsoid):
    def __init__(self, radius=1.0, center=None, dim=None):
        if center is None:
            if dim is None:
                raise InvalidInputError("ball needs a center or a dimension")
            center = np.zeros(int(dim))
        center = np.asarray(center, dtype=float).ravel()
        if radius <= 0:
            raise InvalidInputError("radius must be positive")
        self.radius = float(radius)
        super().__init__(np.eye(len(center)) / radius ** 2, center)

    def max_distance(self, a):
        return float(np.linalg.norm(np.asarray(a) - self.center) + self.radius)


class Box(ConvexBody):
    """Axis-aligned box ``lo <= x <= hi``."""

    builtin = True

    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise InvalidInputError("box needs lo < hi componentwise")
        self.lo, self.hi = lo, hi
        super().__init__(None, len(lo))
        self._exact_gauge = self._gauge
        self._projection = self._project
        self._vectorized = True

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.all((x >= self.lo) & (x <= self.hi), axis=-1)
        return bool(inside) if x.ndim == 1 else inside

    def _gauge(self, x):
        if np.any(self.lo >= 0) or np.any(self.hi <= 0):
            raise PositioningViolation("origin is not interior to the box")
        x = np.asarray(x, dtype=float)
        ratios = np.maximum(x / self.hi, x / self.lo)
        return np.maximum(ratios.max(axis=-1), 0.0)

    def _project(self, x):
        return np.clip(x, self.lo, self.hi)

    def chord(self, x, u):
        """Per row, the largest t with x + t u inside (x inside, u nonzero)."""
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            room = np.where(u > 0, (self.hi - x) / u, np.where(u < 0, (self.lo - x) / u, np.inf))
        return np.maximum(room.min(axis=-1), 0.0)

    def affine_image(self, T, c):
        T = np.asarray(T, dtype=float)
        c = np.asarray(c, dtype=float)
        diag = np.diag(T)
        if np.allclose(T, np.diag(diag)) and np.all(diag > 0):
            return Box(diag * (self.lo - c), diag * (self.hi - c))
        return self.as_polytope().affine_image(T, c)

    def as_polytope(self):
        eye = np.eye(self.dim)
        return Polytope(np.vstack([eye, -eye]), np.concatenate([self.hi, -self.lo]))

    def interior_point(self):
        return 0.5 * (self.lo + self.hi)

    def max_distance(self, a):
        a = np.asarray(a, dtype=float)
        return float(np.linalg.norm(np.maximum(np.abs(self.hi - a), np.abs(self.lo - a))))

    def covariance(self):
        return np.diag((self.hi - self.lo) ** 2 / 12.0)


class Polytope(ConvexBody):
    """H-polytope ``{x : A x <= b}``."""

    builtin = True

    def __init__(self, A, b):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).ravel()
        if A.shape[0] != len(b):
            raise InvalidInputError("polytope rows and offsets disagree")
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms == 0):
            raise InvalidInputError("polytope has a zero row")
        self.A, self.b = A, b
        super().__init__(None, A.shape[1])
        self._exact_gauge = self._gauge
        self._projection = self._project
        self._vectorized = True

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.all(x @ self.A.T <= self.b + 1e-12 * np.abs(self.b), axis=-1)
        return bool(inside) if x.ndim == 1 else inside

    def _gauge(self, x):
        if np.any(self.b <= 0):
            raise PositioningViolation("origin is not interior to the polytope")
        ratios = (np.asarray(x, dtype=float) @ self.A.T) / self.b
        return np.maximum(ratios.max(axis=-1), 0.0)

    def _project(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim > 1:
            return np.stack([self._project(p) for p in x])
        resid = self.A @ x - self.b
        if np.all(resid <= 0):
            return x.copy()
        return x + _least_distance(-self.A, resid)

    def affine_image(self, T, c):
        Tinv = np.linalg.inv(np.asarray(T, dtype=float))
        return Polytope(self.A @ Tinv, self.b - self.A @ np.asarray(c, dtype=float))

    def interior_point(self):
        # Chebyshev centre via a small LP.
        norms = np.linalg.norm(self.A, axis=1)
        cost = np.zeros(self.dim + 1)
        cost[-1] = -1.0
        res = linprog(cost, A_ub=np.hstack([self.A, norms[:, None]]), b_ub=self.b,
                      bounds=[(None, None)] * self.dim + [(0, None)], method="highs")
        if not res.success or res.x[-1] <= 0:
            raise DegenerateBodyError("polytope has empty interior")
        return res.x[:-1]

    def max_distance(self, a):
        # No cheap vertex enumeration; fall back to the positioning bound.
        return 4.0 * (self.dim + 1)


class Simplex(Polytope):
    """Standard simplex ``{x >= 0, sum(x) <= 1}``; the origin is a vertex, so position it first."""

    def __init__(self, dim):
        d = int(dim)
        super().__init__(np.vstack([-np.eye(d), np.ones((1, d))]),
                         np.concatenate([np.zeros(d), [1.0]]))

    def interior_point(self):
        return np.full(self.dim, 1.0 / (self.dim + 1))

    def max_distance(self, a):
        verts = np.vstack([np.zeros(self.dim), np.eye(self.dim)])
        return float(np.max(np.linalg.norm(verts - np.asarray(a), axis=1)))

    def covariance(self):
        d = self.dim
        return ((d + 1) * np.eye(d) - np.ones((d, d))) / ((d + 1) ** 2 * (d + 2))


def _least_distance(G, h):
    """Smallest-norm ``p`` with ``G p >= h`` (Lawson & Hanson's LDP via NNLS)."""
    m, d = G.shape
    E = np.vstack([G.T, h[None, :]])
    f = np.zeros(d + 1)
    f[-1] = 1.0
    u, _ = nnls(E, f, maxiter=50 * (m + d))
    r = E @ u - f
    if abs(r[-1]) < 1e-14:
        raise DegenerateBodyError("least-distance problem is infeasible")
    return -r[:d] / r[-1]


def project_ellipsoid(x, center, evals, evecs, radius_sq=1.0):
    """Euclidean projection onto ``{y : (y - center)ᵀ Q diag(evals) Qᵀ (y - center) <= radius_sq}``."""
    x = np.asarray(x, dtype=float)
    if x.ndim > 1:
        return np.stack([project_ellipsoid(p, center, evals, evecs, radius_sq) for p in x])
    a = evals / radius_sq
    w = evecs.T @ (x - center)
    if np.sum(a * w * w) <= 1.0:
        return x.copy()
    # h(nu) = sum a w^2 / (1 + nu a)^2 must equal 1. Newton on h^{-1/2} - 1, which is
    # concave increasing (exact in one step for a ball), climbs monotonically from nu = 0.
    aw2 = a * w * w
    nu = 0.0
    for _ in range(200):
        den = 1.0 + nu * a
        h = np.sum(aw2 / den ** 2)
        dh = -2.0 * np.sum(a * aw2 / den ** 3)
        g = h ** -0.5 - 1.0
        step = g / (-0.5 * h ** -1.5 * dh)
        nu -= step
        if abs(step) <= 1e-15 * max(1.0, abs(nu)):
            break
    y = w / (1.0 + nu * a)
    # guard against landing a hair outside from rounding
    val = np.sum(a * y * y)
    if val > 1.0:
        y /= np.sqrt(val)
    return center + evecs @ y


def gauge(body, x, method="auto"):
    """Minkowski functional of ``body`` (origin interior) at ``x``.

    ``x`` may be a single point or an array of points. With ``method="auto"``
    the closed form is used when the body has one; otherwise the gauge is
    found by bisection on the membership oracle over the bracket implied by
    B(1) ⊂ K ⊂ 2B(d+1).
    """
    x = _as_points(x, body.dim)
    if method == "exact" or (method == "auto" and body.has_exact_gauge):
        g = body.exact_gauge(x)
        return float(g) if x.ndim == 1 else np.asarray(g, dtype=float)
    if method not in ("auto", "bisection"):
        raise InvalidInputError(f"unknown gauge method {method!r}")
    return _gauge_bisection(body, x)


def _gauge_bisection(body, x):
    single = x.ndim == 1
    pts = x.reshape(-1, body.dim)
    norms = np.linalg.norm(pts, axis=1)
    out = np.zeros(len(pts))
    nz = norms > 0
    if np.any(nz):
        p = pts[nz]
        hi = norms[nz] * (1.0 + 1e-12)  # unit-sphere points sit on the boundary of B(1)
        lo = hi / (2.0 * (body.dim + 1))
        if not np.all(body.contains(p / hi[:, None])):
            raise PositioningViolation("unit ball is not contained in the body")
        for _ in range(BISECTION_ITERS):
            mid = 0.5 * (lo + hi)
            inside = body.contains(p / mid[:, None])
            hi = np.where(inside, mid, hi)
            lo = np.where(inside, lo, mid)
        if np.any(hi - lo > GAUGE_TOL * np.maximum(1.0, hi)):
            raise PositioningViolation("gauge bisection did not reach tolerance")
        out[nz] = 0.5 * (lo + hi)
    return float(out[0]) if single else out.reshape(x.shape[:-1])


@dataclasses.dataclass(frozen=True)
class PositionedBody:
    """A body together with the affine map ``y = T (x - c)`` that positions it.

    ``image`` is the body in positioned coordinates; everything the learner
    does happens there. ``epsilon`` is the shrink factor defining
    K_eps = (1 - eps) K and ``mean_width_M`` is max(d^{-1/2}, M(K°)).
    """

    body: ConvexBody
    T: np.ndarray
    c: np.ndarray
    image: ConvexBody
    epsilon: float = 0.1
    mean_width_M: float = 1.0
    rounding_violations: int = 0

    def __post_init__(self):
        if not 0.0 < self.epsilon < 0.5:
            raise InvalidInputError(f"epsilon must lie in (0, 1/2), got {self.epsilon}")
        d = self.image.dim
        if self.mean_width_M < d ** -0.5 - 1e-12:
            raise InvalidInputError("mean width constant below d^{-1/2}")

    @property
    def dim(self):
        return self.image.dim

    @property
    def affine_map(self):
        return self.T, self.c

    def with_epsilon(self, epsilon):
        return dataclasses.replace(self, epsilon=float(epsilon))

    def with_mean_width(self, M):
        return dataclasses.replace(self, mean_width_M=float(M))

    def to_positioned(self, x):
        return (np.asarray(x, dtype=float) - self.c) @ self.T.T

    def to_original(self, y):
        return self.c + np.linalg.solve(self.T, np.asarray(y, dtype=float).T).T

    def gauge(self, y):
        return gauge(self.image, y)

    def in_shrunk(self, y, tol=1e-8):
        """Membership of K_eps, inflated by ``tol``."""
        return np.asarray(self.gauge(y)) <= (1.0 - self.epsilon) * (1.0 + tol)

    def project_shrunk(self, y):
        """Exact Euclidean projection onto K_eps."""
        if not self.image.has_projection:
            raise UnsupportedBodyError("optimisation needs a built-in body with exact projection")
        s = 1.0 - self.epsilon
        return s * self.image.project(np.asarray(y, dtype=float) / s)


def positioned(body, T=None, c=None, epsilon=0.1, mean_width_M=None, check=True):
    """Wrap ``body`` with a known affine map (identity by default)."""
    d = body.dim
    T = np.eye(d) if T is None else np.atleast_2d(np.asarray(T, dtype=float))
    c = np.zeros(d) if c is None else np.asarray(c, dtype=float).reshape(d)
    image = body.affine_image(T, c)
    violations = rounding_violations(image, np.random.default_rng(0)) if check else 0
    M = 1.0 if mean_width_M is None else mean_width_M
    return PositionedBody(body, T, c, image, epsilon, max(M, d ** -0.5), violations)


def rounding_violations(image, rng, n_dirs=100):
    """Count random unit directions ``u`` with ``u`` outside the body or ``2(d+1)u`` inside."""
    d = image.dim
    u = rng.standard_normal((n_dirs, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    inner = ~np.asarray(image.contains((1.0 - 1e-9) * u), dtype=bool)
    outer = np.asarray(image.contains(2.0 * (d + 1) * 1.0001 * u), dtype=bool)
    count = int(np.sum(inner | outer))
    if count:
        log.warning("positioning check: %d of %d directions violate B(1) ⊂ K ⊂ 2B(d+1)",
                    count, n_dirs)
    return count


def pip(pos, x):
    """π⁺(x) = max(1, gauge(x) / (1 - eps))."""
    g = pos.gauge(x)
    if np.ndim(g):
        return np.maximum(1.0, g / (1.0 - pos.epsilon))
    return max(1.0, g / (1.0 - pos.epsilon))


def radial_project(pos, x):
    """Radial projection x / π⁺(x) onto K_eps."""
    x = np.asarray(x, dtype=float)
    p = pip(pos, x)
    return x / (np.asarray(p)[..., None] if np.ndim(p) else p)


def _chord_extent(body, x, u, max_doublings=60, iters=50):
    """Largest t >= 0 with x + t u in the body, per row, by doubling then bisection."""
    n = len(x)
    lo = np.zeros(n)
    hi = np.ones(n)
    active = np.asarray(body.contains(x + hi[:, None] * u), dtype=bool)
    for _ in range(max_doublings):
        if not np.any(active):
            break
        lo = np.where(active, hi, lo)
        hi = np.where(active, 2.0 * hi, hi)
        active = active & np.asarray(body.contains(x + hi[:, None] * u), dtype=bool)
    else:
        raise DegenerateBodyError("hit-and-run chord is unbounded")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        inside = np.asarray(body.contains(x + mid[:, None] * u), dtype=bool)
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return lo


def hit_and_run_sample(body, start, burn_in, rng, size=None, chord_iters=50):
    """Approximately uniform point(s) of ``body`` from hit-and-run chains.

    Each chain starts at ``start`` and takes ``burn_in`` steps: a uniform
    random direction, the chord through the current point (found by
    bisection on the membership oracle, or in closed form for ellipsoids
    and boxes) and a uniform jump along it. With
    ``size=n`` that many independent chains are run side by side.
    ``chord_iters`` bisection steps locate each chord end.
    """
    start = _as_points(start, body.dim)
    if not body.contains(start):
        raise InvalidInputError("hit-and-run start point is not in the body")
    n = 1 if size is None else int(size)
    x = np.tile(start, (n, 1))
    for _ in range(int(burn_in)):
        u = rng.standard_normal((n, body.dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        if hasattr(body, "chord"):
            t_plus, t_minus = body.chord(x, u), body.chord(x, -u)
        else:
            t_plus = _chord_extent(body, x, u, iters=chord_iters)
            t_minus = _chord_extent(body, x, -u, iters=chord_iters)
        t = rng.uniform(-t_minus, t_plus)
        x = x + t[:, None] * u
    return x[0] if size is None else x


def position_isotropic(body, n_samples=None, rng=None, *, burn_in=None, start=None,
                       epsilon=0.1):
    """Affine map taking the estimated uniform law on ``body`` to zero mean, identity covariance."""
    rng = np.random.default_rng() if rng is None else rng
    d = body.dim
    n_samples = 50 * d * d if n_samples is None else int(n_samples)
    burn_in = 30 * d if burn_in is None else int(burn_in)
    start = body.interior_point() if start is None else np.asarray(start, dtype=float)
    pts = hit_and_run_sample(body, start, burn_in, rng, size=n_samples)
    mean = pts.mean(axis=0)
    cov = np.atleast_2d(np.cov(pts, rowvar=False))
    evals, evecs = np.linalg.eigh(cov)
    if evals[0] < 1e-10 * evals[-1] or evals[-1] <= 0:
        raise DegenerateBodyError("sample covariance is singular")
    T = (evecs / np.sqrt(evals)) @ evecs.T
    image = body.affine_image(T, mean)
    violations = rounding_violations(image, rng)
    if hasattr(body, "covariance"):
        exact = body.covariance()
        dev = np.linalg.norm(T @ exact @ T.T - np.eye(d)) / np.sqrt(d)
        log.info("isotropic positioning: covariance deviation %.3g", dev)
    return PositionedBody(body, T, mean, image, epsilon, 1.0, violations)


def estimate_mean_width(pos, n_dirs, rng):
    """max(d^{-1/2}, average gauge over uniform unit directions)."""
    d = pos.dim
    u = rng.standard_normal((int(n_dirs), d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    avg = float(np.mean(pos.gauge(u)))
    return max(d ** -0.5, avg)


def body_from_spec(spec):
    """Build a body from its JSON description."""
    kind = spec.get("kind")
    try:
        if kind == "ball":
            center = spec.get("center")
            return Ball(float(spec.get("radius", 1.0)), center, dim=spec.get("d"))
        if kind == "ellipsoid":
            return Ellipsoid(spec["shape"], spec.get("center"))
        if kind == "box":
            if "lo" in spec:
                return Box(spec["lo"], spec["hi"])
            d = int(spec["d"])
            return Box(np.full(d, float(spec.get("low", -1.0))), np.full(d, float(spec.get("high", 1.0))))
        if kind == "simplex":
            return Simplex(int(spec["d"]))
        if kind == "polytope":
            rows = spec["rows"]
            return Polytope([r[0] for r in rows], [r[1] for r in rows])
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"bad body spec {spec!r}: {exc}") from exc
    raise InvalidInputError(f"unknown body kind {kind!r}")


def support(body, c):
    """Support function h_K(c) = max_{x in K} <c, x> for the built-in bodies."""
    c = np.asarray(c, dtype=float)
    if isinstance(body, Ellipsoid):
        return float(c @ body.center + np.sqrt(c @ np.linalg.solve(body.shape, c)))
    if isinstance(body, Box):
        return float(np.sum(np.maximum(c * body.lo, c * body.hi)))
    if isinstance(body, Polytope):
        res = linprog(-c, A_ub=body.A, b_ub=body.b, bounds=[(None, None)] * body.dim, method="highs")
        if not res.success:
            raise DegenerateBodyError(f"support LP failed: {res.message}")
        return float(-res.fun)
    raise UnsupportedBodyError("support function needs a built-in body")
