"""Minimisation over K_eps intersected with ellipsoidal focus constraints.

Projections onto the intersection use Dykstra's algorithm over a working
set: only constraints violated by the current candidate enter the
Dykstra cycle, and the set grows until the candidate is feasible for all
of them. Because every set is convex, a projection onto a subfamily that
happens to satisfy the remaining constraints is the projection onto the
full intersection.
"""

from __future__ import annotations

import dataclasses
import logging

import numpy as np

from .errors import InfeasibleError, InvalidInputError
from .geometry import project_ellipsoid

log = logging.getLogger(__name__)


class EllipsoidConstraint:
    """``{x : ||x - center||²_metric <= radius_sq}``."""

    __slots__ = ("center", "metric", "radius_sq", "_eig")

    def __init__(self, center, metric, radius_sq):
        metric = np.atleast_2d(np.asarray(metric, dtype=float))
        if np.max(np.abs(metric - metric.T)) > 1e-10 * max(1.0, np.max(np.abs(metric))):
            raise InvalidInputError("constraint metric is not symmetric")
        if radius_sq <= 0:
            raise InvalidInputError("constraint radius must be positive")
        self.center = np.asarray(center, dtype=float).ravel()
        self.metric = 0.5 * (metric + metric.T)
        self.radius_sq = float(radius_sq)
        self._eig = None

    def value(self, x):
        diff = np.asarray(x, dtype=float) - self.center
        return float(diff @ self.metric @ diff)

    def project(self, x):
        if self._eig is None:
            evals, evecs = np.linalg.eigh(self.metric)
            if evals[0] < -1e-10 * max(1.0, evals[-1]):
                raise InvalidInputError("constraint metric is not PSD")
            # A flat direction is unconstrained; a tiny positive curvature keeps Newton well posed.
            self._eig = (np.maximum(evals, 1e-300), evecs)
        return project_ellipsoid(x, self.center, self._eig[0], self._eig[1], self.radius_sq)

    def __repr__(self):
        return f"EllipsoidConstraint(center={self.center!r}, radius_sq={self.radius_sq:g})"


class FocusRegion:
    """Append-only list of ellipsoid constraints with vectorised evaluation."""

    def __init__(self, dim, capacity=16):
        self.dim = dim
        self._items = []
        self._centers = np.empty((capacity, dim))
        self._metrics = np.empty((capacity, dim, dim))
        self._radii = np.empty(capacity)
        self._Mc = np.empty((capacity, dim))
        self._cMc = np.empty(capacity)

    def __len__(self):
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def __getitem__(self, i):
        return self._items[i]

    def append(self, constraint):
        m = len(self._items)
        if m == len(self._radii):
            grow = 2 * m
            self._centers = np.resize(self._centers, (grow, self.dim))
            self._metrics = np.resize(self._metrics, (grow, self.dim, self.dim))
            self._radii = np.resize(self._radii, grow)
            self._Mc = np.resize(self._Mc, (grow, self.dim))
            self._cMc = np.resize(self._cMc, grow)
        self._centers[m] = constraint.center
        self._metrics[m] = constraint.metric
        self._radii[m] = constraint.radius_sq
        self._Mc[m] = constraint.metric @ constraint.center
        self._cMc[m] = constraint.center @ self._Mc[m]
        self._items.append(constraint)

    def extend(self, constraints):
        for c in constraints:
            self.append(c)

    def relative_violation(self, x):
        """(value / radius_sq - 1) for every constraint; a batch of points adds a leading axis."""
        x = np.asarray(x, dtype=float)
        m = len(self._items)
        if m == 0:
            return np.empty(x.shape[:-1] + (0,))
        centers, metrics = self._centers[:m], self._metrics[:m]
        if x.ndim == 1:
            # cheap expanded screen, then the exact difference form where it matters
            flat = metrics.reshape(m, -1)
            vals = flat @ np.outer(x, x).ravel() - 2.0 * (self._Mc[:m] @ x) + self._cMc[:m]
            near = np.flatnonzero(vals >= (1.0 - _SCREEN_MARGIN) * self._radii[:m])
            if len(near):
                diff = x - centers[near]
                vals[near] = np.einsum("mi,mij,mj->m", diff, metrics[near], diff)
        else:
            # expanded form for batches: x'Mx - 2x'Mc + c'Mc, one matrix product per term
            pts = x.reshape(-1, self.dim)
            outer = (pts[:, :, None] * pts[:, None, :]).reshape(len(pts), -1)
            vals = outer @ metrics.reshape(m, -1).T - 2.0 * pts @ self._Mc[:m].T + self._cMc[:m]
            vals = vals.reshape(x.shape[:-1] + (m,))
        return vals / self._radii[:m] - 1.0


_SCREEN_MARGIN = 1e-3


def as_region(constraints, dim):
    if isinstance(constraints, FocusRegion):
        return constraints
    region = FocusRegion(dim, capacity=max(4, len(constraints)))
    region.extend(constraints)
    return region


def _body_projector(pos, shrunk):
    if shrunk:
        return pos.project_shrunk, lambda x: pos.gauge(x) / (1.0 - pos.epsilon) - 1.0
    pos.project_shrunk(np.zeros(pos.dim))  # raises for bodies without a projection
    return pos.image.project, lambda x: pos.gauge(x) - 1.0


def _dykstra(x, projectors, violations, tol, max_iter):
    k = len(projectors)
    incr = [np.zeros_like(x) for _ in range(k)]
    y = x.copy()
    for it in range(max_iter):
        change = 0.0
        for i, proj in enumerate(projectors):
            z = proj(y + incr[i])
            incr[i] = y + incr[i] - z
            change = max(change, float(np.linalg.norm(z - y)))
            y = z
        if change <= tol * 1e-2 and all(v(y) <= tol for v in violations):
            return y, it + 1
    return y, max_iter


def project_intersection(x, pos, constraints, tol=1e-8, max_iter=10_000, shrunk=True):
    """Euclidean projection onto K_eps (or K with ``shrunk=False``) ∩ the ellipsoids."""
    x = np.asarray(x, dtype=float)
    region = as_region(constraints, pos.dim)
    body_proj, body_viol = _body_projector(pos, shrunk)
    y = body_proj(x)
    working = []
    while True:
        rel = region.relative_violation(y)
        bad = np.flatnonzero(rel > tol)
        if len(bad) == 0:
            return y
        new = [int(i) for i in bad if int(i) not in working]
        if not new:
            raise InfeasibleError(
                f"Dykstra stalled with constraint violation {rel.max():.3g} > {tol:g}")
        working.extend(new)
        cons = [region[i] for i in working]
        projectors = [body_proj] + [c.project for c in cons]
        violations = [body_viol] + [(lambda c: lambda z: c.value(z) / c.radius_sq - 1.0)(c) for c in cons]
        y, iters = _dykstra(x, projectors, violations, tol, max_iter)
        if iters >= max_iter:
            worst = max(v(y) for v in violations)
            if worst > tol:
                raise InfeasibleError(
                    f"no feasible point after {max_iter} Dykstra sweeps (violation {worst:.3g})")


@dataclasses.dataclass
class SolveResult:
    x: np.ndarray
    converged: bool
    iterations: int
    floored: bool = False
    value: float = float("nan")


def floor_eigenvalues(P, floor):
    """Symmetrise ``P`` and raise its eigenvalues to at least ``floor``.

    Returns the floored matrix, its eigen-decomposition and whether any
    eigenvalue was raised.
    """
    P = 0.5 * (P + P.T)
    evals, evecs = np.linalg.eigh(P)
    floored = bool(evals[0] < floor)
    if floored:
        evals = np.maximum(evals, floor)
        P = (evecs * evals) @ evecs.T
        P = 0.5 * (P + P.T)
    return P, evals, evecs, floored


def _feasible(x, pos, region, tol, shrunk):
    g = pos.gauge(x)
    limit = (1.0 - pos.epsilon) if shrunk else 1.0
    if g > limit * (1.0 + tol):
        return False
    rel = region.relative_violation(x)
    return not (len(rel) and rel.max() > tol)


def minimize_quadratic(P, b, pos, constraints, tol=1e-8, x0=None, max_iter=50_000,
                       eig_floor=None, shrunk=True):
    """Minimise ½xᵀPx + bᵀx over the feasible set by projected gradient with step 1/λ_max(P).

    Stops when ``||x - proj(x - ∇/L)||`` (the projected-gradient step) is at
    most ``tol`` times ``max(1, ||x||)``.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    b = np.asarray(b, dtype=float)
    d = len(b)
    region = as_region(constraints, d)
    if eig_floor is None:
        eig_floor = 1e-10 * max(1.0, float(np.max(np.abs(np.linalg.eigvalsh(P)))))
    P, evals, evecs, floored = floor_eigenvalues(P, eig_floor)
    if floored:
        log.info("minimize_quadratic: eigenvalues floored at %.3g", eig_floor)

    def objective(x):
        return 0.5 * x @ P @ x + b @ x

    x_unc = -(evecs @ ((evecs.T @ b) / evals))
    if _feasible(x_unc, pos, region, tol, shrunk):
        return SolveResult(x_unc, True, 0, floored, objective(x_unc))

    L = float(evals[-1])
    start = x_unc if x0 is None else np.asarray(x0, dtype=float)
    x = project_intersection(start, pos, region, tol=tol, shrunk=shrunk)
    best, best_val = x, objective(x)
    for it in range(1, max_iter + 1):
        x_new = project_intersection(x - (P @ x + b) / L, pos, region, tol=tol, shrunk=shrunk)
        step = float(np.linalg.norm(x_new - x))
        val = objective(x_new)
        if val < best_val:
            best, best_val = x_new, val
        x = x_new
        if step <= tol * max(1.0, float(np.linalg.norm(x))):
            return SolveResult(best, True, it, floored, best_val)
    log.warning("minimize_quadratic did not converge in %d iterations", max_iter)
    return SolveResult(best, False, max_iter, floored, best_val)


def minimize_smooth_convex(f, pos, constraints, tol=1e-6, x0=None, max_iter=20_000,
                           shrunk=True, armijo=1e-4):
    """Projected gradient with halving backtracking for a smooth convex ``f``.

    ``f(x)`` returns ``(value, gradient)``. Stops when the gradient mapping
    ``||x - proj(x - s∇f)|| / s`` is at most ``tol``.
    """
    d = pos.dim
    region = as_region(constraints, d)
    start = np.zeros(d) if x0 is None else np.asarray(x0, dtype=float)
    x = project_intersection(start, pos, region, shrunk=shrunk)
    fx, gx = f(x)
    s = 1.0 / max(1.0, float(np.linalg.norm(gx)))
    for it in range(1, max_iter + 1):
        s *= 2.0
        while True:
            x_new = project_intersection(x - s * gx, pos, region, shrunk=shrunk)
            diff = x_new - x
            f_new, g_new = f(x_new)
            if f_new <= fx + armijo * float(gx @ diff) or s < 1e-300:
                break
            s *= 0.5
        mapping = float(np.linalg.norm(diff)) / s
        if f_new <= fx:
            x, fx, gx = x_new, f_new, g_new
        if mapping <= tol or float(np.linalg.norm(diff)) <= 1e-15 * max(1.0, float(np.linalg.norm(x))):
            return SolveResult(x, True, it, False, fx)
    log.warning("minimize_smooth_convex did not converge in %d iterations", max_iter)
    return SolveResult(x, False, max_iter, False, fx)
