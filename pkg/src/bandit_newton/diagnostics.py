"""Numerical property suites shared by ``bandit-newton diag`` and the test-suite."""

from __future__ import annotations

import dataclasses

import numpy as np

from . import geometry
from .ons import QuadraticPotential
from .qp import EllipsoidConstraint, FocusRegion, minimize_quadratic, project_intersection
from .surrogate import SurrogateParams, estimate, s_exact_quadratic


@dataclasses.dataclass
class DiagResult:
    name: str
    passed: bool
    detail: str
    metrics: dict = dataclasses.field(default_factory=dict)

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def random_positioned_bodies(d, rng):
    """A ball, an ellipsoid and a box with B(1) ⊂ K ⊂ 2(d+1)B, in that order."""
    R = 2.0 * (d + 1)
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    axes = rng.uniform(1.0, R, d)
    ell = geometry.Ellipsoid((Q / axes ** 2) @ Q.T)
    half = R / np.sqrt(d)
    box = geometry.Box(-rng.uniform(1.0, half, d), rng.uniform(1.0, half, d))
    return [geometry.Ball(1.0, dim=d), ell, box]


def gauge_check(rng, n_points=1000, dims=(2, 3, 5), tol=1e-9):
    worst = 0.0
    for d in dims:
        for body in random_positioned_bodies(d, rng):
            x = rng.standard_normal((n_points, d)) * rng.uniform(0.01, 3.0 * (d + 1), (n_points, 1))
            exact = geometry.gauge(body, x, method="exact")
            bis = geometry.gauge(body, x, method="bisection")
            worst = max(worst, float(np.max(np.abs(exact - bis) / np.maximum(1.0, exact))))
    return DiagResult("gauge", worst <= tol, f"max relative deviation {worst:.3g} (tol {tol:g})",
                      {"max_error": worst})


def random_quadratic(d, rng):
    B = rng.standard_normal((d, d))
    return B @ B.T / d + 0.1 * np.eye(d), rng.standard_normal(d), float(rng.standard_normal())


def unbiasedness_check(rng, d=3, lam=0.05, n_draws=1_000_000, chunk=100_000, n_se=3.0):
    """Compare Monte Carlo means of the one-sample estimates with the closed-form surrogate."""
    A, b, c = random_quadratic(d, rng)
    mu = rng.uniform(-0.5, 0.5, d)
    B = rng.standard_normal((d, d))
    precision = B @ B.T / d + np.eye(d)
    params = SurrogateParams.from_precision(lam, mu, precision)
    z = mu + 0.5 * params.covariance_factor @ rng.standard_normal(d)
    exact_v, exact_g, exact_h = s_exact_quadratic(params, A, b, c, z)
    exact = np.concatenate([[exact_v], exact_g, exact_h.ravel()])

    total = np.zeros_like(exact)
    total_sq = np.zeros_like(exact)
    done = 0
    while done < n_draws:
        k = min(chunk, n_draws - done)
        X = mu + rng.standard_normal((k, d)) @ params.covariance_factor.T
        Y = 0.5 * np.einsum("ki,ij,kj->k", X, A, X) + X @ b + c
        est = estimate(params, X, Y, z)
        stack = np.hstack([est.value[:, None], est.grad, est.hess.reshape(k, -1)])
        total += stack.sum(axis=0)
        total_sq += (stack ** 2).sum(axis=0)
        done += k
    mean = total / n_draws
    se = np.sqrt(np.maximum(total_sq / n_draws - mean ** 2, 0.0) / (n_draws - 1))
    zscores = np.abs(mean - exact) / np.maximum(se, 1e-300)
    worst = float(zscores.max())
    return DiagResult("unbiasedness", worst <= n_se,
                      f"max |mean - exact| = {worst:.2f} standard errors over {len(exact)} components",
                      {"z": zscores, "mean": mean, "exact": exact, "se": se})


def _sample_in_region(pos, region, start, rng, n, burn_in=10, tol=1e-8):
    """Hit-and-run points of K_eps ∩ region (inflated by ``tol``) started from a feasible point."""
    s = (1.0 - pos.epsilon) * (1.0 + tol)

    def member(P):
        P = np.asarray(P, dtype=float)
        ok = np.asarray(pos.gauge(P)) <= s
        if len(region):
            ok = ok & np.all(region.relative_violation(P) <= tol, axis=-1)
        return ok

    body = geometry.ConvexBody(member, pos.dim, vectorized=True)
    return geometry.hit_and_run_sample(body, start, burn_in, rng, size=n, chord_iters=30)


def ftrl_instance(rng, d=3, n=200, n_comparators=100, eta=0.5, sigma_sq=1.0, focus_radius=9.0,
                  epsilon=0.1):
    """Run FTRL with exact solves on random PSD quadratics and return the inequality slack per comparator.

    The losses are f_t(x) = <g_t, x - c_t> + ¼||x - c_t||²_{H_t} with H_t PSD
    and c_t a random point near the iterate; the feasible set shrinks by an
    ellipsoid around each iterate, as in the learner. A nonnegative slack means the bound holds.
    """
    pos = geometry.positioned(geometry.Ball(1.0, dim=d), epsilon=epsilon, check=False)
    pot = QuadraticPotential(d, sigma_sq)
    region = FocusRegion(d)
    x = np.zeros(d)
    losses, played, dual = [], 0.0, 0.0
    for _ in range(n):
        x = minimize_quadratic(pot.P, pot.b, pos, region, tol=1e-10, x0=x).x
        g = rng.standard_normal(d)
        B = rng.standard_normal((d, d))
        H = B @ B.T / d
        center = x + 0.3 * rng.standard_normal(d)
        region.append(EllipsoidConstraint(x, pot.P, focus_radius))
        pot.add_quadratic(eta, g, H, center)
        played += g @ (x - center) + 0.25 * (x - center) @ H @ (x - center)
        deriv = g + 0.5 * H @ (x - center)
        dual += deriv @ np.linalg.solve(pot.P, deriv)
        losses.append((g, H, center))

    G = np.array([l[0] for l in losses])
    Hs = np.array([l[1] for l in losses])
    C = np.array([l[2] for l in losses])
    comps = _sample_in_region(pos, region, x, rng, n_comparators)
    diff = comps[:, None, :] - C  # (comparator, round, d)
    total = np.sum(diff * G, axis=(1, 2)) + 0.25 * np.einsum("pui,uij,puj->p", diff, Hs, diff)
    return np.sum(comps ** 2, axis=1) / (2.0 * sigma_sq) + 2.0 * eta ** 2 * dual - eta * (played - total)


def ftrl_check(rng, instances=50, d=3, n=200, n_comparators=100, tol=1e-6):
    worst = np.inf
    violations = 0
    for _ in range(instances):
        slack = ftrl_instance(rng, d, n, n_comparators)
        worst = min(worst, float(slack.min()))
        violations += int(np.sum(slack < -tol))
    return DiagResult("ftrl", violations == 0,
                      f"{violations} violations; smallest slack {worst:.3g}",
                      {"violations": violations, "min_slack": worst})


def grid_minimize(f, pos, region, n_grid=201, refinements=8, shrink=0.1):
    """Grid search plus local grid refinement over K_eps ∩ region (d = 2).

    ``f`` maps an (m, 2) array of points to m values.
    """
    if pos.dim != 2:
        raise ValueError("grid oracle is two-dimensional")
    s = 1.0 - pos.epsilon
    R = s * (pos.image.max_distance(np.zeros(2)) if hasattr(pos.image, "max_distance")
             else 2.0 * (pos.dim + 1))

    def feasible(P):
        ok = np.asarray(pos.gauge(P)) <= s
        if len(region):
            ok &= np.all(region.relative_violation(P) <= 0, axis=1)
        return ok

    center, half = np.zeros(2), R
    best_x, best_v = None, np.inf
    for _ in range(refinements + 1):
        ticks = np.linspace(-half, half, n_grid)
        P = center + np.stack(np.meshgrid(ticks, ticks), axis=-1).reshape(-1, 2)
        P = P[feasible(P)]
        if len(P):
            vals = np.asarray(f(P))
            i = int(np.argmin(vals))
            if vals[i] < best_v:
                best_x, best_v = P[i], float(vals[i])
        if best_x is None:
            raise ValueError("grid found no feasible point")
        center = best_x
        half *= shrink
    return best_x, best_v
