"""Density-ratio estimates of the Gaussian-smoothed optimistic surrogate.

For a Gaussian N(mu, Sigma) and smoothing weight lam the surrogate of f is

    s(z) = E[(1 - 1/lam) f(X) + (1/lam) f((1 - lam) X + lam z)],

and a single observation Y of f at X ~ N(mu, Sigma) gives the unbiased
estimate Y (1 + (R(z) - 1) / lam) with R the change-of-measure ratio.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import InvalidInputError, RatioOverflowError

LOG_RATIO_MAX = 700.0


@dataclasses.dataclass(frozen=True)
class SurrogateParams:
    lam: float
    mu: np.ndarray
    precision: np.ndarray
    covariance_factor: np.ndarray

    @classmethod
    def from_precision(cls, lam, mu, precision):
        precision = np.atleast_2d(np.asarray(precision, dtype=float))
        precision = 0.5 * (precision + precision.T)
        evals, evecs = np.linalg.eigh(precision)
        if evals[0] < 1e-12:
            raise InvalidInputError("precision matrix is not positive definite")
        factor = (evecs / np.sqrt(evals)) @ evecs.T
        return cls(float(lam), np.asarray(mu, dtype=float).ravel(), precision, factor)

    @property
    def dim(self):
        return len(self.mu)

    @property
    def covariance(self):
        return self.covariance_factor @ self.covariance_factor.T

    def validate(self):
        S = self.precision
        if not 0.0 < self.lam < 1.0:
            raise InvalidInputError("lambda must lie in (0, 1)")
        if np.max(np.abs(S - S.T)) > 1e-12:
            raise InvalidInputError("precision is not symmetric")
        if np.linalg.eigvalsh(S)[0] < 1e-12:
            raise InvalidInputError("precision is not positive definite")
        cov = np.linalg.inv(S)
        err = np.linalg.norm(self.covariance - cov) / np.linalg.norm(cov)
        if err > 1e-8:
            raise InvalidInputError("covariance factor inconsistent with precision")


@dataclasses.dataclass(frozen=True)
class SurrogateEstimate:
    ratio: np.ndarray
    value: np.ndarray
    grad: np.ndarray
    hess: np.ndarray


def _log_ratio(params, X, z):
    lam, mu, S = params.lam, params.mu, params.precision
    X = np.asarray(X, dtype=float)
    z = np.asarray(z, dtype=float)
    d0 = X - mu
    w = (X - lam * z) / (1.0 - lam) - mu
    q0 = np.einsum("...i,ij,...j->...", d0, S, d0)
    q1 = np.einsum("...i,ij,...j->...", w, S, w)
    logr = -len(mu) * np.log1p(-lam) + 0.5 * (q0 - q1)
    return logr, w


def _exp_ratio(logr):
    top = np.max(logr)
    if top > LOG_RATIO_MAX:
        raise RatioOverflowError(top)
    return np.exp(logr)


def density_ratio(params, X, z):
    """R(z) = p((X - lam z)/(1 - lam)) / ((1 - lam)^d p(X)), evaluated in log space."""
    logr, _ = _log_ratio(params, X, z)
    r = _exp_ratio(logr)
    return float(r) if np.ndim(r) == 0 else r


def estimate(params, X, Y, z):
    """Value, gradient and Hessian of the one-sample estimate at ``z``.

    ``X`` and ``Y`` may carry a leading batch axis, in which case every
    field of the result does too.
    """
    Y = np.asarray(Y, dtype=float)
    if not np.all(np.isfinite(Y)):
        raise InvalidInputError("non-finite observation")
    lam, S = params.lam, params.precision
    logr, w = _log_ratio(params, X, z)
    R = _exp_ratio(logr)
    value = Y * (1.0 + (R - 1.0) / lam)
    Sw = w @ S
    coef_g = Y * R / (1.0 - lam)
    grad = coef_g[..., None] * Sw
    coef_h = lam * Y * R / (1.0 - lam) ** 2
    outer = Sw[..., :, None] * Sw[..., None, :]
    hess = coef_h[..., None, None] * (outer - S)
    hess = 0.5 * (hess + np.swapaxes(hess, -1, -2))
    if np.ndim(R) == 0:
        return SurrogateEstimate(float(R), float(value), grad, hess)
    return SurrogateEstimate(R, value, grad, hess)


def quad_surrogate_eval(g, H, mu, x):
    """<g, x - mu> + ¼ ||x - mu||²_H."""
    diff = np.asarray(x, dtype=float) - mu
    return float(np.dot(g, diff) + 0.25 * diff @ H @ diff)


def gaussian_quadratic_mean(A, b, c, mean, cov):
    """E[½ XᵀAX + bᵀX + c] for X ~ N(mean, cov)."""
    return 0.5 * mean @ A @ mean + 0.5 * np.trace(A @ cov) + b @ mean + c


def s_exact_quadratic(params, A, b, c, z):
    """Closed-form surrogate of f(x) = ½ xᵀAx + bᵀx + c, with its gradient and Hessian in z."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if np.max(np.abs(A - A.T)) > 1e-12:
        raise InvalidInputError("quadratic form must be symmetric")
    b = np.asarray(b, dtype=float)
    lam, mu = params.lam, params.mu
    cov = params.covariance
    z = np.asarray(z, dtype=float)
    m = (1.0 - lam) * mu + lam * z
    mean_f = gaussian_quadratic_mean(A, b, c, mu, cov)
    mean_shift = gaussian_quadratic_mean(A, b, c, m, (1.0 - lam) ** 2 * cov)
    value = (1.0 - 1.0 / lam) * mean_f + mean_shift / lam
    return float(value), A @ m + b, lam * A


def s_monte_carlo(params, loss, z, n_samples, rng):
    """Monte Carlo surrogate value and its standard error; ``loss`` must accept batches."""
    n = int(n_samples)
    if n <= 0:
        raise InvalidInputError("n_samples must be positive")
    lam = params.lam
    X = params.mu + rng.standard_normal((n, params.dim)) @ params.covariance_factor.T
    vals = (1.0 - 1.0 / lam) * np.asarray(loss(X)) + np.asarray(loss((1.0 - lam) * X + lam * np.asarray(z))) / lam
    se = vals.std(ddof=1) / np.sqrt(n) if n > 1 else np.inf
    return float(vals.mean()), float(se)
