"""Convex extension of a loss on K_eps to all of R^d, queried through the bandit oracle."""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import InvalidInputError
from .geometry import pip


@dataclasses.dataclass(frozen=True)
class MetaQuery:
    """A meta point ``X`` and the action ``A = X / π⁺(X)`` actually played."""

    X: np.ndarray
    A: np.ndarray
    multiplier: float
    nudge: float


@dataclasses.dataclass(frozen=True)
class ExtendedObservation:
    Y: float
    raw_loss: float | None = None
    noise: float | None = None


def make_query(pos, X):
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("meta point has non-finite coordinates")
    mult = float(pip(pos, X))
    return MetaQuery(X, X / mult, mult, (mult - 1.0) / pos.epsilon)


def assemble_Y(q, observed):
    """Extended observation π⁺(X)·(ℓ(A) + noise) + 2 v(X).

    ``q`` must be the query that produced the action; its multiplier is
    reused rather than recomputed so the identity holds exactly.
    """
    if not np.isfinite(observed):
        raise InvalidInputError("non-finite observation")
    return q.multiplier * float(observed) + 2.0 * q.nudge


def extend_eval(pos, loss, x):
    """Noiseless value of the extension at ``x`` (white-box; tests and accounting only).

    ``x`` may be a batch of points when ``loss`` accepts batches.
    """
    x = np.asarray(x, dtype=float)
    p = pip(pos, x)
    if np.ndim(p):
        a = x / p[..., None]
        return p * np.asarray(loss(a)) + 2.0 * (p - 1.0) / pos.epsilon
    return p * float(loss(x / p)) + 2.0 * (p - 1.0) / pos.epsilon
