"""Loss environments, noise, Lovász extensions and offline comparators.

Losses are defined in the original coordinates of the body and take values
in [0, 1] there. Adversarial schedules are oblivious: every round's loss is
fixed from the seed before the learner starts.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
import math

import numpy as np

from .errors import InvalidInputError
from .geometry import Box, _chord_extent, support

log = logging.getLogger(__name__)

GAUSSIAN_STD_MAX = math.sqrt(3.0 / 8.0)
UNIFORM_HALF_WIDTH_MAX = 0.8
STOCHASTIC, ADVERSARIAL = "stochastic", "adversarial"


@dataclasses.dataclass(frozen=True)
class NoiseModel:
    kind: str = "gaussian"
    scale: float = 0.1

    def __post_init__(self):
        if self.kind == "none":
            return
        if self.kind == "gaussian":
            if not 0 <= self.scale <= GAUSSIAN_STD_MAX + 1e-15:
                raise InvalidInputError(f"gaussian noise std must be in [0, sqrt(3/8)], got {self.scale}")
        elif self.kind == "bounded-uniform":
            if not 0 <= self.scale <= UNIFORM_HALF_WIDTH_MAX:
                raise InvalidInputError(f"uniform half-width must be in [0, 0.8], got {self.scale}")
        else:
            raise InvalidInputError(f"unknown noise kind {self.kind!r}")

    @classmethod
    def from_spec(cls, spec):
        if spec is None:
            return cls()
        kind = spec.get("kind", "gaussian")
        if kind == "none":
            return cls("none", 0.0)
        key = "half_width" if kind == "bounded-uniform" else "std"
        return cls(kind, float(spec.get(key, spec.get("scale", 0.1))))

    def to_spec(self):
        if self.kind == "none":
            return {"kind": "none"}
        key = "half_width" if self.kind == "bounded-uniform" else "std"
        return {"kind": self.kind, key: self.scale}

    def sample(self, rng, size=None):
        if self.kind == "none" or self.scale == 0:
            return np.zeros(size) if size is not None else 0.0
        if self.kind == "gaussian":
            return rng.normal(0.0, self.scale, size)
        return rng.uniform(-self.scale, self.scale, size)


class QuadraticLoss:
    """weight·||x - center||²."""

    def __init__(self, center, weight):
        self.center = np.asarray(center, dtype=float).ravel()
        self.weight = float(weight)

    def value(self, x):
        diff = np.asarray(x, dtype=float) - self.center
        return self.weight * np.sum(diff * diff, axis=-1)

    def grad(self, x):
        return 2.0 * self.weight * (np.asarray(x, dtype=float) - self.center)


class MaxAffineLoss:
    """(max_k <c_k, x> + o_k - lo) / (hi - lo); a single piece is a rescaled linear loss."""

    def __init__(self, slopes, offsets, lo, hi):
        self.slopes = np.atleast_2d(np.asarray(slopes, dtype=float))
        self.offsets = np.asarray(offsets, dtype=float).ravel()
        if not hi - lo > 1e-12:
            raise InvalidInputError("affine pieces are constant on the body; cannot rescale")
        self.lo, self.span = float(lo), float(hi - lo)

    def _raw(self, x):
        return np.asarray(x, dtype=float) @ self.slopes.T + self.offsets

    def value(self, x):
        return (self._raw(x).max(axis=-1) - self.lo) / self.span

    def grad(self, x):
        return self.slopes[int(np.argmax(self._raw(x)))] / self.span


def _subset_table(F, d):
    """F on every subset, indexed by bitmask."""
    table = np.empty(2 ** d)
    for mask in range(2 ** d):
        table[mask] = F(frozenset(i for i in range(d) if mask >> i & 1))
    return table


def _check_unit_cube(x, tol=1e-9):
    x = np.asarray(x, dtype=float)
    if np.any(x < -tol) or np.any(x > 1.0 + tol):
        raise InvalidInputError("Lovász extension needs x in [0, 1]^d")
    return np.clip(x, 0.0, 1.0)


def _lovasz_from_table(table, x):
    x = np.atleast_2d(x)
    order = np.argsort(-x, axis=1, kind="stable")
    bits = np.cumsum(1 << order, axis=1)
    chain = table[bits]
    prev = np.hstack([np.full((len(x), 1), table[0]), chain[:, :-1]])
    xs = np.take_along_axis(x, order, axis=1)
    return np.sum(xs * (chain - prev), axis=1), order, chain - prev


def lovasz_extension(F, x, d=None):
    """Σ_i x_(i) (F(S_i) - F(S_{i-1})) with coordinates sorted in decreasing order."""
    x = _check_unit_cube(x)
    d = x.shape[-1] if d is None else d
    table = F if isinstance(F, np.ndarray) else _subset_table(F, d)
    if abs(table[0]) > 1e-12:
        raise InvalidInputError("set function must vanish on the empty set")
    vals, _, _ = _lovasz_from_table(table, x)
    return float(vals[0]) if x.ndim == 1 else vals


def lovasz_subgradient(F, x, d=None):
    x = _check_unit_cube(x)
    d = len(x) if d is None else d
    table = F if isinstance(F, np.ndarray) else _subset_table(F, d)
    _, order, incr = _lovasz_from_table(table, x)
    g = np.empty(d)
    g[order[0]] = incr[0]
    return g


def is_submodular(F, d, tol=1e-12):
    """Exhaustive check of F(S∩T) + F(S∪T) <= F(S) + F(T)."""
    table = F if isinstance(F, np.ndarray) else _subset_table(F, d)
    for s, t in itertools.combinations(range(2 ** d), 2):
        if table[s & t] + table[s | t] > table[s] + table[t] + tol:
            return False
    return True


def brute_force_minimum(F, d):
    table = F if isinstance(F, np.ndarray) else _subset_table(F, d)
    mask = int(np.argmin(table))
    return frozenset(i for i in range(d) if mask >> i & 1), float(table[mask])


def cut_function(d, edges, unary=None):
    """Graph cut plus a modular term: F(S) = Σ_{edges crossing S} w + Σ_{i in S} unary_i.

    The modular term is what a source/sink pair contributes once F(∅) is
    normalised to zero, so the minimiser can be a proper nonempty subset.
    """
    edges = [(int(i), int(j), float(w)) for i, j, w in edges]
    if any(w < 0 for _, _, w in edges):
        raise InvalidInputError("cut weights must be nonnegative")
    unary = np.zeros(d) if unary is None else np.asarray(unary, dtype=float)

    def F(S):
        cut = sum(w for i, j, w in edges if (i in S) != (j in S))
        return cut + sum(unary[i] for i in S)

    return F


class LovaszLoss:
    """Lovász extension of a set function, affinely rescaled to [0, 1] on the unit cube."""

    def __init__(self, F, d):
        self.d = d
        self.table = _subset_table(F, d) if callable(F) else np.asarray(F, dtype=float)
        if abs(self.table[0]) > 1e-12:
            raise InvalidInputError("set function must vanish on the empty set")
        self.lo, hi = float(self.table.min()), float(self.table.max())
        if hi - self.lo <= 1e-12:
            raise InvalidInputError("constant set function; cannot rescale")
        self.span = hi - self.lo

    def set_value(self, S):
        return float(self.table[sum(1 << i for i in S)])

    def value(self, x):
        vals = lovasz_extension(self.table, x, self.d)
        return (vals - self.lo) / self.span

    def grad(self, x):
        return lovasz_subgradient(self.table, x, self.d) / self.span


class LossOracle:
    """Per-round losses with a noisy bandit query and a noiseless white-box value.

    ``losses`` holds one loss (used in every round) or one per round.
    """

    def __init__(self, losses, mode=STOCHASTIC, noise=None, dim=None):
        if not isinstance(losses, (list, tuple)):
            losses = [losses]
        if not losses:
            raise InvalidInputError("need at least one loss")
        if mode not in (STOCHASTIC, ADVERSARIAL):
            raise InvalidInputError(f"unknown mode {mode!r}")
        self.losses = list(losses)
        self.mode = mode
        self.noise = NoiseModel() if noise is None else noise
        self.dim = dim
        self.stationary = len(self.losses) == 1
        self._quad = None
        if all(isinstance(l, QuadraticLoss) for l in self.losses):
            self._quad = (np.stack([l.center for l in self.losses]),
                          np.array([l.weight for l in self.losses]))

    @property
    def horizon(self):
        return None if self.stationary else len(self.losses)

    def loss_at(self, t):
        if self.stationary:
            return self.losses[0]
        if not 1 <= t <= len(self.losses):
            raise InvalidInputError(f"round {t} outside the schedule")
        return self.losses[t - 1]

    def value(self, t, x):
        v = self.loss_at(t).value(x)
        return float(v) if np.ndim(v) == 0 else v

    def query(self, t, x, rng):
        return self.value(t, x) + float(self.noise.sample(rng))

    def _rounds(self, n):
        if self.stationary:
            return [(self.losses[0], 1.0)]
        n = len(self.losses) if n is None else n
        counts = {}
        for l in self.losses[:n]:
            key = id(l)
            counts[key] = (l, counts.get(key, (l, 0))[1] + 1)
        return [(l, c / n) for l, c in counts.values()]

    def mean_value_grad(self, x, n=None):
        """Average noiseless loss over rounds 1..n and a subgradient of it."""
        x = np.asarray(x, dtype=float)
        if self._quad is not None:
            centers, weights = self._quad
            if not self.stationary:
                k = len(centers) if n is None else n
                centers, weights = centers[:k], weights[:k]
            diff = x - centers
            vals = weights * np.sum(diff * diff, axis=1)
            return float(vals.mean()), 2.0 * (weights @ diff) / len(weights)
        value, grad = 0.0, np.zeros_like(x)
        for loss, frac in self._rounds(n):
            value += frac * float(loss.value(x))
            grad += frac * loss.grad(x)
        return value, grad

    def quadratic_closed_form(self, n=None):
        """(mean center, weight) when every round is a quadratic of one common weight."""
        if self._quad is None:
            return None
        centers, weights = self._quad
        if not self.stationary:
            k = len(centers) if n is None else n
            centers, weights = centers[:k], weights[:k]
        if np.ptp(weights) > 1e-15 * weights.max():
            return None
        return centers.mean(axis=0), float(weights[0])


def _max_distance(body, a):
    if hasattr(body, "max_distance"):
        return body.max_distance(a)
    return 4.0 * (body.dim + 1)


def make_quadratic(body, center, scale=1.0, mode=STOCHASTIC, noise=None):
    """scale·||x - center||² / D² with D an upper bound on the distance from center to K."""
    if not 0 < scale <= 1:
        raise InvalidInputError("quadratic scale must lie in (0, 1]")
    center = np.asarray(center, dtype=float).ravel()
    if not body.contains(center):
        raise InvalidInputError("quadratic center must lie in the body")
    weight = scale / _max_distance(body, center) ** 2
    return LossOracle(QuadraticLoss(center, weight), mode, noise, body.dim)


def make_linear(body, c, mode=STOCHASTIC, noise=None):
    return make_maxlinear(body, [(c, 0.0)], mode, noise)


def _maxlinear_loss(body, pieces):
    slopes = np.atleast_2d([np.asarray(p[0], dtype=float) for p in pieces])
    offsets = np.array([float(p[1]) for p in pieces])
    hi = max(support(body, s) + o for s, o in zip(slopes, offsets))
    # max over pieces of each piece's minimum: exact for one piece, a lower bound otherwise
    lo = max(-support(body, -s) + o for s, o in zip(slopes, offsets))
    return MaxAffineLoss(slopes, offsets, lo, hi)


def make_maxlinear(body, pieces, mode=STOCHASTIC, noise=None):
    """Max of affine pieces ``(slope, offset)`` rescaled into [0, 1] on the body."""
    if not pieces:
        raise InvalidInputError("need at least one affine piece")
    return LossOracle(_maxlinear_loss(body, pieces), mode, noise, body.dim)


def random_interior_point(body, rng, fraction=0.5):
    """A point on a random ray from the body's interior point, at most ``fraction`` of the way out."""
    start = body.interior_point()
    u = rng.standard_normal(body.dim)
    u /= np.linalg.norm(u)
    reach = _chord_extent(body, start[None, :], u[None, :])[0]
    return start + fraction * rng.uniform() * reach * u


def quadratic_schedule(body, n, kind, rng, centers=None, scale=1.0, noise=None):
    """Oblivious quadratic sequence: ``fixed``, ``drift`` (linear path a→b) or ``switch`` (a, then b after n/2)."""
    if kind not in ("fixed", "drift", "switch"):
        raise InvalidInputError(f"unknown schedule {kind!r}")
    if centers is None:
        a = random_interior_point(body, rng)
        b = random_interior_point(body, rng)
    else:
        a = np.asarray(centers[0], dtype=float)
        b = np.asarray(centers[-1], dtype=float)
    if kind == "fixed":
        return make_quadratic(body, a, scale, ADVERSARIAL, noise)
    if not (body.contains(a) and body.contains(b)):
        raise InvalidInputError("schedule centers must lie in the body")
    # one normaliser for the whole path keeps every round in [0, 1]
    weight = scale / max(_max_distance(body, a), _max_distance(body, b)) ** 2
    if kind == "switch":
        first, second = QuadraticLoss(a, weight), QuadraticLoss(b, weight)
        half = n // 2
        return LossOracle([first] * half + [second] * (n - half), ADVERSARIAL, noise, body.dim)
    frac = np.arange(n) / max(n - 1, 1)
    losses = [QuadraticLoss((1 - s) * a + s * b, weight) for s in frac]
    return LossOracle(losses, ADVERSARIAL, noise, body.dim)


def make_lovasz(F, d, mode=STOCHASTIC, noise=None):
    return LossOracle(LovaszLoss(F, d), mode, noise, d)


def build_oracle(spec, body, n, mode, rng):
    """Build a LossOracle from its JSON description (see the README for the keys)."""
    kind = spec.get("loss")
    noise = NoiseModel.from_spec(spec.get("noise"))
    schedule = spec.get("schedule", {"kind": "fixed"})
    try:
        if kind == "quadratic":
            sched = schedule.get("kind", "fixed")
            center = spec.get("center")
            if sched == "fixed":
                if center is None:
                    center = random_interior_point(body, rng)
                return make_quadratic(body, center, float(spec.get("scale", 1.0)), mode, noise)
            if mode != ADVERSARIAL:
                raise InvalidInputError("non-fixed schedules need the adversarial mode")
            return quadratic_schedule(body, n, sched, rng, schedule.get("centers"),
                                      float(spec.get("scale", 1.0)), noise)
        if kind == "linear":
            return make_linear(body, spec["c"], mode, noise)
        if kind == "maxlinear":
            return make_maxlinear(body, [(p[0], p[1]) for p in spec["pieces"]], mode, noise)
        if kind == "lovasz-cut":
            d = body.dim
            if not (isinstance(body, Box) and np.allclose(body.lo, 0) and np.allclose(body.hi, 1)):
                raise InvalidInputError("lovasz-cut needs the unit cube body")
            F = cut_function(d, spec["edges"], spec.get("unary"))
            return make_lovasz(F, d, mode, noise)
    except (KeyError, TypeError, IndexError) as exc:
        raise InvalidInputError(f"bad loss spec {spec!r}: {exc}") from exc
    raise InvalidInputError(f"unknown loss {kind!r}")


def best_fixed_point(oracle, pos, n=None, iters=1500):
    """Comparator minimising the average loss of rounds 1..n over K.

    Projected subgradient descent in positioned coordinates with normalised
    steps D/√k and best-iterate tracking; for quadratic sequences of a common
    weight the closed form (projection of the mean center) is also tried and
    the better point kept. Returns ``(x_star, mean_loss)`` in original coordinates.
    """
    image = pos.image
    Tinv_T = np.linalg.inv(pos.T).T

    def mean_loss(y):
        v, g = oracle.mean_value_grad(pos.to_original(y), n)
        return v, Tinv_T @ g

    y = np.zeros(pos.dim)
    best_y, (best_v, g) = y, mean_loss(y)
    D = 2.0 * image.max_distance(np.zeros(pos.dim)) if hasattr(image, "max_distance") else 8.0 * (pos.dim + 1)
    for k in range(1, iters + 1):
        gn = float(np.linalg.norm(g))
        if gn == 0.0:
            break
        y = image.project(y - (D / math.sqrt(k)) * g / gn)
        v, g = mean_loss(y)
        if v < best_v:
            best_y, best_v = y, v

    closed = oracle.quadratic_closed_form(n)
    if closed is not None and pos.body.has_projection:
        x_cf = pos.body.project(closed[0])
        v_cf, _ = oracle.mean_value_grad(x_cf, n)
        gap = np.linalg.norm(x_cf - pos.to_original(best_y))
        if gap > 1e-2:
            log.info("comparator: subgradient point %.3g away from the closed form", gap)
        if v_cf <= best_v:
            return x_cf, float(v_cf)
    return pos.to_original(best_y), float(best_v)


def true_regret(oracle, actions, x_star, losses_at_actions=None):
    """Prefix sums of ℓ_t(A_t) - ℓ_t(x_star)."""
    n = len(actions)
    if n == 0:
        return np.zeros(0)
    if losses_at_actions is None:
        played = np.array([oracle.value(t + 1, a) for t, a in enumerate(actions)])
    else:
        played = np.asarray(losses_at_actions, dtype=float)
    if oracle.stationary:
        ref = np.full(n, oracle.value(1, x_star))
    else:
        ref = np.array([oracle.value(t, x_star) for t in range(1, n + 1)])
    return np.cumsum(played - ref)
