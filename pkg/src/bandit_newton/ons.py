"""Online Newton step over Gaussian meta-actions with focus regions, bonuses and restarts.

One round of the learner:

1. minimise the quadratic potential over K_eps ∩ focus region to get the
   iterate mu and precision (the potential's Hessian);
2. sample X ~ N(mu, Sigma), play the radial projection A of X and turn the
   bandit feedback into the extended observation Y;
3. estimate the surrogate gradient/Hessian at mu and add the quadratic
   estimate to the potential;
4. shrink the focus region around mu;
5. adversarial mode only: possibly subtract a bonus quadratic, then test
   whether the estimated surrogate regret is negative enough to restart.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math

import numpy as np

from . import environments
from .errors import AlgorithmFault, BanditNewtonError, InvalidInputError, RatioOverflowError
from .extension import assemble_Y, make_query
from .qp import EllipsoidConstraint, FocusRegion, floor_eigenvalues, minimize_quadratic, \
    minimize_smooth_convex
from .surrogate import LOG_RATIO_MAX, SurrogateParams, estimate

log = logging.getLogger(__name__)

ADVERSARIAL = "adversarial"
STOCHASTIC = "stochastic"
EPS_CAP = 0.49
EIG_FLOOR_REL = 1e-10
CSV_COLUMNS = ("epoch", "t", "Y", "pip", "m", "restart", "cum_true_regret", "cum_shat_stat")


@dataclasses.dataclass(frozen=True)
class AlgoConstants:
    n: int
    d: int
    delta: float
    C_log: float
    L: float
    eta: float
    lam: float
    sigma_sq: float
    gamma: float
    epsilon: float
    F_max: float
    mode: str
    M: float | None = None
    warnings: tuple = ()

    def validate(self):
        if self.mode not in (ADVERSARIAL, STOCHASTIC):
            raise InvalidInputError(f"unknown mode {self.mode!r}")
        for name in ("L", "eta", "lam", "sigma_sq", "epsilon", "F_max", "C_log"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidInputError(f"constant {name} must be positive, got {v}")
        if not 0 < self.lam < 1:
            raise InvalidInputError("lambda must lie in (0, 1)")
        if not 0 < self.epsilon < 0.5:
            raise InvalidInputError("epsilon must lie in (0, 1/2)")
        if self.mode == STOCHASTIC and self.gamma != 0:
            raise InvalidInputError("gamma must be 0 in the stochastic setting")
        if self.mode == ADVERSARIAL and not 0 < self.gamma < 0.5:
            raise InvalidInputError("gamma must lie in (0, 1/2) in the adversarial setting")
        return self

    def with_overrides(self, **overrides):
        """Replace any of eta, lam, sigma_sq, gamma, epsilon, F_max (validated)."""
        allowed = {"eta", "lam", "sigma_sq", "gamma", "epsilon", "F_max"}
        unknown = set(overrides) - allowed
        if unknown:
            raise InvalidInputError(f"cannot override {sorted(unknown)}")
        clean = {k: float(v) for k, v in overrides.items() if v is not None}
        return dataclasses.replace(self, **clean).validate()

    @property
    def restart_threshold(self):
        return -(160.0 * self.F_max / (self.d ** 2 * self.L ** 2.5) + self.gamma * self.F_max / 32.0)

    @property
    def convexifier(self):
        """Coefficient of the quadratic that makes the restart objective convex."""
        return 160.0 * self.lam * self.L ** 3 * math.sqrt(self.n * self.d)


def log_factor(n, d, delta, C_log):
    if n < 1 or d < 1:
        raise InvalidInputError("n and d must be at least 1")
    if not 0 < delta < 1:
        raise InvalidInputError("delta must lie in (0, 1)")
    return C_log * (1.0 + math.log(max(n, d, 1.0 / delta)))


def _clamp_epsilon(eps, warnings):
    if eps > EPS_CAP:
        warnings.append(f"epsilon {eps:.4g} clamped to {EPS_CAP}: horizon too short for the theory")
        return EPS_CAP
    return eps


def constants_adversarial(n, d, delta, C_log=1.0):
    L = log_factor(n, d, delta, C_log)
    warnings = []
    eps = _clamp_epsilon(d ** 3.5 * L ** 8.5 / math.sqrt(n), warnings)
    return AlgoConstants(
        n=int(n), d=int(d), delta=float(delta), C_log=float(C_log), L=L,
        eta=math.sqrt(d / (n * L ** 3)),
        lam=1.0 / (d ** 3 * L ** 5),
        sigma_sq=1.0 / d ** 2,
        gamma=1.0 / (4 * d * L),
        epsilon=eps,
        F_max=d ** 5 * L ** 8,
        mode=ADVERSARIAL,
        warnings=tuple(warnings),
    ).validate()


def constants_stochastic(n, d, delta, M, C_log=1.0):
    if not d ** -0.5 - 1e-12 <= M:
        raise InvalidInputError("M must be at least d^{-1/2}")
    L = log_factor(n, d, delta, C_log)
    warnings = []
    lam = 5.0 / (M * d ** 1.5 * L ** 3)
    if lam >= 1.0:
        warnings.append(f"lambda {lam:.4g} >= 1 clamped to 0.5")
        lam = 0.5
    eps = _clamp_epsilon(M * d ** 2 * L ** 5 / math.sqrt(n), warnings)
    return AlgoConstants(
        n=int(n), d=int(d), delta=float(delta), C_log=float(C_log), L=L,
        eta=M * d / math.sqrt(n),
        lam=lam,
        sigma_sq=1.0 / (16 * M ** 2 * d * L ** 3),
        gamma=0.0,
        epsilon=eps,
        F_max=25 * M ** 2 * d ** 3 * L ** 5,
        mode=STOCHASTIC,
        M=float(M),
        warnings=tuple(warnings),
    ).validate()


class QuadraticPotential:
    """Φ(x) = ½ xᵀPx + bᵀx + c, kept in exact matrix/vector/scalar form."""

    def __init__(self, d, sigma_sq):
        self.P = np.eye(d) / sigma_sq
        self.b = np.zeros(d)
        self.c = 0.0

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * x @ self.P @ x + self.b @ x + self.c

    def grad(self, x):
        return self.P @ x + self.b

    def add_quadratic(self, weight, g, H, center):
        """Add weight·(<g, x - center> + ¼||x - center||²_H)."""
        Hc = H @ center
        self.P = self.P + 0.5 * weight * H
        self.b = self.b + weight * (g - 0.5 * Hc)
        self.c += weight * (-g @ center + 0.25 * center @ Hc)

    def add_bonus(self, gamma, metric, center):
        """Add -gamma·||x - center||²_metric."""
        Mc = metric @ center
        self.P = self.P - 2.0 * gamma * metric
        self.b = self.b + 2.0 * gamma * Mc
        self.c -= gamma * center @ Mc

    def copy(self):
        other = QuadraticPotential.__new__(QuadraticPotential)
        other.P, other.b, other.c = self.P.copy(), self.b.copy(), self.c
        return other


class BonusLedger:
    """Rounds whose bonus fired, with running sums for z and the dispersion test."""

    def __init__(self, d, gamma):
        self.gamma = gamma
        self.entries = []
        self.metric_sum = np.zeros((d, d))
        self.weighted_center_sum = np.zeros(d)
        self.center_norm_sum = 0.0

    @property
    def m(self):
        return len(self.entries)

    @property
    def w(self):
        return (1.0 - 2.0 * self.gamma) ** self.m

    def append(self, mu, precision):
        mu = np.array(mu, dtype=float)
        precision = np.array(precision, dtype=float)
        Sm = precision @ mu
        self.entries.append((mu, precision))
        self.metric_sum += precision
        self.weighted_center_sum += Sm
        self.center_norm_sum += float(mu @ Sm)

    def dispersion(self, z):
        """Σ_s ||z - mu_s||²_{S_s}."""
        return float(z @ self.metric_sum @ z - 2.0 * z @ self.weighted_center_sum
                     + self.center_norm_sum)


class SurrogateHistory:
    """Stored per-round estimates ŝ_u, evaluated jointly as functions of y.

    With a_u = X_u/(1-λ) - μ_u and k = λ/(1-λ), the ratio exponent is
    base_u + k<S_u a_u, y> - ½k²||y||²_{S_u}, so each evaluation is a few
    matrix-vector products over the stacked history.
    """

    def __init__(self, d, lam, capacity=64):
        self.d, self.lam, self.size = d, lam, 0
        self.k = lam / (1.0 - lam)
        self.X = np.empty((capacity, d))
        self.Y = np.empty(capacity)
        self.mu = np.empty((capacity, d))
        self._Sflat = np.empty((capacity, d * d))
        self._Sa = np.empty((capacity, d))
        self._base = np.empty(capacity)

    def __len__(self):
        return self.size

    @property
    def S(self):
        return self._Sflat[:self.size].reshape(self.size, self.d, self.d)

    def append(self, params, X, Y):
        k = self.size
        if k == len(self.Y):
            cap = 2 * k
            self.X = np.resize(self.X, (cap, self.d))
            self.Y = np.resize(self.Y, cap)
            self.mu = np.resize(self.mu, (cap, self.d))
            self._Sflat = np.resize(self._Sflat, (cap, self.d * self.d))
            self._Sa = np.resize(self._Sa, (cap, self.d))
            self._base = np.resize(self._base, cap)
        S = params.precision
        diff = X - params.mu
        a = X / (1.0 - self.lam) - params.mu
        Sa = S @ a
        self.X[k], self.Y[k], self.mu[k] = X, Y, params.mu
        self._Sflat[k] = S.ravel()
        self._Sa[k] = Sa
        self._base[k] = -self.d * math.log1p(-self.lam) + 0.5 * (diff @ S @ diff - a @ Sa)
        self.size += 1

    def _ratios(self, logr):
        top = float(np.max(logr))
        if top > LOG_RATIO_MAX:
            raise RatioOverflowError(top)
        return np.exp(logr)

    def value_grad(self, y):
        """Σ_u ŝ_u(y) and its gradient."""
        n, lam, k = self.size, self.lam, self.k
        if n == 0:
            return 0.0, np.zeros(self.d)
        y = np.asarray(y, dtype=float)
        Sa, Sflat = self._Sa[:n], self._Sflat[:n]
        logr = self._base[:n] + k * (Sa @ y) - 0.5 * k * k * (Sflat @ np.outer(y, y).ravel())
        R = self._ratios(logr)
        Y = self.Y[:n]
        value = float(np.sum(Y * (1.0 + (R - 1.0) / lam)))
        coef = Y * R / (1.0 - lam)
        grad = coef @ Sa - k * (coef @ Sflat).reshape(self.d, self.d) @ y
        return value, grad

    def values(self, points):
        """Σ_u ŝ_u(y) for each row y of ``points``."""
        n, lam, k = self.size, self.lam, self.k
        P = np.atleast_2d(np.asarray(points, dtype=float))
        if n == 0:
            return np.zeros(len(P))
        outer = (P[:, :, None] * P[:, None, :]).reshape(len(P), -1)
        logr = self._base[:n] + k * (P @ self._Sa[:n].T) - 0.5 * k * k * (outer @ self._Sflat[:n].T)
        R = self._ratios(logr)
        return np.sum(self.Y[:n] * (1.0 + (R - 1.0) / lam), axis=1)


@dataclasses.dataclass
class EpochState:
    d: int
    sigma_sq: float
    lam: float
    gamma: float
    t: int = 0
    potential: QuadraticPotential = None
    focus: FocusRegion = None
    ledger: BonusLedger = None
    history: SurrogateHistory = None
    mu: np.ndarray = None
    precision: np.ndarray = None
    precision_raw: np.ndarray = None
    covariance_factor: np.ndarray = None
    shat_at_mu_sum: float = 0.0
    floor_events: int = 0

    @classmethod
    def fresh(cls, constants):
        d = constants.d
        return cls(
            d=d, sigma_sq=constants.sigma_sq, lam=constants.lam, gamma=constants.gamma,
            potential=QuadraticPotential(d, constants.sigma_sq),
            focus=FocusRegion(d),
            ledger=BonusLedger(d, constants.gamma),
            history=SurrogateHistory(d, constants.lam),
            mu=np.zeros(d),
        )


def potential_ingest(potential, eta, g, H, mu, bonus=None):
    """Add η·q̂ (and optionally the bonus ``(gamma, metric)``) to the potential.

    When the bonus metric is the pre-update Hessian the result satisfies
    P_new = (1 - 2γ)·P_old + (η/2)·H; this is checked.
    """
    P_old = potential.P
    potential.add_quadratic(eta, g, H, mu)
    gamma = 0.0
    if bonus is not None:
        gamma, metric = bonus
        potential.add_bonus(gamma, metric, mu)
        if metric is P_old or np.array_equal(metric, P_old):
            expected = (1.0 - 2.0 * gamma) * P_old + 0.5 * eta * H
            err = np.linalg.norm(potential.P - expected) / max(np.linalg.norm(expected), 1e-300)
            assert err <= 1e-10, f"precision recursion broken (relative error {err:.3g})"
    potential.P = 0.5 * (potential.P + potential.P.T)
    return potential


def compute_iterate_and_covariance(state, pos, constants=None):
    """μ = argmin over K_eps ∩ focus of Φ, precision = floored Φ'', and Σ^{1/2}."""
    floor = EIG_FLOOR_REL / state.sigma_sq
    P_raw = state.potential.P
    P, evals, evecs, floored = floor_eigenvalues(P_raw, floor)
    if floored:
        state.floor_events += 1
        log.info("precision eigenvalue floored (min %.3g) at round %d", np.linalg.eigvalsh(P_raw)[0], state.t)
    res = minimize_quadratic(P, state.potential.b, pos, state.focus, x0=state.mu,
                             eig_floor=floor)
    if not res.converged:
        log.warning("iterate solve did not converge at round %d", state.t)
    state.mu = res.x
    state.precision = P
    state.precision_raw = P_raw
    state.covariance_factor = (evecs / np.sqrt(evals)) @ evecs.T
    return state.mu, state.precision, state.covariance_factor


def sample_meta_action(mu, covariance_factor, rng):
    return mu + covariance_factor @ rng.standard_normal(len(mu))


def update_focus(state, mu, precision, F_max):
    con = EllipsoidConstraint(mu, precision, F_max)
    state.focus.append(con)
    return con


def compute_z(ledger, mu=None):
    """Minimiser of Σ_s ||z - mu_s||²_{S_s} over the bonus rounds (``mu`` if there are none)."""
    if ledger.m == 0:
        return None if mu is None else np.array(mu, dtype=float)
    try:
        return np.linalg.solve(ledger.metric_sum, ledger.weighted_center_sum)
    except np.linalg.LinAlgError as exc:
        raise BanditNewtonError("singular bonus-ledger aggregate") from exc


def bonus_decision(ledger, z, mu, precision, F_max, gamma=None):
    """Evaluate the four bonus cases in order; return ``(fires, case)`` with case in 1..4."""
    if ledger.dispersion(z) >= F_max / 24.0:
        return False, 1
    gap = np.linalg.eigvalsh(ledger.metric_sum - precision)[0]
    if gap < -1e-10 * np.linalg.norm(precision, 2):
        return True, 2
    diff = mu - z
    if diff @ precision @ diff >= F_max / 3.0:
        return True, 3
    return False, 4


@dataclasses.dataclass
class RestartCheck:
    restart: bool
    statistic: float
    threshold: float
    solved: bool
    y: np.ndarray


def convexified_objective(state, constants):
    """y ↦ (Σ_u ŝ_u(y) + Q(y), gradient) with Q(y) = κ||y - mu_t||²_{Σ_t^{-1}}."""
    kappa = constants.convexifier
    mu, S = state.mu, state.precision

    def G(y):
        v, g = state.history.value_grad(y)
        diff = y - mu
        Sd = S @ diff
        return v + kappa * float(diff @ Sd), g + 2.0 * kappa * Sd

    return G


def restart_test(state, constants, pos, exact=False):
    """Convexified restart test.

    Restart iff η·(Σ_u ŝ_u(μ_u) - min_{K_t} G) is at most the (negative)
    threshold. Evaluating G at μ_t already gives a lower bound on the
    statistic; when that bound clears the threshold the minimisation is
    skipped unless ``exact`` is set. The returned statistic is always the
    value at the best point evaluated.
    """
    threshold = constants.restart_threshold
    G = convexified_objective(state, constants)
    g_mu, _ = G(state.mu)
    stat = constants.eta * (state.shat_at_mu_sum - g_mu)
    y = state.mu
    solved = False
    if exact or stat <= threshold:
        res = minimize_smooth_convex(G, pos, state.focus, x0=state.mu)
        solved = True
        if res.value < g_mu:
            y = res.x
            stat = constants.eta * (state.shat_at_mu_sum - res.value)
    return RestartCheck(bool(stat <= threshold), float(stat), threshold, solved, y)


@dataclasses.dataclass
class RegretTrace:
    """Per-round record of a run; arrays are indexed by global round."""

    d: int
    epoch: list = dataclasses.field(default_factory=list)
    t: list = dataclasses.field(default_factory=list)
    X: list = dataclasses.field(default_factory=list)
    A: list = dataclasses.field(default_factory=list)
    mu: list = dataclasses.field(default_factory=list)
    Y: list = dataclasses.field(default_factory=list)
    pip: list = dataclasses.field(default_factory=list)
    m: list = dataclasses.field(default_factory=list)
    restart: list = dataclasses.field(default_factory=list)
    bonus_case: list = dataclasses.field(default_factory=list)
    loss: list = dataclasses.field(default_factory=list)
    shat_stat: list = dataclasses.field(default_factory=list)
    cum_true_regret: np.ndarray = None
    x_star: np.ndarray = None
    restarts: int = 0
    bonuses: int = 0
    floor_events: int = 0
    empty_ledger_bonus_rounds: list = dataclasses.field(default_factory=list)
    fault: str | None = None
    final_mu: np.ndarray = None
    final_w: float = 1.0
    instrumentation: dict | None = None

    def __len__(self):
        return len(self.t)

    @property
    def cum_shat_stat(self):
        return np.asarray(self.shat_stat, dtype=float)

    @property
    def final_regret(self):
        if self.cum_true_regret is None or len(self.cum_true_regret) == 0:
            return 0.0
        return float(self.cum_true_regret[-1])

    @property
    def max_bonus_count(self):
        return max(self.m) if self.m else 0

    def rows(self):
        cum = self.cum_true_regret if self.cum_true_regret is not None else np.full(len(self), np.nan)
        for i in range(len(self)):
            yield (self.epoch[i], self.t[i], self.Y[i], self.pip[i], self.m[i], int(self.restart[i]),
                   float(cum[i]), self.shat_stat[i])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for row in self.rows():
                writer.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def run(env, pos, constants, rng, *, record_matrices=False, exact_restart=False,
        noise_rng=None, compute_regret=True):
    """Play ``constants.n`` rounds against ``env`` and return the trace.

    ``env`` is a :class:`~bandit_newton.environments.LossOracle` whose losses
    live in the original coordinates of ``pos.body``. The learner only sees
    the noisy value returned by ``env.query``; noiseless values are recorded
    separately for regret accounting. Any error aborts the run and is raised
    as :class:`AlgorithmFault` carrying the trace so far.
    """
    constants.validate()
    for msg in constants.warnings:
        log.warning(msg)
    if abs(pos.epsilon - constants.epsilon) > 1e-15:
        pos = pos.with_epsilon(constants.epsilon)
    n, d = constants.n, constants.d
    if pos.dim != d:
        raise InvalidInputError("body and constants disagree on the dimension")
    if env.horizon is not None and env.horizon < n:
        raise InvalidInputError("environment horizon shorter than n")
    noise_rng = rng if noise_rng is None else noise_rng
    adversarial = constants.mode == ADVERSARIAL
    trace = RegretTrace(d=d)
    if record_matrices:
        trace.instrumentation = {"precision_raw": [], "precision_next_raw": [], "H": [],
                                 "gamma_t": [], "main_text_precision": [], "phi_form_precision": []}
    state = EpochState.fresh(constants)
    epoch = 0
    main_sum = np.zeros((d, d))

    try:
        for t in range(1, n + 1):
            state.t += 1
            mu, S, factor = compute_iterate_and_covariance(state, pos, constants)
            P_raw = state.precision_raw
            X = sample_meta_action(mu, factor, rng)
            q = make_query(pos, X)
            a_orig = pos.to_original(q.A)
            observed = env.query(t, a_orig, noise_rng)
            Y = assemble_Y(q, observed)
            params = SurrogateParams(constants.lam, mu, S, factor)
            est = estimate(params, X, Y, mu)
            state.history.append(params, X, Y)
            state.shat_at_mu_sum += est.value
            update_focus(state, mu, S, constants.F_max)

            fires, case = False, 0
            if adversarial:
                empty = state.ledger.m == 0
                z = compute_z(state.ledger, mu)
                fires, case = bonus_decision(state.ledger, z, mu, S, constants.F_max, constants.gamma)
                if fires and empty:
                    trace.empty_ledger_bonus_rounds.append(t)
            w_prev = state.ledger.w
            potential_ingest(state.potential, constants.eta, est.grad, est.hess, mu,
                             bonus=(constants.gamma, P_raw) if fires else None)
            if fires:
                state.ledger.append(mu, S)
                trace.bonuses += 1

            if record_matrices:
                ins = trace.instrumentation
                ins["precision_raw"].append(P_raw.copy())
                ins["precision_next_raw"].append(state.potential.P.copy())
                ins["H"].append(est.hess.copy())
                ins["gamma_t"].append(constants.gamma if fires else 0.0)
                # both closed forms of Σ_t^{-1}: with and without the ½ on η Σ H_u / w_u
                ins["main_text_precision"].append(w_prev * (np.eye(d) / constants.sigma_sq + constants.eta * main_sum))
                ins["phi_form_precision"].append(w_prev * (np.eye(d) / constants.sigma_sq + 0.5 * constants.eta * main_sum))
                main_sum = main_sum + est.hess / state.ledger.w

            restart = False
            check = None
            if adversarial:
                check = restart_test(state, constants, pos, exact=exact_restart)
                restart = check.restart
                stat = check.statistic
            else:
                v_mu, _ = state.history.value_grad(mu)
                stat = constants.eta * (state.shat_at_mu_sum - v_mu)

            trace.epoch.append(epoch)
            trace.t.append(t)
            trace.X.append(X)
            trace.A.append(a_orig)
            trace.mu.append(pos.to_original(mu))
            trace.Y.append(Y)
            trace.pip.append(q.multiplier)
            trace.m.append(state.ledger.m)
            trace.restart.append(restart)
            trace.bonus_case.append(case)
            trace.loss.append(env.value(t, a_orig))
            trace.shat_stat.append(stat)
            trace.final_w = state.ledger.w

            if restart:
                log.info("restart after round %d (statistic %.4g <= %.4g)", t, stat, check.threshold)
                trace.floor_events += state.floor_events
                trace.restarts += 1
                epoch += 1
                state = EpochState.fresh(constants)
                main_sum = np.zeros((d, d))
    except (BanditNewtonError, np.linalg.LinAlgError, FloatingPointError, AssertionError) as exc:
        trace.fault = f"{type(exc).__name__}: {exc}"
        trace.floor_events += state.floor_events
        _finish(trace, env, pos, compute_regret)
        raise AlgorithmFault(f"run aborted at round {len(trace) + 1}: {trace.fault}", trace) from exc

    trace.floor_events += state.floor_events
    trace.final_mu = pos.to_original(state.mu) if state.t else pos.to_original(np.zeros(d))
    _finish(trace, env, pos, compute_regret)
    return trace


def _finish(trace, env, pos, compute_regret):
    if not compute_regret:
        return
    n = len(trace)
    if n == 0:
        trace.cum_true_regret = np.zeros(0)
        return
    x_star, _ = environments.best_fixed_point(env, pos, n=n)
    trace.x_star = x_star
    trace.cum_true_regret = environments.true_regret(env, trace.A, x_star, losses_at_actions=trace.loss)
