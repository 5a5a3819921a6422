"""Learning aggregators and baselines.

Every aggregator follows the same round protocol: `predict(F, mu)` emits
a forecast for the current profile of expert forecasts, `update(omega)`
feeds back the realized state.  Aggregators are sklearn-style estimators
(constructor parameters untouched, learned state in trailing-underscore
attributes, `get_params`/`set_params` inherited), with `reset()` starting
a fresh run and `run_sequence` as a fast replay of a whole horizon.

The dynamic prior-aware aggregator runs projected online gradient descent
on the surrogate loss whenever all expert forecasts are moderate, and
falls back to fixed safe forecasts on rounds containing an extreme
forecast.  The static prior-ignorant aggregator first estimates the prior
by counting realized states, then runs the dynamic machinery with the
estimate.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .logodds import LOSS_CLAMP, logit_inverse
from .ogd import ogd_init, ogd_step, project_ball


class UsageError(RuntimeError):
    """Round protocol violated (e.g. two updates for one predict)."""


class ConfigError(ValueError):
    """Aggregator configuration is infeasible."""


@dataclass(frozen=True)
class AggregatorConfig:
    """Shared tuning constants for the learning aggregators.

    tau: extreme-forecast threshold T^(-1/2);
    W:   hypothesis ball radius sqrt(n) / sigma;
    Z:   gradient norm bound sqrt(n) * (ln(1/tau) + ln(1/beta)).
    """

    n: int
    horizon: int
    sigma: float
    beta: float = 0.05
    prior_aware: bool = True

    def __post_init__(self):
        if self.n < 1 or self.horizon < 1:
            raise ConfigError("need n >= 1 and horizon >= 1")
        if self.sigma <= 0:
            raise ConfigError("sigma must be positive")
        if not 0.0 < self.beta < 0.5:
            raise ConfigError("beta must lie in (0, 1/2)")
        if self.n * self.tau >= 0.5:
            raise ConfigError(
                f"n * tau = {self.n * self.tau:.4g} >= 1/2; need horizon > 4 n^2"
            )

    @property
    def tau(self):
        return self.horizon ** -0.5

    @property
    def W(self):
        return math.sqrt(self.n) / self.sigma

    @property
    def Z(self):
        return math.sqrt(self.n) * (math.log(1.0 / self.tau) + math.log(1.0 / self.beta))


class Classification(enum.Enum):
    NON_EXTREME = "non_extreme"
    EXTREME_LOW = "extreme_low"
    EXTREME_HIGH = "extreme_high"
    EXTREME_BOTH = "extreme_both"


def classify_profile(F, tau):
    """Classify a forecast profile; the non-extreme interval [tau, 1-tau]
    is closed, so boundary ties count as non-extreme."""
    F = np.asarray(F, dtype=float)
    low = bool(np.any(F < tau))
    high = bool(np.any(F > 1.0 - tau))
    if low and high:
        return Classification.EXTREME_BOTH
    if low:
        return Classification.EXTREME_LOW
    if high:
        return Classification.EXTREME_HIGH
    return Classification.NON_EXTREME


def extreme_forecast(classification, n, tau):
    """Fixed safe forecast for rounds containing an extreme expert forecast."""
    if n * tau >= 0.5:
        raise ConfigError("n * tau must be < 1/2")
    if classification is Classification.EXTREME_LOW:
        return n * tau
    if classification is Classification.EXTREME_HIGH:
        return 1.0 - n * tau
    if classification is Classification.EXTREME_BOTH:
        return 0.5
    raise ValueError("extreme_forecast called on a non-extreme profile")


def _check_profile(F, n):
    F = np.asarray(F, dtype=float)
    if F.shape != (n,):
        raise ValueError(f"expected forecast profile of shape ({n},), got {F.shape}")
    if np.any(F < 0.0) or np.any(F > 1.0):
        raise ValueError("forecasts must lie in [0, 1]")
    return F


class BaseAggregator(BaseEstimator):
    """Common round protocol and sklearn plumbing."""

    prior_aware = False

    def reset(self):
        raise NotImplementedError

    def predict(self, F, mu=None):
        raise NotImplementedError

    def update(self, omega):
        raise NotImplementedError

    def _ensure_started(self):
        if not getattr(self, "started_", False):
            self.reset()

    def run_sequence(self, F, omega, mu=None):
        """Replay a full horizon; returns the per-round forecasts.

        F: (T, n) profiles, omega: (T,) realized states, mu: (T,) priors
        (required for prior-aware aggregators).  Equivalent to the
        predict/update loop.
        """
        F = np.asarray(F, dtype=float)
        omega = np.asarray(omega)
        T = F.shape[0]
        mus = np.asarray(mu, dtype=float) if mu is not None else [None] * T
        out = np.empty(T)
        for t in range(T):
            out[t] = self.predict(F[t], mus[t])
            self.update(int(omega[t]))
        return out

    def fit(self, F, omega, mu=None):
        """sklearn-flavored entry point: reset and replay the sequence."""
        self.reset()
        self.run_sequence(F, omega, mu)
        return self


class DynamicPriorAwareAggregator(BaseAggregator):
    """OGD learner for dynamic environments; receives the prior each round."""

    prior_aware = True

    def __init__(self, n=1, horizon=10000, sigma=1.0, beta=0.05):
        self.n = n
        self.horizon = horizon
        self.sigma = sigma
        self.beta = beta

    def reset(self):
        self.config_ = AggregatorConfig(
            n=self.n, horizon=self.horizon, sigma=self.sigma, beta=self.beta,
            prior_aware=True,
        )
        cfg = self.config_
        self.ogd_ = ogd_init(cfg.n, cfg.W, cfg.Z, cfg.horizon)
        self.extreme_rounds_ = 0
        self.nonextreme_rounds_ = 0
        self.prior_clamps_ = 0
        self._pending = None
        self.started_ = True
        return self

    @property
    def h_(self):
        return self.ogd_.h

    def set_hypothesis(self, h):
        """Overwrite the current hypothesis (test/diagnostic hook)."""
        from dataclasses import replace
        self._ensure_started()
        self.ogd_ = replace(self.ogd_, h=np.asarray(h, dtype=float))
        return self

    def _clamp_prior(self, mu):
        beta = self.config_.beta
        if mu < beta or mu > 1.0 - beta:
            self.prior_clamps_ += 1
            return min(max(mu, beta), 1.0 - beta)
        return mu

    def predict(self, F, mu=None):
        self._ensure_started()
        if self._pending is not None:
            raise UsageError("predict called twice without an update")
        if mu is None:
            raise UsageError("prior-aware aggregator needs mu each round")
        cfg = self.config_
        F = _check_profile(F, cfg.n)
        mu = self._clamp_prior(float(mu))
        # Same expression as the run_sequence fast path, for bitwise
        # reproducibility between the two routes.
        mu_tilde = math.log(mu) - math.log1p(-mu)
        classification = classify_profile(F, cfg.tau)
        if classification is not Classification.NON_EXTREME:
            r = extreme_forecast(classification, cfg.n, cfg.tau)
            self._pending = ("extreme",)
            return r
        z = np.log(F) - np.log1p(-F) - mu_tilde
        u = float(np.dot(self.ogd_.h, z)) + mu_tilde
        self._pending = ("ogd", z, u)
        return logit_inverse(u)

    def update(self, omega):
        if self._pending is None:
            raise UsageError("update called without a pending predict")
        pending, self._pending = self._pending, None
        if pending[0] == "extreme":
            self.extreme_rounds_ += 1
            return self
        _, z, u = pending
        self.nonextreme_rounds_ += 1
        gradient = (logit_inverse(u) - omega) * z
        self.ogd_ = ogd_step(self.ogd_, gradient)
        return self

    def run_sequence(self, F, omega, mu=None):
        # Fast path: identical arithmetic to the predict/update loop, with
        # the per-round profile transforms hoisted out of the loop.
        self._ensure_started()
        if self._pending is not None:
            raise UsageError("run_sequence with an unresolved round")
        if mu is None:
            raise UsageError("prior-aware aggregator needs mu each round")
        cfg = self.config_
        F = np.asarray(F, dtype=float)
        omega = np.asarray(omega, dtype=float)
        T, n = F.shape
        if n != cfg.n:
            raise ValueError(f"profiles have {n} experts, configured for {cfg.n}")
        mus = np.broadcast_to(np.asarray(mu, dtype=float), (T,)).copy()
        beta = cfg.beta
        clamped = (mus < beta) | (mus > 1.0 - beta)
        self.prior_clamps_ += int(clamped.sum())
        mus = np.clip(mus, beta, 1.0 - beta)
        mu_tilde = np.log(mus) - np.log1p(-mus)
        tau = cfg.tau
        low = np.any(F < tau, axis=1)
        high = np.any(F > 1.0 - tau, axis=1)
        extreme = low | high
        safe_r = np.where(low & high, 0.5, np.where(low, n * tau, 1.0 - n * tau))
        Fc = np.clip(F, 1e-300, 1.0 - 1e-16)
        z_all = np.log(Fc) - np.log1p(-Fc) - mu_tilde[:, None]
        h = self.ogd_.h.copy()
        eta = self.ogd_.eta
        W = self.ogd_.W
        Z = self.ogd_.z_bound
        clips = 0
        steps = 0
        out = np.empty(T)
        # Loop body mirrors predict/update + ogd_step operation for
        # operation so the two routes agree bitwise.
        for t in range(T):
            if extreme[t]:
                out[t] = safe_r[t]
                continue
            z = z_all[t]
            u = float(np.dot(h, z)) + mu_tilde[t]
            if u >= 0.0:
                r = 1.0 / (1.0 + math.exp(-u))
            else:
                eu = math.exp(u)
                r = eu / (1.0 + eu)
            out[t] = r
            gradient = (r - omega[t]) * z
            gnorm = float(np.linalg.norm(gradient))
            if gnorm > Z:
                gradient = gradient * (Z / gnorm)
                clips += 1
            h = project_ball(h - eta * gradient, W)
            steps += 1
        n_extreme = int(extreme.sum())
        self.extreme_rounds_ += n_extreme
        self.nonextreme_rounds_ += T - n_extreme
        from dataclasses import replace
        self.ogd_ = replace(
            self.ogd_, h=h, t=self.ogd_.t + steps,
            clipped_gradients=self.ogd_.clipped_gradients + clips,
        )
        return out


class StaticPriorIgnorantAggregator(BaseAggregator):
    """Two-phase learner for static environments with an unknown prior.

    Phase 1 (T1 = ceil(n sigma^-1 sqrt(T)) rounds) forecasts 1/2 without
    looking at the profiles and tallies realized states; Phase 2 feeds
    the resulting prior estimate into the dynamic machinery every round.
    """

    prior_aware = False

    def __init__(self, n=1, horizon=10000, sigma=1.0, beta=0.05):
        self.n = n
        self.horizon = horizon
        self.sigma = sigma
        self.beta = beta

    def reset(self):
        self.config_ = AggregatorConfig(
            n=self.n, horizon=self.horizon, sigma=self.sigma, beta=self.beta,
            prior_aware=False,
        )
        self.T1_ = math.ceil(self.n / self.sigma * math.sqrt(self.horizon))
        if self.T1_ >= self.horizon:
            raise ConfigError(
                f"phase 1 length {self.T1_} exhausts the horizon {self.horizon}"
            )
        self.phase_ = 1
        self.t_ = 0
        self.ones_count_ = 0
        self.mu_hat_ = None
        self.inner_ = None
        self._pending = False
        self.started_ = True
        return self

    def _finish_phase1(self):
        lo = 1.0 / self.horizon
        self.mu_hat_ = min(max(self.ones_count_ / self.T1_, lo), 1.0 - lo)
        self.phase_ = 2
        self.inner_ = DynamicPriorAwareAggregator(
            n=self.n, horizon=self.horizon - self.T1_,
            sigma=self.sigma, beta=self.beta,
        ).reset()

    def predict(self, F, mu=None):
        self._ensure_started()
        if self.phase_ == 1:
            # Phase 1 never consults the profile; F may even be None.
            if self._pending:
                raise UsageError("predict called twice without an update")
            self._pending = True
            return 0.5
        return self.inner_.predict(F, self.mu_hat_)

    def update(self, omega):
        if self.phase_ == 1:
            if not self._pending:
                raise UsageError("update called without a pending predict")
            self._pending = False
            self.ones_count_ += int(omega)
            self.t_ += 1
            if self.t_ == self.T1_:
                self._finish_phase1()
            return self
        self.inner_.update(omega)
        self.t_ += 1
        return self

    def run_sequence(self, F, omega, mu=None):
        self._ensure_started()
        F = np.asarray(F, dtype=float)
        omega = np.asarray(omega)
        T = F.shape[0]
        out = np.empty(T)
        done = 0
        if self.phase_ == 1:
            take = min(self.T1_ - self.t_, T)
            out[:take] = 0.5
            self.ones_count_ += int(np.sum(omega[:take]))
            self.t_ += take
            if self.t_ == self.T1_:
                self._finish_phase1()
            done = take
        if done < T:
            out[done:] = self.inner_.run_sequence(
                F[done:], omega[done:], np.full(T - done, self.mu_hat_)
            )
            self.t_ += T - done
        return out


class ConstantHalfAggregator(BaseAggregator):
    """Always forecasts 1/2; the trivial ln-2-per-round-safe baseline."""

    def __init__(self, n=1):
        self.n = n

    def reset(self):
        self.started_ = True
        return self

    def predict(self, F, mu=None):
        return 0.5

    def update(self, omega):
        return self

    def run_sequence(self, F, omega, mu=None):
        return np.full(np.asarray(F).shape[0], 0.5)


class SimpleAverageAggregator(BaseAggregator):
    """Forecasts the arithmetic mean of the expert forecasts."""

    def __init__(self, n=1):
        self.n = n

    def reset(self):
        self.started_ = True
        return self

    def predict(self, F, mu=None):
        return float(np.mean(np.asarray(F, dtype=float)))

    def update(self, omega):
        return self

    def run_sequence(self, F, omega, mu=None):
        return np.asarray(F, dtype=float).mean(axis=1)


def best_expert_hindsight(forecasts, omegas):
    """Index of the expert with the smallest cumulative realized log loss
    over a completed trace.  forecasts: (T, n), omegas: (T,)."""
    forecasts = np.clip(np.asarray(forecasts, dtype=float), LOSS_CLAMP, 1.0 - LOSS_CLAMP)
    omegas = np.asarray(omegas, dtype=float)[:, None]
    losses = -(omegas * np.log(forecasts) + (1.0 - omegas) * np.log(1.0 - forecasts))
    return int(np.argmin(losses.sum(axis=0)))


AGGREGATOR_NAMES = {
    "dynamic": DynamicPriorAwareAggregator,
    "static": StaticPriorIgnorantAggregator,
    "half": ConstantHalfAggregator,
    "average": SimpleAverageAggregator,
}


def make_aggregator(name, n, horizon, sigma=1.0, beta=0.05):
    """Aggregator factory used by the CLI's --aggregator flag."""
    try:
        cls = AGGREGATOR_NAMES[name]
    except KeyError:
        raise ConfigError(
            f"unknown aggregator {name!r}; choose from {sorted(AGGREGATOR_NAMES)}"
        ) from None
    if cls in (DynamicPriorAwareAggregator, StaticPriorIgnorantAggregator):
        return cls(n=n, horizon=horizon, sigma=sigma, beta=beta).reset()
    return cls(n=n).reset()
