"""Partial-evidence information structures and round simulation.

A structure is a prior, a list of discrete per-signal conditional
distributions and a 0/1 evidence matrix saying which expert observes
which signal.  Signals are independent conditioned on the state; each
expert aggregates the signals in her row of the matrix by Bayes rule.
All forecast arithmetic routes through log-odds to avoid underflow of
probability products.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .logodds import (
    log_odds,
    log_odds_vec,
    logit_inverse,
    optimal_log_odds,
)
from . import spectral

PROB_SUM_TOL = 1e-12
MARTINGALE_TOL = 1e-10
BRUTE_FORCE_MAX_SIGNALS = 20


class StructureError(ValueError):
    """Raised when an information structure violates its invariants."""


@dataclass
class SignalDistribution:
    """Discrete distribution of one signal jointly with the binary state.

    p_given_one[k] = P(s = k | omega = 1), p_given_zero[k] analogous.
    The per-outcome posterior of omega=1 is derived from these and the
    prior, never stored independently.
    """

    mu: float
    p_given_one: np.ndarray
    p_given_zero: np.ndarray
    posteriors: np.ndarray = field(init=False)

    def __post_init__(self):
        self.p_given_one = np.asarray(self.p_given_one, dtype=float)
        self.p_given_zero = np.asarray(self.p_given_zero, dtype=float)
        if not 0.0 < self.mu < 1.0:
            raise StructureError(f"prior must be in (0, 1), got {self.mu}")
        if self.p_given_one.shape != self.p_given_zero.shape or self.p_given_one.ndim != 1:
            raise StructureError("conditional distributions must be 1-d and equally shaped")
        if np.any(self.p_given_one < 0.0) or np.any(self.p_given_zero < 0.0):
            raise StructureError("negative conditional probability")
        for name, p in (("p_given_one", self.p_given_one), ("p_given_zero", self.p_given_zero)):
            if abs(p.sum() - 1.0) > PROB_SUM_TOL:
                raise StructureError(f"{name} sums to {p.sum()}, not 1")
        num = self.mu * self.p_given_one
        den = num + (1.0 - self.mu) * self.p_given_zero
        with np.errstate(invalid="ignore"):
            post = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), self.mu)
        self.posteriors = post
        # Martingale property: the ex-ante mean of the posterior is the prior.
        weights = den
        mean = float(np.dot(post, weights))
        if abs(mean - self.mu) > MARTINGALE_TOL:
            raise StructureError(
                f"posterior mean {mean} deviates from prior {self.mu}"
            )

    @property
    def n_outcomes(self):
        return self.p_given_one.shape[0]

    def outcome_weights(self):
        """Ex-ante marginal probability of each outcome."""
        return self.mu * self.p_given_one + (1.0 - self.mu) * self.p_given_zero


class EvidenceMatrix:
    """0/1 expert-by-signal observation matrix with cached spectral data.

    Injectivity (as a map on signal log-odds profiles) is decided by the
    minimal singular value; the left inverse and the optimal aggregation
    weights h_star exist iff the matrix is injective.
    """

    def __init__(self, entries):
        a = np.asarray(entries, dtype=float)
        if a.ndim != 2:
            raise StructureError("evidence matrix must be 2-d")
        if not np.all((a == 0.0) | (a == 1.0)):
            raise StructureError("evidence matrix entries must be 0 or 1")
        self.entries = a
        self.n, self.m = a.shape
        self.sigma_min = spectral.min_singular_value(a)
        self.injective = self.sigma_min > spectral.INJECTIVITY_TOL
        if self.injective:
            self.left_inverse = spectral.left_inverse(a)
            self.h_star = spectral.optimal_hypothesis(a)
        else:
            self.left_inverse = None
            self.h_star = None

    def observed_signals(self, expert):
        """Indices of the signals expert `expert` observes."""
        return np.flatnonzero(self.entries[expert] > 0.5)

    def __repr__(self):
        return f"EvidenceMatrix(n={self.n}, m={self.m}, sigma_min={self.sigma_min:.6g})"


@dataclass
class InformationStructure:
    """The full partial-evidence environment: prior, signals, evidence."""

    mu: float
    signals: list
    evidence: EvidenceMatrix

    def __post_init__(self):
        if not 0.0 < self.mu < 1.0:
            raise StructureError(f"prior must be in (0, 1), got {self.mu}")
        if len(self.signals) != self.evidence.m:
            raise StructureError(
                f"{len(self.signals)} signals but evidence matrix has {self.evidence.m} columns"
            )
        if self.evidence.n < 1 or self.evidence.m < 1:
            raise StructureError("need at least one expert and one signal")
        for sig in self.signals:
            if abs(sig.mu - self.mu) > 1e-15:
                raise StructureError("all signals must share the structure's prior")
        row_sums = self.evidence.entries.sum(axis=1)
        if np.any(row_sums < 1):
            raise StructureError("every expert must observe at least one signal")

    @property
    def n(self):
        return self.evidence.n

    @property
    def m(self):
        return self.evidence.m


@dataclass
class RoundSample:
    """One simulated round: state, signals, posteriors, forecasts, optimum."""

    omega: int
    signal_outcomes: np.ndarray
    posteriors: np.ndarray
    forecasts: np.ndarray
    r_star: float


def _combine_posteriors(posteriors, mu):
    """Bayes aggregation of conditionally independent posteriors, in
    log-odds space.  Degenerate certainty (posterior exactly 0 or 1)
    dominates."""
    posteriors = np.asarray(posteriors, dtype=float)
    zeros = np.any(posteriors <= 0.0)
    ones = np.any(posteriors >= 1.0)
    if zeros and ones:
        return 0.5
    if zeros:
        return 0.0
    if ones:
        return 1.0
    mu_tilde = log_odds(mu)
    y = log_odds_vec(posteriors) - mu_tilde
    return logit_inverse(optimal_log_odds(y, mu_tilde))


def optimal_forecast(structure, posteriors):
    """Optimal Bayesian aggregation r*(s) of all per-signal posteriors."""
    return _combine_posteriors(posteriors, structure.mu)


def expert_forecast(structure, expert_index, posteriors):
    """Forecast of one expert: Bayes aggregation over her observed signals."""
    observed = structure.evidence.observed_signals(expert_index)
    posteriors = np.asarray(posteriors, dtype=float)
    return _combine_posteriors(posteriors[observed], structure.mu)


def brute_force_optimal(structure, signal_outcomes):
    """Independent oracle for the optimal forecast: condition the joint
    P(omega, s) = P(omega) * prod_j P(s_j | omega) on the observed profile
    directly, without going through log-odds."""
    if structure.m > BRUTE_FORCE_MAX_SIGNALS:
        raise StructureError(
            f"brute-force oracle limited to m <= {BRUTE_FORCE_MAX_SIGNALS}"
        )
    p1 = structure.mu
    p0 = 1.0 - structure.mu
    for j, outcome in enumerate(signal_outcomes):
        p1 *= structure.signals[j].p_given_one[outcome]
        p0 *= structure.signals[j].p_given_zero[outcome]
    if p1 + p0 == 0.0:
        return structure.mu
    return p1 / (p1 + p0)


def sample_round(structure, rng):
    """Draw one round: omega ~ Bernoulli(mu), then each signal
    independently from its conditional distribution given omega."""
    omega = int(rng.random() < structure.mu)
    outcomes = np.empty(structure.m, dtype=int)
    posteriors = np.empty(structure.m)
    for j, sig in enumerate(structure.signals):
        p = sig.p_given_one if omega == 1 else sig.p_given_zero
        k = int(rng.choice(sig.n_outcomes, p=p))
        outcomes[j] = k
        posteriors[j] = sig.posteriors[k]
    forecasts = np.array(
        [expert_forecast(structure, i, posteriors) for i in range(structure.n)]
    )
    r_star = optimal_forecast(structure, posteriors)
    return RoundSample(omega, outcomes, posteriors, forecasts, r_star)


def sample_rounds(structure, T, rng):
    """Vectorized batch of T rounds.

    Returns (omega, outcomes, posteriors, forecasts, r_star) as arrays of
    shapes (T,), (T, m), (T, m), (T, n), (T,).  Equivalent in distribution
    to T calls of sample_round but orders of magnitude faster.
    """
    omega = (rng.random(T) < structure.mu).astype(np.int8)
    outcomes = np.empty((T, structure.m), dtype=np.int64)
    posteriors = np.empty((T, structure.m))
    for j, sig in enumerate(structure.signals):
        cum1 = np.cumsum(sig.p_given_one)
        cum0 = np.cumsum(sig.p_given_zero)
        u = rng.random(T)
        k1 = np.searchsorted(cum1, u, side="right")
        k0 = np.searchsorted(cum0, u, side="right")
        k = np.where(omega == 1, k1, k0)
        k = np.minimum(k, sig.n_outcomes - 1)
        outcomes[:, j] = k
        posteriors[:, j] = sig.posteriors[k]
    mu_tilde = log_odds(structure.mu)
    # Interior posteriors are guaranteed for valid discrete structures only
    # when no outcome is fully revealing; fall back row-wise otherwise.
    if np.all((posteriors > 0.0) & (posteriors < 1.0)):
        y = log_odds_vec(posteriors) - mu_tilde
        f_tilde = y @ structure.evidence.entries.T + mu_tilde
        forecasts = 1.0 / (1.0 + np.exp(-np.clip(f_tilde, -700, 700)))
        r_star = 1.0 / (1.0 + np.exp(-np.clip(y.sum(axis=1) + mu_tilde, -700, 700)))
    else:
        forecasts = np.empty((T, structure.n))
        r_star = np.empty(T)
        for t in range(T):
            forecasts[t] = [
                expert_forecast(structure, i, posteriors[t]) for i in range(structure.n)
            ]
            r_star[t] = optimal_forecast(structure, posteriors[t])
    return omega, outcomes, posteriors, forecasts, r_star


def make_structure_from_posteriors(mu, supports, evidence):
    """Build a structure inducing given per-signal posterior distributions.

    `supports` is one (values, weights) pair per signal; each weighted
    posterior mean must equal the prior (splitting construction:
    P(s|omega=1) = x * w / mu, P(s|omega=0) = (1 - x) * w / (1 - mu)).
    """
    if not isinstance(evidence, EvidenceMatrix):
        evidence = EvidenceMatrix(evidence)
    signals = []
    for values, weights in supports:
        values = np.asarray(values, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if np.any(weights <= 0.0):
            raise StructureError("posterior weights must be positive")
        if abs(weights.sum() - 1.0) > PROB_SUM_TOL:
            raise StructureError("posterior weights must sum to 1")
        mean = float(np.dot(values, weights))
        if abs(mean - mu) > MARTINGALE_TOL:
            raise StructureError(
                f"posterior support mean {mean} differs from prior {mu}"
            )
        p1 = values * weights / mu
        p0 = (1.0 - values) * weights / (1.0 - mu)
        signals.append(SignalDistribution(mu, p1, p0))
    return InformationStructure(mu, signals, evidence)


# --- plain-text serialization -------------------------------------------------
#
# Format (used by the CLI's --structure flag): `key = value` lines, `#`
# comments.  `evidence` holds the matrix rows separated by `;`, one
# `signal` line per signal with `p_given_one,p_given_zero` outcome pairs
# separated by `;`.


def structure_to_text(structure):
    lines = [f"prior = {float(structure.mu)!r}"]
    rows = [
        " ".join(str(int(v)) for v in row) for row in structure.evidence.entries
    ]
    lines.append("evidence = " + " ; ".join(rows))
    for sig in structure.signals:
        pairs = [
            f"{float(sig.p_given_one[k])!r},{float(sig.p_given_zero[k])!r}"
            for k in range(sig.n_outcomes)
        ]
        lines.append("signal = " + " ; ".join(pairs))
    return "\n".join(lines) + "\n"


def structure_from_text(text):
    mu = None
    evidence = None
    signal_specs = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise StructureError(f"malformed structure line: {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "prior":
            mu = float(value)
        elif key == "evidence":
            rows = [
                [int(tok) for tok in chunk.split()]
                for chunk in value.split(";")
            ]
            evidence = EvidenceMatrix(rows)
        elif key == "signal":
            pairs = []
            for chunk in value.split(";"):
                a, b = chunk.split(",")
                pairs.append((float(a), float(b)))
            signal_specs.append(pairs)
        else:
            raise StructureError(f"unknown structure key: {key}")
    if mu is None or evidence is None or not signal_specs:
        raise StructureError("structure file needs prior, evidence and signal lines")
    signals = [
        SignalDistribution(
            mu,
            np.array([p for p, _ in pairs]),
            np.array([q for _, q in pairs]),
        )
        for pairs in signal_specs
    ]
    return InformationStructure(mu, signals, evidence)


def load_structure(path):
    with open(path) as fh:
        return structure_from_text(fh.read())


def save_structure(structure, path):
    with open(path, "w") as fh:
        fh.write(structure_to_text(structure))


def matrix_from_text(text):
    """Parse a bare 0/1 matrix: one row per line, entries separated by
    spaces or commas."""
    rows = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip().replace(",", " ")
        if not line:
            continue
        rows.append([int(tok) for tok in line.split()])
    if not rows:
        raise StructureError("empty matrix file")
    return EvidenceMatrix(rows)


def load_matrix(path):
    with open(path) as fh:
        return matrix_from_text(fh.read())
