"""Log-odds space: transforms, logarithmic losses and the surrogate loss.

In log-odds coordinates the optimal Bayesian aggregation of conditionally
independent signals is linear, which is what makes online learning of the
aggregation weights possible.  Everything here is a pure function; the
overflow-safe forms are mandatory because |h.z| can reach ~n*W*Z in the
adversarial tests.
"""

import math
from dataclasses import dataclass

import numpy as np

# Forecasts are clamped into [LOSS_CLAMP, 1 - LOSS_CLAMP] before taking
# logarithms, so realized-loss traces stay finite even for baseline
# aggregators that emit 0 or 1.
LOSS_CLAMP = 1e-12


def log_odds(p):
    """ln(p / (1 - p)) for p strictly inside (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"log_odds requires p in (0, 1), got {p}")
    return math.log(p / (1.0 - p))


def logit_inverse(w):
    """Inverse of log_odds: (1 + exp(-w))^-1, safe for |w| up to ~700."""
    if w >= 0.0:
        return 1.0 / (1.0 + math.exp(-w))
    ew = math.exp(w)
    return ew / (1.0 + ew)


def log_odds_vec(p):
    """Elementwise log-odds of an array with entries in (0, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("log_odds_vec requires entries in (0, 1)")
    return np.log(p) - np.log1p(-p)


def logit_inverse_vec(w):
    """Elementwise logistic function, overflow-safe."""
    w = np.asarray(w, dtype=float)
    out = np.empty_like(w)
    pos = w >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-w[pos]))
    ew = np.exp(w[~pos])
    out[~pos] = ew / (1.0 + ew)
    return out


def softplus(x):
    """ln(1 + exp(x)) via the identity max(x, 0) + ln(1 + exp(-|x|))."""
    return max(x, 0.0) + math.log1p(math.exp(-abs(x)))


def optimal_log_odds(y_tilde, mu_tilde):
    """Log-odds of the optimal aggregation: sum of the prior-adjusted
    per-signal log-odds plus the prior's log-odds."""
    return float(np.sum(y_tilde)) + mu_tilde


@dataclass(frozen=True)
class SurrogateLossInstance:
    """One round's input to the surrogate loss: the prior-shifted forecast
    profile in log-odds space, the realized state and the prior's log-odds."""

    z_tilde: np.ndarray
    omega: int
    mu_tilde: float


def surrogate_loss(instance, h):
    """Convex per-round loss whose expectation over omega equals the
    expected logarithmic loss of the forecast logit_inverse(h.z + mu).

    L(h) = (1 - omega) * (h.z + mu) + ln(1 + exp(-(h.z + mu)))
    """
    u = float(np.dot(h, instance.z_tilde)) + instance.mu_tilde
    return (1 - instance.omega) * u + softplus(-u)


def surrogate_gradient(instance, h):
    """Gradient of surrogate_loss in h.

    (1 - omega) * z - sigmoid(-(h.z + mu)) * z; its norm never exceeds
    ||z||.
    """
    u = float(np.dot(h, instance.z_tilde)) + instance.mu_tilde
    coeff = (1 - instance.omega) - logit_inverse(-u)
    return coeff * instance.z_tilde


def expected_log_loss(r, r_star):
    """Expected logarithmic loss of forecast r when the true conditional
    probability of omega=1 is r_star (cross-entropy)."""
    r = min(max(r, LOSS_CLAMP), 1.0 - LOSS_CLAMP)
    return -r_star * math.log(r) - (1.0 - r_star) * math.log(1.0 - r)


def realized_log_loss(r, omega):
    """-ln(r) if omega=1 else -ln(1-r), with the evaluation-time clamp."""
    r = min(max(r, LOSS_CLAMP), 1.0 - LOSS_CLAMP)
    return -math.log(r) if omega == 1 else -math.log(1.0 - r)


def expected_regret(r, r_star):
    """Per-round expected regret of forecast r against the optimum r_star.

    Equals the binary KL divergence KL(r_star || r): always >= 0, zero
    iff r == r_star.
    """
    r = min(max(r, LOSS_CLAMP), 1.0 - LOSS_CLAMP)
    total = 0.0
    if r_star > 0.0:
        total += r_star * math.log(r_star / r)
    if r_star < 1.0:
        total += (1.0 - r_star) * math.log((1.0 - r_star) / (1.0 - r))
    return max(total, 0.0)
