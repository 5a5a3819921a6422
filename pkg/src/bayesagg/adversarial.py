"""Hard instances: the classic two-expert counterexample, kernel-vector
impossibility structures, a simplified prior-flip adversary, and the
brute-force oracle for the extreme-forecast bounds.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .logodds import expected_regret, logit_inverse
from .spectral import kernel_vector_nonzero_sum
from .structures import (
    EvidenceMatrix,
    StructureError,
    expert_forecast,
    brute_force_optimal,
    make_structure_from_posteriors,
)

REGRET_FLOOR_MAX_PROFILES = 10**6
_F_BUCKET = 1e-9


def example1():
    """Two experts over three i.i.d. binary signals with overlapping
    evidence: the canonical structure on which no aggregation rule can
    reach the optimal forecast."""
    support = ([0.25, 0.75], [0.5, 0.5])
    return make_structure_from_posteriors(
        0.5, [support, support, support], [[1, 1, 0], [0, 1, 1]]
    )


def proposition1_instance(evidence, scale=1.0):
    """Impossibility structure for a non-injective evidence matrix.

    Finds a kernel vector with nonzero coordinate sum, scales it by
    `scale`, and builds symmetric three-point posterior supports
    {z_j, 1/2, 1 - z_j} with weights {1/4, 1/2, 1/4} around the prior
    1/2, where z_j is the logistic image of the scaled kernel entry.
    Two distinct signal-log-odds profiles (all zeros and the scaled
    kernel) then induce identical forecast profiles but different optimal
    forecasts.  Returns None when no qualifying kernel vector exists.
    """
    if isinstance(evidence, EvidenceMatrix):
        entries = evidence.entries
    else:
        entries = np.asarray(evidence, dtype=float)
    kernel = kernel_vector_nonzero_sum(entries)
    if kernel is None:
        return None
    scaled = scale * kernel
    if np.max(np.abs(scaled)) > 2.0 + 1e-12:
        raise ValueError("scale too large: need max |scale * kernel_j| <= 2")
    supports = []
    for zj_tilde in scaled:
        zj = logit_inverse(zj_tilde)
        supports.append(([zj, 0.5, 1.0 - zj], [0.25, 0.5, 0.25]))
    return make_structure_from_posteriors(0.5, supports, entries)


def _enumerate_profiles(structure):
    """Yield (signal outcome profile, ex-ante probability, optimal
    forecast, forecast profile) for every profile of positive mass."""
    counts = [sig.n_outcomes for sig in structure.signals]
    total = math.prod(counts)
    if total > REGRET_FLOOR_MAX_PROFILES:
        raise StructureError(
            f"{total} signal profiles exceed the enumeration limit"
        )
    for profile in itertools.product(*(range(c) for c in counts)):
        p1 = structure.mu
        p0 = 1.0 - structure.mu
        for j, k in enumerate(profile):
            p1 *= structure.signals[j].p_given_one[k]
            p0 *= structure.signals[j].p_given_zero[k]
        prob = p1 + p0
        if prob <= 0.0:
            continue
        posteriors = np.array(
            [structure.signals[j].posteriors[k] for j, k in enumerate(profile)]
        )
        r_star = brute_force_optimal(structure, profile)
        forecasts = np.array(
            [expert_forecast(structure, i, posteriors) for i in range(structure.n)]
        )
        yield profile, prob, r_star, forecasts


def regret_floor(structure, T_montecarlo=0, rng=None):
    """Exact per-round expected-regret lower bound for any aggregator that
    sees only the forecast profile.

    Enumerates all signal profiles, groups them by induced forecast
    profile (1e-9 bucketing), and charges each group the KL divergence of
    its members' optimal forecasts from the group's probability-weighted
    best response.  T_montecarlo > 0 additionally samples that many rounds
    as a sanity cross-check of the enumeration (assertion only).
    """
    groups = {}
    for _, prob, r_star, forecasts in _enumerate_profiles(structure):
        key = tuple(int(round(f / _F_BUCKET)) for f in forecasts)
        groups.setdefault(key, []).append((prob, r_star))
    floor = 0.0
    for members in groups.values():
        mass = sum(p for p, _ in members)
        if mass <= 0.0:
            continue
        best = sum(p * r for p, r in members) / mass
        floor += sum(p * expected_regret(best, r) for p, r in members)
    if T_montecarlo > 0:
        estimate = regret_floor_montecarlo(structure, T_montecarlo, rng)
        if abs(estimate - floor) > 0.25 * max(floor, 1e-3) + 5e-3:
            raise AssertionError(
                f"Monte Carlo floor {estimate} disagrees with exact {floor}"
            )
    return floor


def regret_floor_montecarlo(structure, T, rng=None):
    """Sampled estimate of regret_floor; independent cross-check route."""
    from .structures import sample_rounds

    rng = np.random.default_rng(rng)
    _, _, _, forecasts, r_star = sample_rounds(structure, T, rng)
    groups = {}
    for f_row, r in zip(forecasts, r_star):
        key = tuple(int(round(f / _F_BUCKET)) for f in f_row)
        groups.setdefault(key, []).append(r)
    total = 0.0
    for members in groups.values():
        best = float(np.mean(members))
        total += sum(expected_regret(best, r) for r in members)
    return total / T


class PriorFlipEnvironment:
    """Simplified dynamic adversary for the prior-ignorant setting.

    Each round the prior flips between mu_high and 1 - mu_high with equal
    probability while the single expert's forecast is pinned at 1/2, so
    the profile carries no information about the prior.  The optimal
    forecast is the prior itself; any forecast rule that ignores the
    prior is stuck near the 1/2 best response.  Deliberately NOT a valid
    Bayesian information structure (a posterior constant at 1/2 cannot
    have mean 0.9): it is a demonstration of prior-ignorant failure, not
    a proof construction.
    """

    n = 1

    def __init__(self, mu_high=0.9):
        if not 0.5 < mu_high < 1.0:
            raise ValueError("mu_high must lie in (1/2, 1)")
        self.mu_high = mu_high

    def sample_batch(self, T, rng):
        mu = np.where(rng.random(T) < 0.5, self.mu_high, 1.0 - self.mu_high)
        omega = (rng.random(T) < mu).astype(np.int8)
        forecasts = np.full((T, 1), 0.5)
        r_star = mu.copy()
        return omega, forecasts, mu, r_star


def prior_flip_adversary(mu_high=0.9):
    """Environment factory for the prior-flip demonstration."""
    return PriorFlipEnvironment(mu_high=mu_high)


@dataclass
class BinaryJointStructure:
    """Arbitrary joint distribution over (state, binary signal profile)
    for n experts, with signal profiles encoded as subset bitmasks.

    mass0[B] / mass1[B] are the joint probabilities of state 0 / 1 with
    exactly the experts in B seeing their high signal.
    """

    n: int
    mass0: np.ndarray
    mass1: np.ndarray

    def __post_init__(self):
        size = 1 << self.n
        self.mass0 = np.asarray(self.mass0, dtype=float)
        self.mass1 = np.asarray(self.mass1, dtype=float)
        if self.mass0.shape != (size,) or self.mass1.shape != (size,):
            raise ValueError(f"need {size} masses per state for n={self.n}")
        if np.any(self.mass0 < 0.0) or np.any(self.mass1 < 0.0):
            raise ValueError("masses must be nonnegative")
        total = self.mass0.sum() + self.mass1.sum()
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"masses sum to {total}, not 1")

    def low_signal_posterior(self, expert):
        """P(omega=1 | expert saw the low signal)."""
        mask = np.array([(B >> expert) & 1 == 0 for B in range(1 << self.n)])
        num = self.mass1[mask].sum()
        den = num + self.mass0[mask].sum()
        return num / den if den > 0 else 0.0

    def high_signal_posterior(self, expert):
        mask = np.array([(B >> expert) & 1 == 1 for B in range(1 << self.n)])
        num = self.mass1[mask].sum()
        den = num + self.mass0[mask].sum()
        return num / den if den > 0 else 1.0

    def omega1_given_some_low(self):
        """P(omega=1 | at least one expert saw the low signal)."""
        full = (1 << self.n) - 1
        keep = np.arange(1 << self.n) != full
        num = self.mass1[keep].sum()
        den = num + self.mass0[keep].sum()
        return num / den if den > 0 else 0.0

    def omega0_given_some_high(self):
        keep = np.arange(1 << self.n) != 0
        num = self.mass0[keep].sum()
        den = num + self.mass1[keep].sum()
        return num / den if den > 0 else 0.0

    def both_extremes_mass(self):
        """Probability that some expert saw low AND some saw high."""
        idx = np.arange(1 << self.n)
        full = (1 << self.n) - 1
        keep = (idx != 0) & (idx != full)
        return self.mass0[keep].sum() + self.mass1[keep].sum()


import functools


@functools.lru_cache(maxsize=None)
def _index_masks(n):
    idx = np.arange(1 << n)
    # without[i, B] = expert i saw the low signal in profile B.
    without = np.array([(idx >> i) & 1 == 0 for i in range(n)])
    return idx, without


def sample_constrained_binary_structure(n, alpha, rng, max_iter=200):
    """Random BinaryJointStructure where every expert's low-signal
    posterior is <= alpha and high-signal posterior is >= 1 - alpha.

    Raw rejection is hopeless at small alpha, so raw random masses are
    repeatedly rescaled: mass1 off the full set down to satisfy the
    low-signal constraints, mass0 off the empty set down to satisfy the
    high-signal constraints, until both families hold.
    """
    size = 1 << n
    full = size - 1
    idx, without = _index_masks(n)
    within = ~without
    mass0 = rng.random(size) + 1e-6
    mass1 = rng.random(size) + 1e-6
    ratio = alpha / (1.0 - alpha)
    for _ in range(max_iter):
        ok = True
        # Low-signal constraints: sum_{B without i} mass1 <= ratio * mass0-sum.
        s1 = without @ mass1
        s0 = without @ mass0
        scale = float(np.min(np.where(s1 > ratio * s0, ratio * s0 / s1, 1.0)))
        if scale < 1.0:
            mass1[idx != full] *= scale
            ok = False
        # High-signal constraints (mirror image on mass0).
        s0 = within @ mass0
        s1 = within @ mass1
        scale = float(np.min(np.where(s0 > ratio * s1, ratio * s1 / s0, 1.0)))
        if scale < 1.0:
            mass0[idx != 0] *= scale
            ok = False
        if ok:
            break
    total = mass0.sum() + mass1.sum()
    return BinaryJointStructure(n, mass0 / total, mass1 / total)


def near_extremal_structure(n, alpha):
    """Structure attaining the extreme-forecast bound's limiting value
    n*alpha / ((1-alpha) + n*alpha) exactly: all low-state mass on the
    all-low profile, high-state mass alpha on each leave-one-out profile."""
    size = 1 << n
    full = size - 1
    mass0 = np.zeros(size)
    mass1 = np.zeros(size)
    mass0[0] = 1.0 - alpha
    for i in range(n):
        mass1[full ^ (1 << i)] += alpha
    total = mass0.sum() + mass1.sum()
    return BinaryJointStructure(n, mass0 / total, mass1 / total)


def extreme_lemma_oracle(n, alpha, trials, rng):
    """Brute-force check of the extreme-forecast conditional bounds over
    random constrained binary structures.

    Counts violations of: P(omega=1 | some low) <= n*alpha,
    P(omega=0 | some high) <= n*alpha, and P(some low and some high)
    <= 2*n*alpha.  Returns the total violation count (0 expected).
    """
    if n > 4:
        raise ValueError("oracle enumerates 2^(n+1) masses; n <= 4 only")
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 1/2)")
    tol = 1e-12
    violations = 0
    full = (1 << n) - 1
    idx = np.arange(1 << n)
    some_low = idx != full
    some_high = idx != 0
    both = some_low & some_high
    for _ in range(trials):
        s = sample_constrained_binary_structure(n, alpha, rng)
        num1 = s.mass1[some_low].sum()
        den1 = num1 + s.mass0[some_low].sum()
        if den1 > 0 and num1 / den1 > n * alpha + tol:
            violations += 1
        num0 = s.mass0[some_high].sum()
        den0 = num0 + s.mass1[some_high].sum()
        if den0 > 0 and num0 / den0 > n * alpha + tol:
            violations += 1
        if s.mass0[both].sum() + s.mass1[both].sum() > 2 * n * alpha + tol:
            violations += 1
    return violations
