"""Run orchestration: environments, regret traces, sweeps and the random
environment generator.

A run samples T rounds from an environment, feeds only the forecast
profile (and, for prior-aware aggregators, the current prior) to the
aggregator, and records realized and expected losses against the optimal
forecast, which the aggregator never sees.
"""

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import adversarial
from .aggregators import make_aggregator
from .logodds import LOSS_CLAMP
from .spectral import min_singular_value
from .structures import (
    InformationStructure,
    SignalDistribution,
    EvidenceMatrix,
    StructureError,
    load_structure,
    sample_rounds,
)

MATRIX_REJECTION_LIMIT = 10**4

CSV_HEADER = (
    "t,forecast,omega,realized_loss,optimal_realized_loss,"
    "expected_regret,cum_expected_regret"
)


class StaticEnvironment:
    """Fixed information structure replayed every round."""

    def __init__(self, structure):
        self.structure = structure
        self.n = structure.n

    def sample_batch(self, T, rng):
        omega, _, _, forecasts, r_star = sample_rounds(self.structure, T, rng)
        mu = np.full(T, self.structure.mu)
        return omega, forecasts, mu, r_star


def _kl_vec(r_star, r):
    """Vectorized binary KL(r_star || r) with the evaluation-time clamp."""
    r = np.clip(r, LOSS_CLAMP, 1.0 - LOSS_CLAMP)
    rs = np.asarray(r_star, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(rs > 0.0, rs * np.log(np.where(rs > 0, rs, 1.0) / r), 0.0)
        t0 = np.where(
            rs < 1.0,
            (1.0 - rs) * np.log(np.where(rs < 1, 1.0 - rs, 1.0) / (1.0 - r)),
            0.0,
        )
    return np.maximum(t1 + t0, 0.0)


def _realized_loss_vec(r, omega):
    r = np.clip(r, LOSS_CLAMP, 1.0 - LOSS_CLAMP)
    return np.where(omega == 1, -np.log(r), -np.log(1.0 - r))


@dataclass
class RegretTrace:
    """Per-round record of a completed run plus summary trailer."""

    t: np.ndarray
    forecast: np.ndarray
    omega: np.ndarray
    realized_loss: np.ndarray
    optimal_realized_loss: np.ndarray
    expected_regret: np.ndarray
    cum_expected_regret: np.ndarray
    trailer: dict = field(default_factory=dict)

    @property
    def total_expected_regret(self):
        return float(self.cum_expected_regret[-1]) if len(self.t) else 0.0

    def to_csv(self):
        lines = [CSV_HEADER]
        for i in range(len(self.t)):
            lines.append(
                "%d,%.12g,%d,%.12g,%.12g,%.12g,%.12g"
                % (
                    self.t[i],
                    self.forecast[i],
                    self.omega[i],
                    self.realized_loss[i],
                    self.optimal_realized_loss[i],
                    self.expected_regret[i],
                    self.cum_expected_regret[i],
                )
            )
        for key in sorted(self.trailer):
            lines.append(f"# {key} = {self.trailer[key]}")
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_csv())


@dataclass(frozen=True)
class RunConfig:
    """One experiment: seed, horizon, environment and aggregator choice.

    environment: 'example1', 'prior_flip', 'structure' (with `structure`
    a file path or an in-memory InformationStructure) or 'random' (with
    n, m, outcomes, sigma_floor, mu describing the generator).
    """

    seed: int = 0
    T: int = 10000
    aggregator: str = "dynamic"
    environment: str = "example1"
    structure: object = None
    sigma: float = 1.0
    beta: float = 0.05
    n: int = 4
    m: int = 4
    outcomes: int = 2
    sigma_floor: float = 0.3
    mu: float = 0.5
    mu_high: float = 0.9
    out: str = None

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")

    def key_values(self):
        pairs = [
            ("seed", self.seed), ("T", self.T),
            ("aggregator", self.aggregator), ("environment", self.environment),
            ("sigma", self.sigma), ("beta", self.beta),
        ]
        if self.environment == "structure":
            pairs.append(("structure", self.structure))
        if self.environment == "random":
            pairs += [
                ("n", self.n), ("m", self.m), ("outcomes", self.outcomes),
                ("sigma_floor", self.sigma_floor), ("mu", self.mu),
            ]
        if self.environment == "prior_flip":
            pairs.append(("mu_high", self.mu_high))
        return pairs

    def config_hash(self):
        text = ";".join(f"{k}={v}" for k, v in self.key_values())
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    @classmethod
    def from_text(cls, text):
        kwargs = {}
        casts = {
            "seed": int, "T": int, "n": int, "m": int, "outcomes": int,
            "sigma": float, "beta": float, "sigma_floor": float,
            "mu": float, "mu_high": float,
            "aggregator": str, "environment": str, "structure": str,
            "out": str,
        }
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"malformed config line: {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in casts:
                raise ValueError(f"unknown config key: {key}")
            kwargs[key] = casts[key](value)
        return cls(**kwargs)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_text(fh.read())


def build_environment(config):
    """Instantiate the environment a config describes; the random family
    regenerates identically from the config's seed."""
    if config.environment == "example1":
        return StaticEnvironment(adversarial.example1())
    if config.environment == "prior_flip":
        return adversarial.PriorFlipEnvironment(mu_high=config.mu_high)
    if config.environment == "structure":
        structure = config.structure
        if not isinstance(structure, InformationStructure):
            structure = load_structure(structure)
        return StaticEnvironment(structure)
    if config.environment == "random":
        env_rng = np.random.default_rng([config.seed, 0xE17])
        structure = random_injective_environment(
            config.n, config.m, config.outcomes, config.sigma_floor,
            env_rng, mu=config.mu, beta=config.beta,
        )
        return StaticEnvironment(structure)
    raise ValueError(f"unknown environment: {config.environment!r}")


def run(config, audit=False):
    """Execute one run and return its RegretTrace.

    With audit=True the aggregator is driven through the per-round
    predict/update interface with defensive copies of its inputs, which
    demonstrates that nothing beyond (F, mu, omega) ever crosses into the
    aggregator; the fast replay path is used otherwise.  Both paths are
    bitwise-identical.
    """
    env = build_environment(config)
    rounds_rng = np.random.default_rng([config.seed, 0x5EED])
    omega, forecasts_in, mu, r_star = env.sample_batch(config.T, rounds_rng)
    agg = make_aggregator(
        config.aggregator, n=env.n, horizon=config.T,
        sigma=config.sigma, beta=config.beta,
    )
    mus = mu if agg.prior_aware else None
    if audit:
        out = np.empty(config.T)
        for t in range(config.T):
            f_copy = forecasts_in[t].copy()
            m_t = float(mu[t]) if agg.prior_aware else None
            out[t] = agg.predict(f_copy, m_t)
            agg.update(int(omega[t]))
    else:
        out = agg.run_sequence(forecasts_in, omega, mus)
    expected = _kl_vec(r_star, out)
    trace = RegretTrace(
        t=np.arange(1, config.T + 1),
        forecast=out,
        omega=np.asarray(omega, dtype=int),
        realized_loss=_realized_loss_vec(out, omega),
        optimal_realized_loss=_realized_loss_vec(r_star, omega),
        expected_regret=expected,
        cum_expected_regret=np.cumsum(expected),
        trailer={
            "seed": config.seed,
            "config_hash": config.config_hash(),
            "aggregator": config.aggregator,
            "extreme_rounds": getattr(agg, "extreme_rounds_", 0),
            "nonextreme_rounds": getattr(agg, "nonextreme_rounds_", config.T),
            "total_expected_regret": None,  # filled below
        },
    )
    if getattr(agg, "mu_hat_", None) is not None:
        trace.trailer["mu_hat"] = "%.12g" % agg.mu_hat_
        trace.trailer["T1"] = agg.T1_
    trace.trailer["total_expected_regret"] = "%.12g" % trace.total_expected_regret
    if config.out:
        trace.save(config.out)
    return trace


def sweep(base_config, T_grid, seeds):
    """Run a config over a T grid and seed range; returns one summary row
    per horizon with mean and standard error of the total regret and the
    scale-normalized ratios."""
    T_grid = list(T_grid)
    if len(T_grid) < 2:
        raise ValueError("sweep needs at least 2 horizon grid points")
    if seeds < 1:
        raise ValueError("sweep needs at least 1 seed")
    rows = []
    for T in T_grid:
        totals = []
        n_experts = None
        for s in range(seeds):
            cfg = replace(base_config, T=T, seed=base_config.seed + s, out=None)
            trace = run(cfg)
            totals.append(trace.total_expected_regret)
            n_experts = build_environment(cfg).n
        totals = np.asarray(totals)
        mean = float(totals.mean())
        stderr = float(totals.std(ddof=1) / math.sqrt(seeds)) if seeds > 1 else 0.0
        scale = n_experts / base_config.sigma * math.sqrt(T) * math.log(T)
        rows.append(
            {
                "T": T,
                "total_regret_mean": mean,
                "total_regret_stderr": stderr,
                "regret_per_sqrtT": mean / math.sqrt(T),
                "regret_per_bound": mean / scale,
            }
        )
    return rows


def _random_signal(outcomes, mu, beta, rng, max_tries=200):
    """Discrete signal with `outcomes` posterior values in [beta, 1-beta]
    whose weighted mean is exactly mu (weights of the extreme two values
    are solved for the mean)."""
    for _ in range(max_tries):
        values = rng.uniform(beta, 1.0 - beta, size=outcomes)
        if outcomes >= 2 and not (values.min() < mu < values.max()):
            continue
        if outcomes == 1:
            values[0] = mu
            weights = np.array([1.0])
        else:
            weights = rng.dirichlet(np.ones(outcomes))
            i_lo = int(np.argmin(values))
            i_hi = int(np.argmax(values))
            others = [k for k in range(outcomes) if k not in (i_lo, i_hi)]
            mass = weights[i_lo] + weights[i_hi]
            target = mu - sum(weights[k] * values[k] for k in others)
            denom = values[i_hi] - values[i_lo]
            w_hi = (target - mass * values[i_lo]) / denom
            w_lo = mass - w_hi
            if w_hi <= 1e-6 or w_lo <= 1e-6:
                continue
            weights[i_lo], weights[i_hi] = w_lo, w_hi
        p1 = values * weights / mu
        p0 = (1.0 - values) * weights / (1.0 - mu)
        # Renormalize away accumulated rounding so the sum-to-1 check holds.
        return SignalDistribution(mu, p1 / p1.sum(), p0 / p0.sum())
    raise StructureError("could not sample a mean-consistent signal")


def random_injective_environment(n, m, outcomes, sigma_floor, rng,
                                 mu=0.5, beta=0.05, matrix=None):
    """Random structure whose evidence matrix has sigma_min >= sigma_floor.

    Rejection-samples 0/1 matrices (row sums >= 1) unless `matrix` pins
    one down; gives up after 10^4 rejections.
    """
    if matrix is not None:
        evidence = matrix if isinstance(matrix, EvidenceMatrix) else EvidenceMatrix(matrix)
        if evidence.sigma_min < sigma_floor:
            raise StructureError(
                f"supplied matrix has sigma_min {evidence.sigma_min:.4g} < floor"
            )
    else:
        if m > n:
            raise StructureError("injective evidence needs m <= n")
        evidence = None
        for _ in range(MATRIX_REJECTION_LIMIT):
            cand = (rng.random((n, m)) < 0.5).astype(int)
            if np.any(cand.sum(axis=1) < 1):
                continue
            if min_singular_value(cand) >= sigma_floor:
                evidence = EvidenceMatrix(cand)
                break
        if evidence is None:
            raise StructureError(
                f"no {n}x{m} matrix with sigma_min >= {sigma_floor} "
                f"found in {MATRIX_REJECTION_LIMIT} tries"
            )
    signals = [_random_signal(outcomes, mu, beta, rng) for _ in range(evidence.m)]
    return InformationStructure(mu, signals, evidence)
