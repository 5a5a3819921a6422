import math

import numpy as np
import pytest
from sklearn.base import clone

from bayesagg.adversarial import example1
from bayesagg.aggregators import (
    AggregatorConfig,
    Classification,
    ConfigError,
    ConstantHalfAggregator,
    DynamicPriorAwareAggregator,
    SimpleAverageAggregator,
    StaticPriorIgnorantAggregator,
    UsageError,
    best_expert_hindsight,
    classify_profile,
    extreme_forecast,
    make_aggregator,
)
from bayesagg.logodds import expected_regret, log_odds, logit_inverse
from bayesagg.structures import (
    EvidenceMatrix,
    InformationStructure,
    SignalDistribution,
    sample_rounds,
)


def iid_signal(mu=0.5, accuracy=0.75):
    return SignalDistribution(mu, [1 - accuracy, accuracy], [accuracy, 1 - accuracy])


class TestAggregatorConfig:
    def test_constants(self):
        cfg = AggregatorConfig(n=4, horizon=10000, sigma=0.5)
        assert cfg.tau == pytest.approx(0.01, abs=1e-15)
        assert cfg.W == pytest.approx(2.0 / 0.5, abs=1e-12)
        assert cfg.Z == pytest.approx(
            2.0 * (math.log(100.0) + math.log(20.0)), abs=1e-10
        )

    def test_rejects_short_horizon(self):
        # n * tau >= 1/2 needs horizon > 4 n^2.
        with pytest.raises(ConfigError):
            AggregatorConfig(n=5, horizon=100, sigma=1.0)

    def test_rejects_bad_beta(self):
        with pytest.raises(ConfigError):
            AggregatorConfig(n=1, horizon=100, sigma=1.0, beta=0.5)

    def test_rejects_bad_sigma(self):
        with pytest.raises(ConfigError):
            AggregatorConfig(n=1, horizon=100, sigma=0.0)


class TestClassification:
    def test_non_extreme(self):
        assert classify_profile([0.5, 0.5], 0.01) is Classification.NON_EXTREME

    def test_extreme_high(self):
        assert classify_profile([0.5, 0.995], 0.01) is Classification.EXTREME_HIGH

    def test_extreme_low(self):
        assert classify_profile([0.005, 0.5], 0.01) is Classification.EXTREME_LOW

    def test_extreme_both(self):
        assert classify_profile([0.005, 0.995], 0.01) is Classification.EXTREME_BOTH

    def test_boundary_is_non_extreme(self):
        # The non-extreme interval [tau, 1 - tau] is closed.
        assert classify_profile([0.01, 0.99], 0.01) is Classification.NON_EXTREME


class TestExtremeForecast:
    def test_values(self):
        assert extreme_forecast(Classification.EXTREME_LOW, 2, 0.01) == pytest.approx(0.02)
        assert extreme_forecast(Classification.EXTREME_HIGH, 2, 0.01) == pytest.approx(0.98)
        assert extreme_forecast(Classification.EXTREME_BOTH, 2, 0.01) == 0.5

    def test_rejects_non_extreme(self):
        with pytest.raises(ValueError):
            extreme_forecast(Classification.NON_EXTREME, 2, 0.01)

    def test_rejects_infeasible(self):
        with pytest.raises(ConfigError):
            extreme_forecast(Classification.EXTREME_LOW, 100, 0.01)


class TestDynamicAggregator:
    def test_initial_hypothesis_predicts_prior(self):
        agg = DynamicPriorAwareAggregator(n=2, horizon=10000).reset()
        for mu in (0.3, 0.5, 0.7):
            agg.reset()
            assert agg.predict([0.4, 0.6], mu) == pytest.approx(mu, abs=1e-12)
            agg.update(1)

    def test_extreme_branch_value(self):
        agg = DynamicPriorAwareAggregator(n=3, horizon=10000).reset()
        r = agg.predict([0.5, 0.5, 0.999], 0.5)
        assert r == pytest.approx(1.0 - 3 * 0.01, abs=1e-12)
        agg.update(1)
        assert agg.extreme_rounds_ == 1
        assert agg.nonextreme_rounds_ == 0

    def test_extreme_rounds_leave_h_unchanged(self, rng):
        agg = DynamicPriorAwareAggregator(n=2, horizon=10000).reset()
        agg.set_hypothesis(np.array([0.3, -0.2]))
        before = agg.h_.copy()
        for _ in range(50):
            extreme = rng.uniform(0, 0.009)
            agg.predict([extreme, 0.5], 0.5)
            agg.update(int(rng.random() < 0.5))
        assert np.array_equal(agg.h_, before)
        assert agg.extreme_rounds_ == 50

    def test_one_gradient_step(self):
        # h = 0, mu = 1/2, F = (0.75, 0.5): z = (ln 3, 0), forecast 1/2,
        # omega = 0 gives gradient (1/2)(ln 3, 0).
        agg = DynamicPriorAwareAggregator(n=2, horizon=10000).reset()
        r = agg.predict([0.75, 0.5], 0.5)
        assert r == pytest.approx(0.5, abs=1e-12)
        agg.update(0)
        eta = agg.ogd_.eta
        assert np.allclose(agg.h_, [-eta * 0.5 * math.log(3.0), 0.0], atol=1e-12)

    def test_prior_clamping(self):
        agg = DynamicPriorAwareAggregator(n=1, horizon=10000, beta=0.05).reset()
        r = agg.predict([0.5], 0.001)
        assert r == pytest.approx(0.05, abs=1e-12)
        agg.update(0)
        assert agg.prior_clamps_ == 1

    def test_usage_errors(self):
        agg = DynamicPriorAwareAggregator(n=1, horizon=10000).reset()
        with pytest.raises(UsageError):
            agg.update(1)
        agg.predict([0.5], 0.5)
        with pytest.raises(UsageError):
            agg.predict([0.5], 0.5)
        agg.update(1)
        with pytest.raises(UsageError):
            agg.predict([0.5], None)

    def test_profile_validation(self):
        agg = DynamicPriorAwareAggregator(n=2, horizon=10000).reset()
        with pytest.raises(ValueError):
            agg.predict([0.5], 0.5)
        with pytest.raises(ValueError):
            agg.predict([0.5, 1.2], 0.5)

    def test_run_sequence_matches_stepwise_bitwise(self, rng):
        structure = example1()
        T = 2000
        omega, _, _, forecasts, _ = sample_rounds(structure, T, rng)
        mus = np.full(T, structure.mu)
        fast = DynamicPriorAwareAggregator(n=2, horizon=T).reset()
        out_fast = fast.run_sequence(forecasts, omega, mus)
        slow = DynamicPriorAwareAggregator(n=2, horizon=T).reset()
        out_slow = np.empty(T)
        for t in range(T):
            out_slow[t] = slow.predict(forecasts[t], mus[t])
            slow.update(int(omega[t]))
        assert np.array_equal(out_fast, out_slow)
        assert np.array_equal(fast.h_, slow.h_)
        assert fast.extreme_rounds_ == slow.extreme_rounds_

    def test_optimal_hypothesis_is_regret_free(self, rng):
        # With A injective and h pinned to h*, every non-extreme forecast
        # equals r* up to roundoff.
        signals = [iid_signal() for _ in range(3)]
        structure = InformationStructure(
            0.5, signals, EvidenceMatrix([[1, 1, 0], [0, 1, 1], [1, 0, 1]])
        )
        h_star = structure.evidence.h_star
        T = 500
        omega, _, _, forecasts, r_star = sample_rounds(structure, T, rng)
        agg = DynamicPriorAwareAggregator(
            n=3, horizon=T, sigma=structure.evidence.sigma_min
        ).reset()
        tau = agg.config_.tau
        checked = 0
        for t in range(T):
            agg.set_hypothesis(h_star)
            r = agg.predict(forecasts[t], 0.5)
            agg.update(int(omega[t]))
            if classify_profile(forecasts[t], tau) is Classification.NON_EXTREME:
                assert expected_regret(r, r_star[t]) <= 1e-9
                checked += 1
        assert checked > 0

    def test_output_interiority(self, rng):
        structure = example1()
        T = 5000
        omega, _, _, forecasts, _ = sample_rounds(structure, T, rng)
        agg = DynamicPriorAwareAggregator(n=2, horizon=T).reset()
        out = agg.run_sequence(forecasts, omega, np.full(T, 0.5))
        cfg = agg.config_
        bound = min(
            cfg.n * cfg.tau, logit_inverse(-(cfg.W * cfg.Z + abs(log_odds(0.5))))
        )
        assert np.all(out >= bound)
        assert np.all(out <= 1.0 - bound)


class TestExtremeRoundSafety:
    def test_conditional_state_frequencies(self, rng):
        # Two experts each seeing all of six informative signals produce
        # genuinely extreme forecast profiles; conditional on the extreme
        # classification the realized state obeys the n*tau bounds.
        signals = [iid_signal() for _ in range(6)]
        structure = InformationStructure(
            0.5, signals, EvidenceMatrix(np.ones((2, 6)))
        )
        T = 10**5
        tau = 0.05
        n = 2
        omega, _, _, forecasts, _ = sample_rounds(structure, T, rng)
        low = np.any(forecasts < tau, axis=1)
        high = np.any(forecasts > 1 - tau, axis=1)
        only_low = low & ~high
        only_high = high & ~low
        both = low & high
        count = int(only_low.sum())
        assert count > 100
        freq = float(omega[only_low].mean())
        se = math.sqrt(max(freq * (1 - freq), 1e-4) / count)
        assert freq <= n * tau + 4 * se
        count = int(only_high.sum())
        freq1 = float((omega[only_high] == 0).mean())
        se = math.sqrt(max(freq1 * (1 - freq1), 1e-4) / count)
        assert freq1 <= n * tau + 4 * se
        p_both = float(both.mean())
        se = math.sqrt(max(p_both * (1 - p_both), 1e-6) / T)
        assert p_both <= 2 * n * tau + 4 * se


class TestStaticAggregator:
    def test_phase1_length_formula(self):
        agg = StaticPriorIgnorantAggregator(n=4, horizon=10000, sigma=0.5).reset()
        assert agg.T1_ == 800

    def test_rejects_exhausted_horizon(self):
        with pytest.raises(ConfigError):
            StaticPriorIgnorantAggregator(n=4, horizon=100, sigma=0.1).reset()

    def test_phase1_ignores_profile(self):
        agg = StaticPriorIgnorantAggregator(n=2, horizon=10000).reset()
        for t in range(agg.T1_):
            assert agg.predict(None) == 0.5
            agg.update(t % 2)
        assert agg.phase_ == 2

    def test_mu_hat_counts(self):
        agg = StaticPriorIgnorantAggregator(n=1, horizon=10000).reset()
        outcomes = [1, 1, 0, 1] * (agg.T1_ // 4) + [0] * (agg.T1_ % 4)
        for w in outcomes:
            agg.predict(None)
            agg.update(w)
        assert agg.mu_hat_ == pytest.approx(
            sum(outcomes) / agg.T1_, abs=1e-15
        )

    def test_mu_hat_clamped(self):
        agg = StaticPriorIgnorantAggregator(n=1, horizon=10000).reset()
        for _ in range(agg.T1_):
            agg.predict(None)
            agg.update(0)
        assert agg.mu_hat_ == pytest.approx(1e-4, abs=1e-18)

    def test_phase2_uses_estimate(self):
        agg = StaticPriorIgnorantAggregator(n=1, horizon=10000).reset()
        for t in range(agg.T1_):
            agg.predict(None)
            agg.update(t % 2)
        # Fresh inner hypothesis: the first Phase 2 forecast is mu_hat.
        assert agg.predict([0.5]) == pytest.approx(agg.mu_hat_, abs=1e-12)
        agg.update(1)

    def test_run_sequence_matches_stepwise(self, rng):
        structure = example1()
        T = 3000
        omega, _, _, forecasts, _ = sample_rounds(structure, T, rng)
        fast = StaticPriorIgnorantAggregator(n=2, horizon=T).reset()
        out_fast = fast.run_sequence(forecasts, omega)
        slow = StaticPriorIgnorantAggregator(n=2, horizon=T).reset()
        out_slow = np.empty(T)
        for t in range(T):
            out_slow[t] = slow.predict(forecasts[t])
            slow.update(int(omega[t]))
        assert np.array_equal(out_fast, out_slow)
        assert fast.mu_hat_ == slow.mu_hat_

    def test_usage_errors(self):
        agg = StaticPriorIgnorantAggregator(n=1, horizon=10000).reset()
        with pytest.raises(UsageError):
            agg.update(1)
        agg.predict(None)
        with pytest.raises(UsageError):
            agg.predict(None)


class TestBaselines:
    def test_constant_half(self):
        agg = ConstantHalfAggregator().reset()
        assert agg.predict([0.9]) == 0.5
        assert np.all(agg.run_sequence(np.full((5, 1), 0.9), np.zeros(5)) == 0.5)

    def test_simple_average(self):
        agg = SimpleAverageAggregator(n=2).reset()
        assert agg.predict([0.2, 0.6]) == pytest.approx(0.4, abs=1e-15)
        out = agg.run_sequence(np.array([[0.2, 0.6], [0.5, 0.5]]), np.zeros(2))
        assert np.allclose(out, [0.4, 0.5], atol=1e-15)

    def test_best_expert_hindsight(self):
        forecasts = np.array([[0.9, 0.5], [0.8, 0.5], [0.9, 0.4]])
        omegas = np.array([1, 1, 1])
        assert best_expert_hindsight(forecasts, omegas) == 0

    def test_best_expert_handles_degenerate_forecasts(self):
        forecasts = np.array([[1.0, 0.5], [0.0, 0.5]])
        omegas = np.array([1, 1])
        assert best_expert_hindsight(forecasts, omegas) == 1


class TestEstimatorPlumbing:
    def test_get_params_round_trip(self):
        agg = DynamicPriorAwareAggregator(n=3, horizon=500, sigma=0.4, beta=0.1)
        params = agg.get_params()
        assert params == {"n": 3, "horizon": 500, "sigma": 0.4, "beta": 0.1}
        cloned = clone(agg)
        assert cloned.get_params() == params

    def test_fit_resets(self, rng):
        structure = example1()
        omega, _, _, forecasts, _ = sample_rounds(structure, 200, rng)
        agg = DynamicPriorAwareAggregator(n=2, horizon=200)
        agg.fit(forecasts, omega, np.full(200, 0.5))
        h_first = agg.h_.copy()
        agg.fit(forecasts, omega, np.full(200, 0.5))
        assert np.array_equal(agg.h_, h_first)

    def test_factory(self):
        for name in ("dynamic", "static", "half", "average"):
            agg = make_aggregator(name, n=2, horizon=10000)
            assert agg.started_
        with pytest.raises(ConfigError):
            make_aggregator("nope", n=2, horizon=10000)
