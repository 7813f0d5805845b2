import numpy as np
import pytest
from scipy import stats

from jpsn.core import PolyCylDataset, angular_distance
from jpsn.errors import DomainError
from jpsn.mcmc import ChainConfig, run_gibbs
from jpsn.model import JpsnParams, simulate_jpsn
from jpsn.scoring import (
    PredictiveDraws,
    compare_models,
    crps_circular,
    crps_linear,
    holdout_split,
)


def naive_crps_circular(truth, draws):
    draws = np.asarray(draws, dtype=float)
    n = draws.size
    t1 = sum(angular_distance(truth, d) for d in draws) / n
    t2 = sum(angular_distance(a, b) for a in draws for b in draws) / (2 * n * n)
    return t1 - t2


def naive_crps_linear(truth, draws):
    draws = np.asarray(draws, dtype=float)
    n = draws.size
    t1 = np.abs(draws - truth).mean()
    t2 = sum(abs(a - b) for a in draws for b in draws) / (2 * n * n)
    return t1 - t2


class TestHoldoutSplit:
    def test_zero_masked_warns(self):
        data = PolyCylDataset(1, 1, [[0.5], [1.0]], [[0.1], [0.2]])
        rng = np.random.default_rng(42)
        with pytest.warns(UserWarning):
            masked, key = holdout_split(data, 1e-9, rng)
        assert key.theta_index.size == 0 and key.y_index.size == 0
        assert not masked.theta_missing.any()

    def test_binomial_band_at_reference_size(self):
        rng = np.random.default_rng(0)
        data = PolyCylDataset(4, 4, rng.uniform(0, 2 * np.pi, (442, 4)), rng.normal(0, 1, (442, 4)))
        masked, key = holdout_split(data, 0.1, np.random.default_rng(1))
        n_masked = key.theta_index.shape[0] + key.y_index.shape[0]
        assert 318 <= n_masked <= 389
        assert masked.theta_missing.sum() == key.theta_index.shape[0]

    def test_fraction_domain(self):
        data = PolyCylDataset(1, 0, [[0.5]], np.zeros((1, 0)))
        with pytest.raises(DomainError):
            holdout_split(data, 0.0, np.random.default_rng(0))
        with pytest.raises(DomainError):
            holdout_split(data, 1.0, np.random.default_rng(0))

    def test_already_missing_never_selected(self):
        rng = np.random.default_rng(2)
        data = PolyCylDataset(1, 1, rng.uniform(0, 6, (50, 1)), rng.normal(0, 1, (50, 1)))
        data.y_missing[:25] = True
        _, key = holdout_split(data, 0.5, np.random.default_rng(3))
        assert np.all(key.y_index[:, 0] >= 25)

    def test_masked_values_ignored_by_fit(self):
        rng = np.random.default_rng(4)
        params = JpsnParams(1, 1, [0.5, -0.5, 0.0], np.eye(3), [1.0])
        data, _ = simulate_jpsn(params, 60, rng)
        masked, key = holdout_split(data, 0.15, np.random.default_rng(5))
        perturbed = masked.copy()
        perturbed.theta[perturbed.theta_missing] = 3.0
        perturbed.y[perturbed.y_missing] = 123.0
        cfg = ChainConfig(iterations=200, burnin=100, thin=1, seed=6)
        a = run_gibbs(masked, None, cfg)
        b = run_gibbs(perturbed, None, cfg)
        assert np.array_equal(a.mu, b.mu)
        assert np.array_equal(a.y_imputed, b.y_imputed)


class TestCrpsCircular:
    def test_perfect_prediction(self):
        assert crps_circular(1.3, np.full(50, 1.3)) == 0.0

    def test_constant_predictor(self):
        truth, c = 0.4, 2.1
        got = crps_circular(truth, np.full(64, c))
        assert got == pytest.approx(angular_distance(truth, c), abs=1e-15)

    def test_matches_naive_double_sum(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            truth = rng.uniform(0, 2 * np.pi)
            draws = rng.uniform(0, 2 * np.pi, rng.integers(2, 60))
            assert crps_circular(truth, draws) == pytest.approx(
                naive_crps_circular(truth, draws), abs=1e-12
            )

    def test_rotation_invariance(self):
        rng = np.random.default_rng(8)
        truth = 1.0
        draws = rng.vonmises(1.0, 2.0, 100) % (2 * np.pi)
        base = crps_circular(truth, draws)
        for shift in (0.5, 2.0, 5.0):
            rotated = (draws + shift) % (2 * np.pi)
            assert crps_circular((truth + shift) % (2 * np.pi), rotated) == pytest.approx(
                base, abs=1e-12
            )

    def test_empty_draws(self):
        with pytest.raises(DomainError):
            crps_circular(0.0, np.empty(0))


class TestCrpsLinear:
    def test_perfect_prediction(self):
        assert crps_linear(0.7, np.full(10, 0.7)) == 0.0

    def test_hand_case(self):
        assert crps_linear(1.0, np.array([0.0, 2.0])) == pytest.approx(0.5, abs=1e-15)

    def test_fast_path_equals_double_sum(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            n = int(rng.integers(2, 2000))
            draws = rng.normal(0, 3, n)
            truth = rng.normal()
            slow = (
                np.abs(draws - truth).mean()
                - np.abs(draws[:, None] - draws[None, :]).mean() / 2
            )
            assert crps_linear(truth, draws) == pytest.approx(slow, abs=1e-10)

    def test_nonnegative_and_permutation_invariant(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            draws = rng.normal(0, 2, 40)
            truth = rng.normal()
            val = crps_linear(truth, draws)
            assert val >= 0.0
            assert crps_linear(truth, rng.permutation(draws)) == pytest.approx(val, abs=1e-12)

    def test_propriety_smoke(self):
        # predictive from the actual law beats a wrong point forecast on average
        rng = np.random.default_rng(11)
        wins = 0
        for _ in range(200):
            truth = rng.normal(0, 1)
            good = crps_linear(truth, rng.normal(0, 1, 200))
            bad = crps_linear(truth, np.full(200, 2.5))
            wins += good <= bad
        assert wins >= 150

    def test_circular_nonnegative(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            assert crps_circular(rng.uniform(0, 2 * np.pi), rng.uniform(0, 2 * np.pi, 30)) >= 0.0


class TestCompareModels:
    def test_oracle_model_scores_zero(self):
        rng = np.random.default_rng(13)
        params = JpsnParams(1, 1, [0.5, -0.5, 0.0], np.eye(3), [1.0])
        data, _ = simulate_jpsn(params, 200, rng)

        def oracle(masked, seed):
            preds = PredictiveDraws()
            for t, i in np.argwhere(masked.theta_missing):
                preds.theta[(int(t), int(i))] = np.full(20, data.theta[t, i])
            for t, j in np.argwhere(masked.y_missing):
                preds.y[(int(t), int(j))] = np.full(20, data.y[t, j])
            return preds

        table = compare_models(data, 0.1, {"oracle": oracle}, np.random.default_rng(14))
        assert len(table.rows) == 1
        assert table.rows[0].crps_circular == 0.0
        assert table.rows[0].crps_linear == 0.0

    def test_schema(self):
        rng = np.random.default_rng(15)
        params = JpsnParams(1, 1, [0.5, -0.5, 0.0], np.eye(3), [0.5])
        data, _ = simulate_jpsn(params, 100, rng)

        def fake(masked, seed):
            preds = PredictiveDraws()
            gen = np.random.default_rng(seed)
            for t, i in np.argwhere(masked.theta_missing):
                preds.theta[(int(t), int(i))] = gen.uniform(0, 2 * np.pi, 30)
            for t, j in np.argwhere(masked.y_missing):
                preds.y[(int(t), int(j))] = gen.normal(0, 1, 30)
            return preds

        table = compare_models(data, 0.2, {"a": fake, "b": fake}, np.random.default_rng(16))
        assert [r.model for r in table.rows] == ["a", "b"]
        for row in table.rows:
            assert row.crps_circular >= 0 and row.crps_linear >= 0
        assert set(table.per_entry) == {"a", "b"}

    def test_error_annotated_with_model_name(self):
        data = PolyCylDataset(1, 0, [[0.5], [1.2], [2.0]], np.zeros((3, 0)))

        def broken(masked, seed):
            raise ValueError("exploded")

        with pytest.raises(ValueError, match="model 'bad'"):
            compare_models(data, 0.5, {"bad": broken}, np.random.default_rng(17))

    def test_no_fitters_rejected(self):
        data = PolyCylDataset(1, 0, [[0.5]], np.zeros((1, 0)))
        with pytest.raises(DomainError):
            compare_models(data, 0.5, {}, np.random.default_rng(18))
