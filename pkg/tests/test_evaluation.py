import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aquamon.forecast import baseline_moving_average, baseline_persistence, evaluate

finite_floats = st.floats(-1e6, 1e6, allow_nan=False)


class TestEvaluateOracle:
    def test_hand_computed_case(self):
        # errors: 1, -2, 40 -> |e| sums to 43; squares 1+4+1600
        report = evaluate([11, 18, 80], [10, 20, 40])
        assert report.mae == pytest.approx(43 / 3, rel=1e-9)
        assert report.mse == pytest.approx(535, rel=1e-9)
        assert report.rmse == pytest.approx(math.sqrt(535), rel=1e-9)
        assert report.mape == pytest.approx(40, rel=1e-9)
        assert report.mdape == pytest.approx(10, rel=1e-9)
        assert report.n_points == 3
        assert report.n_excluded_zero_denominator == 0

    def test_identity_forecast_all_zero(self):
        report = evaluate([3.0, -1.5, 7.2], [3.0, -1.5, 7.2])
        assert (report.mae, report.mse, report.rmse) == (0, 0, 0)
        assert report.mape == 0 and report.mdape == 0

    def test_zero_denominator_exclusion(self):
        report = evaluate([1, 10], [0, 10])
        assert report.mae == pytest.approx(0.5)
        assert report.n_excluded_zero_denominator == 1
        assert report.mdape == 0 and report.mape == 0

    def test_all_denominators_excluded(self):
        report = evaluate([1.0, 2.0], [0.0, 0.0])
        assert report.mdape is None and report.mape is None
        assert report.mae == pytest.approx(1.5)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            evaluate([1, 2], [1, 2, 3])

    def test_empty(self):
        with pytest.raises(ValueError):
            evaluate([], [])

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            evaluate([float("nan")], [1.0])

    def test_even_length_median(self):
        # APEs are 10, 20, 30, 40 -> median (20+30)/2
        report = evaluate([110, 120, 130, 140], [100, 100, 100, 100])
        assert report.mdape == pytest.approx(25)


class TestMetricProperties:
    @given(st.lists(finite_floats, min_size=1, max_size=200),
           st.lists(finite_floats, min_size=1, max_size=200))
    @settings(max_examples=300)
    def test_rmse_dominates_mae(self, a, b):
        n = min(len(a), len(b))
        report = evaluate(a[:n], b[:n])
        assert report.rmse >= report.mae - 1e-12
        assert report.rmse == pytest.approx(math.sqrt(report.mse), rel=1e-9, abs=1e-30)

    def test_mdape_robust_to_minority_corruption(self):
        rng = np.random.default_rng(7)
        n = 400
        actuals = rng.uniform(50, 150, n)
        clean_ape = rng.uniform(0, 20, n)
        preds = actuals * (1 + clean_ape / 100)
        clean = evaluate(preds, actuals)
        clean_min, clean_max = clean_ape.min(), clean_ape.max()

        corrupted = preds.copy()
        k = n // 2 - 1  # strictly fewer than ceil(n/2) points
        idx = rng.choice(n, size=k, replace=False)
        corrupted[idx] = actuals[idx] * 50  # APE 4900%, far above clean max
        dirty = evaluate(corrupted, actuals)
        assert clean_min <= dirty.mdape <= clean_max
        assert dirty.mape > clean.mape + 1000


class TestBaselines:
    def test_persistence_repeats_last(self):
        window = np.array([[1.0], [2.0], [7.1]])
        assert list(baseline_persistence(window, 0, 4)) == [7.1] * 4

    def test_constant_series_zero_error(self):
        window = np.full((3, 1), 4.2)
        target = np.full(6, 4.2)
        for preds in (baseline_persistence(window, 0, 6),
                      baseline_moving_average(window, 0, 6, 3)):
            assert evaluate(preds, target).mae == 0

    def test_moving_average(self):
        window = np.array([[1.0], [2.0], [3.0]])
        assert list(baseline_moving_average(window, 0, 2, 3)) == [2.0, 2.0]

    def test_k_exceeds_history(self):
        with pytest.raises(ValueError):
            baseline_moving_average(np.zeros((3, 1)), 0, 2, 4)

    def test_target_channel_selection(self):
        window = np.array([[1.0, 10.0], [2.0, 20.0], [3.0, 30.0]])
        assert baseline_persistence(window, 1, 1)[0] == 30.0
