import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from aquamon.metrics import (BoundKind, MetricKind, OptimalRange,
                             RangeConfigError, check_range, default_ranges,
                             ranges_from_mapping)

EPS = 1e-9


def test_metric_ids_are_stable():
    assert [int(m) for m in MetricKind] == list(range(11))
    assert MetricKind.temperature == 0
    assert MetricKind.turbidity == 7
    assert MetricKind.fish_weight == 10


def test_water_metrics_cutoff():
    assert all(m.is_water_metric for m in MetricKind if m <= 7)
    assert not any(m.is_water_metric for m in (MetricKind.population,
                                               MetricKind.fish_length,
                                               MetricKind.fish_weight))


class TestCheckRange:
    def test_snapshot_temperature_below(self):
        r = default_ranges()[MetricKind.temperature]
        v = check_range(24.875, r, MetricKind.temperature)
        assert v.status == "below"
        assert v.violated_bound == 25

    def test_snapshot_ph_in_range(self):
        r = default_ranges()[MetricKind.ph]
        assert check_range(8.43365, r, MetricKind.ph).status == "in_range"

    def test_do_min_only_below(self):
        r = default_ranges()[MetricKind.dissolved_oxygen]
        v = check_range(4.505, r, MetricKind.dissolved_oxygen)
        assert v.status == "below"
        assert v.violated_bound == 5

    def test_boundary_inclusive(self):
        r = default_ranges()[MetricKind.temperature]
        assert check_range(25.0, r, MetricKind.temperature).status == "in_range"
        assert check_range(32.0, r, MetricKind.temperature).status == "in_range"

    def test_nitrate_above(self):
        r = default_ranges()[MetricKind.nitrate]
        v = check_range(193, r, MetricKind.nitrate)
        assert v.status == "above"
        assert v.violated_bound == 100

    def test_no_range_unchecked(self):
        v = check_range(0.45842, None, MetricKind.ammonia)
        assert v.status == "unchecked"

    def test_dataset_context_metric_unchecked(self):
        r = OptimalRange(MetricKind.temperature, 0, 1)  # bogus, must be ignored
        assert check_range(50, None, MetricKind.population).status == "unchecked"

    def test_non_finite_rejected(self):
        r = default_ranges()[MetricKind.ph]
        with pytest.raises(ValueError):
            check_range(float("nan"), r, MetricKind.ph)
        with pytest.raises(ValueError):
            check_range(float("inf"), r, MetricKind.ph)

    @pytest.mark.parametrize("metric", [m for m, r in default_ranges().items()
                                        if r.bound_kind is BoundKind.closed_interval])
    def test_epsilon_around_closed_bounds(self, metric):
        r = default_ranges()[metric]
        assert check_range(r.lower, r, metric).status == "in_range"
        assert check_range(r.upper, r, metric).status == "in_range"
        assert check_range(r.lower - EPS, r, metric).status == "below"
        assert check_range(r.upper + EPS, r, metric).status == "above"

    @given(st.floats(-1e6, 1e6))
    def test_pure_function(self, value):
        r = OptimalRange(MetricKind.ph, 6.5, 8.5)
        assert check_range(value, r, MetricKind.ph) == check_range(value, r, MetricKind.ph)


class TestDefaultRanges:
    def test_exactly_seven_entries(self):
        ranges = default_ranges()
        assert len(ranges) == 7
        assert MetricKind.ammonia not in ranges

    def test_published_values(self):
        ranges = default_ranges()
        assert (ranges[MetricKind.temperature].lower,
                ranges[MetricKind.temperature].upper) == (25, 32)
        assert (ranges[MetricKind.ph].lower, ranges[MetricKind.ph].upper) == (6.5, 8.5)
        do = ranges[MetricKind.dissolved_oxygen]
        assert (do.lower, do.upper, do.bound_kind) == (5, None, BoundKind.min_only)
        tds = ranges[MetricKind.tds]
        assert (tds.lower, tds.upper, tds.bound_kind) == (None, 400, BoundKind.max_only)
        nit = ranges[MetricKind.nitrite]
        assert (nit.upper, nit.bound_kind) == (0.2, BoundKind.max_only)
        assert (ranges[MetricKind.nitrate].lower, ranges[MetricKind.nitrate].upper) == (0, 100)
        assert (ranges[MetricKind.turbidity].lower, ranges[MetricKind.turbidity].upper) == (30, 80)


class TestRangeValidation:
    def test_needs_a_bound(self):
        with pytest.raises(RangeConfigError):
            OptimalRange(MetricKind.ph)

    def test_lower_must_be_less(self):
        with pytest.raises(RangeConfigError):
            OptimalRange(MetricKind.ph, 8.5, 6.5)
        with pytest.raises(RangeConfigError):
            OptimalRange(MetricKind.ph, 7.0, 7.0)

    def test_override_mapping(self):
        ranges = ranges_from_mapping({"ammonia": {"upper": 0.5},
                                      "tds": {"lower": 50, "upper": 500}})
        assert ranges[MetricKind.ammonia].upper == 0.5
        assert ranges[MetricKind.tds].lower == 50

    def test_override_removal(self):
        ranges = ranges_from_mapping({"turbidity": None})
        assert MetricKind.turbidity not in ranges

    def test_context_metric_rejected(self):
        with pytest.raises(RangeConfigError):
            ranges_from_mapping({"population": {"upper": 100}})

    def test_unknown_key_rejected(self):
        with pytest.raises(RangeConfigError):
            ranges_from_mapping({"ph": {"min": 6.0}})
