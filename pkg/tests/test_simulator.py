import io

import pytest

from aquamon.gateway import FrameReassembler
from aquamon.ingest import load_dataset
from aquamon.metrics import WATER_METRICS, MetricKind, check_range, default_ranges
from aquamon.simulator import (DEFAULT_SETPOINTS, CsvSink, FrameSink, ListSink,
                               PondParams, PondSimulator, ScenarioEvent,
                               ScenarioScript, run_scenario)


def quiet_params(**kwargs):
    zeros = {m: 0.0 for m in WATER_METRICS}
    return PondParams(noise_stddev=zeros, temp_diurnal_amplitude=0.0, **kwargs)


def run(params, duration, events=(), name="t"):
    sink = ListSink()
    summary = run_scenario(params, ScenarioScript(name=name, duration=duration,
                                                  events=tuple(events)), sink)
    return sink.samples, summary


class TestDynamics:
    def test_zero_noise_fixed_point_is_setpoints(self):
        samples, _ = run(quiet_params(), 600)
        for _, values, _ in samples:
            for metric, setpoint in DEFAULT_SETPOINTS.items():
                assert values[metric] == pytest.approx(setpoint, abs=1e-12)

    def test_diurnal_temperature_band(self):
        params = PondParams(noise_stddev={m: 0.0 for m in WATER_METRICS},
                            temp_diurnal_amplitude=2.0)
        samples, _ = run(params, 86400)
        temps = [v[MetricKind.temperature] for _, v, _ in samples]
        assert min(temps) == pytest.approx(26.0, abs=0.01)
        assert max(temps) == pytest.approx(30.0, abs=0.01)
        # one full day: starts and ends at the mean
        assert temps[0] == pytest.approx(28.0, abs=1e-9)

    def test_do_tracks_temperature_negatively(self):
        params = PondParams(noise_stddev={m: 0.0 for m in WATER_METRICS},
                            temp_diurnal_amplitude=2.0)
        samples, _ = run(params, 86400)
        for _, values, _ in samples:
            t_excess = values[MetricKind.temperature] - 28.0
            expected = 6.5 - 0.29 * t_excess
            assert values[MetricKind.dissolved_oxygen] == pytest.approx(expected,
                                                                        abs=1e-9)

    def test_determinism(self):
        a, _ = run(PondParams(seed=99), 3600)
        b, _ = run(PondParams(seed=99), 3600)
        assert a == b

    def test_seed_changes_stream(self):
        a, _ = run(PondParams(seed=1), 3600)
        b, _ = run(PondParams(seed=2), 3600)
        assert a != b

    def test_healthy_week_mostly_in_range(self):
        samples, _ = run(PondParams(seed=5, sample_period=600), 7 * 86400)
        ranges = default_ranges()
        checked = in_range = 0
        for _, values, _ in samples:
            for metric, value in values.items():
                rng = ranges.get(metric)
                if rng is None:
                    continue
                checked += 1
                if check_range(value, rng, metric).status == "in_range":
                    in_range += 1
        assert checked > 0
        assert in_range / checked >= 0.99

    def test_noise_reverts_to_mean(self):
        samples, _ = run(PondParams(seed=3, temp_diurnal_amplitude=0.0), 86400)
        temps = [v[MetricKind.temperature] for _, v, _ in samples]
        mean = sum(temps) / len(temps)
        assert mean == pytest.approx(28.0, abs=0.2)


class TestOutliers:
    def test_outlier_magnitude_and_count(self):
        params = quiet_params(outlier_probability=0.05, seed=11)
        samples, summary = run(params, 86400)
        outliers = 0
        for _, values, _ in samples:
            for metric, value in values.items():
                setpoint = DEFAULT_SETPOINTS[metric]
                if value != pytest.approx(setpoint, abs=1e-9):
                    ratio = value / setpoint
                    assert 3.0 <= ratio <= 10.0
                    outliers += 1
        assert outliers == summary.outliers_injected > 0

    def test_outlier_leaves_latent_state_untouched(self):
        clean, _ = run(quiet_params(seed=4), 3600)
        noisy, _ = run(quiet_params(seed=4, outlier_probability=0.2), 3600)
        # zero noise: every non-outlier value must still sit exactly on the
        # setpoint, proving outliers never perturbed the latent chemistry
        for _, values, _ in noisy:
            for metric, value in values.items():
                setpoint = DEFAULT_SETPOINTS[metric]
                on_setpoint = abs(value - setpoint) < 1e-9
                is_outlier = 3.0 <= value / setpoint <= 10.0
                assert on_setpoint or is_outlier
        assert len(clean) == len(noisy)


class TestScenarioEvents:
    def test_spike_single_sample(self):
        events = [ScenarioEvent(at=120, action="spike",
                                metric=MetricKind.ammonia, magnitude=1.0)]
        samples, summary = run(quiet_params(), 300, events)
        ammonia = [v[MetricKind.ammonia] for _, v, _ in samples]
        assert ammonia[2] == pytest.approx(1.2)
        assert all(a == pytest.approx(0.2) for i, a in enumerate(ammonia) if i != 2)
        assert summary.events_applied == 1

    def test_ramp_shifts_setpoint_per_sample(self):
        events = [ScenarioEvent(at=60, action="ramp", metric=MetricKind.temperature,
                                rate=0.5, duration=180)]
        samples, _ = run(quiet_params(), 420, events)
        temps = [v[MetricKind.temperature] for _, v, _ in samples]
        assert temps == pytest.approx([28.0, 28.5, 29.0, 29.5, 29.5, 29.5, 29.5])

    def test_sensor_fault_window(self):
        events = [ScenarioEvent(at=60, action="sensor_fault",
                                metric=MetricKind.ph, duration=120)]
        samples, _ = run(quiet_params(), 300, events)
        faulted = [MetricKind.ph in f for _, _, f in samples]
        assert faulted == [False, True, True, False, False]

    def test_do_crash_forces_low_do(self):
        events = [ScenarioEvent(at=60, action="do_crash", depth=1.5, duration=120)]
        samples, _ = run(quiet_params(), 300, events)
        do = [v[MetricKind.dissolved_oxygen] for _, v, _ in samples]
        assert do == pytest.approx([6.5, 3.5, 3.5, 6.5, 6.5])

    def test_unsorted_events_rejected(self):
        with pytest.raises(ValueError):
            ScenarioScript(name="x", duration=600, events=(
                ScenarioEvent(at=300, action="spike", metric=MetricKind.ph),
                ScenarioEvent(at=60, action="spike", metric=MetricKind.ph)))

    def test_event_outside_duration_rejected(self):
        with pytest.raises(ValueError):
            ScenarioScript(name="x", duration=60, events=(
                ScenarioEvent(at=120, action="spike", metric=MetricKind.ph),))

    def test_script_from_dict(self):
        script = ScenarioScript.from_dict({
            "name": "demo", "duration": 600,
            "events": [{"at": 60, "action": "do_crash",
                        "depth": 1.0, "duration": 120}]})
        assert script.events[0].action == "do_crash"
        assert script.events[0].depth == 1.0


class TestSinks:
    def test_csv_sink_loads_back(self):
        buf = io.StringIO()
        run_scenario(PondParams(seed=8, start_time=1624060800),
                     ScenarioScript(name="csv", duration=600), CsvSink(buf))
        dataset = load_dataset(io.StringIO(buf.getvalue()))
        assert len(dataset.records) == 10
        assert dataset.records[0].timestamp == 1624060800
        assert MetricKind.dissolved_oxygen in dataset.records[0].values

    def test_csv_fault_leaves_blank(self):
        buf = io.StringIO()
        events = (ScenarioEvent(at=0, action="sensor_fault",
                                metric=MetricKind.ph, duration=60),)
        run_scenario(quiet_params(), ScenarioScript(name="f", duration=120,
                                                    events=events), CsvSink(buf))
        rows = buf.getvalue().strip().split("\n")
        header = rows[0].split(",")
        ph_idx = header.index("ph")
        assert rows[1].split(",")[ph_idx] == ""
        assert rows[2].split(",")[ph_idx] != ""

    def test_frame_sink_bytes_decode(self):
        chunks = []
        sink = FrameSink(chunks.append, node_id=3)
        run_scenario(quiet_params(), ScenarioScript(name="w", duration=120), sink)
        r = FrameReassembler()
        frames = [f for chunk in chunks for f in r.feed(chunk)]
        assert len(frames) == 2 * len(WATER_METRICS)
        assert all(f.node_id == 3 for f in frames)
        assert r.counters.resyncs == 0

    def test_frame_sink_byte_determinism(self):
        out = []
        for _ in range(2):
            chunks = []
            run_scenario(PondParams(seed=42),
                         ScenarioScript(name="d", duration=600),
                         FrameSink(chunks.append))
            out.append(b"".join(chunks))
        assert out[0] == out[1]

    def test_frame_sink_self_test_flag(self):
        chunks = []
        events = (ScenarioEvent(at=0, action="sensor_fault",
                                metric=MetricKind.turbidity, duration=60),)
        run_scenario(quiet_params(), ScenarioScript(name="s", duration=120,
                                                    events=events),
                     FrameSink(chunks.append))
        r = FrameReassembler()
        frames = [f for chunk in chunks for f in r.feed(chunk)]
        flagged = [f for f in frames if f.self_test_failed]
        assert len(flagged) == 1
        assert flagged[0].metric is MetricKind.turbidity
