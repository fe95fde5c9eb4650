"""Operator and developer entry points.

Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
"""

from __future__ import annotations

import asyncio
import json
import socket
import sys
import time
from pathlib import Path

import click
import numpy as np

from .forecast import (CnnModel, DivergenceError, IntegrityError, ShapeError,
                       TrainingParams, VersionError, WindowSpec,
                       baseline_moving_average, baseline_persistence, evaluate,
                       gradient_check, load_model, make_windows, save_model, train)
from .forecast.network import init_weights
from .forecast.windows import Normalizer
from .ingest import (DatasetSchemaError, NoDataError, SplitError, fill_gaps,
                     load_dataset, resample, series_to_csv, split)
from .metrics import InvalidMetricError, MetricKind, WATER_METRICS
from .simulator import (CsvSink, FrameSink, PondParams, ScenarioScript,
                        run_scenario)

BUILTIN_SCENARIOS = {
    "healthy": {"name": "healthy", "duration": 86400, "events": []},
    "do_crash": {"name": "do_crash", "duration": 7200,
                 "events": [{"at": 1800, "action": "do_crash",
                             "depth": 1.5, "duration": 3600}]},
}


@click.group()
def main():
    """Water-quality monitoring, forecasting and supervisory control."""


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _metric(name: str) -> MetricKind:
    try:
        return MetricKind.from_name(name)
    except InvalidMetricError as exc:
        _fail(str(exc), 2)


def _load_series(data: str, metric: MetricKind, step: int, max_gap: int = 3):
    path = Path(data)
    if not path.exists():
        _fail(f"data file not found: {data}", 2)
    try:
        dataset = load_dataset(path.open(), source_name=str(path))
        return fill_gaps(resample(dataset, metric, step), max_gap)
    except (DatasetSchemaError, NoDataError) as exc:
        _fail(str(exc), 2)


def _print_reports(reports: dict[str, object], fmt: str) -> None:
    if fmt == "document":
        click.echo(json.dumps({k: r.as_dict() for k, r in reports.items()}, indent=2))
    else:
        for label, report in reports.items():
            click.echo(report.format_table(label))


def _holdout_reports(model: CnnModel, windows) -> dict:
    spec = model.spec
    tc = spec.target_channel
    cnn_preds, pers_preds, ma_preds, actuals = [], [], [], []
    for window, target in windows:
        cnn_preds.extend(model.predict(window))
        pers_preds.extend(baseline_persistence(window, tc, spec.horizon_steps))
        ma_preds.extend(baseline_moving_average(window, tc, spec.horizon_steps,
                                                spec.history_steps))
        actuals.extend(target)
    return {
        "cnn": evaluate(cnn_preds, actuals),
        "persistence": evaluate(pers_preds, actuals),
        "moving_average": evaluate(ma_preds, actuals),
    }


@main.command()
@click.option("--data", required=True, help="CSV dataset file")
@click.option("--metric", "metric_name", required=True)
@click.option("--step", default=600, show_default=True, help="resample step, seconds")
@click.option("--out", default=None, help="write the resampled series as CSV")
def ingest(data, metric_name, step, out):
    """Parse, validate and resample a dataset CSV."""
    metric = _metric(metric_name)
    path = Path(data)
    if not path.exists():
        _fail(f"data file not found: {data}", 2)
    try:
        dataset = load_dataset(path.open(), source_name=str(path))
        series = resample(dataset, metric, step)
    except (DatasetSchemaError, NoDataError) as exc:
        _fail(str(exc), 2)
    present = sum(1 for v in series.values if v is not None)
    click.echo(f"{len(dataset.records)} records, {len(dataset.rejected_rows)} rejected rows")
    click.echo(f"{metric.name}: {len(series.values)} buckets at {step}s, "
               f"{present} with data, {len(series.suspect_buckets)} flagged high-spread")
    if out:
        Path(out).write_text(series_to_csv(series))
        click.echo(f"wrote {out}")


@main.command("train")
@click.option("--data", required=True, help="CSV dataset file")
@click.option("--metric", "metric_name", required=True)
@click.option("--history", default=3, show_default=True, help="history steps (H)")
@click.option("--horizon", default=6, show_default=True, help="forecast steps (h)")
@click.option("--step", default=600, show_default=True, help="resample step, seconds")
@click.option("--epochs", default=50, show_default=True)
@click.option("--lr", default=1e-3, show_default=True)
@click.option("--batch-size", default=32, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--train-fraction", default=0.8, show_default=True)
@click.option("--out", required=True, help="weight file to write")
@click.option("--format", "fmt", type=click.Choice(["plain", "document"]), default="plain")
def cli_train(data, metric_name, history, horizon, step, epochs, lr, batch_size,
              seed, train_fraction, out, fmt):
    """Train one forecasting model and report holdout skill vs baselines."""
    metric = _metric(metric_name)
    series = _load_series(data, metric, step)
    try:
        train_series, test_series = split(series, train_fraction)
    except SplitError as exc:
        _fail(str(exc), 2)
    spec = WindowSpec(target_metric=metric, history_steps=history,
                      horizon_steps=horizon, step_seconds=step)
    train_windows = make_windows({metric: train_series}, spec)
    test_windows = make_windows({metric: test_series}, spec)
    if not train_windows:
        _fail(f"no usable training windows for {metric.name}", 2)
    hyper = TrainingParams(lr=lr, epochs=epochs, batch_size=batch_size, seed=seed)
    try:
        model = train(train_windows, spec, hyper,
                      trained_on=f"{Path(data).name} seed={seed}")
    except DivergenceError as exc:
        _fail(str(exc), 1)
    save_model(model, out)
    if test_windows:
        _print_reports(_holdout_reports(model, test_windows), fmt)
    else:
        click.echo("holdout too small for evaluation windows", err=True)
    click.echo(f"wrote {out}")


@main.command("eval")
@click.option("--model", "model_path", required=True)
@click.option("--data", required=True)
@click.option("--format", "fmt", type=click.Choice(["plain", "document"]), default="plain")
def cli_eval(model_path, data, fmt):
    """Five-metric evaluation of a saved model and both baselines."""
    try:
        model = load_model(model_path)
    except FileNotFoundError:
        _fail(f"model file not found: {model_path}", 2)
    except (IntegrityError, VersionError, ShapeError) as exc:
        _fail(f"model file {model_path}: {exc}", 2)
    series_map = {m: _load_series(data, m, model.spec.step_seconds)
                  for m in model.spec.input_metrics}
    windows = make_windows(series_map, model.spec)
    if not windows:
        _fail("dataset yields no windows matching the model geometry", 2)
    _print_reports(_holdout_reports(model, windows), fmt)


@main.command()
@click.option("--seed", default=0, show_default=True)
@click.option("--epsilon", default=1e-5, show_default=True)
def gradcheck(seed, epsilon):
    """Validate backprop against central finite differences."""
    rng = np.random.default_rng(seed)
    spec = WindowSpec(target_metric=MetricKind.temperature)
    weights = init_weights(spec, (16, 32), 3, rng)
    model = CnnModel(spec=spec, normalizer=Normalizer(np.zeros(1), np.ones(1)),
                     weights=weights)
    window = rng.standard_normal((spec.history_steps, spec.n_channels))
    target = rng.standard_normal(spec.horizon_steps)
    worst = gradient_check(model, window, target, epsilon=epsilon, seed=seed)
    click.echo(f"max relative gradient discrepancy: {worst:.3e}")
    sys.exit(0 if worst < 1e-4 else 1)


def _open_sink(sink_spec: str, node_id: int = 1):
    kind, _, rest = sink_spec.partition(":")
    if kind == "csv":
        if not rest:
            _fail("csv sink needs a path: csv:PATH", 2)
        stream = Path(rest).open("w", encoding="utf-8", newline="")
        return CsvSink(stream), stream
    if kind == "frames":
        host, _, port = rest.rpartition(":")
        if not host or not port.isdigit():
            _fail("frames sink needs frames:HOST:PORT", 2)
        try:
            conn = socket.create_connection((host, int(port)), timeout=10)
        except OSError as exc:
            _fail(f"cannot connect to {rest}: {exc}", 2)
        return FrameSink(conn.sendall, node_id=node_id), conn
    _fail(f"unknown sink {sink_spec!r} (use csv:PATH or frames:HOST:PORT)", 2)


@main.command()
@click.option("--seed", default=0, show_default=True)
@click.option("--scenario", default="healthy", show_default=True,
              help="builtin name (healthy, do_crash) or YAML file")
@click.option("--sink", "sink_spec", required=True, help="csv:PATH or frames:HOST:PORT")
@click.option("--speedup", default=0.0, show_default=True,
              help="0 = as fast as possible")
@click.option("--duration", default=None, type=int, help="override scenario duration, seconds")
@click.option("--sample-period", default=60, show_default=True)
@click.option("--start-time", default=0, show_default=True, help="epoch seconds")
@click.option("--outlier-probability", default=0.0, show_default=True)
def simulate(seed, scenario, sink_spec, speedup, duration, sample_period,
             start_time, outlier_probability):
    """Run the synthetic pond into a CSV file or a frame stream."""
    import yaml
    if scenario in BUILTIN_SCENARIOS:
        script_data = dict(BUILTIN_SCENARIOS[scenario])
    else:
        path = Path(scenario)
        if not path.exists():
            _fail(f"unknown scenario {scenario!r} and no such file", 2)
        script_data = yaml.safe_load(path.read_text())
    if duration is not None:
        script_data["duration"] = duration
    try:
        script = ScenarioScript.from_dict(script_data)
        params = PondParams(seed=seed, sample_period=sample_period,
                            start_time=start_time,
                            outlier_probability=outlier_probability)
    except (ValueError, TypeError, KeyError) as exc:
        _fail(f"invalid scenario/parameters: {exc}", 2)
    sink, closable = _open_sink(sink_spec)
    try:
        summary = run_scenario(params, script, sink, speedup=speedup)
    finally:
        closable.close()
    click.echo(f"emitted {summary.samples_emitted} samples, "
               f"{summary.outliers_injected} outliers, "
               f"{summary.events_applied} scripted events")


@main.command()
@click.option("--data", required=True, help="CSV dataset to replay")
@click.option("--sink", "sink_spec", required=True, help="frames:HOST:PORT")
@click.option("--speedup", default=1000.0, show_default=True)
@click.option("--node-id", default=1, show_default=True)
def replay(data, sink_spec, speedup, node_id):
    """Replay a dataset CSV as live sensor frames."""
    path = Path(data)
    if not path.exists():
        _fail(f"data file not found: {data}", 2)
    try:
        dataset = load_dataset(path.open(), source_name=str(path))
    except DatasetSchemaError as exc:
        _fail(str(exc), 2)
    sink, closable = _open_sink(sink_spec, node_id=node_id)
    prev_ts = None
    try:
        for record in dataset.records:
            if speedup > 0 and prev_ts is not None and record.timestamp > prev_ts:
                time.sleep((record.timestamp - prev_ts) / speedup)
            prev_ts = record.timestamp
            water = {m: v for m, v in record.values.items() if m in WATER_METRICS}
            sink.emit(record.timestamp, water, frozenset())
    finally:
        closable.close()
    click.echo(f"replayed {len(dataset.records)} records")


@main.command()
@click.option("--config", "config_path", default=None, help="YAML config file")
@click.option("--no-forecast", is_flag=True,
              help="run monitoring-only if model files are missing")
def serve(config_path, no_forecast):
    """Run the full pipeline and operator API until interrupted."""
    from .service.config import ConfigError, load_config
    from .service.runner import StartupError, serve_forever
    try:
        config = load_config(Path(config_path) if config_path else None)
    except ConfigError as exc:
        _fail(str(exc), 2)
    try:
        asyncio.run(serve_forever(config, allow_missing_models=no_forecast))
    except StartupError as exc:
        _fail(str(exc), 2)
    except KeyboardInterrupt:
        pass


if __name__ == "__main__":
    main()
