"""CSV dataset ingestion: parse, dedupe, resample and gap-fill.

The canonical timestamp format is the dataset's own ``YYYY-MM-DD:HH:MM:SS``
(colon between date and time). ISO space/T variants are accepted because
public copies of the dataset differ.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Optional, TextIO, Union

from .metrics import COLUMN_ALIASES, InvalidMetricError, MetricKind, SampleRecord

log = logging.getLogger(__name__)

_TS_RE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})[:T ](\d{2}):(\d{2}):(\d{2})$")

#: Buckets whose values spread more than this coefficient of variation get
#: flagged as suspect (likely erroneous measurements), never censored.
DEFAULT_SPREAD_CV = 0.5


class TimestampParseError(ValueError):
    pass


class DatasetSchemaError(ValueError):
    pass


class NoDataError(ValueError):
    pass


class SplitError(ValueError):
    pass


def parse_timestamp(text: str) -> int:
    """Parse a dataset timestamp to epoch seconds (UTC assumed)."""
    m = _TS_RE.match(text.strip())
    if not m:
        raise TimestampParseError(f"unparseable timestamp {text!r}")
    year, month, day, hour, minute, second = (int(g) for g in m.groups())
    try:
        dt = datetime(year, month, day, hour, minute, second, tzinfo=timezone.utc)
    except ValueError as exc:
        raise TimestampParseError(f"invalid timestamp {text!r}: {exc}") from None
    return int(dt.timestamp())


def format_timestamp(epoch: int) -> str:
    """Inverse of parse_timestamp, in the canonical colon form."""
    dt = datetime.fromtimestamp(epoch, tz=timezone.utc)
    return dt.strftime("%Y-%m-%d:%H:%M:%S")


@dataclass
class RawDataset:
    records: list[SampleRecord]
    source_name: str = "<unknown>"
    rejected_rows: list[tuple[int, str]] = field(default_factory=list)


@dataclass
class RegularSeries:
    """One metric resampled onto a fixed grid; missing buckets are None."""

    metric: MetricKind
    start: int            # epoch seconds of the first bucket
    step: int             # seconds
    values: list[Optional[float]]
    agg: str = "mean"
    suspect_buckets: set[int] = field(default_factory=set)

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if not self.values:
            raise ValueError("a series needs at least one bucket")

    def bucket_start(self, index: int) -> int:
        return self.start + index * self.step


def load_dataset(source: Union[str, TextIO, Iterable[str]], source_name: str = "<stream>") -> RawDataset:
    """Parse a Fig.-style aquaponics CSV into sorted, deduplicated records.

    Rows with unparseable timestamps or no parseable metric value are
    rejected (with line number and reason); duplicate entry_ids keep the
    first occurrence.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise DatasetSchemaError("empty input: no header row") from None

    columns: dict[int, Optional[MetricKind]] = {}
    ts_col: Optional[int] = None
    id_col: Optional[int] = None
    for i, name in enumerate(header):
        name = name.strip().lower()
        if name == "created_at":
            ts_col = i
        elif name == "entry_id":
            id_col = i
        elif name in COLUMN_ALIASES:
            columns[i] = COLUMN_ALIASES[name]
        else:
            try:
                columns[i] = MetricKind.from_name(name)
            except InvalidMetricError:
                log.warning("%s: ignoring unknown column %r", source_name, name)
                columns[i] = None
    if ts_col is None:
        raise DatasetSchemaError("missing required created_at column")
    if not any(m is not None for m in columns.values()):
        raise DatasetSchemaError("no recognizable metric columns in header")

    records: list[SampleRecord] = []
    rejected: list[tuple[int, str]] = []
    seen_ids: set[int] = set()
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        try:
            ts = parse_timestamp(row[ts_col])
        except (TimestampParseError, IndexError) as exc:
            rejected.append((lineno, f"bad timestamp: {exc}"))
            continue
        entry_id: Optional[int] = None
        if id_col is not None and id_col < len(row) and row[id_col].strip():
            try:
                entry_id = int(row[id_col])
            except ValueError:
                rejected.append((lineno, f"bad entry_id {row[id_col]!r}"))
                continue
            if entry_id in seen_ids:
                rejected.append((lineno, f"duplicate entry_id {entry_id}"))
                continue
        values: dict[MetricKind, float] = {}
        for col, metric in columns.items():
            if metric is None or col >= len(row) or not row[col].strip():
                continue
            try:
                v = float(row[col])
            except ValueError:
                continue
            if math.isfinite(v):
                values[metric] = v
        if not values:
            rejected.append((lineno, "no parseable metric values"))
            continue
        if entry_id is not None:
            seen_ids.add(entry_id)
        records.append(SampleRecord(timestamp=ts, values=values, entry_id=entry_id))

    if not records:
        raise DatasetSchemaError(f"{source_name}: no data rows survived parsing")
    records.sort(key=lambda r: r.timestamp)
    return RawDataset(records=records, source_name=source_name, rejected_rows=rejected)


def resample(dataset: RawDataset, metric: MetricKind, step: int,
             spread_cv: float = DEFAULT_SPREAD_CV) -> RegularSeries:
    """Mean-aggregate one metric into fixed buckets anchored at
    floor(first_timestamp / step) * step. Empty buckets stay explicit.
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    points = [(r.timestamp, r.values[metric]) for r in dataset.records if metric in r.values]
    if not points:
        raise NoDataError(f"metric {metric.name} absent from every record")

    start = (points[0][0] // step) * step
    last_index = (points[-1][0] - start) // step
    buckets: list[list[float]] = [[] for _ in range(last_index + 1)]
    for ts, v in points:
        buckets[(ts - start) // step].append(v)

    values: list[Optional[float]] = []
    suspect: set[int] = set()
    for i, vs in enumerate(buckets):
        if not vs:
            values.append(None)
            continue
        mean = sum(vs) / len(vs)
        values.append(mean)
        if len(vs) >= 2 and abs(mean) > 1e-12:
            var = sum((v - mean) ** 2 for v in vs) / len(vs)
            if math.sqrt(var) / abs(mean) > spread_cv:
                suspect.add(i)
    return RegularSeries(metric=metric, start=start, step=step, values=values,
                         suspect_buckets=suspect)


def fill_gaps(series: RegularSeries, max_gap: int) -> RegularSeries:
    """Linearly interpolate interior missing runs of length <= max_gap.

    Leading/trailing gaps and longer runs are left missing. Present values
    are never touched, which also makes the operation idempotent.
    """
    values = list(series.values)
    n = len(values)
    i = 0
    while i < n:
        if values[i] is not None:
            i += 1
            continue
        run_start = i
        while i < n and values[i] is None:
            i += 1
        run_end = i  # exclusive
        if run_start == 0 or run_end == n:
            continue  # leading/trailing gap
        run_len = run_end - run_start
        if run_len > max_gap:
            continue
        left = values[run_start - 1]
        right = values[run_end]
        for j in range(run_len):
            frac = (j + 1) / (run_len + 1)
            values[run_start + j] = left + (right - left) * frac
    return RegularSeries(metric=series.metric, start=series.start, step=series.step,
                         values=values, agg=series.agg,
                         suspect_buckets=set(series.suspect_buckets))


def split(series: RegularSeries, train_fraction: float) -> tuple[RegularSeries, RegularSeries]:
    """Chronological train/test split; train gets floor(n * fraction) buckets."""
    if not 0.0 < train_fraction < 1.0:
        raise SplitError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(series.values)
    k = math.floor(n * train_fraction)
    if k == 0 or k == n:
        raise SplitError(f"split of {n} buckets at {train_fraction} leaves one side empty")
    train = RegularSeries(metric=series.metric, start=series.start, step=series.step,
                          values=series.values[:k], agg=series.agg,
                          suspect_buckets={i for i in series.suspect_buckets if i < k})
    test = RegularSeries(metric=series.metric, start=series.bucket_start(k), step=series.step,
                         values=series.values[k:], agg=series.agg,
                         suspect_buckets={i - k for i in series.suspect_buckets if i >= k})
    return train, test


def series_to_csv(series: RegularSeries) -> str:
    """Serialize for inspection: one ``bucket_start,value`` line per bucket."""
    out = io.StringIO()
    out.write("bucket_start,value\n")
    for i, v in enumerate(series.values):
        out.write(f"{format_timestamp(series.bucket_start(i))},{'' if v is None else repr(v)}\n")
    return out.getvalue()
