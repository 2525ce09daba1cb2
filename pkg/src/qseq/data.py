"""Ingest of Milan-layout telecom activity dumps and window construction.

The raw format is tab-separated with eight fields per line: square_id,
interval start (epoch ms on a 10-minute grid), country_code, sms_in, and four
further channels this toolkit ignores.  Per grid cell, sms_in is summed over
country codes, gaps of up to one hour are forward-filled, and the series is
split chronologically, min-max normalized on the training portion only, and
cut into stride-1 windows of T inputs plus the next value as target.  Windows
never straddle a long (> 1 hour) gap; such discontinuities survive as
interval jumps and the windowing stage skips across them.

Validation and test values are transformed with the training normalizer and
may fall outside [0, 1]; they are deliberately not clipped.

Synthetic generators (pure sinusoid, sinusoid over a linear ramp, and an
AR(1) recursion with coefficient 0.9) provide deterministic desk-scale
series for tests and demos.
"""

from __future__ import annotations

import csv
import glob
import gzip
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

log = logging.getLogger(__name__)

INTERVAL_MS = 600_000          # 10-minute grid
MAX_FILL_RUN = 6               # forward-fill at most one hour of missing points
MALFORMED_LIMIT = 0.01
DEFAULT_FRACTIONS = (0.70, 0.15, 0.15)
SYNTH_KINDS = ("sinusoid", "sinusoid+trend", "ar1")
AR1_COEFF = 0.9

SERIES_CSV_HEADER = ("square_id", "interval_ms", "sms_in")


class IngestError(ValueError):
    """Raised when a raw dump is too damaged to trust."""


class SelectionError(ValueError):
    """Raised when no grid cell satisfies the coverage threshold."""


class SplitError(ValueError):
    """Raised when a chronological split leaves a segment too short."""


class RawRecord(NamedTuple):
    square_id: int
    interval_ms: int
    country_code: int
    sms_in: float


@dataclass
class ParseResult:
    records: list[RawRecord]
    skipped: int = 0           # lines with no sms_in value
    malformed: int = 0
    samples: tuple[str, ...] = ()

    def __iter__(self) -> Iterator[RawRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class CellSeries:
    """One cell's aggregated sms_in signal on the 10-minute grid."""

    square_id: int
    intervals: np.ndarray      # int64, strictly increasing
    values: np.ndarray         # float64, same length
    coverage: float            # fraction of expected grid points present

    def __post_init__(self):
        self.intervals = np.asarray(self.intervals, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.intervals.shape != self.values.shape or self.intervals.ndim != 1:
            raise ValueError("intervals and values must be matching 1-D arrays")
        if len(self.intervals) and np.any(np.diff(self.intervals) <= 0):
            raise ValueError("intervals must be strictly increasing")

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class Segment:
    """A chronologically contiguous slice of a series."""

    intervals: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class WindowDataset:
    t: int
    inputs: np.ndarray         # (n, t)
    targets: np.ndarray        # (n,)
    split: str = "train"

    def __len__(self) -> int:
        return len(self.targets)


# ---------------------------------------------------------------------------
# parsing


def _parse_line(line: str) -> RawRecord | None:
    """A record, None to skip (no sms_in), or ValueError for a broken line."""
    fields = line.split("\t")
    if len(fields) != 8:
        raise ValueError("expected 8 tab-separated fields")
    if fields[3].strip() == "":
        return None
    square_id = int(fields[0])
    interval_ms = int(fields[1])
    country = int(fields[2])
    sms_in = float(fields[3])
    if interval_ms % INTERVAL_MS:
        raise ValueError("interval not aligned to the 10-minute grid")
    if not np.isfinite(sms_in) or sms_in < 0:
        raise ValueError("sms_in must be a nonnegative finite number")
    return RawRecord(square_id, interval_ms, country, sms_in)


def parse_milan_tsv(stream: Iterable[str], source: str = "<stream>") -> ParseResult:
    """Parse one Milan-layout dump; tolerates up to 1% malformed lines."""
    records: list[RawRecord] = []
    skipped = 0
    malformed = 0
    samples: list[str] = []
    total = 0
    for line in stream:
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        total += 1
        try:
            record = _parse_line(line)
        except ValueError:
            malformed += 1
            if len(samples) < 5:
                samples.append(line[:120])
            continue
        if record is None:
            skipped += 1
        else:
            records.append(record)
    if total and malformed / total > MALFORMED_LIMIT:
        shown = "\n  ".join(samples)
        raise IngestError(
            f"{source}: {malformed} of {total} lines malformed "
            f"(> {MALFORMED_LIMIT:.0%}); samples:\n  {shown}"
        )
    if malformed:
        log.warning("%s: dropped %d malformed lines", source, malformed)
    return ParseResult(records, skipped, malformed, tuple(samples))


def _open_text(path: Path):
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def load_milan(paths) -> ParseResult:
    """Parse one or more dump files (plain or .gz, glob patterns allowed)."""
    if isinstance(paths, (str, Path)):
        paths = [paths]
    resolved: list[Path] = []
    for entry in paths:
        entry = str(entry)
        matches = sorted(glob.glob(entry))
        if matches:
            resolved.extend(Path(m) for m in matches)
        else:
            resolved.append(Path(entry))
    if not resolved:
        raise IngestError("no input files given")
    merged = ParseResult([])
    for path in resolved:
        if not path.exists():
            raise IngestError(f"input file not found: {path}")
        with _open_text(path) as handle:
            part = parse_milan_tsv(handle, source=str(path))
        merged.records.extend(part.records)
        merged.skipped += part.skipped
        merged.malformed += part.malformed
        merged.samples = merged.samples + part.samples
    return merged


# ---------------------------------------------------------------------------
# aggregation and cell selection


def _coverage(intervals: np.ndarray) -> float:
    if len(intervals) == 0:
        return 0.0
    expected = (intervals[-1] - intervals[0]) // INTERVAL_MS + 1
    return float(len(intervals) / expected)


def aggregate(records: Iterable[RawRecord]) -> list[CellSeries]:
    """Sum sms_in over country codes per (cell, interval); cells stay apart."""
    sums: dict[int, dict[int, float]] = {}
    for rec in records:
        cell = sums.setdefault(rec.square_id, {})
        cell[rec.interval_ms] = cell.get(rec.interval_ms, 0.0) + rec.sms_in
    out = []
    for square_id in sorted(sums):
        cell = sums[square_id]
        intervals = np.array(sorted(cell), dtype=np.int64)
        values = np.array([cell[i] for i in intervals], dtype=np.float64)
        out.append(CellSeries(square_id, intervals, values, _coverage(intervals)))
    return out


def _forward_fill(series: CellSeries) -> CellSeries:
    """Fill gaps of up to MAX_FILL_RUN missing points; keep longer jumps."""
    intervals = [series.intervals[0]]
    values = [series.values[0]]
    for interval, value in zip(series.intervals[1:], series.values[1:]):
        missing = (interval - intervals[-1]) // INTERVAL_MS - 1
        if 1 <= missing <= MAX_FILL_RUN:
            last_value = values[-1]
            start = intervals[-1]
            for k in range(1, missing + 1):
                intervals.append(start + k * INTERVAL_MS)
                values.append(last_value)
        intervals.append(interval)
        values.append(value)
    return CellSeries(
        series.square_id,
        np.array(intervals, dtype=np.int64),
        np.array(values, dtype=np.float64),
        series.coverage,
    )


def select_active(
    series: Sequence[CellSeries], coverage_threshold: float = 0.95
) -> list[CellSeries]:
    """Keep cells with enough grid coverage and forward-fill their short gaps."""
    if not 0.0 < coverage_threshold <= 1.0:
        raise ValueError("coverage threshold must be in (0, 1]")
    kept = [s for s in series if len(s) and s.coverage >= coverage_threshold]
    if not kept:
        raise SelectionError(
            f"no cell reaches coverage {coverage_threshold}; "
            f"best is {max((s.coverage for s in series), default=0.0):.3f}"
        )
    return [_forward_fill(s) for s in kept]


# ---------------------------------------------------------------------------
# splitting, normalization, windowing


def chronological_split(
    series: CellSeries,
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    t: int = 1,
) -> tuple[Segment, Segment, Segment]:
    """Contiguous train/val/test segments; boundaries floor the cumulative
    fractions.  A zero fraction yields an empty segment; any nonzero segment
    must still hold at least t+1 points."""
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise SplitError("need three nonnegative fractions")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise SplitError(f"fractions must sum to 1, got {sum(fractions)}")
    n = len(series)
    i1 = int(np.floor(n * fractions[0]))
    i2 = int(np.floor(n * (fractions[0] + fractions[1])))
    bounds = [(0, i1), (i1, i2), (i2, n)]
    segments = []
    for (lo, hi), fraction, name in zip(bounds, fractions, ("train", "val", "test")):
        length = hi - lo
        if fraction > 0 and length < t + 1:
            raise SplitError(
                f"{name} segment has {length} points, needs at least {t + 1}"
            )
        segments.append(Segment(series.intervals[lo:hi], series.values[lo:hi]))
    return tuple(segments)


class Normalizer:
    """Min-max map fit on the training values only; never clips."""

    def __init__(self, low: float, high: float):
        if not high > low:
            raise ValueError(f"need max > min, got [{low}, {high}]")
        self.low = float(low)
        self.high = float(high)

    @classmethod
    def fit(cls, values: np.ndarray) -> "Normalizer":
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            raise ValueError("cannot fit a normalizer on an empty segment")
        return cls(values.min(), values.max())

    def transform(self, values):
        return (np.asarray(values, dtype=np.float64) - self.low) / (self.high - self.low)

    def inverse(self, values):
        return np.asarray(values, dtype=np.float64) * (self.high - self.low) + self.low

    def to_dict(self) -> dict:
        return {"low": self.low, "high": self.high}

    @classmethod
    def from_dict(cls, payload: dict) -> "Normalizer":
        return cls(payload["low"], payload["high"])


def make_windows(segment: Segment, t: int, split: str = "train") -> WindowDataset:
    """Stride-1 windows of t inputs plus next-value target, never crossing an
    interval jump."""
    n = len(segment)
    if n < t + 1:
        raise SplitError(f"segment of {n} points cannot form windows with t={t}")
    breaks = np.flatnonzero(np.diff(segment.intervals) != INTERVAL_MS)
    run_edges = np.concatenate(([0], breaks + 1, [n]))
    inputs = []
    targets = []
    for lo, hi in zip(run_edges[:-1], run_edges[1:]):
        for start in range(lo, hi - t):
            inputs.append(segment.values[start : start + t])
            targets.append(segment.values[start + t])
    if not inputs:
        raise SplitError(
            f"no complete window of t={t} fits between the gaps of this segment"
        )
    return WindowDataset(t, np.array(inputs), np.array(targets), split)


def build_datasets(
    series: CellSeries,
    t: int,
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
) -> tuple[dict[str, WindowDataset], Normalizer]:
    """Split one cell, fit the normalizer on train, window every segment."""
    train, val, test = chronological_split(series, fractions, t)
    norm = Normalizer.fit(train.values)
    datasets = {}
    for name, segment in (("train", train), ("val", val), ("test", test)):
        if len(segment) == 0:
            datasets[name] = WindowDataset(t, np.zeros((0, t)), np.zeros(0), name)
            continue
        scaled = Segment(segment.intervals, norm.transform(segment.values))
        datasets[name] = make_windows(scaled, t, name)
    return datasets, norm


def build_pooled_datasets(
    series_list: Sequence[CellSeries],
    t: int,
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
) -> tuple[dict[str, WindowDataset], dict[int, Normalizer]]:
    """Concatenate per-cell window sets; each cell keeps its own normalizer
    and windows never mix cells."""
    if not series_list:
        raise SelectionError("no cells to pool")
    pooled = {name: ([], []) for name in ("train", "val", "test")}
    normalizers = {}
    for series in series_list:
        datasets, norm = build_datasets(series, t, fractions)
        normalizers[series.square_id] = norm
        for name, ds in datasets.items():
            pooled[name][0].append(ds.inputs)
            pooled[name][1].append(ds.targets)
    out = {
        name: WindowDataset(
            t, np.concatenate(inputs), np.concatenate(targets), name
        )
        for name, (inputs, targets) in pooled.items()
    }
    return out, normalizers


# ---------------------------------------------------------------------------
# synthetic series


def synthesize(
    kind: str,
    length: int = 2000,
    noise_sd: float = 0.05,
    seed: int = 0,
    period: int = 48,
) -> CellSeries:
    """Deterministic synthetic series on the same 10-minute grid.

    sinusoid:        sin(2*pi*i / period) + noise
    sinusoid+trend:  the same plus a linear ramp from 0 to 1
    ar1:             x[i] = 0.9 * x[i-1] + innovation, x[0] from the
                     stationary distribution
    """
    kind = kind.lower()
    if kind not in SYNTH_KINDS:
        raise ValueError(f"unknown kind {kind!r}; choose from {SYNTH_KINDS}")
    if length < 200:
        raise ValueError(f"length must be >= 200, got {length}")
    rng = np.random.default_rng(seed)
    idx = np.arange(length)
    if kind == "ar1":
        values = np.empty(length)
        scale = noise_sd if noise_sd > 0 else 1.0
        values[0] = rng.normal(0.0, scale / np.sqrt(1.0 - AR1_COEFF**2))
        shocks = rng.normal(0.0, scale, size=length - 1)
        for i in range(1, length):
            values[i] = AR1_COEFF * values[i - 1] + shocks[i - 1]
    else:
        values = np.sin(2.0 * np.pi * idx / period)
        if kind == "sinusoid+trend":
            values = values + idx / (length - 1)
        if noise_sd > 0:
            values = values + rng.normal(0.0, noise_sd, size=length)
    intervals = idx.astype(np.int64) * INTERVAL_MS
    return CellSeries(0, intervals, values, 1.0)


# ---------------------------------------------------------------------------
# canonical series files


def write_series_csv(series_list: Sequence[CellSeries] | CellSeries, path) -> None:
    if isinstance(series_list, CellSeries):
        series_list = [series_list]
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(SERIES_CSV_HEADER)
        for series in series_list:
            for interval, value in zip(series.intervals, series.values):
                writer.writerow([series.square_id, int(interval), str(float(value))])


def read_series_csv(path) -> list[CellSeries]:
    groups: dict[int, tuple[list[int], list[float]]] = {}
    with open(path, "r", newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(header) != SERIES_CSV_HEADER:
            raise IngestError(
                f"{path}: expected header {','.join(SERIES_CSV_HEADER)}"
            )
        for row in reader:
            if not row:
                continue
            if len(row) != 3:
                raise IngestError(f"{path}: bad row {row!r}")
            square_id = int(row[0])
            entry = groups.setdefault(square_id, ([], []))
            entry[0].append(int(row[1]))
            entry[1].append(float(row[2]))
    out = []
    for square_id in sorted(groups):
        intervals = np.array(groups[square_id][0], dtype=np.int64)
        values = np.array(groups[square_id][1], dtype=np.float64)
        order = np.argsort(intervals)
        intervals, values = intervals[order], values[order]
        out.append(CellSeries(square_id, intervals, values, _coverage(intervals)))
    return out
