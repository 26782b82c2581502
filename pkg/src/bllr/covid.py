"""Pandemic growth-rate monitoring pipeline.

Daily new-positive counts are ingested from CSV, smoothed with a centered
7-day moving mean, and turned into day-over-day growth rates
x(k) = p(k+1)/p(k), each rate carrying the date of its numerator day. The
GLRT increment (x-1)^2 sign(x-1)/(2 sigma^2) then drives a BLLR and an
LMS monitor; a day whose statistic is positive is an H1 (expanding
contagion) day, and sign changes between consecutive days are emitted as
dated regime crossings.

The repository ships a snapshot of the Italian national series
(2020-02-25 .. 2020-11-15) so nothing here touches the network; a small
fetcher can refresh the snapshot from the public repository when a live
revision is wanted.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
import urllib.request
from dataclasses import dataclass, field
from importlib.resources import as_file, files
from pathlib import Path
from typing import Iterable

import numpy as np

from .detectors import (
    BllrConfig,
    BllrState,
    Hypothesis,
    LmsConfig,
    LmsState,
    decide,
    run_trajectory,
)
from .models import glrt_increment

__all__ = [
    "DailySeries",
    "GrowthRateSeries",
    "CrossingEvent",
    "RegimeReport",
    "SeriesSchemaError",
    "SeriesDataError",
    "load_daily_positives",
    "moving_mean",
    "growth_rates",
    "estimate_sigma",
    "run_pandemic_monitor",
    "italy_fixture_path",
    "fetch_italy_snapshot",
    "ITALY_NATIONAL_URL",
]

ITALY_NATIONAL_URL = (
    "https://raw.githubusercontent.com/pcm-dpc/COVID-19/master/"
    "dati-andamento-nazionale/dpc-covid19-ita-andamento-nazionale.csv"
)

_FIXTURE_NAME = "italy_new_positives_2020-02-25_2020-11-15.csv"


class SeriesSchemaError(ValueError):
    """The CSV does not have the expected columns."""


class SeriesDataError(ValueError):
    """A row or value in the series is unusable; the message names it."""


def _check_consecutive(dates: list[dt.date], forward_fillable: bool = False) -> None:
    for prev, cur in zip(dates, dates[1:]):
        gap = (cur - prev).days
        if gap <= 0:
            raise SeriesDataError(f"dates not strictly increasing at {cur.isoformat()}")
        if gap > 1:
            hint = " (pass forward_fill=True to fill gaps)" if forward_fillable else ""
            raise SeriesDataError(
                f"missing {gap - 1} day(s) before {cur.isoformat()}{hint}"
            )


@dataclass
class DailySeries:
    """Dated daily counts with no gaps; counts are nonnegative reals."""

    dates: list[dt.date]
    counts: np.ndarray
    source: str = ""
    region: str = ""

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=float)
        if len(self.dates) != self.counts.size:
            raise ValueError("dates and counts must have equal length")
        if self.counts.size == 0:
            raise ValueError("series must not be empty")
        if not np.all(np.isfinite(self.counts)) or np.any(self.counts < 0):
            raise SeriesDataError("counts must be finite and nonnegative")
        _check_consecutive(self.dates)

    def __len__(self) -> int:
        return len(self.dates)


@dataclass
class GrowthRateSeries:
    """Dated day-over-day ratios of the smoothed counts; all finite and > 0."""

    dates: list[dt.date]
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if len(self.dates) != self.values.size:
            raise ValueError("dates and values must have equal length")
        if not np.all(np.isfinite(self.values)) or np.any(self.values <= 0):
            raise SeriesDataError("growth rates must be finite and > 0")
        _check_consecutive(self.dates)

    def __len__(self) -> int:
        return len(self.dates)


@dataclass(frozen=True)
class CrossingEvent:
    """A dated regime decision change of one monitor."""

    date: dt.date
    direction: str  # "H0->H1" or "H1->H0"
    method: str  # "bllr" or "lms"


@dataclass
class RegimeReport:
    """Per-day statistics of both monitors plus their crossing events."""

    dates: list[dt.date]
    bllr_statistic: np.ndarray
    lms_statistic: np.ndarray
    crossings: list[CrossingEvent]
    sigma: float
    bllr_config: BllrConfig
    lms_config: LmsConfig

    def crossings_for(self, method: str) -> list[CrossingEvent]:
        return [c for c in self.crossings if c.method == method]

    def daily_rows(self) -> list[dict]:
        rows = []
        for i, date in enumerate(self.dates):
            rows.append(
                {
                    "date": date.isoformat(),
                    "bllr": float(self.bllr_statistic[i]),
                    "lms": float(self.lms_statistic[i]),
                    "bllr_decision": decide(
                        float(self.bllr_statistic[i]), self.bllr_config.threshold
                    ).name,
                    "lms_decision": decide(
                        float(self.lms_statistic[i]), self.lms_config.threshold
                    ).name,
                }
            )
        return rows

    def crossing_rows(self) -> list[dict]:
        return [
            {"date": c.date.isoformat(), "direction": c.direction, "method": c.method}
            for c in self.crossings
        ]

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "lower_barrier": self.bllr_config.lower_barrier,
            "upper_barrier": self.bllr_config.upper_barrier,
            "step_size": self.lms_config.step_size,
            "threshold": self.bllr_config.threshold,
            "crossings": self.crossing_rows(),
            "daily": self.daily_rows(),
        }


def _parse_date(raw: str, row_number: int) -> dt.date:
    text = raw.strip()
    try:
        # Accept plain dates and the upstream "YYYY-MM-DDTHH:MM:SS" stamps.
        return dt.datetime.fromisoformat(text).date()
    except ValueError:
        raise SeriesDataError(f"row {row_number}: unparseable date {raw!r}") from None


def load_daily_positives(
    source: str | Path,
    *,
    date_column: str = "data",
    count_column: str = "nuovi_positivi",
    start: dt.date | None = None,
    end: dt.date | None = None,
    forward_fill: bool = False,
    region: str = "Italy",
) -> DailySeries:
    """Parse a daily new-positives CSV into a validated DailySeries.

    Rows outside [start, end] are dropped before validation. Missing days
    are an error unless ``forward_fill`` repeats the previous count, since
    silently bridging gaps would corrupt the growth rates downstream.
    """
    path = Path(source)
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise SeriesSchemaError(f"{path}: empty file, no header row")
        for column in (date_column, count_column):
            if column not in reader.fieldnames:
                raise SeriesSchemaError(f"{path}: missing column {column!r}")
        dates: list[dt.date] = []
        counts: list[float] = []
        for row_number, row in enumerate(reader, start=2):
            date = _parse_date(row[date_column], row_number)
            if (start and date < start) or (end and date > end):
                continue
            raw = (row[count_column] or "").strip()
            try:
                value = float(raw)
            except ValueError:
                raise SeriesDataError(
                    f"row {row_number}: unparseable count {raw!r}"
                ) from None
            if not math.isfinite(value) or value < 0:
                raise SeriesDataError(f"row {row_number}: negative or non-finite count {raw!r}")
            dates.append(date)
            counts.append(value)
    if not dates:
        raise SeriesDataError(f"{path}: no rows in the requested date range")

    if forward_fill:
        filled_dates = [dates[0]]
        filled_counts = [counts[0]]
        for date, value in zip(dates[1:], counts[1:]):
            day = filled_dates[-1] + dt.timedelta(days=1)
            while day < date:
                filled_dates.append(day)
                filled_counts.append(filled_counts[-1])
                day += dt.timedelta(days=1)
            filled_dates.append(date)
            filled_counts.append(value)
        dates, counts = filled_dates, filled_counts
    else:
        _check_consecutive(dates, forward_fillable=True)

    return DailySeries(dates=dates, counts=np.asarray(counts), source=str(path), region=region)


def moving_mean(series: DailySeries, window: int = 7) -> DailySeries:
    """Centered moving mean; the dates lose window//2 days on each side."""
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be a positive odd integer, got {window!r}")
    if len(series) < window:
        raise ValueError(f"series of length {len(series)} is shorter than window {window}")
    smoothed = np.convolve(series.counts, np.full(window, 1.0 / window), mode="valid")
    half = window // 2
    dates = series.dates[half : len(series) - half]
    return DailySeries(
        dates=list(dates), counts=smoothed, source=series.source, region=series.region
    )


def growth_rates(smoothed: DailySeries) -> GrowthRateSeries:
    """Day-over-day ratios x(k) = p(k+1)/p(k), dated at the numerator day."""
    counts = smoothed.counts
    nonpositive = np.nonzero(counts <= 0)[0]
    if nonpositive.size:
        bad = smoothed.dates[int(nonpositive[0])]
        raise SeriesDataError(
            f"nonpositive smoothed count on {bad.isoformat()}; growth rate undefined"
        )
    values = counts[1:] / counts[:-1]
    return GrowthRateSeries(dates=list(smoothed.dates[1:]), values=values)


def estimate_sigma(
    rates: GrowthRateSeries, *, window: int = 21, min_observations: int = 30
) -> float:
    """Scale of the growth-rate fluctuations around their local level.

    The local level is a centered ``window``-day rolling median (shrunk at
    the series edges); the estimate is the sample standard deviation of
    the residuals. A constant rate series is degenerate (sigma = 0 cannot
    drive the monitors) and is rejected.
    """
    x = rates.values
    if x.size < min_observations:
        raise ValueError(
            f"need at least {min_observations} growth rates, got {x.size}"
        )
    half = window // 2
    local = np.array(
        [np.median(x[max(0, i - half) : min(x.size, i + half + 1)]) for i in range(x.size)]
    )
    sigma = float(np.std(x - local, ddof=1))
    if sigma <= 0.0:
        raise SeriesDataError("growth rates are constant; sigma estimate is degenerate")
    return sigma


def run_pandemic_monitor(
    rates: GrowthRateSeries,
    sigma: float,
    bllr_config: BllrConfig | None = None,
    lms_config: LmsConfig | None = None,
) -> RegimeReport:
    """Drive the GLRT versions of BLLR and LMS over a growth-rate series.

    Defaults follow the reference monitoring setup: barriers a = b = 5,
    step size 0.05, zero threshold (decision is the sign of the
    statistic). A crossing is emitted whenever a monitor's decision
    differs from the previous day's; the implicit day-zero decision is H0
    because both statistics start at zero.
    """
    if bllr_config is None:
        bllr_config = BllrConfig(lower_barrier=5.0, upper_barrier=5.0, threshold=0.0)
    if lms_config is None:
        lms_config = LmsConfig(step_size=0.05, threshold=0.0)
    increments = np.asarray(glrt_increment(rates.values, sigma), dtype=float)
    bllr_path = run_trajectory(bllr_config, BllrState(0.0), increments)
    lms_path = run_trajectory(lms_config, LmsState(0.0), increments)

    crossings: list[CrossingEvent] = []
    for method, path, threshold in (
        ("bllr", bllr_path, bllr_config.threshold),
        ("lms", lms_path, lms_config.threshold),
    ):
        previous = Hypothesis.H0  # statistic starts at zero
        for date, value in zip(rates.dates, path):
            current = decide(float(value), threshold)
            if current is not previous:
                direction = "H0->H1" if current is Hypothesis.H1 else "H1->H0"
                crossings.append(CrossingEvent(date=date, direction=direction, method=method))
            previous = current
    crossings.sort(key=lambda c: (c.date, c.method))

    return RegimeReport(
        dates=list(rates.dates),
        bllr_statistic=bllr_path,
        lms_statistic=lms_path,
        crossings=crossings,
        sigma=sigma,
        bllr_config=bllr_config,
        lms_config=lms_config,
    )


def italy_fixture_path() -> Path:
    """Filesystem path of the shipped Italian national snapshot."""
    resource = files("bllr").joinpath(f"data/{_FIXTURE_NAME}")
    with as_file(resource) as path:
        return Path(path)


def fetch_italy_snapshot(
    destination: str | Path,
    *,
    url: str = ITALY_NATIONAL_URL,
    start: dt.date = dt.date(2020, 2, 25),
    end: dt.date = dt.date(2020, 11, 15),
    timeout: float = 30.0,
) -> Path:
    """Refresh the snapshot from the public repository (network required).

    Downloads the national series, restricts it to [start, end] and writes
    a two-column CSV compatible with :func:`load_daily_positives`. Tests
    never call this; they use the shipped fixture.
    """
    destination = Path(destination)
    with urllib.request.urlopen(url, timeout=timeout) as response:
        text = response.read().decode("utf-8")
    reader = csv.DictReader(text.splitlines())
    if reader.fieldnames is None or "data" not in reader.fieldnames:
        raise SeriesSchemaError("unexpected upstream format: no 'data' column")
    rows: list[tuple[str, str]] = []
    for row in reader:
        date = _parse_date(row["data"], 0)
        if start <= date <= end:
            rows.append((date.isoformat(), row["nuovi_positivi"]))
    with destination.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["data", "stato", "nuovi_positivi"])
        for date_text, count in rows:
            writer.writerow([date_text, "ITA", count])
    return destination
