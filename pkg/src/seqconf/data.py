"""Reading and writing dated series, and the price transforms."""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParameterDomainError

HEADER = ("date", "value")


@dataclass(frozen=True)
class DatedSeries:
    dates: tuple
    values: np.ndarray

    def __len__(self) -> int:
        return self.values.size


def _parse_date(text: str, line: int) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise DataError(f"line {line}: bad date {text!r} (expected YYYY-MM-DD)") from None


def _parse_value(text: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"line {line}: bad value {text!r}") from None
    if not math.isfinite(value):
        raise DataError(f"line {line}: non-finite value {text!r}")
    return value


def ingest_csv(path) -> DatedSeries:
    """Parse a ``date,value`` CSV with strictly increasing ISO dates."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header is None or tuple(h.strip().lower() for h in header) != HEADER:
            raise DataError(f"line 1: header must be 'date,value', got {header!r}")
        dates, values = [], []
        for line, row in enumerate(rows, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise DataError(f"line {line}: expected 2 fields, got {len(row)}")
            date = _parse_date(row[0], line)
            if dates and date <= dates[-1]:
                raise DataError(f"line {line}: date {date} not after {dates[-1]}")
            dates.append(date)
            values.append(_parse_value(row[1], line))
    return DatedSeries(tuple(dates), np.asarray(values, dtype=float))


def write_series_csv(path, dates, values):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(HEADER)
        for d, v in zip(dates, values):
            out.writerow((d.isoformat(), repr(float(v))))


def synthetic_dates(n: int, start: dt.date = dt.date(2000, 1, 3)) -> tuple:
    """``n`` consecutive calendar days; synthetic data carries no calendar."""
    return tuple(start + dt.timedelta(days=k) for k in range(n))


def _check_prices(prices) -> np.ndarray:
    p = np.asarray(prices, dtype=float)
    bad = np.flatnonzero(~(p > 0))
    if bad.size:
        raise ParameterDomainError(f"price at index {bad[0]} is {p[bad[0]]!r}; prices must be > 0")
    return p


def transform_return(prices) -> np.ndarray:
    """One-period log returns ``log(P_t / P_{t-1})``."""
    p = _check_prices(prices)
    return np.log(p[1:] / p[:-1])


def transform_volatility(prices) -> np.ndarray:
    """Squared simple returns ``(P_t / P_{t-1} - 1)^2``."""
    p = _check_prices(prices)
    return (p[1:] / p[:-1] - 1.0) ** 2


def simple_returns(prices) -> np.ndarray:
    p = _check_prices(prices)
    return p[1:] / p[:-1] - 1.0


def prices_from_returns(returns, start: float = 100.0) -> np.ndarray:
    """Price path whose simple returns are ``returns``."""
    r = np.asarray(returns, dtype=float)
    if np.any(r <= -1):
        raise ParameterDomainError("simple returns must exceed -1")
    return start * np.concatenate([[1.0], np.cumprod(1.0 + r)])
