"""Evaluation of run records: local moving averages, summaries, calibration
curves and stepsize matching between the two adaptive controllers."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .controllers import RunRecord

DEFAULT_WINDOW = 500
DEFAULT_C_GRID = tuple(round(0.1 * k, 1) for k in range(1, 10))


@dataclass(frozen=True)
class LocalSeries:
    t: np.ndarray
    local_miscov: np.ndarray
    local_length: np.ndarray
    window: int


@dataclass(frozen=True)
class SummaryStats:
    miscoverage_rate: float
    avg_length_finite: float
    frac_infinite: float
    n: int


def _centered_mean(values: np.ndarray, half: int) -> np.ndarray:
    """Mean over ``[i - half, i + half]`` for every ``i`` with a full window."""
    finite = np.isfinite(values)
    csum = np.concatenate([[0.0], np.cumsum(np.where(finite, values, 0.0))])
    cinf = np.concatenate([[0], np.cumsum(~finite)])
    width = 2 * half + 1
    sums = csum[width:] - csum[:-width]
    n_inf = cinf[width:] - cinf[:-width]
    return np.where(n_inf > 0, np.inf, sums / width)


def local_metrics(record: RunRecord, window: int = DEFAULT_WINDOW) -> LocalSeries:
    """Centered moving averages of the miss indicator and the interval length.

    Averages run over ``s`` in ``[t - window/2, t + window/2]`` (inclusive)
    and are only reported where that window lies inside the record. Any
    infinite length in the window makes the local length infinite.
    """
    if window < 2 or window % 2:
        raise ValueError("window must be a positive even integer")
    if len(record) <= window:
        raise ValueError(f"record of {len(record)} steps is too short for window {window}")
    half = window // 2
    return LocalSeries(
        t=record.t[half : len(record) - half],
        local_miscov=_centered_mean(record.err.astype(float), half),
        local_length=_centered_mean(record.length.astype(float), half),
        window=window,
    )


def summarize(record: RunRecord) -> SummaryStats:
    """Overall miss rate, mean finite length and share of infinite intervals."""
    if len(record) == 0:
        raise ValueError("empty record")
    lengths = record.length.astype(float)
    finite = np.isfinite(lengths)
    return SummaryStats(
        miscoverage_rate=float(record.err.mean()),
        avg_length_finite=float(lengths[finite].mean()) if finite.any() else math.nan,
        frac_infinite=float(1.0 - finite.mean()),
        n=len(record),
    )


def ecc(betas, alpha_grid: Optional[Sequence[float]] = None) -> tuple:
    """Expected calibration curve: the miss rate if ``alpha_t = alpha`` for all t.

    Uses ``miss iff alpha > beta_t``. Returns ``(alpha_grid, curve)``.
    """
    b = np.sort(np.asarray(betas, dtype=float))
    if b.size == 0:
        raise ValueError("no PITs given")
    grid = np.linspace(0.0, 1.0, 101) if alpha_grid is None else np.asarray(alpha_grid, dtype=float)
    return grid, np.searchsorted(b, grid, side="left") / b.size


@dataclass(frozen=True)
class MatchResult:
    c: float
    target_variance: float
    variances: tuple
    grid: tuple
    records: tuple

    @property
    def record(self) -> RunRecord:
        return self.records[self.grid.index(self.c)]


def local_miscov_variance(record: RunRecord, window: int = DEFAULT_WINDOW) -> tuple:
    """Population variance of the local miss rate and the t-range it used."""
    local = local_metrics(record, window)
    return float(np.var(local.local_miscov)), (int(local.t[0]), int(local.t[-1]))


def match_stepsize(
    aci_record: RunRecord,
    bci_runner: Callable[[float], RunRecord],
    grid: Sequence[float] = DEFAULT_C_GRID,
    window: int = DEFAULT_WINDOW,
    executor=None,
) -> MatchResult:
    """Pick the BCI relative stepsize whose local-miss variance is closest
    to that of the ACI run. Ties go to the smaller ``c``.

    ``bci_runner(c)`` must return a controlled-steps record over the same
    time range as ``aci_record``. ``executor`` (anything with ``map``) lets
    grid runs proceed concurrently; results are collated in grid order.
    """
    grid = tuple(sorted(float(c) for c in grid))
    if not grid:
        raise ValueError("empty stepsize grid")
    target, span = local_miscov_variance(aci_record, window)
    mapper = executor.map if executor is not None else map
    records = tuple(mapper(bci_runner, grid))
    variances = []
    for c, rec in zip(grid, records):
        var, other = local_miscov_variance(rec, window)
        if other != span:
            raise ValueError(f"BCI run for c={c} covers t={other}, ACI covers t={span}")
        variances.append(var)
    gaps = [abs(v - target) for v in variances]
    best = min(range(len(grid)), key=lambda i: (gaps[i], grid[i]))
    return MatchResult(grid[best], target, tuple(variances), grid, records)


# --------------------------------------------------------------------------
# CSV output


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return ""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


METRICS_COLUMNS = ("t", "alpha", "beta", "err", "length", "local_miscov", "local_length")


def write_metrics_csv(path, record: RunRecord, window: int = DEFAULT_WINDOW):
    """One row per controlled step; local columns are blank near the edges."""
    rec = record.controlled()
    miscov = np.full(len(rec), math.nan)
    length = np.full(len(rec), math.nan)
    if len(rec) > window:
        local = local_metrics(rec, window)
        half = window // 2
        miscov[half : len(rec) - half] = local.local_miscov
        length[half : len(rec) - half] = local.local_length
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(METRICS_COLUMNS)
        for i in range(len(rec)):
            out.writerow(
                _fmt(v)
                for v in (rec.t[i], rec.alpha[i], rec.beta[i], rec.err[i], rec.length[i], miscov[i], length[i])
            )


def read_metrics_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    cols = {}
    for name in METRICS_COLUMNS:
        vals = [r[name] for r in rows]
        cols[name] = np.array([float(v) if v != "" else math.nan for v in vals])
    return cols


SUMMARY_COLUMNS = ("method", "miscoverage_rate", "avg_length_finite", "frac_infinite", "n")


def write_summary_csv(path, summaries: dict):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(SUMMARY_COLUMNS)
        for method, s in summaries.items():
            out.writerow([method, _fmt(s.miscoverage_rate), _fmt(s.avg_length_finite), _fmt(s.frac_infinite), s.n])
