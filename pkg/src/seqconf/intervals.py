"""Nominal interval families indexed by miscoverage, PITs and error indicators.

A family maps a nominal miscoverage rate ``beta`` in [0, 1] to a prediction
interval. Larger ``beta`` gives a smaller interval, and ``beta = 0`` must give
the whole real line so that a controller can always fall back to a safe
(infinite) interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .errors import InvariantViolation

GRID_SIZE = 1001
PIT_TOL = 1e-9


@dataclass(frozen=True)
class PredictionInterval:
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise ValueError(f"empty interval [{self.lower}, {self.upper}]")

    @property
    def length(self) -> float:
        if math.isinf(self.lower) or math.isinf(self.upper):
            return math.inf
        return self.upper - self.lower

    def contains(self, y: float) -> bool:
        return self.lower <= y <= self.upper

    def __contains__(self, y: float) -> bool:
        return self.contains(y)

    def issubset(self, other: "PredictionInterval") -> bool:
        return other.lower <= self.lower and self.upper <= other.upper


class IntervalFamily:
    """Base class for a map ``beta -> PredictionInterval``.

    Subclasses implement :meth:`bounds`, vectorised over ``beta``. Families
    that are monotone and safeguarded by construction set ``monotone = True``
    so that :func:`enforce_assumption1` passes them through unchanged.
    """

    monotone = False
    domain_is_full_line = True

    def bounds(self, beta):
        raise NotImplementedError

    def evaluate(self, beta: float) -> PredictionInterval:
        lo, hi = self.bounds(np.asarray(beta, dtype=float))
        return PredictionInterval(float(lo), float(hi))

    __call__ = evaluate

    def length(self, beta):
        lo, hi = self.bounds(np.asarray(beta, dtype=float))
        # inf - inf is the only NaN source and means an infinite interval
        out = hi - lo
        out = np.where(out != out, np.inf, out)
        return out if np.ndim(out) else float(out)

    def contains(self, y: float, beta: float) -> bool:
        return self.evaluate(beta).contains(y)

    def pit(self, y: float) -> float:
        """Largest ``beta`` whose interval still covers ``y``, by bisection."""
        if not self.contains(y, 0.0):
            raise InvariantViolation(f"outcome {y!r} lies outside the beta=0 interval")
        if self.contains(y, 1.0):
            return 1.0
        lo, hi = 0.0, 1.0
        while hi - lo > PIT_TOL:
            mid = 0.5 * (lo + hi)
            if self.contains(y, mid):
                lo = mid
            else:
                hi = mid
        return lo


class GaussianFamily(IntervalFamily):
    """Central intervals ``mean +/- z_{1-beta/2} * sd`` of a normal forecast."""

    monotone = True

    def __init__(self, mean: float, sd: float):
        if not sd >= 0:
            raise ValueError("sd must be nonnegative")
        self.mean = float(mean)
        self.sd = float(sd)

    def bounds(self, beta):
        # ndtri(beta/2) = -z_{1-beta/2}; ndtri(0) = -inf gives the full line.
        beta = np.asarray(beta, dtype=float)
        if self.sd == 0:
            half = np.where(beta == 0, np.inf, 0.0)
        else:
            half = -special.ndtri(beta / 2.0) * self.sd
        return self.mean - half, self.mean + half

    def pit(self, y: float) -> float:
        if self.sd == 0:
            return 1.0 if y == self.mean else 0.0
        return float(special.erfc(abs(y - self.mean) / (self.sd * math.sqrt(2.0))))

    def __repr__(self):
        return f"GaussianFamily(mean={self.mean!r}, sd={self.sd!r})"


class ScaledChiSquareFamily(IntervalFamily):
    """Equal-tailed intervals of ``scale * Z**2`` with ``Z`` standard normal.

    Used for squared-volatility targets: the ``beta/2`` and ``1 - beta/2``
    quantiles of ``(sigma Z)**2`` with ``scale = sigma**2``. At ``beta = 0``
    the raw lower end would be 0; the safeguard replaces it with ``-inf``.
    """

    monotone = True

    def __init__(self, scale: float):
        if not scale > 0:
            raise ValueError("scale must be positive")
        self.scale = float(scale)

    def bounds(self, beta):
        beta = np.asarray(beta, dtype=float)
        # chi2(1) quantile q(p) = ndtri((1 + p) / 2)**2, written per tail for accuracy
        upper = self.scale * special.ndtri(beta / 4.0) ** 2
        lower = self.scale * special.ndtri(0.5 + beta / 4.0) ** 2
        lower = np.where(beta == 0, -np.inf, np.minimum(lower, upper))
        return lower, upper

    def pit(self, y: float) -> float:
        if y < 0:
            return 0.0
        root = math.sqrt(y / (2.0 * self.scale))
        below = special.erf(root)  # P(scale * Z^2 <= y)
        above = special.erfc(root)
        return float(min(1.0, 2.0 * min(below, above)))

    def __repr__(self):
        return f"ScaledChiSquareFamily(scale={self.scale!r})"


class CallableFamily(IntervalFamily):
    """Wrap an arbitrary ``beta -> (lower, upper)`` function. No guarantees."""

    def __init__(self, fn: Callable[[float], tuple], domain_is_full_line: bool = True):
        self.fn = fn
        self.domain_is_full_line = domain_is_full_line

    def bounds(self, beta):
        beta = np.asarray(beta, dtype=float)
        if beta.ndim == 0:
            lo, hi = self.fn(float(beta))
            return np.float64(lo), np.float64(hi)
        pairs = np.array([self.fn(float(b)) for b in beta.ravel()], dtype=float)
        return pairs[:, 0].reshape(beta.shape), pairs[:, 1].reshape(beta.shape)


class EnvelopeFamily(IntervalFamily):
    """Monotone family given by endpoint tables on an increasing beta grid.

    Off-grid ``beta`` uses the first grid point at or above it, so the set of
    ``beta`` covering any ``y`` is a closed interval ``[0, grid[i]]`` and the
    PIT is exact.
    """

    monotone = True

    def __init__(self, grid, lower, upper, domain_is_full_line: bool = True):
        self.grid = np.asarray(grid, dtype=float)
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        self.domain_is_full_line = domain_is_full_line

    def _index(self, beta):
        return np.minimum(np.searchsorted(self.grid, beta, side="left"), self.grid.size - 1)

    def bounds(self, beta):
        idx = self._index(np.asarray(beta, dtype=float))
        return self.lower[idx], self.upper[idx]

    def pit(self, y: float) -> float:
        covered = (self.lower <= y) & (y <= self.upper)
        if not covered[0]:
            raise InvariantViolation(f"outcome {y!r} lies outside the beta=0 interval")
        # monotone tables: coverage is a prefix of the grid
        last = int(np.argmin(covered)) - 1 if not covered.all() else covered.size - 1
        return float(self.grid[last])


class _Safeguarded(IntervalFamily):
    """Monotone family whose ``beta = 0`` interval is widened to the full line."""

    monotone = True

    def __init__(self, base: IntervalFamily):
        self.base = base
        self.domain_is_full_line = base.domain_is_full_line

    def bounds(self, beta):
        beta = np.asarray(beta, dtype=float)
        lo, hi = self.base.bounds(beta)
        return np.where(beta == 0, -np.inf, lo), np.where(beta == 0, np.inf, hi)

    def pit(self, y: float) -> float:
        if self.base.contains(y, 0.0):
            return self.base.pit(y)
        return 0.0


def _is_safeguarded(family: IntervalFamily) -> bool:
    if not family.domain_is_full_line:
        return True
    lo, hi = family.bounds(np.float64(0.0))
    return bool(np.isneginf(lo) and np.isposinf(hi))


def enforce_assumption1(raw: IntervalFamily, grid_size: int = GRID_SIZE) -> IntervalFamily:
    """Return a monotone, safeguarded version of ``raw``.

    Closed-form monotone families are returned as is (or with only the
    ``beta = 0`` interval widened). Anything else is replaced by its smallest
    monotone envelope on a ``grid_size``-point grid: the interval at ``beta``
    becomes the union of the raw intervals at every grid point ``>= beta``.
    """
    if raw.monotone:
        return raw if _is_safeguarded(raw) else _Safeguarded(raw)
    grid = np.linspace(0.0, 1.0, grid_size)
    lo, hi = raw.bounds(grid)
    lo = np.minimum.accumulate(np.asarray(lo, dtype=float)[::-1])[::-1]
    hi = np.maximum.accumulate(np.asarray(hi, dtype=float)[::-1])[::-1]
    if raw.domain_is_full_line:
        lo[0], hi[0] = -np.inf, np.inf
    return EnvelopeFamily(grid, lo, hi, raw.domain_is_full_line)


def compute_pit(family: IntervalFamily, y: float) -> float:
    """Uncalibrated PIT: the largest miscoverage at which ``y`` is covered."""
    beta = family.pit(float(y))
    if not 0.0 <= beta <= 1.0:
        raise InvariantViolation(f"PIT {beta!r} outside [0, 1]")
    return beta


def err_indicator(alpha: float, beta: float) -> int:
    """1 when the interval at miscoverage ``alpha`` misses (``alpha > beta``)."""
    return int(alpha > beta)


def check_monotone(family: IntervalFamily, grid_size: int = GRID_SIZE) -> bool:
    """True if ``family`` is nested and safeguarded on a uniform grid."""
    grid = np.linspace(0.0, 1.0, grid_size)
    lo, hi = family.bounds(grid)
    nested = np.all(np.diff(lo) >= 0) and np.all(np.diff(hi) <= 0)
    return bool(nested and _is_safeguarded(family))
