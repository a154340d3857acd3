"""Trailing window of uncalibrated PITs and its empirical CDF."""

from __future__ import annotations

from collections import deque

import numpy as np

from .errors import NotReadyError


class PitWindow:
    """FIFO buffer of the last ``capacity`` PITs (most recent last).

    The CDF is strict, ``F(alpha) = #{beta_j < alpha} / n``, so that the
    average of ``err_indicator(alpha, beta_j)`` over the buffer equals
    ``F(alpha)`` exactly.
    """

    def __init__(self, capacity: int = 100, values=()):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self._buffer = deque(maxlen=self.capacity)
        self._sorted = None
        for v in values:
            self.push(v)

    def push(self, beta: float) -> "PitWindow":
        beta = float(beta)
        if not 0.0 <= beta <= 1.0:
            raise ValueError(f"PIT {beta!r} outside [0, 1]")
        self._buffer.append(beta)
        self._sorted = None
        return self

    def __len__(self) -> int:
        return len(self._buffer)

    @property
    def full(self) -> bool:
        return len(self._buffer) == self.capacity

    @property
    def buffer(self) -> list:
        return list(self._buffer)

    def _sorted_values(self) -> np.ndarray:
        if not self._buffer:
            raise NotReadyError("PIT window is empty")
        if self._sorted is None:
            self._sorted = np.sort(np.fromiter(self._buffer, dtype=float))
        return self._sorted

    def cdf(self, alpha):
        """Fraction of stored PITs strictly below ``alpha`` (vectorised)."""
        values = self._sorted_values()
        counts = np.searchsorted(values, alpha, side="left")
        out = counts / values.size
        return out if np.ndim(out) else float(out)

    def atoms(self) -> np.ndarray:
        """Sorted distinct stored values."""
        values = self._sorted_values()
        keep = np.empty(values.size, dtype=bool)
        keep[0] = True
        np.not_equal(values[1:], values[:-1], out=keep[1:])
        return values[keep]

    def snapshot(self) -> "PitWindow":
        return PitWindow(self.capacity, self._buffer)

    def __repr__(self):
        return f"PitWindow(capacity={self.capacity}, n={len(self)})"
