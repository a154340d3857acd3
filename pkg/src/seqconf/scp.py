"""Receding-horizon control problem for the nominal miscoverage rate.

At time ``t`` one picks actions ``alpha_{s|t}`` for ``s = t .. t+T-1`` to
minimise

    E[ sum_s L_s(alpha_s) + lam * max(rho_T / T - alpha_bar, 0) ]

where ``rho_T`` counts planned misses ``1(alpha_s > beta_s)`` with the
``beta_s`` drawn independently from per-step CDFs ``F_s``. The miss count
is the DP state, so backward induction visits ``O(T^2)`` states and every
stage is solved exactly by scanning the finite candidate set.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NotReadyError

# Relative slack under which two objective values count as tied; ties go to
# the smallest action (the widest interval).
TIE_RTOL = 1e-12
ORACLE_MAX_HORIZON = 4
ORACLE_MAX_CANDIDATES = 12


@dataclass(frozen=True)
class ScpProblem:
    """One instance of the control problem, tabulated on the candidates.

    ``lengths[h, j]`` and ``cdfs[h, j]`` are ``L_{t+h|t}`` and ``F_{t+h|t}``
    evaluated at ``candidates[j]``.
    """

    lam: float
    alpha_bar: float
    candidates: np.ndarray
    lengths: np.ndarray
    cdfs: np.ndarray

    def __post_init__(self):
        cand = np.asarray(self.candidates, dtype=float)
        lengths = np.atleast_2d(np.asarray(self.lengths, dtype=float))
        cdfs = np.atleast_2d(np.asarray(self.cdfs, dtype=float))
        object.__setattr__(self, "candidates", cand)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "cdfs", cdfs)
        if cand.size == 0:
            raise NotReadyError("empty candidate set")
        if lengths.shape != cdfs.shape or lengths.shape[1] != cand.size:
            raise ValueError("lengths and cdfs must have shape (horizon, n_candidates)")
        if np.any(np.diff(cand) <= 0) or cand[0] <= 0 or cand[-1] > 1:
            raise ValueError("candidates must be strictly increasing within (0, 1]")
        if not 0 < self.alpha_bar < 1:
            raise ValueError("alpha_bar must lie in (0, 1)")
        if (lengths[:, 1:] > lengths[:, :-1]).any():
            raise ValueError("length functions must be non-increasing in alpha")

    @classmethod
    def trusted(cls, lam, alpha_bar, candidates, lengths, cdfs) -> "ScpProblem":
        """Build without validation, for tables already known to be well formed."""
        obj = object.__new__(cls)
        for name, value in zip(
            ("lam", "alpha_bar", "candidates", "lengths", "cdfs"),
            (lam, alpha_bar, candidates, lengths, cdfs),
        ):
            object.__setattr__(obj, name, value)
        return obj

    @classmethod
    def from_functions(
        cls,
        lam: float,
        alpha_bar: float,
        candidates,
        lengths: Sequence[Callable],
        cdfs: Sequence[Callable],
    ) -> "ScpProblem":
        cand = np.asarray(candidates, dtype=float)
        if len(lengths) != len(cdfs):
            raise ValueError("need one CDF per length function")
        L = np.vstack([np.asarray(f(cand), dtype=float) * np.ones(cand.size) for f in lengths])
        F = np.vstack([np.asarray(f(cand), dtype=float) * np.ones(cand.size) for f in cdfs])
        return cls(lam, alpha_bar, cand, L, F)

    @property
    def horizon(self) -> int:
        return self.lengths.shape[0]


@dataclass(frozen=True)
class PolicyTables:
    """Cost-to-go ``J[h][rho]`` (``h = 0..T``) and policy ``policy[h][rho]``
    (``h = 0..T-1``), with ``rho = 0..h`` at stage ``h``."""

    J: tuple
    policy: tuple
    policy_index: tuple


def terminal_cost(rho, lam: float, alpha_bar: float, T: int):
    rho_arr = np.asarray(rho)
    if np.any(rho_arr < 0) or np.any(rho_arr > T):
        raise ValueError(f"rho must lie in 0..{T}")
    out = lam * np.maximum(rho_arr / T - alpha_bar, 0.0)
    return out if np.ndim(out) else float(out)


def _argmin_smallest(values: np.ndarray) -> np.ndarray:
    """Row-wise argmin, choosing the first index among near-ties.

    NaN (from ``inf - inf``) never wins; a row that is all infinite picks
    index 0.
    """
    nan = values != values
    if nan.any():
        values = np.where(nan, np.inf, values)
    best = values.min(axis=-1, keepdims=True)
    if not np.isfinite(best).all():
        best = np.where(np.isfinite(best), best, np.finfo(float).max)
    limit = best + TIE_RTOL * np.maximum(np.abs(best), 1.0)
    return (values <= limit).argmax(axis=-1)


def solve(problem: ScpProblem) -> PolicyTables:
    """Exact backward induction.

    ``J_h(rho) = J_{h+1}(rho) + min_a { L_h(a) + D_h(rho) F_h(a) }`` with
    ``D_h(rho) = J_{h+1}(rho + 1) - J_{h+1}(rho)``. When ``lam <= 0`` every
    action is forced to 1, the shortest interval.
    """
    T = problem.horizon
    cand = problem.candidates
    L, F = problem.lengths, problem.cdfs
    J = [None] * (T + 1)
    policy = [None] * T
    index = [None] * T
    J[T] = problem.lam * np.maximum(np.arange(T + 1) / T - problem.alpha_bar, 0.0)
    forced = problem.lam <= 0
    if forced and cand[-1] != 1.0:
        raise ValueError("candidate set must contain 1 when lam <= 0")
    for h in range(T - 1, -1, -1):
        nxt = J[h + 1]
        D = nxt[1 : h + 2] - nxt[: h + 1]
        obj = L[h] + D[:, None] * F[h]
        if forced:
            idx = np.full(h + 1, cand.size - 1)
        else:
            idx = _argmin_smallest(obj)
        rows = np.arange(h + 1)
        J[h] = nxt[: h + 1] + obj[rows, idx]
        policy[h] = cand[idx]
        index[h] = idx
    return PolicyTables(tuple(J), tuple(policy), tuple(index))


def first_action(tables: PolicyTables) -> float:
    return float(tables.policy[0][0])


def evaluate_policy(problem: ScpProblem, tables: PolicyTables) -> float:
    """Expected cost of the tabulated policy by forward enumeration of all
    ``2^T`` miss patterns."""
    T = problem.horizon
    total = 0.0
    for pattern in itertools.product((0, 1), repeat=T):
        prob, cost, rho = 1.0, 0.0, 0
        for h, miss in enumerate(pattern):
            j = tables.policy_index[h][rho]
            p = problem.cdfs[h, j]
            prob *= p if miss else 1.0 - p
            cost += problem.lengths[h, j]
            rho += miss
        if prob > 0:
            total += prob * (cost + terminal_cost(rho, problem.lam, problem.alpha_bar, T))
    return total


def brute_force_oracle(problem: ScpProblem) -> tuple:
    """Exhaustive search over decision trees indexed by full miss histories.

    Every node of the tree (one per history of misses, not per miss count)
    scans all candidates; a node's subtree shares no decisions with its
    siblings, so minimising each subtree separately is the same as searching
    every tree-shaped policy. Leaves are costed from the whole path.
    Returns ``(expected_cost, first_action)``.
    """
    T = problem.horizon
    n = problem.candidates.size
    if T > ORACLE_MAX_HORIZON or n > ORACLE_MAX_CANDIDATES:
        raise ValueError(
            f"oracle limited to T <= {ORACLE_MAX_HORIZON} and "
            f"<= {ORACLE_MAX_CANDIDATES} candidates (got T={T}, n={n})"
        )
    L = problem.lengths.tolist()
    F = problem.cdfs.tolist()
    lam, abar = problem.lam, problem.alpha_bar
    one = n - 1 if problem.candidates[-1] == 1.0 else None
    if lam <= 0 and one is None:
        raise ValueError("candidate set must contain 1 when lam <= 0")

    def node(history: tuple) -> tuple:
        h = len(history)
        if h == T:
            return lam * max(sum(history) / T - abar, 0.0), None
        miss, _ = node(history + (1,))
        hit, _ = node(history + (0,))
        options = [L[h][j] + F[h][j] * miss + (1.0 - F[h][j]) * hit for j in range(n)]
        if lam <= 0:
            return options[one], one
        best = min(options)
        slack = TIE_RTOL * max(1.0, abs(best))
        j = next(k for k, v in enumerate(options) if v <= best + slack)
        return options[j], j

    cost, j = node(())
    return float(cost), float(problem.candidates[j])
