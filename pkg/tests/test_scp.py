from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqconf.errors import NotReadyError
from seqconf.pit import PitWindow
from seqconf.scp import (
    PolicyTables,
    ScpProblem,
    brute_force_oracle,
    evaluate_policy,
    first_action,
    solve,
    terminal_cost,
)


def random_problem(rng, T=None, max_atoms=10, lam=None, ties=False):
    T = T or int(rng.integers(1, 4))
    n_pits = int(rng.integers(1, max_atoms + 1))
    pits = np.round(rng.uniform(0, 1, n_pits), int(rng.integers(1, 4)))
    window = PitWindow(100, pits)
    atoms = window.atoms()
    cand = np.concatenate([atoms[(atoms > 0) & (atoms < 1)], [1.0]])
    if ties:
        base = np.repeat(rng.uniform(0, 2, (T, 1)), cand.size, axis=1)
        lengths = base
    else:
        steps = rng.exponential(1.0, (T, cand.size))
        lengths = np.cumsum(steps[:, ::-1], axis=1)[:, ::-1] - steps[:, -1:] * rng.uniform(0, 1)
    F = np.repeat(window.cdf(cand)[None, :], T, axis=0)
    lam = float(rng.uniform(-2, 30)) if lam is None else lam
    return ScpProblem(lam, float(rng.uniform(0.02, 0.5)), cand, lengths, F)


def enumerate_markov_policies(problem):
    """Minimum expected cost over every (stage, miss count) -> action table."""
    T, n = problem.horizon, problem.candidates.size
    states = [(h, r) for h in range(T) for r in range(h + 1)]
    best = None
    for choice in itertools.product(range(n), repeat=len(states)):
        table = {s: j for s, j in zip(states, choice)}
        idx = tuple(np.array([table[(h, r)] for r in range(h + 1)]) for h in range(T))
        pol = tuple(problem.candidates[i] for i in idx)
        cost = evaluate_policy(problem, PolicyTables((), pol, idx))
        best = cost if best is None else min(best, cost)
    return best


def test_problem_validation():
    ok = dict(lam=1.0, alpha_bar=0.1, candidates=[0.2, 1.0], lengths=[[2.0, 1.0]], cdfs=[[0.1, 1.0]])
    ScpProblem(**ok)
    with pytest.raises(ValueError):
        ScpProblem(**{**ok, "candidates": [1.0, 0.2]})
    with pytest.raises(ValueError):
        ScpProblem(**{**ok, "lengths": [[1.0, 2.0]]})
    with pytest.raises(ValueError):
        ScpProblem(**{**ok, "alpha_bar": 1.0})
    with pytest.raises(ValueError):
        ScpProblem(**{**ok, "cdfs": [[0.1, 1.0], [0.1, 1.0]]})
    with pytest.raises(NotReadyError):
        ScpProblem(1.0, 0.1, [], np.zeros((1, 0)), np.zeros((1, 0)))


def test_terminal_cost():
    assert terminal_cost(0, 5.0, 0.1, 3) == 0.0
    assert terminal_cost(3, 5.0, 0.1, 3) == pytest.approx(4.5)
    assert terminal_cost(np.arange(4), 1.0, 0.5, 3).tolist() == pytest.approx([0, 0, 1 / 6, 0.5])
    with pytest.raises(ValueError):
        terminal_cost(4, 1.0, 0.1, 3)


def test_single_step_hand_instance():
    # T = 1: J(0) = min_a L(a) + lam * (1 - abar) * F(a)
    cand = np.array([0.2, 0.5, 1.0])
    L = np.array([[3.0, 1.0, 0.0]])
    F = np.array([[0.25, 0.5, 1.0]])
    prob = ScpProblem(4.0, 0.1, cand, L, F)
    values = L[0] + 4.0 * 0.9 * F[0]
    tables = solve(prob)
    assert tables.J[0][0] == pytest.approx(values.min())
    assert first_action(tables) == cand[np.argmin(values)]
    assert brute_force_oracle(prob) == pytest.approx((values.min(), cand[np.argmin(values)]))


def test_from_functions():
    prob = ScpProblem.from_functions(1.0, 0.1, [0.3, 1.0], [lambda a: 1 - a] * 2, [lambda a: a] * 2)
    assert prob.horizon == 2
    assert np.allclose(prob.lengths, [[0.7, 0.0], [0.7, 0.0]])


def test_solve_matches_oracle_random():
    rng = np.random.default_rng(0)
    for _ in range(200):
        prob = random_problem(rng)
        tables = solve(prob)
        cost, action = brute_force_oracle(prob)
        assert tables.J[0][0] == pytest.approx(cost, abs=1e-9, rel=1e-9)
        assert first_action(tables) == action


def test_solve_matches_policy_enumeration_tiny():
    rng = np.random.default_rng(1)
    for _ in range(25):
        prob = random_problem(rng, T=int(rng.integers(1, 3)), max_atoms=3)
        assert solve(prob).J[0][0] == pytest.approx(enumerate_markov_policies(prob), abs=1e-12, rel=1e-12)


def test_evaluate_policy_reproduces_cost_to_go():
    rng = np.random.default_rng(2)
    for _ in range(50):
        prob = random_problem(rng)
        tables = solve(prob)
        assert evaluate_policy(prob, tables) == pytest.approx(tables.J[0][0], abs=1e-10, rel=1e-10)


def test_ties_go_to_smallest_alpha():
    rng = np.random.default_rng(3)
    for _ in range(50):
        prob = random_problem(rng, ties=True, lam=0.0 if rng.uniform() < 0.3 else None)
        tables = solve(prob)
        cost, action = brute_force_oracle(prob)
        assert first_action(tables) == action
        assert tables.J[0][0] == pytest.approx(cost, abs=1e-12)
    flat = ScpProblem(0.5, 0.4, [0.2, 0.6, 1.0], [[1.0, 1.0, 1.0]], [[0.0, 0.0, 0.0]])
    assert first_action(solve(flat)) == 0.2


def test_nonpositive_lambda_forces_shortest_interval():
    rng = np.random.default_rng(4)
    for lam in (0.0, -1.0, -50.0):
        prob = random_problem(rng, lam=lam)
        tables = solve(prob)
        assert all(np.all(p == 1.0) for p in tables.policy)
        assert brute_force_oracle(prob)[1] == 1.0


def test_oracle_limits():
    big = ScpProblem(1.0, 0.1, np.linspace(0.05, 1.0, 20), np.tile(np.linspace(2, 0, 20), (5, 1)),
                     np.tile(np.linspace(0, 1, 20), (5, 1)))
    with pytest.raises(ValueError):
        brute_force_oracle(big)


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lam=st.floats(0, 100))
def test_cost_to_go_nonnegative_and_monotone(seed, lam):
    # the nonnegativity / monotonicity argument needs lam >= 0; the controller
    # never solves with lam <= 0 (it plays alpha = 1 directly)
    prob = random_problem(np.random.default_rng(seed), lam=lam)
    tables = solve(prob)
    for J in tables.J:
        assert np.all(J >= 0)
        assert np.all(np.diff(J) >= 0)


def test_scalar_worked_examples():
    assert terminal_cost(1, 5.0, 0.1, 3) == pytest.approx(7 / 6)
    assert np.all(terminal_cost(np.arange(4), 0.0, 0.1, 3) == 0)
    # lam = 0: the shortest intervals everywhere, cost = sum of L(1)
    prob = ScpProblem(0.0, 0.1, [0.3, 1.0], [[2.0, 0.5], [3.0, 0.25]], [[0.2, 1.0], [0.2, 1.0]])
    assert brute_force_oracle(prob) == (pytest.approx(0.75), 1.0)
    # single candidate, T = 1: L + lam * (1 - abar) * F
    one = ScpProblem(4.0, 0.1, [0.3], [[1.5]], [[0.25]])
    assert brute_force_oracle(one)[0] == pytest.approx(1.5 + 4.0 * 0.9 * 0.25)


def test_gaussian_length_hand_instance():
    from seqconf.intervals import GaussianFamily

    window = PitWindow(2, [0.05, 0.5])
    cand = np.array([0.05, 0.5, 1.0])
    assert window.cdf(cand[:2]).tolist() == [0.0, 0.5]
    L = GaussianFamily(0.0, 1.0).length(cand)[None, :]
    prob = ScpProblem(20.0, 0.1, cand, L, window.cdf(cand)[None, :])
    values = L[0] + 20.0 * 0.9 * window.cdf(cand)
    assert first_action(solve(prob)) == cand[np.argmin(values)] == brute_force_oracle(prob)[1]


def test_first_action_never_increases_with_lambda():
    """Regression property: a larger penalty never picks a larger rate."""
    rng = np.random.default_rng(9)
    for _ in range(200):
        prob = random_problem(rng, lam=1.0)
        actions = [first_action(solve(ScpProblem(lam, prob.alpha_bar, prob.candidates, prob.lengths, prob.cdfs)))
                   for lam in np.linspace(0.01, 60, 25)]
        assert np.all(np.diff(actions) <= 0)
