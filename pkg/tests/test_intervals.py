from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from seqconf.errors import InvariantViolation
from seqconf.intervals import (
    GRID_SIZE,
    CallableFamily,
    EnvelopeFamily,
    GaussianFamily,
    PredictionInterval,
    ScaledChiSquareFamily,
    check_monotone,
    compute_pit,
    enforce_assumption1,
    err_indicator,
)


def test_interval_length_and_membership():
    iv = PredictionInterval(-1.0, 2.0)
    assert iv.length == 3.0
    assert iv.contains(2.0) and iv.contains(-1.0) and not iv.contains(2.0001)
    assert PredictionInterval(-math.inf, 0.0).length == math.inf
    assert PredictionInterval(0.0, 0.0).length == 0.0
    with pytest.raises(ValueError):
        PredictionInterval(1.0, 0.0)


def test_err_indicator_is_strict():
    assert err_indicator(0.1, 0.3) == 0
    assert err_indicator(0.3, 0.1) == 1
    assert err_indicator(0.1, 0.1) == 0


def test_gaussian_pit_examples():
    fam = GaussianFamily(0.0, 1.0)
    assert compute_pit(fam, 0.0) == 1.0
    assert compute_pit(fam, 1.6449) == pytest.approx(2 * stats.norm.sf(1.6449), abs=1e-12)
    assert compute_pit(fam, 1.6449) == pytest.approx(0.10, abs=1e-4)


def test_gaussian_bounds_match_normal_quantiles():
    fam = GaussianFamily(2.0, 3.0)
    lo, hi = fam.bounds(0.1)
    assert hi == pytest.approx(2.0 + 3.0 * stats.norm.ppf(0.95), rel=1e-12)
    assert lo == pytest.approx(2.0 - 3.0 * stats.norm.ppf(0.95), rel=1e-12)
    assert fam.evaluate(0.0).length == math.inf
    assert fam.length(1.0) == 0.0


def test_degenerate_gaussian():
    fam = GaussianFamily(1.0, 0.0)
    assert fam.evaluate(0.5) == PredictionInterval(1.0, 1.0)
    assert fam.evaluate(0.0).length == math.inf
    assert compute_pit(fam, 1.0) == 1.0 and compute_pit(fam, 1.5) == 0.0


def test_chi_square_examples():
    fam = ScaledChiSquareFamily(1.0)
    lo, hi = fam.bounds(0.1)
    assert lo == pytest.approx(stats.chi2.ppf(0.05, 1), rel=1e-9)
    assert hi == pytest.approx(stats.chi2.ppf(0.95, 1), rel=1e-9)
    assert lo == pytest.approx(0.00393, abs=1e-5) and hi == pytest.approx(3.841, abs=1e-3)
    median = stats.chi2.median(1)
    assert compute_pit(fam, median) == pytest.approx(1.0, abs=1e-12)
    assert fam.evaluate(0.0) == PredictionInterval(-math.inf, math.inf)
    # beta = 1 collapses to the median
    one = fam.evaluate(1.0)
    assert one.length == pytest.approx(0.0, abs=1e-12)
    assert one.lower == pytest.approx(median, rel=1e-9)


def test_chi_square_pit_matches_cdf():
    fam = ScaledChiSquareFamily(2.5)
    for y in (1e-4, 0.3, 2.5, 9.0, 40.0):
        F = stats.chi2.cdf(y / 2.5, 1)
        assert compute_pit(fam, y) == pytest.approx(2 * min(F, 1 - F), abs=1e-12)
    assert compute_pit(fam, -1.0) == 0.0


def test_monotone_family_passes_through():
    fam = GaussianFamily(0.0, 1.0)
    assert enforce_assumption1(fam) is fam
    assert check_monotone(fam)


def test_safeguard_forced_on_bounded_family():
    raw = CallableFamily(lambda b: (-1.0 + b, 1.0 - b))
    fixed = enforce_assumption1(raw)
    assert fixed.evaluate(0.0) == PredictionInterval(-math.inf, math.inf)
    assert check_monotone(fixed)
    assert not check_monotone(raw)


def _blip(beta):
    half = 1.0 - beta
    if abs(beta - 0.5) < 1e-12:
        half = 0.1  # artificially shrunken interval
    return -half, half


def _naive_envelope(fn, grid):
    """Direct O(n^2) scan: union of the raw intervals at grid points >= beta."""
    raw = [fn(b) for b in grid]
    lo = [min(r[0] for r in raw[i:]) for i in range(len(grid))]
    hi = [max(r[1] for r in raw[i:]) for i in range(len(grid))]
    return np.array(lo), np.array(hi)


def test_blip_is_removed_by_envelope():
    fixed = enforce_assumption1(CallableFamily(_blip))
    grid = np.linspace(0, 1, GRID_SIZE)
    lo, hi = _naive_envelope(_blip, grid)
    got = fixed.evaluate(0.5)
    i = 500
    assert grid[i] == 0.5
    assert (got.lower, got.upper) == (lo[i], hi[i])
    # the blip is gone: the envelope is the raw interval of the nearest
    # grid point on the far side, not the shrunken one
    assert got.upper == pytest.approx(1.0 - grid[i + 1])
    assert check_monotone(fixed)


def test_envelope_matches_naive_scan():
    rng = np.random.default_rng(3)
    grid = np.linspace(0, 1, 101)
    lo0, hi0 = -rng.uniform(0, 1, 101), rng.uniform(0, 1, 101)
    fn = lambda b: (lo0[int(round(b * 100))], hi0[int(round(b * 100))])
    fixed = enforce_assumption1(CallableFamily(fn), grid_size=101)
    lo, hi = _naive_envelope(fn, grid)
    got_lo, got_hi = fixed.bounds(grid)
    assert np.array_equal(got_lo[1:], lo[1:]) and np.array_equal(got_hi[1:], hi[1:])


def test_envelope_off_grid_rounds_up():
    fam = EnvelopeFamily([0.0, 0.5, 1.0], [-np.inf, -1.0, 0.0], [np.inf, 1.0, 0.0])
    assert fam.evaluate(0.3) == PredictionInterval(-1.0, 1.0)
    assert fam.evaluate(0.7) == PredictionInterval(0.0, 0.0)
    assert compute_pit(fam, 0.5) == 0.5
    assert compute_pit(fam, 0.0) == 1.0
    assert compute_pit(fam, 5.0) == 0.0


def test_pit_outside_full_interval_is_an_invariant_violation():
    raw = CallableFamily(lambda b: (-1.0, 1.0), domain_is_full_line=False)
    with pytest.raises(InvariantViolation):
        compute_pit(raw, 3.0)


def test_bisection_pit_matches_closed_form():
    closed = GaussianFamily(0.5, 2.0)
    generic = CallableFamily(lambda b: tuple(float(v) for v in closed.bounds(b)))
    for y in (-3.0, 0.0, 0.5, 1.7, 6.0):
        assert compute_pit(generic, y) == pytest.approx(compute_pit(closed, y), abs=2e-9)


@settings(max_examples=200, deadline=None)
@given(
    mean=st.floats(-10, 10),
    sd=st.floats(0.01, 10),
    b1=st.floats(0, 1),
    b2=st.floats(0, 1),
)
def test_gaussian_nested(mean, sd, b1, b2):
    fam = GaussianFamily(mean, sd)
    hi_b, lo_b = max(b1, b2), min(b1, b2)
    assert fam.evaluate(hi_b).issubset(fam.evaluate(lo_b))


@settings(max_examples=200, deadline=None)
@given(scale=st.floats(1e-6, 1e3), b1=st.floats(0, 1), b2=st.floats(0, 1))
def test_chi_square_nested(scale, b1, b2):
    fam = ScaledChiSquareFamily(scale)
    hi_b, lo_b = max(b1, b2), min(b1, b2)
    assert fam.evaluate(hi_b).issubset(fam.evaluate(lo_b))


def test_pit_membership_consistency_random_triples():
    """y in C(alpha) iff alpha <= PIT, away from the boundary."""
    rng = np.random.default_rng(11)
    for _ in range(10_000):
        if rng.uniform() < 0.5:
            fam = GaussianFamily(rng.normal(), rng.uniform(0.1, 3))
            y = rng.normal(fam.mean, 2 * fam.sd)
        else:
            fam = ScaledChiSquareFamily(rng.uniform(0.1, 3))
            y = fam.scale * rng.normal() ** 2
        alpha = rng.uniform()
        beta = compute_pit(fam, y)
        if abs(alpha - beta) < 1e-9:
            continue
        assert fam.contains(y, alpha) == (alpha <= beta)
        assert err_indicator(alpha, beta) == int(not fam.contains(y, alpha))


@settings(max_examples=100, deadline=None)
@given(values=st.lists(st.tuples(st.floats(-5, 0), st.floats(0, 5)), min_size=11, max_size=11))
def test_envelope_always_monotone(values):
    lo0 = np.array([v[0] for v in values])
    hi0 = np.array([v[1] for v in values])
    fn = lambda b: (lo0[int(round(b * 10))], hi0[int(round(b * 10))])
    fixed = enforce_assumption1(CallableFamily(fn), grid_size=11)
    assert check_monotone(fixed, grid_size=11)
    # every raw interval is contained in its envelope
    for k, b in enumerate(np.linspace(0, 1, 11)):
        assert PredictionInterval(lo0[k], hi0[k]).issubset(fixed.evaluate(b))
