from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqconf.errors import NotReadyError
from seqconf.intervals import err_indicator
from seqconf.pit import PitWindow


def test_push_and_evict():
    w = PitWindow(3)
    w.push(0.5)
    assert w.buffer == [0.5]
    w = PitWindow(3, [0.1, 0.2, 0.3]).push(0.4)
    assert w.buffer == [0.2, 0.3, 0.4]
    w = PitWindow(4, np.linspace(0, 1, 9))
    assert len(w) == 4 and w.full


def test_push_rejects_out_of_range():
    with pytest.raises(ValueError):
        PitWindow(3).push(1.5)


def test_cdf_examples():
    w = PitWindow(3, [0.1, 0.2, 0.3])
    assert w.cdf(0.25) == pytest.approx(2 / 3)
    assert w.cdf(0.2) == pytest.approx(1 / 3)
    assert w.cdf(0.0) == 0.0
    assert w.cdf(1.0) == 1.0
    assert np.allclose(w.cdf(np.array([0.1, 0.15, 0.31])), [0.0, 1 / 3, 1.0])


def test_atoms_examples():
    assert PitWindow(3, [0.3, 0.1, 0.3]).atoms().tolist() == [0.1, 0.3]
    assert PitWindow(3, [0.5]).atoms().tolist() == [0.5]


def test_empty_window_not_ready():
    with pytest.raises(NotReadyError):
        PitWindow(5).cdf(0.5)
    with pytest.raises(NotReadyError):
        PitWindow(5).atoms()


def test_cache_invalidated_on_push():
    w = PitWindow(2, [0.1, 0.2])
    assert w.cdf(0.15) == 0.5
    w.push(0.9)
    assert w.cdf(0.15) == 0.0


@settings(max_examples=200, deadline=None)
@given(
    values=st.lists(st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.75, 1.0]) | st.floats(0, 1), min_size=1, max_size=50),
    alpha=st.floats(0, 1),
)
def test_cdf_equals_mean_err(values, alpha):
    w = PitWindow(100, values)
    assert w.cdf(alpha) == pytest.approx(np.mean([err_indicator(alpha, b) for b in values]), abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(values=st.lists(st.floats(0, 1), min_size=1, max_size=100))
def test_cdf_monotone_and_atoms_sorted(values):
    w = PitWindow(100, values)
    grid = np.linspace(0, 1, 201)
    F = w.cdf(grid)
    assert F[0] == 0.0 and np.all(np.diff(F) >= 0)
    assert w.cdf(np.nextafter(max(values), 2.0)) == 1.0
    atoms = w.atoms()
    assert np.all(np.diff(atoms) > 0)
    assert set(atoms.tolist()) == set(values)
