import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfisem.diagnostics import shrink_factor, shrink_trajectory, spearman, summarize
from rfisem.errors import DegenerateInputError, ValidationError


def test_shrink_factor_hand_values():
    assert shrink_factor([[0, 2], [10, 12]]) == pytest.approx(np.sqrt(25.5), rel=1e-12)
    rng = np.random.default_rng(0)
    x = rng.standard_normal((3, 100))
    x -= x.mean(axis=1, keepdims=True)
    assert shrink_factor(x) == pytest.approx(np.sqrt(99 / 100), rel=1e-12)


def test_shrink_factor_errors():
    with pytest.raises(DegenerateInputError):
        shrink_factor(np.ones((3, 10)))
    with pytest.raises(ValidationError):
        shrink_factor(np.ones((1, 10)))


def test_identical_chains_below_one():
    x = np.tile(np.random.default_rng(1).standard_normal(200), (4, 1))
    assert shrink_factor(x) < 1.0
    traj = shrink_trajectory(x, stride=50)
    assert [t for t, _ in traj] == [50, 100, 150, 200]
    assert all(sf < 1.0 for _, sf in traj)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.1, 50), st.floats(-100, 100))
def test_shrink_factor_lower_bound_and_affine_invariance(seed, a, b):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((4, 30)) + rng.normal(0, 2, (4, 1))
    sf = shrink_factor(x)
    assert sf >= np.sqrt(29 / 30) - 1e-12
    assert shrink_factor(a * x + b) == pytest.approx(sf, rel=1e-9)


def test_spearman_examples():
    x = np.array([3.0, 1.0, 4.0, 1.5, 9.0])
    assert spearman(x, x) == pytest.approx(1.0)
    assert spearman(x, -x) == pytest.approx(-1.0)
    # ties get average ranks
    assert spearman([1, 2, 2, 3], [1, 2, 3, 4]) == pytest.approx(np.corrcoef([1, 2.5, 2.5, 4], [1, 2, 3, 4])[0, 1])
    with pytest.raises(DegenerateInputError):
        spearman([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValidationError):
        spearman([1, 2], [1, 2, 3])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_spearman_monotone_invariance(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal(30), rng.standard_normal(30)
    assert spearman(np.exp(x), y**3) == pytest.approx(spearman(x, y), abs=1e-12)


def test_summarize():
    s = summarize(np.full(10, 2.5))
    assert s["sd"] == 0 and s["q025"] == s["q50"] == s["q975"] == 2.5
    assert summarize(np.arange(1, 101))["q50"] == 50.5
    x = np.random.default_rng(0).standard_normal(100_000)
    s = summarize(x)
    assert abs(s["mean"]) < 0.02 and abs(s["sd"] - 1) < 0.02
    assert s["mean"] == x.mean()
    with pytest.raises(ValidationError):
        summarize([1.0])
