import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dprtfl.dss import aggregate, apply_delta, compute_delta
from dprtfl.errors import InvalidInputError, NoUpdatesError
from dprtfl.model import ParamVector

finite = st.floats(-1e6, 1e6)


def test_delta_examples():
    base = ParamVector([1.0], 1.0)
    assert not np.any(compute_delta(base, base))
    assert compute_delta(ParamVector([2.0], 3.0), base).tolist() == [1.0, 2.0]
    assert apply_delta(base, [0.0, 0.0]) == base
    assert apply_delta(base, [1.0, 2.0]) == ParamVector([2.0], 3.0)


@given(arrays(np.float64, st.integers(2, 20), elements=finite), st.data())
def test_compute_then_apply_round_trips(local_flat, data):
    base_flat = data.draw(arrays(np.float64, local_flat.size, elements=finite))
    local, base = ParamVector.from_flat(local_flat), ParamVector.from_flat(base_flat)
    # exact in binary64 whenever the subtraction is exact; compare to the float result instead
    back = apply_delta(base, compute_delta(local, base))
    np.testing.assert_allclose(back.flat(), local.flat(), rtol=1e-12, atol=1e-9)


def test_round_trip_bitwise_on_moderate_values(rng):
    for _ in range(200):
        local = ParamVector(rng.normal(size=6), float(rng.normal()))
        base = ParamVector(local.coef + rng.normal(size=6) * 1e-3, local.intercept)
        # Sterbenz: a - b is exact when the operands are within a factor of 2
        close = np.all((np.abs(local.flat()) / 2 <= np.abs(base.flat())) & (np.abs(base.flat()) <= 2 * np.abs(local.flat())))
        if close:
            assert apply_delta(base, compute_delta(local, base)).bitwise_equal(local)


def test_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        compute_delta(ParamVector.zeros(2), ParamVector.zeros(3))
    with pytest.raises(InvalidInputError):
        apply_delta(ParamVector.zeros(2), [1.0])


def test_aggregate_examples():
    assert aggregate([([1.0, -2.0], 7)]).tolist() == [1.0, -2.0]
    assert aggregate([([1.0, 1.0], 10), ([3.0, 3.0], 30)]).tolist() == [2.5, 2.5]
    same = [0.3, -0.7, 1.1]
    np.testing.assert_allclose(aggregate([(same, 1), (same, 5), (same, 9)]), same, rtol=1e-15)


def test_aggregate_errors():
    with pytest.raises(NoUpdatesError):
        aggregate([])
    with pytest.raises(InvalidInputError):
        aggregate([([1.0], 1), ([1.0, 2.0], 1)])
    with pytest.raises(InvalidInputError):
        aggregate([([1.0], 0)])


def test_aggregate_properties(rng):
    for _ in range(100):
        k, d = rng.integers(1, 8), rng.integers(1, 10)
        deltas = rng.normal(size=(k, d))
        counts = rng.integers(1, 500, k)
        out = aggregate([(i, deltas[i], counts[i]) for i in range(k)])
        assert np.all(out >= deltas.min(axis=0) - 1e-12) and np.all(out <= deltas.max(axis=0) + 1e-12)
        perm = rng.permutation(k)
        shuffled = aggregate([(i, deltas[i], counts[i]) for i in perm])
        assert shuffled.tobytes() == out.tobytes()
        unweighted = aggregate([(deltas[i], 3) for i in range(k)])
        np.testing.assert_allclose(unweighted, deltas.mean(axis=0), rtol=0, atol=1e-12)
