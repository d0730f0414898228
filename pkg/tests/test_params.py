import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from longcl.errors import ConfigurationError, ShapeError
from longcl.params import (
    ParamVector,
    Segment,
    compute_drift,
    load_snapshot,
    make_partition,
    save_snapshot,
)

from . import oracles

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def pv(values):
    return ParamVector(np.asarray(values, dtype=float), ())


def test_scalar_partition():
    part = make_partition(4, "scalar")
    assert part.units() == [(0, 1), (1, 2), (2, 3), (3, 4)]


def test_row_partition():
    assert make_partition(4, "row:2").units() == [(0, 2), (2, 4)]


def test_row_width_must_divide():
    with pytest.raises(ConfigurationError):
        make_partition(6, "row:4")


def test_row_partition_respects_segments():
    segs = (Segment("a", 0, 4), Segment("b", 4, 10))
    with pytest.raises(ConfigurationError):
        make_partition(10, "row:4", segs)
    assert make_partition(10, "row:2", segs).n_units == 5
    assert make_partition(10, "segment", segs).units() == [(0, 4), (4, 10)]


@pytest.mark.parametrize("bad", ["row", "row:x", "block", ("row", 0)])
def test_bad_granularity(bad):
    with pytest.raises(ConfigurationError):
        make_partition(4, bad)


def test_drift_345():
    d = compute_drift(pv([0, 0, 0, 0]), pv([3, 4, 0, 0]), make_partition(4, "row:2"))
    np.testing.assert_array_equal(d, [5.0, 0.0])


def test_drift_identity(rng):
    v = pv(rng.standard_normal(12))
    assert not compute_drift(v, v, make_partition(12, "row:3")).any()


def test_drift_matches_elementwise_oracle(rng):
    a, b = rng.standard_normal(100), rng.standard_normal(100)
    part = make_partition(100, "scalar")
    d = compute_drift(pv(a), pv(b), part)
    expected = oracles.drift(a, b, part.units())
    assert np.max(np.abs(d - expected)) < 1e-12


def test_drift_length_mismatch():
    with pytest.raises(ShapeError):
        compute_drift(pv([1, 2]), pv([1, 2, 3]), make_partition(2))


def test_combinable_needs_same_segments():
    a = ParamVector.from_arrays({"x": np.zeros(2), "y": np.zeros(2)})
    b = ParamVector.from_arrays({"x": np.zeros(3), "y": np.zeros(1)})
    with pytest.raises(ShapeError):
        a.check_combinable(b)


def test_nonfinite_rejected():
    with pytest.raises(ValueError):
        pv([1.0, np.nan])


def test_values_are_immutable():
    v = pv([1.0, 2.0])
    with pytest.raises(ValueError):
        v.values[0] = 3.0


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 12, elements=finite), arrays(np.float64, 12, elements=finite), finite)
def test_drift_properties(a, b, c):
    part = make_partition(12, "row:3")
    d_ab = compute_drift(pv(a), pv(b), part)
    d_ba = compute_drift(pv(b), pv(a), part)
    np.testing.assert_array_equal(d_ab, d_ba)
    assert np.all(d_ab >= 0)
    scaled = compute_drift(pv(c * a), pv(c * b), part)
    np.testing.assert_allclose(scaled, abs(c) * d_ab, rtol=1e-9, atol=1e-9)


def test_drift_of_one_unit_ignores_others(rng):
    a = rng.standard_normal(8)
    b = a.copy()
    b[0:2] += 1.0
    d = compute_drift(pv(a), pv(b), make_partition(8, "row:2"))
    assert d[0] > 0 and not d[1:].any()


def test_snapshot_roundtrip(tmp_path, rng):
    v = ParamVector.from_arrays({"adapter.A": rng.standard_normal((3, 2)), "adapter.B": rng.standard_normal((5, 2))})
    path = save_snapshot(v, tmp_path / "x.pv")
    raw = path.read_bytes()
    assert raw.startswith(b"LONGCL-PV v1 16\nadapter.A:0:6 adapter.B:6:16\n")
    assert load_snapshot(path) == v


def test_snapshot_truncated(tmp_path):
    path = save_snapshot(pv([1.0, 2.0]), tmp_path / "x.pv")
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(ValueError):
        load_snapshot(path)
