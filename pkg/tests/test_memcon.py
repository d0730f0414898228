import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from longcl.errors import PreconditionError, ShapeError
from longcl.memcon import (
    FrozenEncoder,
    PrototypeStore,
    build_buffer,
    compute_delta,
    compute_prototype,
    consolidate,
    embed,
    select_differential,
    select_hard,
)

from . import oracles


# --- encoder ------------------------------------------------------------------


def test_identity_encoder():
    enc = FrozenEncoder(2, kind="identity")
    np.testing.assert_array_equal(embed([1.0, 2.0], enc), [1.0, 2.0])


def test_encoder_deterministic(rng):
    x = rng.standard_normal(10)
    enc = FrozenEncoder(10, 32, seed=3)
    assert embed(x, enc).tobytes() == embed(x, enc).tobytes()


def test_encoder_reinstantiation(rng):
    x = rng.standard_normal((5, 10))
    a, b = FrozenEncoder(10, 32, seed=7), FrozenEncoder(10, 32, seed=7)
    assert np.array_equal(a.matrix, b.matrix)
    assert np.array_equal(a(x), b(x))
    assert not np.array_equal(a.matrix, FrozenEncoder(10, 32, seed=8).matrix)


def test_encoder_dimension_mismatch():
    with pytest.raises(ShapeError):
        FrozenEncoder(3, 8)(np.zeros(4))


def test_encoder_is_frozen():
    enc = FrozenEncoder(3, 8)
    with pytest.raises(ValueError):
        enc.matrix[0, 0] = 1.0


# --- prototypes ---------------------------------------------------------------


def test_prototype_single():
    np.testing.assert_array_equal(compute_prototype([[3.0, -1.0]]), [3.0, -1.0])


def test_prototype_midpoint():
    np.testing.assert_array_equal(compute_prototype([[0.0, 0.0], [2.0, 2.0]]), [1.0, 1.0])


def test_prototype_permutation_invariant(rng):
    emb = rng.standard_normal((50, 6))
    shuffled = emb[rng.permutation(50)]
    p = compute_prototype(emb)
    assert np.max(np.abs(p - compute_prototype(shuffled))) < 1e-12
    assert np.max(np.abs(p - oracles.mean(emb.tolist()))) < 1e-12
    assert np.max(np.abs((emb - p).sum(axis=0))) < 1e-9


def test_prototype_empty():
    with pytest.raises(PreconditionError):
        compute_prototype(np.empty((0, 3)))


def test_store_order_and_counts(rng):
    s = PrototypeStore()
    s.append(rng.standard_normal((4, 3)))
    s.append(rng.standard_normal((7, 3)))
    assert len(s) == 2 and s.counts == [4, 7]
    with pytest.raises(ShapeError):
        s.append(rng.standard_normal((2, 5)))


# --- hard selection -----------------------------------------------------------


def test_hard_symmetric_extremes():
    pts = np.array([[0.0], [1.0], [2.0], [3.0], [4.0]])
    pos, scores = select_hard(np.arange(5), pts, [2.0], 1 / 5)
    assert pos.tolist() == [0] and scores.tolist() == [2.0]


def test_hard_everything():
    pts = np.random.default_rng(0).standard_normal((9, 2))
    pos, _ = select_hard(np.arange(9), pts, pts.mean(0), 1.0)
    assert sorted(pos.tolist()) == list(range(9))


def test_hard_matches_sort_oracle(rng):
    pts = rng.standard_normal((200, 8))
    proto = pts.mean(0)
    ids = rng.permutation(1000)[:200]
    pos, scores = select_hard(ids, pts, proto, 0.1)
    want_ids, want_scores = oracles.hard(ids.tolist(), pts.tolist(), proto.tolist(), 0.1)
    assert ids[pos].tolist() == want_ids
    assert np.max(np.abs(scores - want_scores)) < 1e-12


def test_hard_ties_use_sample_id_not_position():
    pts = np.array([[1.0], [-1.0]])
    pos, _ = select_hard(np.array([9, 4]), pts, [0.0], 0.5)
    assert pos.tolist() == [1]


def test_hard_empty():
    with pytest.raises(PreconditionError):
        select_hard(np.array([], dtype=int), np.empty((0, 2)), [0.0, 0.0], 0.1)


# --- delta --------------------------------------------------------------------


def test_delta_two_points():
    assert compute_delta(np.array([[0.0, 0.0], [10.0, 0.0]])) == pytest.approx(4.0)


def test_delta_single():
    assert compute_delta(np.array([[1.0, 2.0]])) == 0.0


def test_delta_matches_all_pairs(rng):
    protos = rng.standard_normal((5, 8))
    assert abs(compute_delta(protos) - oracles.delta(protos.tolist())) < 1e-12


# --- differential selection ---------------------------------------------------


def test_differential_hand_example():
    protos = np.array([[0.0, 0.0], [10.0, 0.0]])
    pts = np.array([[5.0, 0.0], [1.0, 0.0], [5.0, 3.0]])
    pos, z, mind = select_differential(np.array([1, 2, 3]), pts, protos, 1 / 3, 2.0)
    assert pos.tolist() == [0]
    assert z[0] == pytest.approx(10.0)
    all_pos, all_z, _ = select_differential(np.array([1, 2, 3]), pts, protos, 1.0, 2.0)
    assert all_pos.tolist() == [0, 2]
    assert all_z[1] == pytest.approx(2 * math.sqrt(34), abs=1e-12)
    assert all_z[1] == pytest.approx(11.6619, abs=1e-4)


def test_differential_filter_excludes_all():
    protos = np.array([[0.0, 0.0]])
    pts = np.array([[0.1, 0.0], [0.0, 0.2]])
    pos, _, _ = select_differential(np.arange(2), pts, protos, 1.0, 1.0)
    assert pos.size == 0


def test_differential_without_history():
    pos, _, _ = select_differential(np.arange(3), np.zeros((3, 2)), np.empty((0, 2)), 0.5, 0.0)
    assert pos.size == 0


def test_differential_matches_oracle(rng):
    pts = rng.standard_normal((200, 8)) * 2
    protos = rng.standard_normal((4, 8)) * 2
    delta = 2.5
    ids = np.arange(200)
    pos, z, mind = select_differential(ids, pts, protos, 0.1, delta)
    want_ids, want_z = oracles.differential(ids.tolist(), pts.tolist(), protos.tolist(), 0.1, delta)
    assert ids[pos].tolist() == want_ids
    assert np.max(np.abs(z - want_z)) < 1e-12
    assert np.all(mind >= delta)


def _cut_gap(scores, k):
    ordered = np.sort(scores)
    return np.inf if k >= ordered.size else abs(ordered[k] - ordered[k - 1])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0, 2 * math.pi))
def test_selection_isometry_invariant(seed, theta):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((30, 2)) * 3
    protos = rng.standard_normal((3, 2)) * 3
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    shift = rng.standard_normal(2) * 5
    moved_pts, moved_protos = pts @ rot.T + shift, protos @ rot.T + shift
    ids = np.arange(30)
    # rounding can only reorder samples whose scores are within ~1e-12 of the cut
    d_hard = np.linalg.norm(pts - protos[-1], axis=1)
    assume(_cut_gap(-d_hard, 6) > 1e-9)
    h1, _ = select_hard(ids, pts, protos[-1], 0.2)
    h2, _ = select_hard(ids, moved_pts, moved_protos[-1], 0.2)
    assert set(h1.tolist()) == set(h2.tolist())

    dist = np.linalg.norm(pts[:, None] - protos[None], axis=2)
    delta = compute_delta(protos)
    assume(np.min(np.abs(dist.min(axis=1) - delta)) > 1e-9)
    eligible = dist.min(axis=1) >= delta
    assume(_cut_gap(dist.sum(axis=1)[eligible], 6) > 1e-9)
    d1, _, _ = select_differential(ids, pts, protos, 0.2, delta)
    d2, _, _ = select_differential(ids, moved_pts, moved_protos, 0.2, compute_delta(moved_protos))
    assert set(d1.tolist()) == set(d2.tolist())


# --- buffers ------------------------------------------------------------------


def _buf(hard, diff):
    ids = np.arange(20)
    x = np.arange(40.0).reshape(20, 2)
    return build_buffer(1, ids, x, ids % 2, hard, [1.0] * len(hard), diff, [2.0] * len(diff))


def test_buffer_disjoint():
    assert len(_buf([0, 1, 2], [5, 6, 7, 8])) == 7


def test_buffer_identical():
    b = _buf([3, 4, 5], [3, 4, 5])
    assert len(b) == 3 and b.tags == ["both"] * 3


def test_buffer_overlap():
    b = _buf([0, 1, 2, 3, 4], [3, 4, 10, 11, 12])
    assert len(b) == 8
    assert b.tags.count("both") == 2
    assert b.ids.tolist() == [0, 1, 2, 3, 4, 10, 11, 12]
    np.testing.assert_array_equal(b.x[5], [20.0, 21.0])


def test_consolidate_deterministic_and_floored(rng):
    x = rng.standard_normal((120, 5))
    enc = FrozenEncoder(5, 8, seed=1)
    store = PrototypeStore()
    for shift in (0.0, 4.0, -3.0):
        store.append(enc(x + shift))
    emb = enc(x)
    run1 = consolidate(3, np.arange(120), x, np.zeros(120, int), emb, store, 0.1, 0.1)
    run2 = consolidate(3, np.arange(120), x, np.zeros(120, int), emb, store, 0.1, 0.1)
    assert run1[0].ids.tolist() == run2[0].ids.tolist()
    report = run1[1]
    assert len(report.hard_ids) == 12
    assert len(report.diff_ids) <= 12
    assert all(m >= report.delta for m in report.diff_min_dist)
    assert report.delta == pytest.approx(oracles.delta(store.as_array().tolist()))
    js = report.to_json()
    assert set(js) == {"task", "delta", "hard", "diff", "buffer"}
