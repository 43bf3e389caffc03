import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from longdist.distance import (
    DistanceError,
    DistanceKind,
    DistanceVector,
    ExplainerResult,
    Polarity,
    d_longitudinal,
    d_negative,
    d_strict,
    distance_matrix,
    distances_to_all,
    explainer_set,
    explainer_union,
    write_distance_csv,
)
from longdist.traces import build_trace
from oracles import naive

LD, SLD = DistanceKind.LONGITUDINAL, DistanceKind.STRICT
POS, NEG = Polarity.POSITIVE, Polarity.NEGATIVE


# --- scalar distances -------------------------------------------------------


def test_ld_examples():
    assert d_longitudinal([3, 1, 4], [3, 1, 4]) == 0.0
    assert d_longitudinal([1, 1, 2, 2], [1, 2, 2, 2]) == 0.25
    assert d_longitudinal([0, 0, 0], [1, 2, 1]) == 1.0


def test_negative_examples():
    assert d_negative([3, 1, 4], [3, 1, 4]) == 1.0
    assert d_negative([1, 1, 2, 2], [1, 2, 2, 2]) == 0.75


@pytest.mark.parametrize("fn", [d_longitudinal, d_negative])
def test_length_errors(fn):
    with pytest.raises(DistanceError):
        fn([1, 2], [1, 2, 3])
    with pytest.raises(DistanceError):
        fn([], [])


def test_strict_example():
    row_i, true = [0, 1, 1, 1], 1
    w = [int(p == true) for p in row_i]
    assert w == [0, 1, 1, 1]
    d, flag = d_strict(row_i, w, [0, 1, 1, 0])
    assert d == 1 / 3 and not flag


def test_strict_all_ones_reduces_to_ld():
    a, b = [0, 2, 2, 1, 0], [0, 1, 2, 1, 1]
    assert d_strict(a, [1] * 5, b) == (d_longitudinal(a, b), False)


def test_strict_zero_weights():
    assert d_strict([0, 1], [0, 0], [0, 1]) == (1.0, True)


def test_strict_validation():
    with pytest.raises(DistanceError):
        d_strict([0, 1], [1, 2], [0, 1])
    with pytest.raises(DistanceError):
        d_strict([0, 1], [1], [0, 1])


def test_strict_asymmetry_witness():
    a, wa = [0, 1], [1, 0]  # true label 0
    b, wb = [0, 0], [1, 1]  # true label 0
    assert d_strict(a, wa, b) == (0.0, False)
    assert d_strict(b, wb, a) == (0.5, False)


rows = st.integers(1, 20).flatmap(
    lambda k: st.integers(2, 10).flatmap(
        lambda c: st.tuples(*[st.lists(st.integers(0, c - 1), min_size=k, max_size=k)] * 3)
    )
)


@given(rows)
def test_pseudometric_axioms(triple):
    x, y, z = triple
    assert d_longitudinal(x, x) == 0.0
    assert d_longitudinal(x, y) == d_longitudinal(y, x)
    assert d_longitudinal(x, y) <= d_longitudinal(x, z) + d_longitudinal(z, y) + 1e-12


@given(rows)
def test_mismatch_mean_and_complement(triple):
    x, y, _ = triple
    k = len(x)
    assert d_longitudinal(x, y) == sum(a != b for a, b in zip(x, y)) / k
    assert d_longitudinal(x, y) + d_negative(x, y) == 1.0
    assert 0.0 <= d_longitudinal(x, y) <= 1.0


@given(rows, st.integers(0, 9))
def test_strict_weaker_properties(triple, true):
    x, y, _ = triple
    w = [int(p == true) for p in x]
    d, flag = d_strict(x, w, y)
    assert 0.0 <= d <= 1.0
    assert flag == (sum(w) == 0)
    if sum(w) > 0:
        assert d_strict(x, w, x) == (0.0, False)


# --- vectors over a training trace ------------------------------------------


def test_distances_to_all_identity_entry():
    train = build_trace([[0, 1, 2], [1, 1, 1], [2, 2, 0]], n_classes=3)
    dv = distances_to_all(train, [1, 1, 1])
    assert len(dv) == 3 and dv.values[1] == 0.0
    assert dv.kind is LD and dv.polarity is POS


def test_negative_vector_is_complement(rng):
    train = build_trace(rng.integers(0, 4, (50, 9)), n_classes=4)
    target = rng.integers(0, 4, 9)
    pos = distances_to_all(train, target, LD, POS).values
    neg = distances_to_all(train, target, LD, NEG).values
    assert np.all(pos + neg == 1.0)
    assert np.array_equal(neg, 1.0 - pos)


@pytest.mark.parametrize("kind", [LD, SLD])
@pytest.mark.parametrize("polarity", [POS, NEG])
def test_batched_equals_naive(kind, polarity):
    rng = np.random.default_rng(7)
    preds = rng.integers(0, 10, (200, 15))
    true = rng.integers(0, 10, 200)
    preds[:5] = true[:5, None] + 1  # never correct
    preds[:5] %= 10
    train = build_trace(preds, true, n_classes=10)
    targets = rng.integers(0, 10, (20, 15))
    batch, zero = distance_matrix(train, targets, kind, polarity)
    for j, t in enumerate(targets):
        expected = naive(preds.tolist(), true.tolist(), t.tolist(), kind, polarity)
        assert batch[j].tolist() == expected
        single = distances_to_all(train, t, kind, polarity)
        assert single.values.tolist() == expected
    if kind is SLD:
        assert zero[:5].all()


def test_strict_requires_labels():
    train = build_trace([[0, 1]], n_classes=2)
    with pytest.raises(DistanceError, match="true labels"):
        distances_to_all(train, [0, 1], SLD)


def test_epoch_mismatch():
    train = build_trace([[0, 1, 1]], n_classes=2)
    with pytest.raises(DistanceError, match="epoch"):
        distances_to_all(train, [0, 1])


def test_chunking_does_not_change_results(monkeypatch, rng):
    import longdist.distance as d

    train = build_trace(rng.integers(0, 3, (40, 6)), rng.integers(0, 3, 40), n_classes=3)
    targets = rng.integers(0, 3, (25, 6))
    ref, _ = distance_matrix(train, targets, SLD)
    monkeypatch.setattr(d, "BATCH_ELEMENTS", 1)
    small, _ = distance_matrix(train, targets, SLD)
    assert np.array_equal(ref, small)


# --- explainer sets ---------------------------------------------------------


def test_explainer_exact_minimum():
    r = explainer_set(np.array([0.2, 0.0, 0.0, 0.4]), 0.0)
    assert r.explainer_distance == 0.0 and r.member_indices == (1, 2)


def test_explainer_epsilon():
    assert explainer_set(np.array([0.20, 0.21, 0.35]), 0.02).member_indices == (0, 1)


def test_explainer_single():
    r = explainer_set(np.array([0.7]))
    assert r.member_indices == (0,) and r.explainer_distance == 0.7


def test_explainer_errors():
    with pytest.raises(DistanceError):
        explainer_set(np.array([]))
    with pytest.raises(DistanceError):
        explainer_set(np.array([0.1]), -0.1)


def test_explainer_slack_absorbs_rounding():
    # 0.1 + 0.2 vs 0.3: within slack when epsilon says "equal"
    r = explainer_set(np.array([0.3, 0.1 + 0.2]), 0.0)
    assert r.member_indices == (0, 1)


@given(st.lists(st.integers(0, 15), min_size=1, max_size=50), st.integers(1, 15),
       st.sampled_from([0, 1, 2]))
def test_explainer_membership_property(counts, k, eps_steps):
    values = np.array([min(c, k) / k for c in counts])
    eps = eps_steps / k
    r = explainer_set(values, eps)
    assert r.explainer_distance == min(values)
    best = min(min(c, k) for c in counts)
    expected = [i for i, c in enumerate(counts) if min(c, k) - best <= eps_steps]
    assert list(r.member_indices) == expected


def test_union_disjoint():
    pos = ExplainerResult(0.0, (1, 2), 0.0, POS, 10)
    neg = ExplainerResult(0.0, (7,), 0.0, NEG, 10)
    assert explainer_union(pos, neg) == [(1, POS), (2, POS), (7, NEG)]


def test_union_empty_training_set():
    pos = ExplainerResult(0.0, (), 0.0, POS, 0)
    with pytest.raises(DistanceError):
        explainer_union(pos, pos)


def test_union_size_mismatch():
    with pytest.raises(DistanceError):
        explainer_union(ExplainerResult(0.0, (0,), 0.0, POS, 3),
                        ExplainerResult(0.0, (0,), 0.0, NEG, 4))


def test_union_overlap_construction():
    # rows 0-2 are never classified correctly (strict distance 1 both ways);
    # row 3 agrees with the target on one of its two weighted epochs, so it
    # is the unique minimum under both polarities
    train = build_trace([[1, 1], [1, 1], [1, 1], [0, 0]], [0, 0, 0, 0], n_classes=2)
    target = [0, 1]
    pos = explainer_set(distances_to_all(train, target, SLD, POS), 0.25)
    neg = explainer_set(distances_to_all(train, target, SLD, NEG), 0.25)
    assert pos.member_indices == (3,) and neg.member_indices == (3,)
    assert pos.explainer_distance == neg.explainer_distance == 0.5
    assert explainer_union(pos, neg) == [(3, POS), (3, NEG)]


def test_distance_csv(tmp_path):
    train = build_trace([[0, 1], [1, 1], [0, 0]], [1, 0, 0], n_classes=2)
    dv = distances_to_all(train, [0, 1], SLD)
    write_distance_csv(dv, tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "train_index,distance,flag"
    assert lines[2] == "1,1.0,1"  # never correct: flagged
    assert len(lines) == 4


def test_distance_vector_flags_default():
    dv = DistanceVector(np.array([0.0, 1.0]), LD, POS)
    assert dv.flags.tolist() == [False, False]
