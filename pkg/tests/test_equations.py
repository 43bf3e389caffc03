import io
import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from longdist.equations import (
    DEFAULT_EQUATIONS,
    DEFAULT_SET,
    DataConfig,
    DataError,
    Dataset,
    Instance,
    evaluate_equation,
    fit_standardizer,
    generate,
    parse_expression,
    read_csv,
    standardize,
    write_csv,
)


@pytest.mark.parametrize(
    "eq,args,expected",
    [(0, (1, 2, 3), 6.0), (1, (2, 3, 1), 7.0), (3, (0, 5, 9), 0.0)],
)
def test_evaluate_examples(eq, args, expected):
    assert evaluate_equation(eq, *args) == expected


def test_default_forms_by_hand():
    a, b, c = 2.0, 3.0, 5.0
    expected = [a + b + c, a * b + c, a - b * c, a * b * c, a * a + b * c, a + b * b - c, a * c - b]
    assert [evaluate_equation(i, a, b, c) for i in range(7)] == expected


@pytest.mark.parametrize("bad", [-1, 7])
def test_evaluate_id_range(bad):
    with pytest.raises(DataError):
        evaluate_equation(bad, 1, 2, 3)


def test_evaluate_non_finite():
    with pytest.raises(DataError):
        evaluate_equation(0, math.nan, 1, 2)


def test_forms_pairwise_distinct():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-5, 5, size=(20, 3))
    for i, j in itertools.combinations(range(7), 2):
        assert any(DEFAULT_SET[i](*p) != DEFAULT_SET[j](*p) for p in pts), (i, j)


@pytest.mark.parametrize(
    "text,args,expected",
    [
        ("a", (2, 3, 4), 2),
        ("a^2", (3, 0, 0), 9),
        ("a·b−c", (2, 3, 4), 2),
        ("a - b - c", (10, 3, 4), 3),
        ("b^2*c + a", (1, 2, 3), 13),
        ("a*b*c - a^2 - c^2", (1, 2, 3), 6 - 1 - 9),
    ],
)
def test_parse_expression(text, args, expected):
    assert parse_expression(text)(*args) == expected


@pytest.mark.parametrize("text", ["", "a+", "d", "a/b", "2*a", "(a+b)", "a^3", "a b"])
def test_parse_expression_rejects(text):
    with pytest.raises(DataError):
        parse_expression(text)


def test_generate_deterministic():
    cfg = DataConfig(n_train=7, n_test=0, interval_lo=-5, interval_hi=5, seed=42)
    assert generate(cfg) == generate(cfg)


def test_generate_sizes_and_identity():
    cfg = DataConfig(n_train=500, n_test=200, seed=3)
    train, test = generate(cfg)
    assert (len(train), len(test)) == (500, 200)
    for inst in itertools.chain(train, test):
        assert evaluate_equation(inst.label, inst.a, inst.b, inst.c) == inst.result
        assert 2.0 <= min(inst.a, inst.b, inst.c) and max(inst.a, inst.b, inst.c) <= 4.0


def test_generate_large_sizes():
    train, test = generate(DataConfig(n_train=403_200, n_test=100_000, seed=1))
    assert (len(train), len(test)) == (403_200, 100_000)


def test_label_histogram_balanced():
    train, _ = generate(DataConfig(n_train=70_000, n_test=1, seed=9))
    freq = np.bincount(train.labels, minlength=7) / len(train)
    assert np.all(np.abs(freq - 1 / 7) <= 0.02)


def test_generate_custom_equations():
    cfg = DataConfig(n_train=50, n_test=10, seed=0, equations=("a", "b", "c"))
    train, _ = generate(cfg)
    assert set(train.labels.tolist()) <= {0, 1, 2}
    for inst in train:
        assert inst.result == (inst.a, inst.b, inst.c)[inst.label]


@pytest.mark.parametrize("lo,hi", [(1, 1), (2, -2)])
def test_degenerate_interval(lo, hi):
    with pytest.raises(DataError):
        DataConfig(interval_lo=lo, interval_hi=hi)


def test_config_from_dict():
    cfg = DataConfig.from_dict({"n_train": 10, "n_test": 5, "interval_lo": 0, "interval_hi": 1, "seed": 4})
    assert cfg.equations == DEFAULT_EQUATIONS
    with pytest.raises(DataError):
        DataConfig.from_dict({"n_train": 10, "bogus": 1})
    with pytest.raises(DataError):
        DataConfig.from_dict({"equations": ["a+", "b"]})


def test_standardizer_zero_variance():
    data = Dataset(np.array([[1.0, 2.0, 3.0, 4.0], [1.0, 5.0, 3.0, 1.0]]), np.array([0, 1]))
    with pytest.raises(DataError, match="zero-variance"):
        fit_standardizer(data)


def test_standardizer_moments():
    train, _ = generate(DataConfig(n_train=5000, n_test=1, seed=2))
    z = standardize(fit_standardizer(train), train)
    assert np.all(np.abs(z.mean(axis=0)) < 1e-9)
    assert np.allclose(z.var(axis=0), 1.0, rtol=1e-9)


def test_standardize_mean_instance_is_zero():
    train, _ = generate(DataConfig(n_train=100, n_test=1, seed=2))
    std = fit_standardizer(train)
    inst = Instance(*std.mean.tolist(), label=0)
    assert standardize(std, inst).tolist() == [0.0, 0.0, 0.0, 0.0]


def test_csv_roundtrip(tmp_path):
    train, _ = generate(DataConfig(n_train=300, n_test=1, seed=5))
    write_csv(train, tmp_path / "t.csv")
    assert read_csv(tmp_path / "t.csv") == train
    raw = (tmp_path / "t.csv").read_bytes()
    assert raw.startswith(b"a,b,c,result,label\n") and b"\r" not in raw


@given(st.lists(st.tuples(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6), st.floats(-1e6, 1e6),
                          st.floats(-1e12, 1e12), st.integers(0, 6)), max_size=20))
def test_csv_roundtrip_exact(rows):
    insts = [Instance(*r) for r in rows]
    buf = io.StringIO()
    write_csv(insts, buf)
    buf.seek(0)
    back = list(read_csv(buf))
    assert back == insts


def test_csv_identical_bytes(tmp_path):
    cfg = DataConfig(n_train=100, n_test=10, seed=11)
    write_csv(generate(cfg)[0], tmp_path / "a.csv")
    write_csv(generate(cfg)[0], tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


@pytest.mark.parametrize(
    "text,match",
    [
        ("a,b,c,result,label\n1,2,3,6,9\n", "out of range"),
        ("1,2,3,6,0\n", "header"),
        ("a,b,c,result,label\n1,x,3,6,0\n", "non-numeric"),
        ("a,b,c,result,label\n1,2,3,6\n", "5 fields"),
    ],
)
def test_csv_errors(text, match):
    with pytest.raises(DataError, match=match):
        read_csv(io.StringIO(text))
