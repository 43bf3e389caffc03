"""Synthetic seven-equation classification data.

Each instance draws an equation id and three variables ``a, b, c`` from a
seeded generator; the equation's value is appended as a fourth feature and the
equation id is the class label.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import re
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .seeds import DATA, rng_for

DEFAULT_EQUATIONS: Tuple[str, ...] = (
    "a+b+c",
    "a*b+c",
    "a-b*c",
    "a*b*c",
    "a^2+b*c",
    "a+b^2-c",
    "a*c-b",
)
CSV_HEADER = ("a", "b", "c", "result", "label")


class DataError(ValueError):
    pass


# --- restricted expression grammar -----------------------------------------
#   expr   := term (("+" | "-") term)*
#   term   := factor ("*" factor)*
#   factor := ("a" | "b" | "c") ["^2"]

_TOKEN = re.compile(r"\s*(?:(?P<var>[abc])|(?P<sq>\^2)|(?P<op>[+\-*]))")
_NORMALIZE = str.maketrans({"−": "-", "·": "*", "×": "*"})


def _tokenize(text: str) -> List[str]:
    text = text.translate(_NORMALIZE)
    pos, out = 0, []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            raise DataError(f"unexpected character {text[pos:].strip()[0]!r} in {text!r}")
        out.append(m.group(m.lastgroup))
        pos = m.end()
    return out


def parse_expression(text: str) -> Callable:
    """Compile ``text`` into ``f(a, b, c)``; works on floats and numpy arrays."""
    tokens = _tokenize(text)
    if not tokens:
        raise DataError("empty equation")
    idx = 0

    def factor():
        nonlocal idx
        if idx >= len(tokens) or tokens[idx] not in "abc" or len(tokens[idx]) != 1:
            raise DataError(f"expected a variable in {text!r}")
        name = tokens[idx]
        idx += 1
        squared = idx < len(tokens) and tokens[idx] == "^2"
        if squared:
            idx += 1
        slot = "abc".index(name)
        if squared:
            return lambda v: v[slot] * v[slot]
        return lambda v: v[slot]

    def term():
        nonlocal idx
        parts = [factor()]
        while idx < len(tokens) and tokens[idx] == "*":
            idx += 1
            parts.append(factor())
        if len(parts) == 1:
            return parts[0]

        def product(v, parts=parts):
            out = parts[0](v)
            for p in parts[1:]:
                out = out * p(v)
            return out

        return product

    def expr():
        nonlocal idx
        terms = [(1, term())]
        while idx < len(tokens) and tokens[idx] in ("+", "-"):
            sign = 1 if tokens[idx] == "+" else -1
            idx += 1
            terms.append((sign, term()))

        def total(v, terms=terms):
            out = terms[0][1](v)
            for sign, t in terms[1:]:
                out = out + t(v) if sign > 0 else out - t(v)
            return out

        return total

    compiled = expr()
    if idx != len(tokens):
        raise DataError(f"trailing tokens in {text!r}")
    return lambda a, b, c: compiled((a, b, c))


@dataclass(frozen=True)
class EquationSpec:
    id: int
    form: str

    def __post_init__(self):
        object.__setattr__(self, "_fn", parse_expression(self.form))

    def __call__(self, a, b, c):
        return self._fn(a, b, c)


def equation_set(forms: Sequence[str] = DEFAULT_EQUATIONS) -> Tuple[EquationSpec, ...]:
    if len(forms) < 2:
        raise DataError("need at least two equations")
    return tuple(EquationSpec(i, f) for i, f in enumerate(forms))


DEFAULT_SET = equation_set()


def evaluate_equation(id: int, a: float, b: float, c: float,
                      equations: Sequence[EquationSpec] = DEFAULT_SET) -> float:
    if not 0 <= id < len(equations):
        raise DataError(f"equation id {id} out of range [0, {len(equations)})")
    if not all(math.isfinite(v) for v in (a, b, c)):
        raise DataError("equation inputs must be finite")
    return float(equations[id](float(a), float(b), float(c)))


# --- configs and datasets ---------------------------------------------------


@dataclass(frozen=True)
class DataConfig:
    n_train: int = 70_000
    n_test: int = 10_000
    interval_lo: float = 2.0
    interval_hi: float = 4.0
    seed: int = 0
    equations: Tuple[str, ...] = DEFAULT_EQUATIONS

    def __post_init__(self):
        if not self.interval_lo < self.interval_hi:
            raise DataError(
                f"degenerate interval [{self.interval_lo}, {self.interval_hi}]"
            )
        if not (math.isfinite(self.interval_lo) and math.isfinite(self.interval_hi)):
            raise DataError("interval bounds must be finite")
        if self.n_train < 1 or self.n_test < 0:
            raise DataError("n_train must be >= 1 and n_test >= 0")
        if not 0 <= self.seed < 2**64:
            raise DataError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "equations", tuple(self.equations))
        equation_set(self.equations)

    @classmethod
    def from_dict(cls, d: dict) -> "DataConfig":
        known = {"n_train", "n_test", "interval_lo", "interval_hi", "seed", "equations"}
        unknown = set(d) - known
        if unknown:
            raise DataError(f"unknown data config keys: {sorted(unknown)}")
        kw = dict(d)
        for key in ("n_train", "n_test", "seed"):
            if key in kw and (isinstance(kw[key], bool) or not isinstance(kw[key], int)):
                raise DataError(f"{key} must be an integer")
        if "equations" in kw and kw["equations"] is None:
            del kw["equations"]
        return cls(**kw)

    @classmethod
    def from_json(cls, path) -> "DataConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "n_train": self.n_train,
            "n_test": self.n_test,
            "interval_lo": self.interval_lo,
            "interval_hi": self.interval_hi,
            "seed": self.seed,
            "equations": list(self.equations),
        }


class Instance(NamedTuple):
    a: float
    b: float
    c: float
    result: float
    label: int


@dataclass(eq=False)
class Dataset:
    """Column-oriented instance collection; ``features`` is ``(n, 4)``."""

    features: np.ndarray
    labels: np.ndarray
    n_classes: int = len(DEFAULT_EQUATIONS)

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, i: int) -> Instance:
        a, b, c, r = self.features[i]
        return Instance(float(a), float(b), float(c), float(r), int(self.labels[i]))

    def __iter__(self) -> Iterator[Instance]:
        return (self[i] for i in range(len(self)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )

    @classmethod
    def from_instances(cls, instances: Sequence[Instance], n_classes: int = 7) -> "Dataset":
        rows = list(instances)
        feats = np.array([[r.a, r.b, r.c, r.result] for r in rows], dtype=np.float64).reshape(-1, 4)
        labels = np.array([r.label for r in rows], dtype=np.int64)
        return cls(feats, labels, n_classes)


def _draw(rng: np.random.Generator, n: int, cfg: DataConfig, eqs) -> Dataset:
    labels = rng.integers(0, len(eqs), size=n)
    abc = rng.uniform(cfg.interval_lo, cfg.interval_hi, size=(n, 3))
    result = np.empty(n)
    with np.errstate(over="ignore", invalid="ignore"):
        for eq in eqs:
            sel = labels == eq.id
            result[sel] = eq(abc[sel, 0], abc[sel, 1], abc[sel, 2])
    if not np.all(np.isfinite(result)):
        raise DataError("non-finite equation result")
    return Dataset(np.column_stack([abc, result]), labels.astype(np.int64), len(eqs))


def generate(config: DataConfig) -> Tuple[Dataset, Dataset]:
    """Draw the train split then the test split from one seeded stream."""
    eqs = equation_set(config.equations)
    rng = rng_for(config.seed, DATA)
    train = _draw(rng, config.n_train, config, eqs)
    test = _draw(rng, config.n_test, config, eqs)
    return train, test


# --- standardization --------------------------------------------------------


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}


def fit_standardizer(train) -> Standardizer:
    feats = train.features if isinstance(train, Dataset) else np.asarray(
        [[r.a, r.b, r.c, r.result] for r in train], dtype=np.float64
    )
    if feats.shape[0] == 0:
        raise DataError("cannot fit a standardizer on an empty split")
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    if np.any(std <= 0) or not np.all(np.isfinite(std)):
        bad = [CSV_HEADER[i] for i in np.flatnonzero(~(std > 0))]
        raise DataError(f"zero-variance feature(s): {bad}")
    return Standardizer(mean, std)


def standardize(std: Standardizer, data) -> np.ndarray:
    """Z-score an :class:`Instance`, a ``Dataset`` or a raw feature array."""
    if isinstance(data, Dataset):
        feats = data.features
    elif isinstance(data, Instance):
        feats = np.array([data.a, data.b, data.c, data.result], dtype=np.float64)
    else:
        feats = np.asarray(data, dtype=np.float64)
    return (feats - std.mean) / std.std


# --- CSV --------------------------------------------------------------------


def write_csv(data, destination, n_classes: Optional[int] = None) -> None:
    if not isinstance(data, Dataset):
        data = Dataset.from_instances(data)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for (a, b, c, r), y in zip(data.features.tolist(), data.labels.tolist()):
        w.writerow([f"{a:.17g}", f"{b:.17g}", f"{c:.17g}", f"{r:.17g}", y])
    text = buf.getvalue()
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        destination.write(text)


def read_csv(source, n_classes: int = len(DEFAULT_EQUATIONS)) -> Dataset:
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8", newline="") as fh:
            return read_csv(fh, n_classes)
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
        raise DataError(f"missing or wrong CSV header, expected {','.join(CSV_HEADER)}")
    feats, labels = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 5:
            raise DataError(f"line {lineno}: expected 5 fields, got {len(row)}")
        try:
            vals = [float(v) for v in row[:4]]
            label = int(row[4])
        except ValueError as exc:
            raise DataError(f"line {lineno}: non-numeric field") from exc
        if not all(math.isfinite(v) for v in vals):
            raise DataError(f"line {lineno}: non-finite value")
        if not 0 <= label < n_classes:
            raise DataError(f"line {lineno}: label {label} out of range [0, {n_classes})")
        feats.append(vals)
        labels.append(label)
    return Dataset(
        np.array(feats, dtype=np.float64).reshape(-1, 4),
        np.array(labels, dtype=np.int64),
        n_classes,
    )
