"""Longitudinal distances between prediction traces and explainer sets.

Distances are computed from integer label-mismatch counts and a single
division, so ``d_L == mismatches / k`` holds bit-for-bit. The negative variant
is ``1 - d_L`` evaluated in floating point, which keeps ``d_L + d_negative == 1``
exact.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .traces import TraceMatrix, correctness_mask

# absorbs representation error of m/k values in membership comparisons
MEMBERSHIP_SLACK = 1e-12
# targets compared per batch in distance_matrix; bounds the (batch, n, k) temporary
BATCH_ELEMENTS = 1 << 24


class DistanceKind(enum.Enum):
    LONGITUDINAL = "ld"
    STRICT = "sld"


class Polarity(enum.Enum):
    POSITIVE = "+"
    NEGATIVE = "-"


class DistanceError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DistanceVector:
    values: np.ndarray
    kind: DistanceKind
    polarity: Polarity
    target: Optional[int] = None
    zero_weight: Optional[np.ndarray] = None  # per training row, strict kind only

    def __len__(self) -> int:
        return len(self.values)

    @property
    def flags(self) -> np.ndarray:
        if self.zero_weight is None:
            return np.zeros(len(self.values), dtype=bool)
        return self.zero_weight


@dataclass(frozen=True)
class ExplainerResult:
    explainer_distance: float
    member_indices: Tuple[int, ...]
    epsilon: float
    polarity: Polarity
    n_candidates: int

    def __len__(self) -> int:
        return len(self.member_indices)


def _rows(row_i, row_x) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(row_i)
    b = np.asarray(row_x)
    if a.ndim != 1 or b.ndim != 1:
        raise DistanceError("rows must be 1-D label sequences")
    if len(a) != len(b):
        raise DistanceError(f"epoch count mismatch: {len(a)} vs {len(b)}")
    if len(a) == 0:
        raise DistanceError("rows must cover at least one epoch")
    return a, b


def d_longitudinal(row_i, row_x) -> float:
    """Fraction of epochs at which the two traces carry different labels."""
    a, b = _rows(row_i, row_x)
    mismatches = int(np.count_nonzero(a != b))
    return mismatches / len(a)


def d_negative(row_i, row_x) -> float:
    """Disagreement-indicator variant, ``1 - d_longitudinal``."""
    return 1.0 - d_longitudinal(row_i, row_x)


def d_strict(row_i, w_i, row_x) -> Tuple[float, bool]:
    """Longitudinal distance restricted to epochs where ``w_i`` is 1.

    Returns ``(distance, zero_weight)``. A training row that was never
    classified correctly has no weighted epochs; it gets distance 1 and
    ``zero_weight=True``.
    """
    a, b = _rows(row_i, row_x)
    w = np.asarray(w_i)
    if w.shape != a.shape:
        raise DistanceError("weight vector length differs from the rows")
    if np.any((w != 0) & (w != 1)):
        raise DistanceError("weights must be binary")
    w = w.astype(bool)
    total = int(np.count_nonzero(w))
    if total == 0:
        return 1.0, True
    weighted_mismatch = int(np.count_nonzero(w & (a != b)))
    return weighted_mismatch / total, False


def d_strict_negative(row_i, w_i, row_x) -> Tuple[float, bool]:
    """Negative variant of :func:`d_strict`; zero-weight rows still get 1."""
    d, zero = d_strict(row_i, w_i, row_x)
    return (1.0, True) if zero else (1.0 - d, False)


def _check_compatible(train: TraceMatrix, k: int, kind: DistanceKind) -> None:
    if train.k_epochs != k:
        raise DistanceError(
            f"epoch count mismatch: training trace has {train.k_epochs}, target has {k}"
        )
    if kind is DistanceKind.STRICT and train.true_labels is None:
        raise DistanceError("strict longitudinal distance needs training true labels")


def distance_matrix(
    train: TraceMatrix,
    targets,
    kind: DistanceKind = DistanceKind.LONGITUDINAL,
    polarity: Polarity = Polarity.POSITIVE,
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Distances from every target row (axis 0) to every training row (axis 1).

    Returns ``(distances, zero_weight)`` where ``zero_weight`` is a per
    training-row flag vector for the strict kind and ``None`` otherwise.
    """
    T = np.atleast_2d(np.asarray(targets))
    _check_compatible(train, T.shape[1], kind)
    preds = train.predictions
    n, k = preds.shape
    out = np.empty((T.shape[0], n), dtype=np.float64)
    if kind is DistanceKind.STRICT:
        w = correctness_mask(train).mask.astype(bool)
        denom = w.sum(axis=1)
        zero = denom == 0
        safe = np.where(zero, 1, denom)
    else:
        w, zero = None, None
    step = max(1, BATCH_ELEMENTS // max(1, n * k))
    for s in range(0, T.shape[0], step):
        chunk = T[s:s + step]
        eq = preds[None, :, :] == chunk[:, None, :].astype(preds.dtype)
        if w is None:
            vals = (~eq).sum(axis=2) / k
        else:
            vals = (~eq & w[None]).sum(axis=2) / safe
        if polarity is Polarity.NEGATIVE:
            vals = 1.0 - vals
        if zero is not None:
            vals[:, zero] = 1.0
        out[s:s + step] = vals
    return out, zero


def distances_to_all(
    train: TraceMatrix,
    target_row,
    kind: DistanceKind = DistanceKind.LONGITUDINAL,
    polarity: Polarity = Polarity.POSITIVE,
    target: Optional[int] = None,
) -> DistanceVector:
    row = np.asarray(target_row)
    if row.ndim != 1:
        raise DistanceError("target row must be a 1-D label sequence")
    values, zero = distance_matrix(train, row[None, :], kind, polarity)
    return DistanceVector(values[0], kind, polarity, target, zero)


def explainer_mask(values: np.ndarray, epsilon: float = 0.0) -> Tuple[float, np.ndarray]:
    """``(min distance, boolean membership mask)`` for one distance row."""
    best = float(values.min())
    return best, values <= best + epsilon + MEMBERSHIP_SLACK


def explainer_set(dv, epsilon: float = 0.0,
                  polarity: Optional[Polarity] = None) -> ExplainerResult:
    """Minimum distance and every training index within ``epsilon`` of it."""
    if epsilon < 0:
        raise DistanceError("epsilon must be nonnegative")
    if isinstance(dv, DistanceVector):
        values, pol = dv.values, dv.polarity
    else:
        values, pol = np.asarray(dv, dtype=np.float64), Polarity.POSITIVE
    if polarity is not None:
        pol = polarity
    if values.size == 0:
        raise DistanceError("cannot select explainers from an empty distance vector")
    best, mask = explainer_mask(values, epsilon)
    members = np.flatnonzero(mask)
    return ExplainerResult(best, tuple(int(i) for i in members), float(epsilon), pol, len(values))


def explainer_union(pos: ExplainerResult, neg: ExplainerResult) -> List[Tuple[int, Polarity]]:
    """Tagged union of a positive and a negative explainer set.

    An index in both sets appears twice, once per polarity.
    """
    if pos.n_candidates != neg.n_candidates:
        raise DistanceError(
            f"explainer sets come from different training sets "
            f"({pos.n_candidates} vs {neg.n_candidates} instances)"
        )
    if pos.n_candidates == 0:
        raise DistanceError("empty training set")
    tagged = [(i, Polarity.POSITIVE) for i in pos.member_indices]
    tagged += [(i, Polarity.NEGATIVE) for i in neg.member_indices]
    order = {Polarity.POSITIVE: 0, Polarity.NEGATIVE: 1}
    return sorted(tagged, key=lambda t: (t[0], order[t[1]]))


def explain(
    train: TraceMatrix,
    target_row,
    kind: DistanceKind = DistanceKind.LONGITUDINAL,
    polarity: Polarity = Polarity.POSITIVE,
    epsilon: float = 0.0,
) -> ExplainerResult:
    return explainer_set(distances_to_all(train, target_row, kind, polarity), epsilon)


def write_distance_csv(dv: DistanceVector, destination) -> None:
    flags = dv.flags
    lines = ["train_index,distance,flag"]
    lines += [f"{i},{v!r},{int(f)}" for i, (v, f) in enumerate(zip(dv.values.tolist(), flags))]
    text = "\n".join(lines) + "\n"
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)

