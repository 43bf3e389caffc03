"""Explanation fidelity on ground-truth-labelled targets.

For each sampled target the positive explainer set is computed from traces
alone, the training labels of its members are tallied, and the largest label
group is the explanation. Target true labels are read only afterwards, to score.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .distance import DistanceKind, Polarity, distance_matrix, explainer_mask
from .seeds import SAMPLE, rng_for
from .traces import TraceMatrix

FILTERS = ("clf_wrong_expl_correct", "clf_wrong_expl_wrong", "all")

# Reference results of the original experiment. Its equations are not available,
# so these are orientation values only and are not expected to be reproduced.
REFERENCE_TARGETS = {
    "sample_size": 1000,
    "correct_ld": 978,
    "correct_sld": 980,
    "correct_clf": 968,
    "clf_wrong_expl_correct_ld": 10,
    "clf_wrong_expl_correct_sld": 12,
    "mean_set_size_clf_wrong_expl_correct_ld": 274,
    "mean_set_size_clf_wrong_expl_wrong_ld": 23239,
    "r_distinct_clf_wrong_expl_correct_ld": 0.60,
    "r_changes_clf_wrong_expl_correct_ld": 0.74,
    "r_distinct_clf_wrong_expl_wrong_ld": 0.82,
    "r_changes_clf_wrong_expl_wrong_ld": 0.72,
    "note": "non-reproducible: equations unpublished",
}

OUTCOME_COLUMNS = (
    "target_index", "kind", "classifier_prediction", "true_label",
    "explainer_distance", "explainer_set_size", "majority_label",
    "majority_set_size", "explanation_correct", "classifier_correct", "tie_occurred",
)
ANALYSIS_COLUMNS = (
    "explainer_set_size", "majority_label_set_size", "predictions",
    "distinct_predictions", "changes",
)


class FidelityError(ValueError):
    pass


@dataclass(frozen=True)
class ExplanationOutcome:
    target_index: int
    kind: DistanceKind
    classifier_prediction: int
    true_label: int
    explainer_distance: float
    explainer_set_size: int
    majority_label: int
    majority_set_size: int
    explanation_correct: bool
    classifier_correct: bool
    tie_occurred: bool


@dataclass(frozen=True)
class Selection:
    """Label-free part of an outcome: what the explainer set says."""

    target_index: int
    kind: DistanceKind
    explainer_distance: float
    explainer_set_size: int
    majority_label: int
    majority_set_size: int
    tie_occurred: bool


@dataclass
class FidelityReport:
    sample_size: int
    seed: int
    epsilon: float
    kinds: Tuple[DistanceKind, ...]
    targets: List[int]
    accuracy: Dict[str, float]
    correct: Dict[str, int]
    classifier_correct: int
    classifier_accuracy: float
    clf_wrong_expl_correct: Dict[str, int]
    outcomes: List[ExplanationOutcome] = field(repr=False, default_factory=list)

    def outcomes_for(self, kind: DistanceKind) -> List[ExplanationOutcome]:
        return [o for o in self.outcomes if o.kind is kind]

    def size_contrast(self, kind: DistanceKind) -> dict:
        """Explainer-set sizes among classifier errors, split by explanation outcome."""
        wrong = [o for o in self.outcomes_for(kind) if not o.classifier_correct]
        good = [o.explainer_set_size for o in wrong if o.explanation_correct]
        bad = [o.explainer_set_size for o in wrong if not o.explanation_correct]
        mean_good = float(np.mean(good)) if good else None
        mean_bad = float(np.mean(bad)) if bad else None
        found = mean_bad is not None and any(s < mean_bad for s in good)
        return {
            "n_clf_wrong_expl_correct": len(good),
            "n_clf_wrong_expl_wrong": len(bad),
            "mean_set_size_expl_correct": mean_good,
            "mean_set_size_expl_wrong": mean_bad,
            "smaller_correct_case_found": found,
        }

    def summary_line(self) -> str:
        parts = [f"acc_{k}={self.accuracy[k]:.4f}" for k in self.accuracy]
        parts.append(f"acc_clf={self.classifier_accuracy:.4f}")
        return " ".join(parts)

    def to_dict(self) -> dict:
        return {
            "sample_size": self.sample_size,
            "seed": self.seed,
            "epsilon": self.epsilon,
            "kinds": [k.value for k in self.kinds],
            "targets": self.targets,
            "accuracy": self.accuracy,
            "correct": self.correct,
            "classifier_correct": self.classifier_correct,
            "classifier_accuracy": self.classifier_accuracy,
            "clf_wrong_expl_correct": self.clf_wrong_expl_correct,
            "size_contrast": {k.value: self.size_contrast(k) for k in self.kinds},
            "metadata": {
                "majority_tie_rule": "lowest label index; tie_occurred flagged per outcome",
                "classifier_correctness": "final-epoch prediction",
                "target_sampling": "without replacement, indices sorted ascending",
                "deduplication": "none",
                "reference_targets": REFERENCE_TARGETS,
            },
        }


# --- majority explanation ---------------------------------------------------


def explain_by_majority(member_indices, train_labels) -> Tuple[int, int, bool]:
    """Label of the largest same-label subset of the members.

    Returns ``(label, subset size, tie)``; ties go to the lowest label.
    """
    members = np.asarray(member_indices, dtype=np.int64)
    if members.size == 0:
        raise FidelityError("empty explainer set")
    labels = np.asarray(train_labels)[members]
    return _majority(labels)


def _majority(labels: np.ndarray) -> Tuple[int, int, bool]:
    counts = np.bincount(labels.astype(np.int64))
    top = int(counts.max())
    label = int(np.argmax(counts))
    return label, top, int(np.count_nonzero(counts == top)) > 1


# --- sequence statistics ----------------------------------------------------


def distinct_count(seq: Sequence[int]) -> int:
    if len(seq) == 0:
        raise FidelityError("empty sequence")
    return len(set(int(v) for v in seq))


def change_count(seq: Sequence[int]) -> int:
    if len(seq) == 0:
        raise FidelityError("empty sequence")
    return sum(1 for x, y in zip(seq, seq[1:]) if x != y)


def pearson(xs, ys) -> float:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise FidelityError("pearson needs two 1-D vectors of equal length")
    if len(x) < 2:
        raise FidelityError("pearson needs at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise FidelityError("pearson is undefined for zero variance")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


# --- evaluation -------------------------------------------------------------


def sample_targets(n_test: int, sample_n: int, seed: int) -> np.ndarray:
    if sample_n < 1 or sample_n > n_test:
        raise FidelityError(f"sample size {sample_n} outside [1, {n_test}]")
    rng = rng_for(seed, SAMPLE)
    return np.sort(rng.choice(n_test, size=sample_n, replace=False))


def select_explanations(
    train_trace: TraceMatrix,
    target_rows: np.ndarray,
    target_indices: Sequence[int],
    kind: DistanceKind,
    epsilon: float = 0.0,
) -> List[Selection]:
    """Positive explainer set and its majority label for each target row.

    Consumes only prediction traces and training labels.
    """
    if train_trace.true_labels is None:
        raise FidelityError("training trace needs true labels")
    if train_trace.n_instances == 0:
        raise FidelityError("empty training trace")
    labels = train_trace.true_labels
    out = []
    rows = np.atleast_2d(target_rows)
    step = 64
    for s in range(0, len(rows), step):
        dist, _ = distance_matrix(train_trace, rows[s:s + step], kind, Polarity.POSITIVE)
        for j, drow in enumerate(dist):
            best, mask = explainer_mask(drow, epsilon)
            label, size, tie = _majority(labels[mask])
            out.append(Selection(int(target_indices[s + j]), kind, best,
                                 int(np.count_nonzero(mask)), label, size, tie))
    return out


def evaluate(
    train_trace: TraceMatrix,
    test_trace: TraceMatrix,
    sample_n: int = 1000,
    seed: int = 0,
    kinds: Iterable[DistanceKind] = (DistanceKind.LONGITUDINAL, DistanceKind.STRICT),
    epsilon: float = 0.0,
) -> FidelityReport:
    kinds = tuple(kinds)
    if train_trace.k_epochs != test_trace.k_epochs:
        raise FidelityError(
            f"epoch mismatch: train {train_trace.k_epochs}, test {test_trace.k_epochs}"
        )
    if test_trace.true_labels is None:
        raise FidelityError("test trace needs true labels for scoring")
    targets = sample_targets(test_trace.n_instances, sample_n, seed)
    rows = test_trace.predictions[targets]

    selections = {k: select_explanations(train_trace, rows, targets, k, epsilon) for k in kinds}

    # scoring: the only place test labels are read
    truth = test_trace.true_labels[targets].astype(np.int64)
    final = test_trace.predictions[targets, -1].astype(np.int64)
    clf_ok = final == truth
    outcomes, accuracy, correct, rescued = [], {}, {}, {}
    for kind in kinds:
        n_ok = n_rescued = 0
        for sel, t, p, ok in zip(selections[kind], truth, final, clf_ok):
            expl_ok = sel.majority_label == int(t)
            n_ok += expl_ok
            n_rescued += expl_ok and not ok
            outcomes.append(ExplanationOutcome(
                sel.target_index, kind, int(p), int(t), sel.explainer_distance,
                sel.explainer_set_size, sel.majority_label, sel.majority_set_size,
                bool(expl_ok), bool(ok), sel.tie_occurred,
            ))
        accuracy[kind.value] = n_ok / sample_n
        correct[kind.value] = int(n_ok)
        rescued[kind.value] = int(n_rescued)

    n_clf = int(np.count_nonzero(clf_ok))
    return FidelityReport(
        sample_size=sample_n, seed=seed, epsilon=float(epsilon), kinds=kinds,
        targets=[int(t) for t in targets], accuracy=accuracy, correct=correct,
        classifier_correct=n_clf, classifier_accuracy=n_clf / sample_n,
        clf_wrong_expl_correct=rescued, outcomes=outcomes,
    )


# --- analysis table ---------------------------------------------------------


@dataclass(frozen=True)
class AnalysisRow:
    explainer_set_size: int
    majority_set_size: int
    predictions: Tuple[int, ...]
    distinct_predictions: int
    changes: int


@dataclass
class AnalysisTable:
    rows: List[AnalysisRow]
    r_distinct: Optional[float]
    r_changes: Optional[float]
    mean_set_size: Optional[float]
    filter: str
    kind: DistanceKind

    def summary(self) -> dict:
        return {
            "filter": self.filter,
            "kind": self.kind.value,
            "n_rows": len(self.rows),
            "mean_explainer_set_size": self.mean_set_size,
            "r_distinct": self.r_distinct,
            "r_changes": self.r_changes,
        }


def _keep(o: ExplanationOutcome, preset: str) -> bool:
    if preset == "all":
        return True
    if preset == "clf_wrong_expl_correct":
        return not o.classifier_correct and o.explanation_correct
    if preset == "clf_wrong_expl_wrong":
        return not o.classifier_correct and not o.explanation_correct
    raise FidelityError(f"unknown filter {preset!r}; choose from {FILTERS}")


def _maybe_pearson(xs, ys) -> Optional[float]:
    try:
        return pearson(xs, ys)
    except FidelityError:
        return None


def analysis_table(
    outcomes: Sequence[ExplanationOutcome],
    test_trace: TraceMatrix,
    filter: str = "clf_wrong_expl_correct",
    kind: DistanceKind = DistanceKind.LONGITUDINAL,
) -> AnalysisTable:
    """Prediction-history statistics for a filtered subset of outcomes.

    Rows are ordered by descending explainer-set size, then target index.
    Correlations are ``None`` when fewer than two rows or zero variance.
    """
    chosen = [o for o in outcomes if o.kind is kind and _keep(o, filter)]
    chosen.sort(key=lambda o: (-o.explainer_set_size, o.target_index))
    rows = []
    for o in chosen:
        if not 0 <= o.target_index < test_trace.n_instances:
            raise FidelityError(f"target {o.target_index} not in the test trace")
        seq = tuple(int(v) for v in test_trace.predictions[o.target_index])
        rows.append(AnalysisRow(o.explainer_set_size, o.majority_set_size, seq,
                                distinct_count(seq), change_count(seq)))
    sizes = [r.explainer_set_size for r in rows]
    return AnalysisTable(
        rows=rows,
        r_distinct=_maybe_pearson(sizes, [r.distinct_predictions for r in rows]),
        r_changes=_maybe_pearson(sizes, [r.changes for r in rows]),
        mean_set_size=float(np.mean(sizes)) if sizes else None,
        filter=filter,
        kind=kind,
    )


# --- file formats -----------------------------------------------------------


def outcomes_to_csv(outcomes: Sequence[ExplanationOutcome]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(OUTCOME_COLUMNS)
    for o in outcomes:
        d = asdict(o)
        d["kind"] = o.kind.value
        d["explainer_distance"] = repr(o.explainer_distance)
        for key in ("explanation_correct", "classifier_correct", "tie_occurred"):
            d[key] = int(d[key])
        w.writerow([d[c] for c in OUTCOME_COLUMNS])
    return buf.getvalue()


def outcomes_from_csv(text: str) -> List[ExplanationOutcome]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != OUTCOME_COLUMNS:
        raise FidelityError("outcome CSV has an unexpected header")
    out = []
    for row in reader:
        if not row:
            continue
        d = dict(zip(OUTCOME_COLUMNS, row))
        try:
            out.append(ExplanationOutcome(
                target_index=int(d["target_index"]),
                kind=DistanceKind(d["kind"]),
                classifier_prediction=int(d["classifier_prediction"]),
                true_label=int(d["true_label"]),
                explainer_distance=float(d["explainer_distance"]),
                explainer_set_size=int(d["explainer_set_size"]),
                majority_label=int(d["majority_label"]),
                majority_set_size=int(d["majority_set_size"]),
                explanation_correct=d["explanation_correct"] == "1",
                classifier_correct=d["classifier_correct"] == "1",
                tie_occurred=d["tie_occurred"] == "1",
            ))
        except (KeyError, ValueError) as exc:
            raise FidelityError(f"malformed outcome row {row!r}") from exc
    return out


def analysis_to_csv(table: AnalysisTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ANALYSIS_COLUMNS)
    for r in table.rows:
        w.writerow([r.explainer_set_size, r.majority_set_size,
                    ";".join(str(v) for v in r.predictions),
                    r.distinct_predictions, r.changes])
    return buf.getvalue()
