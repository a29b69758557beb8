"""Stratified cross-validation and the classification metric suite.

Produces a plain-text report in the familiar summary / detailed-accuracy /
confusion-matrix layout, plus a machine-readable mirror of every field.
Normalization is refit inside each training fold so no test-set statistics
leak into the model.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .dataprep import Dataset
from .tree import build_tree, predict

DISPLAY_CLASSES = (1, 0)  # report convention: irrigate first


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: tuple[tuple[int, ...], ...]  # [actual][predicted], ordered by classes
    classes: tuple[int, ...] = DISPLAY_CLASSES

    def __post_init__(self) -> None:
        object.__setattr__(self, "counts", tuple(tuple(int(c) for c in row) for row in self.counts))
        k = len(self.classes)
        if len(self.counts) != k or any(len(row) != k for row in self.counts):
            raise EvaluationError("matrix shape must match the class list")
        if any(c < 0 for row in self.counts for c in row):
            raise EvaluationError("counts must be nonnegative")

    @classmethod
    def from_pairs(cls, actuals, predictions, classes=DISPLAY_CLASSES) -> "ConfusionMatrix":
        index = {c: i for i, c in enumerate(classes)}
        grid = [[0] * len(classes) for _ in classes]
        for a, p in zip(actuals, predictions):
            grid[index[a]][index[p]] += 1
        return cls(tuple(tuple(row) for row in grid), tuple(classes))

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    @property
    def correct(self) -> int:
        return sum(self.counts[i][i] for i in range(len(self.classes)))

    def actual_count(self, cls_value) -> int:
        return sum(self.counts[self.classes.index(cls_value)])

    def predicted_count(self, cls_value) -> int:
        j = self.classes.index(cls_value)
        return sum(row[j] for row in self.counts)

    def count(self, actual, predicted) -> int:
        return self.counts[self.classes.index(actual)][self.classes.index(predicted)]


@dataclass
class ClassMetrics:
    tp_rate: float
    fp_rate: float
    precision: float
    recall: float
    f_measure: float
    mcc: float
    roc_area: float | None = None

    def to_json(self) -> dict:
        return {
            "tp_rate": self.tp_rate,
            "fp_rate": self.fp_rate,
            "precision": self.precision,
            "recall": self.recall,
            "f_measure": self.f_measure,
            "mcc": self.mcc,
            "roc_area": self.roc_area,
        }


@dataclass
class EvalReport:
    matrix: ConfusionMatrix
    accuracy: float
    kappa: float
    per_class: dict[int, ClassMetrics]
    weighted: ClassMetrics
    mae: float | None = None
    rmse: float | None = None
    rae_pct: float | None = None
    rrse_pct: float | None = None
    flags: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "classes": list(self.matrix.classes),
            "confusion_matrix": [list(row) for row in self.matrix.counts],
            "total": self.matrix.total,
            "correct": self.matrix.correct,
            "accuracy": self.accuracy,
            "kappa": self.kappa,
            "mae": self.mae,
            "rmse": self.rmse,
            "rae_pct": self.rae_pct,
            "rrse_pct": self.rrse_pct,
            "per_class": {str(c): m.to_json() for c, m in self.per_class.items()},
            "weighted": self.weighted.to_json(),
            "flags": list(self.flags),
        }


def _ratio(num: float, den: float, name: str, flags: set[str]) -> float:
    if den == 0:
        flags.add(name)
        return 0.0
    return num / den


def matrix_metrics(matrix: ConfusionMatrix) -> EvalReport:
    """Accuracy, kappa and per-class rates derivable from the matrix alone."""
    total = matrix.total
    if total <= 0:
        raise EvaluationError("empty confusion matrix")
    flags: set[str] = set()
    accuracy = matrix.correct / total

    p_e = sum(matrix.actual_count(c) * matrix.predicted_count(c) for c in matrix.classes) / (total * total)
    kappa = _ratio(accuracy - p_e, 1 - p_e, "kappa", flags)

    per_class: dict[int, ClassMetrics] = {}
    for c in matrix.classes:
        tp = matrix.count(c, c)
        fn = matrix.actual_count(c) - tp
        fp = matrix.predicted_count(c) - tp
        tn = total - tp - fn - fp
        recall = _ratio(tp, tp + fn, f"recall[{c}]", flags)
        precision = _ratio(tp, tp + fp, f"precision[{c}]", flags)
        fp_rate = _ratio(fp, fp + tn, f"fp_rate[{c}]", flags)
        f_measure = _ratio(2 * precision * recall, precision + recall, f"f_measure[{c}]", flags)
        mcc_den = math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
        mcc = _ratio(tp * tn - fp * fn, mcc_den, f"mcc[{c}]", flags)
        per_class[c] = ClassMetrics(recall, fp_rate, precision, recall, f_measure, mcc)

    weighted = _weighted_average(matrix, per_class)
    return EvalReport(matrix, accuracy, kappa, per_class, weighted, flags=tuple(sorted(flags)))


def _weighted_average(matrix: ConfusionMatrix, per_class: dict[int, ClassMetrics]) -> ClassMetrics:
    total = matrix.total

    def avg(get) -> float:
        return sum(get(per_class[c]) * matrix.actual_count(c) for c in matrix.classes) / total

    roc = None
    if all(per_class[c].roc_area is not None for c in matrix.classes):
        roc = avg(lambda m: m.roc_area)
    return ClassMetrics(
        tp_rate=avg(lambda m: m.tp_rate),
        fp_rate=avg(lambda m: m.fp_rate),
        precision=avg(lambda m: m.precision),
        recall=avg(lambda m: m.recall),
        f_measure=avg(lambda m: m.f_measure),
        mcc=avg(lambda m: m.mcc),
        roc_area=roc,
    )


@dataclass
class ErrorMetrics:
    mae: float
    rmse: float
    rae_pct: float
    rrse_pct: float
    roc_area: dict[int, float]
    flags: tuple[str, ...] = ()


def error_metrics(probabilities, actuals, classes=(0, 1)) -> ErrorMetrics:
    """Probability-based error measures against 0/1 class indicators.

    Each probability vector is ordered like ``classes``.  RAE/RRSE compare
    against the prior-frequency predictor fitted on the same actual labels;
    ROC area is the Mann-Whitney statistic with ties counted half.
    """
    n = len(actuals)
    if n == 0 or len(probabilities) != n:
        raise EvaluationError("need one probability vector per instance")
    flags: set[str] = set()
    k = len(classes)
    freq = [sum(1 for a in actuals if a == c) / n for c in classes]

    def mean_abs(prob_of) -> float:
        total = 0.0
        for i, a in enumerate(actuals):
            for j, c in enumerate(classes):
                y = 1.0 if a == c else 0.0
                total += abs(prob_of(i)[j] - y)
        return total / (n * k)

    def root_mean_sq(prob_of) -> float:
        total = 0.0
        for i, a in enumerate(actuals):
            for j, c in enumerate(classes):
                y = 1.0 if a == c else 0.0
                total += (prob_of(i)[j] - y) ** 2
        return math.sqrt(total / (n * k))

    mae = mean_abs(lambda i: probabilities[i])
    rmse = root_mean_sq(lambda i: probabilities[i])
    mae_prior = mean_abs(lambda i: freq)
    rmse_prior = root_mean_sq(lambda i: freq)
    rae = 100.0 * _ratio(mae, mae_prior, "rae", flags)
    rrse = 100.0 * _ratio(rmse, rmse_prior, "rrse", flags)

    roc: dict[int, float] = {}
    for j, c in enumerate(classes):
        roc[c] = _auc([p[j] for p in probabilities], [a == c for a in actuals], f"roc[{c}]", flags)

    return ErrorMetrics(mae, rmse, rae, rrse, roc, tuple(sorted(flags)))


def _auc(scores, positives, name: str, flags: set[str]) -> float:
    n = len(scores)
    n_pos = sum(positives)
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        flags.add(name)
        return 0.0
    order = sorted(range(n), key=lambda i: scores[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        avg_rank = (i + j) / 2 + 1  # 1-based, ties share the average rank
        for t in range(i, j + 1):
            ranks[order[t]] = avg_rank
        i = j + 1
    rank_sum = sum(r for r, pos in zip(ranks, positives) if pos)
    u = rank_sum - n_pos * (n_pos + 1) / 2
    return u / (n_pos * n_neg)


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: tuple[int, ...]  # instance index -> fold index
    seed: int

    def fold_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.assignments) if f == fold]


def stratified_folds(d: Dataset, k: int, seed: int) -> FoldPlan:
    """Shuffle within each class, then deal round-robin with a shared cursor.

    Carrying the dealing cursor across classes keeps fold sizes balanced,
    and per-fold class counts stay within one of exact proportionality.
    """
    n = len(d)
    if k < 2:
        raise EvaluationError("k must be at least 2")
    if k > n:
        raise EvaluationError(f"k={k} exceeds dataset size {n}")
    labels = d.labels()
    rng = random.Random(seed)
    assignments = [0] * n
    cursor = 0
    for c in d.class_values:
        members = [i for i, y in enumerate(labels) if y == c]
        rng.shuffle(members)
        for i in members:
            assignments[i] = cursor % k
            cursor += 1
    return FoldPlan(k, tuple(assignments), seed)


def cross_validate(
    d: Dataset,
    k: int = 10,
    seed: int = 1,
    min_leaf: int = 2,
    confidence: float = 0.25,
    norm_method: str = "zscore",
) -> EvalReport:
    """k-fold stratified cross-validation pooling all held-out predictions."""
    labels = d.labels()
    for c in d.class_values:
        if c not in labels:
            raise EvaluationError(f"class {c} has no instances")
    plan = stratified_folds(d, k, seed)

    predictions: list[int | None] = [None] * len(d)
    probabilities: list[tuple[float, ...] | None] = [None] * len(d)
    for fold in range(k):
        held = set(plan.fold_indices(fold))
        train = Dataset(
            [inst for i, inst in enumerate(d.instances) if i not in held], d.attributes, d.class_values
        )
        model = build_tree(train, min_leaf=min_leaf, confidence=confidence, norm_method=norm_method)
        for i in held:
            cls, probs = predict(model, d.instances[i])
            predictions[i] = cls
            probabilities[i] = probs

    matrix = ConfusionMatrix.from_pairs(labels, predictions)
    report = matrix_metrics(matrix)
    errors = error_metrics(probabilities, labels, classes=d.class_values)
    report.mae = errors.mae
    report.rmse = errors.rmse
    report.rae_pct = errors.rae_pct
    report.rrse_pct = errors.rrse_pct
    for c in matrix.classes:
        report.per_class[c].roc_area = errors.roc_area[c]
    report.weighted = _weighted_average(matrix, report.per_class)
    report.flags = tuple(sorted(set(report.flags) | set(errors.flags)))
    return report


# -- text report ----------------------------------------------------------------


def _trim(x: float, dp: int = 4) -> str:
    text = f"{x:.{dp}f}".rstrip("0").rstrip(".")
    return text if text not in ("", "-0") else "0"


def format_report(r: EvalReport) -> str:
    """Plain-text block: summary, detailed accuracy by class, confusion matrix."""
    m = r.matrix
    lines = ["=== Stratified cross-validation ===", "=== Summary ===", ""]
    correct, total = m.correct, m.total
    incorrect = total - correct
    lines.append(f"{'Correctly Classified Instances':<36}{correct:<13}{_trim(100 * correct / total)} %")
    lines.append(f"{'Incorrectly Classified Instances':<36}{incorrect:<13}{_trim(100 * incorrect / total)} %")
    lines.append(f"{'Kappa statistic':<36}{_trim(r.kappa)}")
    if r.mae is not None:
        lines.append(f"{'Mean absolute error':<36}{_trim(r.mae)}")
        lines.append(f"{'Root mean squared error':<36}{_trim(r.rmse)}")
        lines.append(f"{'Relative absolute error':<36}{_trim(r.rae_pct)} %")
        lines.append(f"{'Root relative squared error':<36}{_trim(r.rrse_pct)} %")
    lines.append(f"{'Total Number of Instances':<36}{total}")
    lines.append("")

    lines.append("=== Detailed Accuracy By Class ===")
    lines.append("")
    header = f"{'':<17}{'TP Rate':<9}{'FP Rate':<9}{'Precision':<11}{'Recall':<8}{'F-Measure':<11}{'MCC':<7}{'ROC Area':<10}Class"
    lines.append(header)

    def row(prefix: str, cm: ClassMetrics, cls: str) -> str:
        roc = f"{cm.roc_area:.3f}" if cm.roc_area is not None else "?"
        return (
            f"{prefix:<17}{cm.tp_rate:<9.3f}{cm.fp_rate:<9.3f}{cm.precision:<11.3f}"
            f"{cm.recall:<8.3f}{cm.f_measure:<11.3f}{cm.mcc:<7.3f}{roc:<10}{cls}"
        )

    for c in m.classes:
        lines.append(row("", r.per_class[c], str(c)))
    lines.append(row("Weighted Avg.", r.weighted, ""))
    lines.append("")

    lines.append("=== Confusion Matrix ===")
    lines.append("")
    letters = [chr(ord("a") + i) for i in range(len(m.classes))]
    width = max(len(str(c)) for row_ in m.counts for c in row_)
    width = max(width, 1)
    lines.append("  ".join(x.rjust(width) for x in letters) + "   <-- classified as")
    for i, c in enumerate(m.classes):
        cells = "  ".join(str(x).rjust(width) for x in m.counts[i])
        lines.append(f"{cells} |   {letters[i]} = {c}")
    return "\n".join(lines) + "\n"
