"""Confusion matrices, one-vs-rest precision/recall/F-measure and reports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .models import CLASS_NAMES

# published multiclass accuracies of earlier NSL-KDD systems, for comparison rows
LITERATURE_ACCURACY = (
    ("Huang et al.", 0.7604),
    ("Abeshu et al.", 0.7910),
    ("Yin et al.", 0.8129),
    ("Shone et al.", 0.8542),
)


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # rows: true class, columns: predicted class
    classes: tuple[str, ...] = CLASS_NAMES

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def trace(self) -> int:
        return int(np.trace(self.counts))


def confusion(truth: Sequence[int], pred: Sequence[int],
              classes: Sequence[str] = CLASS_NAMES) -> ConfusionMatrix:
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if truth.shape != pred.shape:
        raise DataError(f"label lists differ in length: {truth.size} vs {pred.size}")
    k = len(classes)
    if truth.size and (min(truth.min(), pred.min()) < 0 or max(truth.max(), pred.max()) >= k):
        raise DataError(f"labels must lie in [0, {k})")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (truth, pred), 1)
    return ConfusionMatrix(counts, tuple(classes))


@dataclass(frozen=True)
class ClassMetrics:
    """Precision, recall and F-measure; ``None`` marks a 0/0 quantity."""

    precision: float | None
    recall: float | None
    f_measure: float | None
    support: int = 0


def _ratio(num: int, den: int) -> float | None:
    return None if den == 0 else num / den


def class_metrics(m: ConfusionMatrix, c: int) -> ClassMetrics:
    tp = int(m.counts[c, c])
    fp = int(m.counts[:, c].sum()) - tp
    fn = int(m.counts[c, :].sum()) - tp
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    if precision is None or recall is None or precision + recall == 0:
        f = None
    else:
        f = 2 * precision * recall / (precision + recall)
    return ClassMetrics(precision, recall, f, support=tp + fn)


def accuracy(m: ConfusionMatrix) -> float:
    if m.total == 0:
        raise DataError("accuracy of an empty confusion matrix is undefined")
    return m.trace / m.total


@dataclass
class EvalReport:
    model_tag: str
    matrix: ConfusionMatrix
    config_hash: str = ""
    per_class: dict[str, ClassMetrics] = field(init=False)
    accuracy: float = field(init=False)

    def __post_init__(self) -> None:
        self.per_class = {
            name: class_metrics(self.matrix, i) for i, name in enumerate(self.matrix.classes)
        }
        self.accuracy = accuracy(self.matrix)

    def to_dict(self) -> dict:
        return {
            "model_tag": self.model_tag,
            "config_hash": self.config_hash,
            "classes": list(self.matrix.classes),
            "confusion": self.matrix.counts.tolist(),
            "accuracy": self.accuracy,
            "per_class": {
                name: {"precision": cm.precision, "recall": cm.recall,
                       "f_measure": cm.f_measure, "support": cm.support}
                for name, cm in self.per_class.items()
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> EvalReport:
        matrix = ConfusionMatrix(np.asarray(d["confusion"], dtype=np.int64), tuple(d["classes"]))
        return cls(d["model_tag"], matrix, d.get("config_hash", ""))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> EvalReport:
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (KeyError, ValueError, TypeError) as exc:
            raise DataError(f"{path}: not a valid report ({exc})") from exc


def evaluate(truth: Sequence[int], pred: Sequence[int], model_tag: str,
             config_hash: str = "", classes: Sequence[str] = CLASS_NAMES) -> EvalReport:
    return EvalReport(model_tag, confusion(truth, pred, classes), config_hash)


def _pct(v: float | None) -> str:
    return "n/a" if v is None else f"{100 * v:.2f}"


def render_report(reports: Sequence[EvalReport]) -> str:
    """Per-class metric table and accuracy comparison table, as plain text."""
    if not reports:
        raise DataError("no reports to render")
    tags = [r.model_tag for r in reports]
    classes = reports[0].matrix.classes
    col = max(8, *(len(t) for t in tags)) + 2
    group = col * len(tags)
    name_w = max(len("Class"), *(len(c) for c in classes)) + 2

    lines = ["Per-class metrics (%)"]
    lines.append(" " * name_w + "".join(f"| {h:<{group}}" for h in ("Precision", "Recall", "F-measure")))
    lines.append(f"{'Class':<{name_w}}" + ("| " + "".join(f"{t:<{col}}" for t in tags)) * 3)
    lines.append("-" * len(lines[-1]))
    for name in classes:
        row = f"{name:<{name_w}}"
        for metric in ("precision", "recall", "f_measure"):
            vals = [_pct(getattr(r.per_class[name], metric)) if name in r.per_class else "n/a"
                    for r in reports]
            row += "| " + "".join(f"{v:<{col}}" for v in vals)
        lines.append(row)

    lines.append("")
    lines.append("Accuracy comparison")
    rows = [(r.model_tag, r.accuracy) for r in reports] + list(LITERATURE_ACCURACY)
    width = max(len("Model"), *(len(n) for n, _ in rows)) + 2
    lines.append(f"{'Model':<{width}}Accuracy (%)")
    lines.append("-" * (width + 12))
    for name, acc in rows:
        lines.append(f"{name:<{width}}{_pct(acc)}")

    lines.append("")
    for r in reports:
        lines.append(f"Confusion matrix {r.model_tag} (rows: true, columns: predicted)")
        cw = max(8, *(len(c) for c in classes)) + 1
        lines.append(" " * name_w + "".join(f"{c:>{cw}}" for c in classes))
        for name, counts in zip(classes, r.matrix.counts):
            lines.append(f"{name:<{name_w}}" + "".join(f"{int(v):>{cw}}" for v in counts))
    return "\n".join(lines)
