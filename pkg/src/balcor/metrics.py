"""Confusion-matrix evaluation.

Reports per-label precision/recall/F1, accuracy, and both micro- and
macro-averaged F1. For single-label multi-class prediction micro-F1 is
identical to accuracy; both are still reported under unambiguous names
because summary columns in the wild conflate them. Zero-denominator
cells score 0 and are listed in ``degenerate`` instead of turning into
NaN.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import TaskSpec
from .errors import LengthMismatch, UnknownLabel


@dataclass(frozen=True)
class LabelScores:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class EvalReport:
    task_id: str
    labels: tuple[int, ...]
    confusion: np.ndarray  # rows = gold, cols = predicted, task label order
    per_label: dict[int, LabelScores]
    accuracy: float
    micro_f1: float
    macro_f1: float
    n: float
    degenerate: tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "labels": list(self.labels),
            "confusion": self.confusion.tolist(),
            "per_label": {
                str(lab): {"precision": s.precision, "recall": s.recall, "f1": s.f1}
                for lab, s in self.per_label.items()
            },
            "accuracy": self.accuracy,
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "n": self.n,
            "degenerate": list(self.degenerate),
        }

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _safe_div(num: float, den: float, tag: str, degenerate: list[str]) -> float:
    if den == 0:
        degenerate.append(tag)
        return 0.0
    return num / den


def report_from_confusion(confusion: np.ndarray, task: TaskSpec) -> EvalReport:
    """Build a report from a (possibly fractional) confusion matrix."""
    confusion = np.asarray(confusion, dtype=float)
    k = task.n_classes
    if confusion.shape != (k, k):
        raise LengthMismatch(f"confusion shape {confusion.shape}, expected ({k}, {k})")
    n = float(confusion.sum())
    degenerate: list[str] = []
    per_label: dict[int, LabelScores] = {}
    for i, label in enumerate(task.labels):
        tp = confusion[i, i]
        fp = confusion[:, i].sum() - tp
        fn = confusion[i, :].sum() - tp
        prec = _safe_div(tp, tp + fp, f"precision({label})", degenerate)
        rec = _safe_div(tp, tp + fn, f"recall({label})", degenerate)
        f1 = _safe_div(2 * prec * rec, prec + rec, f"f1({label})", degenerate)
        per_label[label] = LabelScores(prec, rec, f1)

    trace = float(np.trace(confusion))
    accuracy = _safe_div(trace, n, "accuracy", degenerate)
    # pooled counts: every miss is one false positive and one false negative,
    # so micro precision = micro recall = micro F1 = accuracy
    micro_tp, micro_fp, micro_fn = trace, n - trace, n - trace
    micro_f1 = _safe_div(2 * micro_tp, 2 * micro_tp + micro_fp + micro_fn,
                         "micro_f1", degenerate)
    macro_f1 = float(np.mean([per_label[lab].f1 for lab in task.labels]))
    return EvalReport(
        task_id=task.task_id,
        labels=task.labels,
        confusion=confusion,
        per_label=per_label,
        accuracy=accuracy,
        micro_f1=micro_f1,
        macro_f1=macro_f1,
        n=n,
        degenerate=tuple(degenerate),
    )


def evaluate(gold: Sequence[int], pred: Sequence[int], task: TaskSpec) -> EvalReport:
    """Score predictions against gold labels (task label values)."""
    gold = np.asarray(gold, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if gold.shape != pred.shape or gold.ndim != 1:
        raise LengthMismatch(f"gold shape {gold.shape} vs pred shape {pred.shape}")
    if len(gold) == 0:
        raise LengthMismatch("need at least one example")
    index = {label: i for i, label in enumerate(task.labels)}
    k = task.n_classes
    confusion = np.zeros((k, k), dtype=float)
    for g, p in zip(gold.tolist(), pred.tolist()):
        if g not in index:
            raise UnknownLabel(f"gold label {g} not in task labels {task.labels}")
        if p not in index:
            raise UnknownLabel(f"predicted label {p} not in task labels {task.labels}")
        confusion[index[g], index[p]] += 1
    return report_from_confusion(confusion, task)


def headline(report: EvalReport, task: TaskSpec) -> tuple[str, float]:
    """The one number the task is judged on.

    Binary tasks headline the report label's F1; multi-class tasks
    headline micro-F1 (equal to accuracy).
    """
    if task.n_classes == 2:
        return (f"F1({task.report_label})", report.per_label[task.report_label].f1)
    return ("micro_f1", report.micro_f1)


def render_table(report: EvalReport, task: TaskSpec) -> str:
    """Aligned text table: headline F1, accuracy, and macro-F1 columns."""
    name, value = headline(report, task)
    rows = [
        ("", name, "Accuracy", "Macro-F1"),
        (task.task_id, f"{value * 100:.2f}", f"{report.accuracy * 100:.2f}",
         f"{report.macro_f1 * 100:.2f}"),
    ]
    lines = ["  ".join(f"{cell:>10}" for cell in row) for row in rows]
    lines.append("")
    lines.append(f"{'label':>10}  {'precision':>10}  {'recall':>10}  {'f1':>10}  {'support':>10}")
    for i, label in enumerate(task.labels):
        s = report.per_label[label]
        support = report.confusion[i, :].sum()
        lines.append(
            f"{task.label_name(label):>10}  {s.precision:>10.4f}  {s.recall:>10.4f}"
            f"  {s.f1:>10.4f}  {support:>10.0f}"
        )
    if report.degenerate:
        lines.append(f"zero-denominator cells: {', '.join(report.degenerate)}")
    return "\n".join(lines)
