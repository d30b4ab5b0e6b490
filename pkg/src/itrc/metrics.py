"""Per-class precision/recall/F1, macro-F1, and accuracy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .store import LABELS


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class MetricsReport:
    per_class: dict[str, ClassMetrics]
    macro_f1: float
    accuracy: float
    n: int

    def to_dict(self) -> dict:
        flat = {}
        for label, m in self.per_class.items():
            key = label.lower()
            flat[f"{key}_precision"] = m.precision
            flat[f"{key}_recall"] = m.recall
            flat[f"{key}_f1"] = m.f1
            flat[f"{key}_support"] = m.support
        flat["macro_f1"] = self.macro_f1
        flat["accuracy"] = self.accuracy
        flat["n"] = self.n
        return flat


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def compute_metrics(preds: Sequence[str], golds: Sequence[str]) -> MetricsReport:
    """Standard definitions; zero denominators yield 0 rather than NaN."""
    if len(preds) != len(golds):
        raise ValueError(f"compute_metrics: {len(preds)} predictions vs {len(golds)} golds")
    if len(golds) == 0:
        raise ValueError("compute_metrics: empty input")
    for seq, name in ((preds, "prediction"), (golds, "gold")):
        for lab in seq:
            if lab not in LABELS:
                raise ValueError(f"compute_metrics: unknown {name} label {lab!r}")
    per_class = {}
    for label in LABELS:
        tp = sum(1 for p, g in zip(preds, golds) if p == label and g == label)
        fp = sum(1 for p, g in zip(preds, golds) if p == label and g != label)
        fn = sum(1 for p, g in zip(preds, golds) if p != label and g == label)
        precision = _safe_div(tp, tp + fp)
        recall = _safe_div(tp, tp + fn)
        f1 = _safe_div(2 * precision * recall, precision + recall)
        per_class[label] = ClassMetrics(precision=precision, recall=recall, f1=f1,
                                        support=tp + fn)
    correct = sum(1 for p, g in zip(preds, golds) if p == g)
    return MetricsReport(
        per_class=per_class,
        macro_f1=sum(m.f1 for m in per_class.values()) / len(LABELS),
        accuracy=correct / len(golds),
        n=len(golds),
    )
