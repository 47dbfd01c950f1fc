"""Evaluation metrics for level predictions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ContinuousReport:
    error_rates: np.ndarray
    accuracy: float
    mean_error_rate: float

    def to_dict(self) -> dict:
        return {
            "kind": "continuous",
            "error_rates": self.error_rates.tolist(),
            "mean_error_rate": self.mean_error_rate,
            "accuracy": self.accuracy,
        }

    def table(self) -> str:
        lines = [f"{'sample':>6}  {'error rate':>10}"]
        lines += [f"{i:>6}  {e:>10.4%}" for i, e in enumerate(self.error_rates)]
        lines.append(f"mean error rate {self.mean_error_rate:.4%}   accuracy {self.accuracy:.4%}")
        return "\n".join(lines)


@dataclass
class DiscreteReport:
    labels: list[int]
    confusion: np.ndarray  # rows: truth, columns: prediction
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    f_score: float
    accuracy: float
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": "discrete",
            "labels": list(self.labels),
            "confusion": self.confusion.tolist(),
            "precision": self.precision.tolist(),
            "recall": self.recall.tolist(),
            "f1": self.f1.tolist(),
            "support": self.support.tolist(),
            "f_score": self.f_score,
            "accuracy": self.accuracy,
        }

    def table(self) -> str:
        w = max(5, max(len(str(lb)) for lb in self.labels) + 1)
        head = "truth\\pred".rjust(10) + "".join(str(lb).rjust(w) for lb in self.labels)
        rows = [head]
        for lb, row in zip(self.labels, self.confusion):
            rows.append(str(lb).rjust(10) + "".join(str(int(v)).rjust(w) for v in row))
        rows.append("")
        rows.append(f"{'class':>10}{'prec':>8}{'recall':>8}{'f1':>8}{'n':>6}")
        for i, lb in enumerate(self.labels):
            rows.append(
                f"{lb:>10}{self.precision[i]:>8.3f}{self.recall[i]:>8.3f}{self.f1[i]:>8.3f}{int(self.support[i]):>6}"
            )
        rows.append(f"weighted F-score {self.f_score:.4f}   accuracy {self.accuracy:.4f}")
        return "\n".join(rows)


def _check(pred, truth):
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ValueError(f"prediction/truth length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("nothing to evaluate")
    return pred, truth


def evaluate_continuous(predictions, ground_truth, capacity: float) -> ContinuousReport:
    """Error rate = |predicted - truth| / capacity; accuracy = 1 - mean error rate."""
    pred, truth = _check(predictions, ground_truth)
    if not capacity > 0:
        raise ValueError("capacity must be > 0")
    err = np.abs(pred.astype(float) - truth.astype(float)) / capacity
    mean = float(err.mean())
    return ContinuousReport(err, 1.0 - mean, mean)


def _safe_div(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.zeros_like(a)
    np.divide(a, b, out=out, where=b > 0)
    return out


def evaluate_discrete(predictions, ground_truth, labels=None) -> DiscreteReport:
    """Confusion matrix, per-class precision/recall/F1 and support-weighted F-score."""
    pred, truth = _check(predictions, ground_truth)
    if labels is None:
        labels = sorted(set(truth.tolist()) | set(pred.tolist()))
    labels = [int(lb) for lb in labels]
    pos = {lb: i for i, lb in enumerate(labels)}
    cm = np.zeros((len(labels), len(labels)), dtype=int)
    for p, t in zip(pred.tolist(), truth.tolist()):
        cm[pos[int(t)], pos[int(p)]] += 1
    tp = np.diag(cm).astype(float)
    support = cm.sum(axis=1)
    precision = _safe_div(tp, cm.sum(axis=0))
    recall = _safe_div(tp, support)
    f1 = _safe_div(2 * precision * recall, precision + recall)
    f_score = float(np.sum(f1 * support) / support.sum())
    return DiscreteReport(labels, cm, precision, recall, f1, support, f_score, float(tp.sum() / support.sum()))


def evaluate(predictions, ground_truth, capacity: float | None = None, kind: str = "continuous"):
    if kind == "continuous":
        if capacity is None:
            raise ValueError("continuous evaluation needs the container capacity")
        return evaluate_continuous(predictions, ground_truth, capacity)
    if kind == "discrete":
        return evaluate_discrete(predictions, ground_truth)
    raise ValueError(f"unknown evaluation kind {kind!r}")
