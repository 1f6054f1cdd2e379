"""Binary classification metrics and the evaluation pass."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..tensor import no_grad


@dataclass
class EvalReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int
    n_examples: int
    threshold: float
    loss: float | None = None
    heads: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def binary_metrics(y_true, y_pred) -> dict:
    """Confusion counts and derived scores; 0/0 ratios are defined as 0."""
    t = np.asarray(y_true).astype(bool)
    p = np.asarray(y_pred).astype(bool)
    tp = int(np.sum(t & p))
    fp = int(np.sum(~t & p))
    tn = int(np.sum(~t & ~p))
    fn = int(np.sum(t & ~p))
    n = tp + fp + tn + fn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"accuracy": (tp + tn) / n if n else 0.0, "precision": precision, "recall": recall, "f1": f1,
            "tp": tp, "fp": fp, "tn": tn, "fn": fn, "n_examples": n}


def report_from_predictions(probs, targets, threshold: float = 0.5, mask=None,
                            head_names=None, loss: float | None = None) -> EvalReport:
    """Build a report from probabilities. 1-D input is a single protest head;
    2-D input is multi-label, masked per entry, with ``protest`` as headline."""
    probs = np.asarray(probs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if probs.ndim == 1:
        m = binary_metrics(targets >= 0.5, probs > threshold)
        return EvalReport(**m, threshold=threshold, loss=loss)
    mask = np.ones_like(probs, dtype=bool) if mask is None else np.asarray(mask).astype(bool)
    heads = {}
    for j, name in enumerate(head_names):
        sel = mask[:, j]
        heads[name] = binary_metrics(targets[sel, j] >= 0.5, probs[sel, j] > threshold)
    main = heads["protest"]
    return EvalReport(**main, threshold=threshold, loss=loss, heads=heads)


def evaluate(model, data, threshold: float = 0.5, batch_size: int = 64) -> EvalReport:
    """Single deterministic pass over ``data`` (a TextDataset or ImageDataset)."""
    n = len(data)
    probs, loss_sum = [], 0.0
    for start in range(0, n, batch_size):
        idx = np.arange(start, min(start + batch_size, n))
        batch = data.batch(idx)
        with no_grad():
            loss_sum += float(model.loss(batch, training=False).data) * len(idx)
        probs.append(model.predict_proba(batch))
    probs = np.concatenate(probs) if probs else np.zeros((0,))
    loss = loss_sum / n if n else None
    if model.kind == "text":
        return report_from_predictions(probs, data.labels, threshold, loss=loss)
    return report_from_predictions(probs, data.targets, threshold, data.mask, model.head_names, loss)
