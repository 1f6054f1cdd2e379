"""Mini-batch training with AdamW, lr schedule, periodic evaluation, early
stopping and best-weight restoration."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..errors import ParameterError, TrainingError
from ..tensor import OptimizerState, adamw_step
from .metrics import evaluate

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ("step", "split", "loss", "accuracy", "precision", "recall", "f1")


@dataclass
class TrainConfig:
    epochs: int = 3
    batch_size: int = 32
    lr: float = 3e-4
    schedule: str = "linear"  # "linear" (warmup + decay) or "constant"
    warmup_frac: float = 0.05
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    patience: int = 3
    class_weights: tuple[float, float] | None = None
    eval_every: int | None = None  # steps; None = once per epoch
    max_steps: int | None = None
    threshold: float = 0.5

    def __post_init__(self):
        if self.batch_size < 1 or self.patience < 1 or self.epochs < 1:
            raise ParameterError("epochs, batch_size and patience must all be >= 1")
        if self.schedule not in ("linear", "constant"):
            raise ParameterError(f"unknown lr schedule {self.schedule!r}")
        if self.eval_every is not None and self.eval_every < 1:
            raise ParameterError("eval_every must be >= 1")
        if self.class_weights is not None:
            self.class_weights = tuple(float(w) for w in self.class_weights)
            if len(self.class_weights) != 2 or min(self.class_weights) <= 0:
                raise ParameterError("class_weights must be two positive numbers (negative, positive)")

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["class_weights"] is not None:
            d["class_weights"] = list(d["class_weights"])
        return d


def lr_at(step: int, total: int, config: TrainConfig) -> float:
    """Learning rate for 0-based ``step`` of ``total``."""
    if config.schedule == "constant":
        return config.lr
    warmup = max(1, int(math.ceil(config.warmup_frac * total)))
    if step < warmup:
        return config.lr * (step + 1) / warmup
    return config.lr * max(0.0, (total - step) / max(1, total - warmup))


def write_history(history: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HISTORY_COLUMNS)
        for row in history:
            writer.writerow(["" if row.get(c) is None else (repr(row[c]) if isinstance(row[c], float) else row[c])
                             for c in HISTORY_COLUMNS])


def _eval_row(step: int, split: str, report) -> dict:
    return {"step": step, "split": split, "loss": report.loss, "accuracy": report.accuracy,
            "precision": report.precision, "recall": report.recall, "f1": report.f1}


def train(model, train_data, val_data=None, config: TrainConfig | None = None,
          history_path: str | Path | None = None):
    """Fit ``model`` in place; returns ``(model, history)``.

    ``history`` holds one ``train`` row per step (loss only) and one ``val``
    row per evaluation. When ``val_data`` is given, the weights with the best
    validation accuracy (earliest on ties) are restored at the end.
    """
    config = config or TrainConfig()
    n = len(train_data)
    if n == 0:
        raise TrainingError("training split is empty")
    params = model.params
    state = OptimizerState.for_params(params, lr=config.lr, beta1=config.beta1, beta2=config.beta2,
                                      eps=config.eps, weight_decay=config.weight_decay)
    shuffle_seed, dropout_seed = np.random.SeedSequence(config.seed).spawn(2)
    order_rng = np.random.default_rng(shuffle_seed)
    drop_rng = np.random.default_rng(dropout_seed)

    steps_per_epoch = math.ceil(n / config.batch_size)
    total = config.epochs * steps_per_epoch
    if config.max_steps is not None:
        total = min(total, config.max_steps)
    eval_every = config.eval_every or steps_per_epoch

    history: list[dict] = []
    best_acc, best_step, best_weights, stale = -1.0, None, None, 0
    step = 0
    stop = False
    for epoch in range(config.epochs):
        perm = order_rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            if idx.size == 0:
                raise TrainingError(f"empty batch at step {step}")
            batch = train_data.batch(idx)
            for p in params.values():
                p.grad = None
            loss = model.loss(batch, config.class_weights, training=True, rng=drop_rng)
            value = float(loss.data)
            if not math.isfinite(value):
                raise TrainingError(f"non-finite loss {value} at step {step} (epoch {epoch})")
            loss.backward()
            adamw_step(params, state, lr=lr_at(step, total, config))
            history.append({"step": step, "split": "train", "loss": value})
            step += 1

            if val_data is not None and (step % eval_every == 0 or step == total):
                report = evaluate(model, val_data, config.threshold)
                history.append(_eval_row(step, "val", report))
                log.info("step %d: val accuracy %.4f loss %.4f", step, report.accuracy, report.loss)
                if report.accuracy > best_acc:
                    best_acc, best_step, stale = report.accuracy, step, 0
                    best_weights = {k: p.data.copy() for k, p in params.items()}
                else:
                    stale += 1
                    if stale >= config.patience:
                        log.info("early stop at step %d (best %.4f at step %s)", step, best_acc, best_step)
                        stop = True
                if history_path is not None:
                    write_history(history, history_path)
            if stop or step >= total:
                stop = True
                break
        if stop:
            break

    if best_weights is not None:
        for k, p in params.items():
            p.data[...] = best_weights[k]
    if history_path is not None:
        write_history(history, history_path)
    model.best_step = best_step
    return model, history
