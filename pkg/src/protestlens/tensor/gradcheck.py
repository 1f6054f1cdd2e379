"""Central finite-difference gradient checking (run in float64)."""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .core import Tensor


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """max |a - n| / max(|a|, |n|, floor) over all entries."""
    a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    n = np.asarray(numeric, dtype=np.float64).reshape(-1)
    if a.size == 0:
        return 0.0
    den = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float((np.abs(a - n) / den).max())


def check_gradients(
    fn: Callable[[], Tensor],
    inputs: Mapping[str, Tensor],
    h: float = 1e-5,
    max_entries: int | None = None,
    seed: int = 0,
    floor: float = 1e-6,
) -> dict[str, float]:
    """Compare backward() against central differences for each named input.

    The output is contracted with a fixed random cotangent so that ops whose
    outputs sum to a constant (softmax) are still probed. ``fn`` must rebuild
    the graph on every call. ``max_entries`` probes a random subset of
    coordinates per input.
    """
    rng = np.random.default_rng(seed)
    for t in inputs.values():
        t.grad = None
    out = fn()
    cot = rng.standard_normal(out.shape).astype(out.dtype) if out.data.size > 1 else np.ones_like(out.data)
    out.backward(cot)

    def objective() -> float:
        return float((fn().data * cot).sum())

    errors: dict[str, float] = {}
    for name, t in inputs.items():
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad
        flat = t.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
        num = np.empty(idx.size)
        for j, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + h
            up = objective()
            flat[i] = orig - h
            down = objective()
            flat[i] = orig
            num[j] = (up - down) / (2 * h)
        errors[name] = relative_error(analytic.reshape(-1)[idx], num, floor)
    return errors
