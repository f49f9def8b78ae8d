"""Central-difference gradient oracle.

The oracle perturbs each parameter entry by +/-h and differences the scalar
loss; it never touches the tape, so it stays independent of the reverse-mode
path it validates.
"""

from __future__ import annotations

from typing import Callable, Dict

import numpy as np

from .optim import zero_grads
from .tensor import Tape, Tensor


def numeric_gradients(
    loss_fn: Callable[[], Tensor],
    params: Dict[str, Tensor],
    h: float = 1e-5,
) -> Dict[str, np.ndarray]:
    """d(loss)/d(param) by central finite differences, entry by entry."""
    grads = {}
    for name, p in params.items():
        g = np.zeros(p.shape)
        flat = p.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn().item()
            flat[i] = orig - h
            down = loss_fn().item()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        grads[name] = g
    return grads


def max_relative_error(
    loss_fn: Callable[[], Tensor],
    params: Dict[str, Tensor],
    h: float = 1e-5,
) -> float:
    """Worst-case |analytic - numeric| / max(1, |numeric|) over all entries."""
    zero_grads(params)
    with Tape() as tape:
        loss = loss_fn()
    tape.backward(loss)
    numeric = numeric_gradients(loss_fn, params, h=h)
    worst = 0.0
    for name, p in params.items():
        analytic = p.grad if p.grad is not None else np.zeros(p.shape)
        err = np.abs(analytic - numeric[name]) / np.maximum(1.0, np.abs(numeric[name]))
        worst = max(worst, float(err.max()))
    zero_grads(params)
    return worst
