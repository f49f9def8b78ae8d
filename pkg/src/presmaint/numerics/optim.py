"""Adam and SGD parameter updates over named parameter dicts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .tensor import NonFiniteError, Tensor


@dataclass
class AdamState:
    """Per-model Adam accumulators. Defaults: beta1=0.9, beta2=0.999, eps=1e-8."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def _check_finite(name: str, g: np.ndarray):
    if not np.all(np.isfinite(g)):
        raise NonFiniteError(f"non-finite gradient for parameter {name!r}")


def adam_step(params: Dict[str, Tensor], grads: Dict[str, np.ndarray], state: AdamState) -> None:
    """One bias-corrected Adam update; increments state.step."""
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        _check_finite(name, g)
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name!r}")
        m = state.m.setdefault(name, np.zeros(p.shape))
        v = state.v.setdefault(name, np.zeros(p.shape))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p.data -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def sgd_step(params: Dict[str, Tensor], grads: Dict[str, np.ndarray], lr: float) -> None:
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        _check_finite(name, g)
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name!r}")
        p.data -= lr * g


def collect_grads(params: Dict[str, Tensor]) -> Dict[str, np.ndarray]:
    return {name: p.grad for name, p in params.items() if p.grad is not None}


def zero_grads(params: Dict[str, Tensor]) -> None:
    for p in params.values():
        p.grad = None
