"""Small fully connected networks over the autodiff tensors."""

from __future__ import annotations

from typing import Dict, Sequence

import numpy as np

from .. import numerics as nx
from ..numerics import Tensor


class Mlp:
    """ReLU MLP with a linear output layer; parameters live in a flat dict."""

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator, prefix: str = "net"):
        self.sizes = tuple(sizes)
        self.prefix = prefix
        self.params: Dict[str, Tensor] = {}
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
            self.params[f"{prefix}.w{i}"] = nx.tensor(w, requires_grad=True)
            self.params[f"{prefix}.b{i}"] = nx.tensor(np.zeros((1, fan_out)), requires_grad=True)
        self.n_layers = len(sizes) - 1

    def forward(self, x: Tensor) -> Tensor:
        h = x
        for i in range(self.n_layers):
            h = nx.add(nx.matmul(h, self.params[f"{self.prefix}.w{i}"]), self.params[f"{self.prefix}.b{i}"])
            if i < self.n_layers - 1:
                h = nx.relu(h)
        return h

    def forward_np(self, x: np.ndarray) -> np.ndarray:
        """Plain numpy forward pass for target computation and action selection."""
        h = x
        for i in range(self.n_layers):
            h = h @ self.params[f"{self.prefix}.w{i}"].data + self.params[f"{self.prefix}.b{i}"].data
            if i < self.n_layers - 1:
                h = np.maximum(h, 0.0)
        return h

    def copy_from(self, other: "Mlp") -> None:
        for name, p in other.params.items():
            self.params[name.replace(other.prefix, self.prefix, 1)].data = p.data.copy()

    def soft_update_from(self, other: "Mlp", tau: float) -> None:
        """target <- (1 - tau) * target + tau * online."""
        for name, p in other.params.items():
            mine = self.params[name.replace(other.prefix, self.prefix, 1)]
            mine.data *= 1.0 - tau
            mine.data += tau * p.data

    def assert_finite(self) -> None:
        for name, p in self.params.items():
            if not np.all(np.isfinite(p.data)):
                raise nx.NonFiniteError(f"parameter {name!r} became non-finite")


def one_hot(states, n_states: int) -> np.ndarray:
    idx = np.asarray(states, dtype=int).reshape(-1)
    out = np.zeros((idx.size, n_states))
    out[np.arange(idx.size), idx] = 1.0
    return out
