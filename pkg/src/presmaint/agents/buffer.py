"""Experience replay: FIFO ring buffer with uniform batch sampling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np


@dataclass(frozen=True)
class Transition:
    """One environment step. States are stored as indices; networks consume
    their one-hot encodings."""

    s: int
    a: int
    r: float
    s_next: int
    done: bool


class ReplayBuffer:
    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items: List[Transition] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._items)

    def push(self, t: Transition) -> None:
        """Append; once full, overwrite the oldest entry (strict FIFO)."""
        if len(self._items) < self.capacity:
            self._items.append(t)
        else:
            self._items[self._next] = t
        self._next = (self._next + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> List[Transition]:
        """Uniform sample without replacement within the batch."""
        if batch_size > len(self._items):
            raise ValueError(
                f"cannot sample {batch_size} transitions from a buffer of {len(self._items)}"
            )
        idx = rng.choice(len(self._items), size=batch_size, replace=False)
        return [self._items[i] for i in idx]

    def items(self) -> List[Transition]:
        return list(self._items)
