"""Deep Q-network agent: replay, target network, epsilon-greedy control."""

from __future__ import annotations

from typing import List, Optional

import numpy as np

from .. import numerics as nx
from .buffer import ReplayBuffer, Transition
from .configs import DqnConfig
from .nets import Mlp, one_hot


def epsilon_schedule(
    step: int, total_steps: int, start: float = 1.0, end: float = 0.01
) -> float:
    """Linear decay from start to end across the training budget."""
    if step < 0 or (total_steps > 0 and step > total_steps):
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    if total_steps <= 0:
        return start
    return start + (end - start) * (step / total_steps)


def dqn_select(qnet: Mlp, s: int, n_states: int, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy: uniform with probability epsilon, else lowest-index argmax."""
    n_actions = qnet.sizes[-1]
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(n_actions))
    q = qnet.forward_np(one_hot([s], n_states))[0]
    return int(np.argmax(q))


class DqnAgent:
    def __init__(self, n_states: int, n_actions: int, config: DqnConfig, seed: int):
        self.n_states = n_states
        self.n_actions = n_actions
        self.config = config
        sizes = (n_states, *config.hidden, n_actions)
        self.qnet = Mlp(sizes, nx.substream(seed, "dqn-online"), prefix="q")
        self.target = Mlp(sizes, nx.substream(seed, "dqn-online"), prefix="q")
        self.target.copy_from(self.qnet)
        self.buffer = ReplayBuffer(config.buffer_size)
        self.adam = nx.AdamState(lr=config.lr)
        self.updates = 0

    def select(self, s: int, epsilon: float, rng: np.random.Generator) -> int:
        return dqn_select(self.qnet, s, self.n_states, epsilon, rng)

    def update(self, batch: List[Transition]) -> float:
        """Mean-squared TD error against the frozen target network.

        Terminal transitions bootstrap to zero; the target net is refreshed
        from the online net every `target_sync` updates.
        """
        if not batch:
            raise ValueError("update requires a non-empty batch")
        s = one_hot([t.s for t in batch], self.n_states)
        s_next = one_hot([t.s_next for t in batch], self.n_states)
        a = np.array([t.a for t in batch])
        r = np.array([t.r for t in batch]).reshape(-1, 1)
        done = np.array([t.done for t in batch], dtype=float).reshape(-1, 1)
        q_next = self.target.forward_np(s_next).max(axis=1, keepdims=True)
        y = r + self.config.discount * (1.0 - done) * q_next

        nx.zero_grads(self.qnet.params)
        with nx.Tape() as tape:
            q_sa = nx.take_per_row(self.qnet.forward(nx.tensor(s)), a)
            diff = nx.sub(q_sa, nx.tensor(y))
            loss = nx.mean_all(nx.mul(diff, diff))
        value = loss.item()
        if not np.isfinite(value):
            raise nx.NonFiniteError(f"non-finite DQN loss at update {self.updates}")
        tape.backward(loss)
        nx.adam_step(self.qnet.params, nx.collect_grads(self.qnet.params), self.adam)
        self.qnet.assert_finite()
        self.updates += 1
        if self.updates % self.config.target_sync == 0:
            self.target.copy_from(self.qnet)
        return value

    def q_table(self) -> np.ndarray:
        return self.qnet.forward_np(np.eye(self.n_states))

    def greedy_policy(self) -> np.ndarray:
        return self.q_table().argmax(axis=1)

    def observe(self, t: Transition, rng: Optional[np.random.Generator] = None) -> Optional[float]:
        self.buffer.push(t)
        return None
