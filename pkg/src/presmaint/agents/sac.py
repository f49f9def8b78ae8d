"""Soft actor-critic adapted to the discrete maintenance action space.

The policy is categorical and critic targets take an exact expectation over
next actions instead of a sampled one:

    y = r + discount * (1 - done) * sum_a' pi(a'|s') (min(Q1', Q2')(s', a')
                                                      - temperature * ln pi(a'|s'))

The policy minimizes E_s sum_a pi(a|s) (temperature * ln pi(a|s)
- min(Q1, Q2)(s, a)). Twin critics soft-update their targets with rate tau.
The published continuous-action parameterization (log-std of a Gaussian
policy) has no discrete counterpart; its initial value is carried in the
config but unused here. Temperature is fixed by default; optional automatic
tuning drives policy entropy toward the configured target.
"""

from __future__ import annotations

import math
from typing import Dict, List, Tuple

import numpy as np

from .. import numerics as nx
from .buffer import ReplayBuffer, Transition
from .configs import SacConfig
from .nets import Mlp, one_hot


class SacAgent:
    def __init__(self, n_states: int, n_actions: int, config: SacConfig, seed: int):
        self.n_states = n_states
        self.n_actions = n_actions
        self.config = config
        sizes_q = (n_states, *config.hidden, n_actions)
        self.actor = Mlp(sizes_q, nx.substream(seed, "sac-actor"), prefix="pi")
        self.q1 = Mlp(sizes_q, nx.substream(seed, "sac-q1"), prefix="q1")
        self.q2 = Mlp(sizes_q, nx.substream(seed, "sac-q2"), prefix="q2")
        self.tq1 = Mlp(sizes_q, nx.substream(seed, "sac-q1"), prefix="q1")
        self.tq2 = Mlp(sizes_q, nx.substream(seed, "sac-q2"), prefix="q2")
        self.tq1.copy_from(self.q1)
        self.tq2.copy_from(self.q2)
        self.buffer = ReplayBuffer(config.buffer_size)
        self.adam_actor = nx.AdamState(lr=config.lr)
        self.adam_critic = nx.AdamState(lr=config.lr)
        self.log_temperature = math.log(config.temperature)
        self.adam_temp = nx.AdamState(lr=config.lr)
        self._temp_m = 0.0
        self._temp_v = 0.0
        self._temp_t = 0
        self.updates = 0

    @property
    def temperature(self) -> float:
        return math.exp(self.log_temperature)

    def _policy(self, states: np.ndarray) -> np.ndarray:
        logits = self.actor.forward_np(states)
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)

    def select(self, s: int, rng: np.random.Generator) -> Tuple[int, float]:
        """Sample from the categorical policy; returns (action, entropy)."""
        probs = self._policy(one_hot([s], self.n_states))[0]
        a = int(rng.choice(self.n_actions, p=probs))
        entropy = float(-(probs * np.log(probs + 1e-12)).sum())
        return a, entropy

    def update(self, batch: List[Transition]) -> Dict[str, float]:
        if not batch:
            raise ValueError("update requires a non-empty batch")
        cfg = self.config
        alpha = self.temperature
        s = one_hot([t.s for t in batch], self.n_states)
        s_next = one_hot([t.s_next for t in batch], self.n_states)
        a = np.array([t.a for t in batch])
        r = np.array([t.r for t in batch]).reshape(-1, 1)
        done = np.array([t.done for t in batch], dtype=float).reshape(-1, 1)

        # critic target: exact expectation over the next action
        next_probs = self._policy(s_next)
        next_logp = np.log(next_probs + 1e-12)
        q_next = np.minimum(self.tq1.forward_np(s_next), self.tq2.forward_np(s_next))
        soft_v = (next_probs * (q_next - alpha * next_logp)).sum(axis=1, keepdims=True)
        y = r + cfg.discount * (1.0 - done) * soft_v

        critic_params = {**self.q1.params, **self.q2.params}
        nx.zero_grads(critic_params)
        with nx.Tape() as tape:
            q1_sa = nx.take_per_row(self.q1.forward(nx.tensor(s)), a)
            q2_sa = nx.take_per_row(self.q2.forward(nx.tensor(s)), a)
            d1 = nx.sub(q1_sa, nx.tensor(y))
            d2 = nx.sub(q2_sa, nx.tensor(y))
            critic_loss = nx.add(nx.mean_all(nx.mul(d1, d1)), nx.mean_all(nx.mul(d2, d2)))
        critic_value = critic_loss.item()
        if not np.isfinite(critic_value):
            raise nx.NonFiniteError("non-finite SAC critic loss")
        tape.backward(critic_loss)
        nx.adam_step(critic_params, nx.collect_grads(critic_params), self.adam_critic)
        self.q1.assert_finite()
        self.q2.assert_finite()

        # policy: minimize E_a~pi [alpha ln pi - min Q], critics held fixed
        q_min = np.minimum(self.q1.forward_np(s), self.q2.forward_np(s))
        nx.zero_grads(self.actor.params)
        with nx.Tape() as tape:
            logits = self.actor.forward(nx.tensor(s))
            logp = nx.log_softmax_rows(logits)
            probs = nx.softmax_rows(logits)
            inner = nx.sub(nx.scale(logp, alpha), nx.tensor(q_min))
            actor_loss = nx.mean_all(nx.sum_axis(nx.mul(probs, inner), 1))
        actor_value = actor_loss.item()
        if not np.isfinite(actor_value):
            raise nx.NonFiniteError("non-finite SAC actor loss")
        tape.backward(actor_loss)
        nx.adam_step(self.actor.params, nx.collect_grads(self.actor.params), self.adam_actor)
        self.actor.assert_finite()

        if cfg.auto_temperature:
            probs_now = self._policy(s)
            entropy_now = float(-(probs_now * np.log(probs_now + 1e-12)).sum(axis=1).mean())
            # J(alpha) = alpha * (H(pi) - target); descend d/d(log alpha)
            grad = self.temperature * (entropy_now - cfg.target_entropy)
            self._temp_t += 1
            self._temp_m = 0.9 * self._temp_m + 0.1 * grad
            self._temp_v = 0.999 * self._temp_v + 0.001 * grad * grad
            mhat = self._temp_m / (1 - 0.9**self._temp_t)
            vhat = self._temp_v / (1 - 0.999**self._temp_t)
            self.log_temperature -= cfg.lr * mhat / (math.sqrt(vhat) + 1e-8)

        self.tq1.soft_update_from(self.q1, cfg.tau)
        self.tq2.soft_update_from(self.q2, cfg.tau)
        self.updates += 1
        return {"critic_loss": critic_value, "actor_loss": actor_value, "temperature": self.temperature}

    def q_table(self) -> np.ndarray:
        eye = np.eye(self.n_states)
        return np.minimum(self.q1.forward_np(eye), self.q2.forward_np(eye))

    def greedy_policy(self) -> np.ndarray:
        return self.q_table().argmax(axis=1)
