"""Proximal policy optimization with a clipped surrogate and GAE."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .. import numerics as nx
from .configs import PpoConfig
from .nets import Mlp, one_hot


def gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    discount: float,
    lam: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimation.

    values has length T+1 (the trailing entry bootstraps the final step).
    delta_t = r_t + discount * V_{t+1} * (1 - done_t) - V_t
    A_t     = delta_t + discount * lam * (1 - done_t) * A_{t+1}
    Returns (advantages, returns) with returns = advantages + values[:T].
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    T = rewards.size
    if values.size != T + 1 or dones.size != T:
        raise ValueError("expected len(values) == len(rewards)+1 == len(dones)+1")
    adv = np.zeros(T)
    acc = 0.0
    for t in range(T - 1, -1, -1):
        nonterminal = 1.0 - dones[t]
        delta = rewards[t] + discount * values[t + 1] * nonterminal - values[t]
        acc = delta + discount * lam * nonterminal * acc
        adv[t] = acc
    return adv, adv + values[:T]


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    std = adv.std()
    if std == 0.0:
        return adv - adv.mean()
    return (adv - adv.mean()) / std


@dataclass
class Rollout:
    states: List[int] = field(default_factory=list)
    actions: List[int] = field(default_factory=list)
    rewards: List[float] = field(default_factory=list)
    dones: List[bool] = field(default_factory=list)
    log_probs: List[float] = field(default_factory=list)

    def __len__(self):
        return len(self.states)

    def clear(self):
        for lst in (self.states, self.actions, self.rewards, self.dones, self.log_probs):
            lst.clear()


class PpoAgent:
    def __init__(self, n_states: int, n_actions: int, config: PpoConfig, seed: int):
        self.n_states = n_states
        self.n_actions = n_actions
        self.config = config
        self.actor = Mlp((n_states, *config.hidden, n_actions), nx.substream(seed, "ppo-actor"), prefix="pi")
        # near-uniform initial policy: a small logits head keeps early updates
        # from collapsing onto an arbitrary action
        last = self.actor.n_layers - 1
        self.actor.params[f"pi.w{last}"].data *= 0.01
        self.critic = Mlp((n_states, *config.hidden, 1), nx.substream(seed, "ppo-critic"), prefix="vf")
        self.params: Dict = {**self.actor.params, **self.critic.params}
        self.adam = nx.AdamState(lr=config.lr)
        self.rollout = Rollout()

    def _policy(self, states: np.ndarray) -> np.ndarray:
        logits = self.actor.forward_np(states)
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)

    def select(self, s: int, rng: np.random.Generator) -> Tuple[int, float, float]:
        """Sample an action; returns (action, log-prob, policy entropy)."""
        probs = self._policy(one_hot([s], self.n_states))[0]
        a = int(rng.choice(self.n_actions, p=probs))
        logp = float(np.log(probs[a]))
        entropy = float(-(probs * np.log(probs + 1e-12)).sum())
        return a, logp, entropy

    def values_np(self, states: np.ndarray) -> np.ndarray:
        return self.critic.forward_np(states).reshape(-1)

    def update(self, rollout: Rollout, last_state: int, epoch_rng: np.random.Generator) -> Dict[str, float]:
        """Clipped-surrogate update over the collected rollout.

        Maximizes mean min(ratio*A, clip(ratio)*A) - vf_coef * value_loss
        + entropy_coef * entropy, with advantages normalized per batch.
        """
        cfg = self.config
        T = len(rollout)
        states = one_hot(rollout.states, self.n_states)
        actions = np.array(rollout.actions)
        old_logp = np.array(rollout.log_probs).reshape(-1, 1)
        values = np.concatenate(
            [self.values_np(states), self.values_np(one_hot([last_state], self.n_states))]
        )
        adv, returns = gae(
            np.array(rollout.rewards), values, np.array(rollout.dones, dtype=float),
            cfg.discount, cfg.gae_lambda,
        )
        adv = normalize_advantages(adv).reshape(-1, 1)
        returns = returns.reshape(-1, 1)

        stats = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0}
        n_updates = 0
        for _ in range(cfg.update_epochs):
            order = epoch_rng.permutation(T)
            for start in range(0, T, cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                b_states = nx.tensor(states[idx])
                b_adv = nx.tensor(adv[idx])
                b_returns = nx.tensor(returns[idx])
                b_old = nx.tensor(old_logp[idx])
                nx.zero_grads(self.params)
                with nx.Tape() as tape:
                    logits = self.actor.forward(b_states)
                    logp_all = nx.log_softmax_rows(logits)
                    logp = nx.take_per_row(logp_all, actions[idx])
                    ratio = nx.exp(nx.sub(logp, b_old))
                    if not np.all(np.isfinite(ratio.data)):
                        raise nx.NonFiniteError("non-finite PPO probability ratio")
                    # min(ratio*A, clip(ratio)*A): where the clipped branch is
                    # strictly smaller it is a constant, so only the unclipped
                    # branch carries gradient (the clamp's gradient is zero
                    # outside the clip range)
                    clipped_term = np.clip(ratio.data, 1.0 - cfg.clip, 1.0 + cfg.clip) * b_adv.data
                    unclipped_active = (ratio.data * b_adv.data) <= clipped_term
                    surrogate = nx.mean_all(
                        nx.add(
                            nx.mul(nx.mul(ratio, b_adv), nx.tensor(unclipped_active.astype(float))),
                            nx.tensor(clipped_term * (~unclipped_active).astype(float)),
                        )
                    )
                    v = self.critic.forward(b_states)
                    vdiff = nx.sub(v, b_returns)
                    value_loss = nx.mean_all(nx.mul(vdiff, vdiff))
                    probs = nx.softmax_rows(logits)
                    entropy = nx.scale(
                        nx.mean_all(nx.sum_axis(nx.mul(probs, logp_all), 1)), -1.0
                    )
                    loss = nx.add(
                        nx.add(nx.scale(surrogate, -1.0), nx.scale(value_loss, cfg.vf_coef)),
                        nx.scale(entropy, -cfg.entropy_coef),
                    )
                if not np.isfinite(loss.item()):
                    raise nx.NonFiniteError("non-finite PPO loss")
                tape.backward(loss)
                nx.adam_step(self.params, nx.collect_grads(self.params), self.adam)
                self.actor.assert_finite()
                self.critic.assert_finite()
                stats["policy_loss"] += -surrogate.item()
                stats["value_loss"] += value_loss.item()
                stats["entropy"] += entropy.item()
                n_updates += 1
        if n_updates:
            for k in stats:
                stats[k] /= n_updates
        return stats

    def logits_table(self) -> np.ndarray:
        return self.actor.forward_np(np.eye(self.n_states))

    def greedy_policy(self) -> np.ndarray:
        return self.logits_table().argmax(axis=1)
