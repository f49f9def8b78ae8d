"""Shared training loop for the three agents over a maintenance environment.

Per-episode totals are recorded as (episode, total_reward, epsilon_or_entropy)
rows; the third column carries the exploration rate for the value-based agent
and the mean policy entropy for the stochastic ones. Everything random flows
from substreams of the seed, so a run is reproducible end to end. An optional
reward hook (the human-feedback shaping path) may rewrite each step's reward;
an optional demonstration policy redirects exploration draws toward
demonstrated actions instead of uniform ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .. import numerics as nx
from ..mdp import MaintenanceEnv, MdpSpec
from .buffer import Transition
from .configs import DqnConfig, PpoConfig, SacConfig
from .dqn import DqnAgent, epsilon_schedule
from .ppo import PpoAgent
from .sac import SacAgent

AGENT_KINDS = ("dqn", "ppo", "sac")

# hook(episode, global_step, state, action, base_reward) -> shaped reward
RewardHook = Callable[[int, int, int, int, float], float]


def make_env(spec: MdpSpec, seed: int) -> MaintenanceEnv:
    return MaintenanceEnv(spec, nx.substream(seed, "env"))


@dataclass
class TrainResult:
    kind: str
    curve: List[Tuple[int, float, float]]
    greedy_policy: np.ndarray
    policy_values: np.ndarray  # value (Q or logit) of the chosen action per state
    agent: object = field(repr=False, default=None)


def _default_config(kind: str):
    return {"dqn": DqnConfig, "ppo": PpoConfig, "sac": SacConfig}[kind]()


def _make_agent(kind: str, n_states: int, n_actions: int, config, seed: int):
    if kind == "dqn":
        return DqnAgent(n_states, n_actions, config, seed)
    if kind == "ppo":
        return PpoAgent(n_states, n_actions, config, seed)
    if kind == "sac":
        return SacAgent(n_states, n_actions, config, seed)
    raise ValueError(f"unknown agent kind {kind!r} (expected one of {AGENT_KINDS})")


def _extract(kind: str, agent) -> Tuple[np.ndarray, np.ndarray]:
    if kind == "ppo":
        table = agent.logits_table()
    else:
        table = agent.q_table()
    policy = table.argmax(axis=1)
    values = table[np.arange(table.shape[0]), policy]
    return policy, values


def train_agent(
    kind: str,
    env: MaintenanceEnv,
    budget_steps: int,
    seed: int,
    config=None,
    reward_hook: Optional[RewardHook] = None,
    demo_policy: Optional[Sequence[int]] = None,
    on_episode: Optional[Callable[[int, float, float], None]] = None,
) -> TrainResult:
    """Train one agent for budget_steps environment steps.

    budget_steps=0 returns an empty curve and the policy implied by the
    freshly initialized networks.
    """
    if kind not in AGENT_KINDS:
        raise ValueError(f"unknown agent kind {kind!r} (expected one of {AGENT_KINDS})")
    spec = env.spec
    if config is None:
        config = _default_config(kind)
    agent = _make_agent(kind, spec.n_states, spec.n_actions, config, seed)
    explore_rng = nx.substream(seed, "explore")
    replay_rng = nx.substream(seed, "replay")
    epoch_rng = nx.substream(seed, "ppo-epochs")

    curve: List[Tuple[int, float, float]] = []
    if budget_steps > 0:
        s = env.reset()
        episode = 0
        ep_total = 0.0
        ep_entropies: List[float] = []
        epsilon = config.epsilon_start if kind == "dqn" else 0.0
        for global_step in range(1, budget_steps + 1):
            if kind == "dqn":
                epsilon = epsilon_schedule(
                    global_step - 1, budget_steps, config.epsilon_start, config.epsilon_end
                )
                if demo_policy is not None and epsilon > 0.0 and explore_rng.random() < epsilon:
                    a = int(demo_policy[s])
                else:
                    a = agent.select(s, epsilon, explore_rng)
            elif kind == "ppo":
                a, logp, entropy = agent.select(s, explore_rng)
                ep_entropies.append(entropy)
            else:
                a, entropy = agent.select(s, explore_rng)
                ep_entropies.append(entropy)

            s_next, r_env, done = env.step(a)
            # the hook (feedback shaping) rewrites the learning signal; the
            # recorded curve stays in environment-reward units so runs with
            # different shaping weights remain comparable
            r = reward_hook(episode, global_step, s, a, r_env) if reward_hook else r_env
            ep_total += r_env
            # the maintenance process is continuing: episode ends are
            # measurement-window truncations, not terminal states, so value
            # targets bootstrap straight through resets
            terminal = False

            if kind == "dqn":
                agent.buffer.push(Transition(s, a, r, s_next, terminal))
                if (
                    len(agent.buffer) >= config.batch_size
                    and global_step % config.update_every == 0
                ):
                    agent.update(agent.buffer.sample(config.batch_size, replay_rng))
            elif kind == "ppo":
                roll = agent.rollout
                roll.states.append(s)
                roll.actions.append(a)
                roll.rewards.append(r)
                roll.dones.append(terminal)
                roll.log_probs.append(logp)
                if len(roll) >= config.rollout_steps:
                    agent.update(roll, s_next, epoch_rng)
                    roll.clear()
            else:
                agent.buffer.push(Transition(s, a, r, s_next, terminal))
                if (
                    len(agent.buffer) >= max(config.batch_size, config.learn_start)
                    and global_step % config.update_every == 0
                ):
                    agent.update(agent.buffer.sample(config.batch_size, replay_rng))

            if done:
                aux = epsilon if kind == "dqn" else float(np.mean(ep_entropies)) if ep_entropies else 0.0
                curve.append((episode, ep_total, aux))
                if on_episode is not None:
                    on_episode(episode, ep_total, aux)
                episode += 1
                ep_total = 0.0
                ep_entropies = []
                s = env.reset()
            else:
                s = s_next

    policy, values = _extract(kind, agent)
    return TrainResult(
        kind=kind, curve=curve, greedy_policy=policy, policy_values=values, agent=agent
    )


def evaluate_policy(
    spec: MdpSpec, policy: Sequence[int], episodes: int, seed: int
) -> float:
    """Monte-Carlo mean episode return of a fixed policy."""
    env = MaintenanceEnv(spec, nx.substream(seed, "eval-env"))
    totals = []
    for _ in range(episodes):
        s = env.reset()
        total = 0.0
        done = False
        while not done:
            s, r, done = env.step(int(policy[s]))
            total += r
        totals.append(total)
    return float(np.mean(totals))
