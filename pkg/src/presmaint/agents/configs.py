"""Agent hyperparameter sets.

Values follow the published tuning for this maintenance task: Adam at 1e-4
(3e-4 for the soft actor-critic), discount 0.99, batch sizes 512/64/256,
target sync every 50 updates, epsilon 1.0 -> 0.01, PPO clip 0.2 with value
coefficient 0.5, entropy coefficient 0.01 and GAE 0.95, SAC temperature 0.2
with soft updates at 0.005. Replay capacity defaults to 1e5 instead of the
published 1e6: at desk scale runs are far shorter than the buffer, so the
cap never binds; it stays configurable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple


@dataclass(frozen=True)
class DqnConfig:
    lr: float = 1e-4
    discount: float = 0.99
    buffer_size: int = 100_000
    batch_size: int = 512
    target_sync: int = 50  # updates between hard target copies
    epsilon_start: float = 1.0
    epsilon_end: float = 0.01
    hidden: Tuple[int, int] = (256, 256)
    update_every: int = 4  # environment steps between gradient updates

    def __post_init__(self):
        if not (0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0):
            raise ValueError("need 0 <= epsilon_end <= epsilon_start <= 1")


@dataclass(frozen=True)
class PpoConfig:
    lr: float = 1e-4
    discount: float = 0.99
    clip: float = 0.2
    vf_coef: float = 0.5
    entropy_coef: float = 0.01
    batch_size: int = 64
    update_epochs: int = 10
    gae_lambda: float = 0.95
    rollout_steps: int = 512
    hidden: Tuple[int, int] = (64, 64)

    def __post_init__(self):
        if not (0.0 < self.clip < 1.0):
            raise ValueError("clip must be in (0, 1)")


@dataclass(frozen=True)
class SacConfig:
    lr: float = 3e-4
    discount: float = 0.99
    temperature: float = 0.2
    target_entropy: float = -2.0  # recorded; only used with auto_temperature
    buffer_size: int = 100_000
    batch_size: int = 256
    tau: float = 0.005
    hidden: Tuple[int, int] = (64, 64)
    update_every: int = 1
    learn_start: int = 1_000
    auto_temperature: bool = False
    log_std_init: float = -2.0  # continuous-action artifact; unused for discrete actions

    def __post_init__(self):
        if not (0.0 < self.tau <= 1.0):
            raise ValueError("tau must be in (0, 1]")
