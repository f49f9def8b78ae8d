from .buffer import ReplayBuffer, Transition
from .configs import DqnConfig, PpoConfig, SacConfig
from .dqn import DqnAgent, dqn_select, epsilon_schedule
from .harness import (
    AGENT_KINDS,
    TrainResult,
    evaluate_policy,
    make_env,
    train_agent,
)
from .nets import Mlp, one_hot
from .ppo import PpoAgent, gae, normalize_advantages
from .sac import SacAgent

__all__ = [
    "AGENT_KINDS",
    "DqnAgent",
    "DqnConfig",
    "Mlp",
    "PpoAgent",
    "PpoConfig",
    "ReplayBuffer",
    "SacAgent",
    "SacConfig",
    "TrainResult",
    "Transition",
    "dqn_select",
    "epsilon_schedule",
    "evaluate_policy",
    "gae",
    "make_env",
    "normalize_advantages",
    "one_hot",
    "train_agent",
]
