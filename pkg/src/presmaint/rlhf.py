"""Human-feedback reward shaping around the agent training loop.

Each sampled step raises a feedback event for the (state, action) the agent
just took; a label worth r_positive, r_negative, or 0 is folded into the
step reward as base + delta * label_value. Labels come from one of three
providers: a simulated oracle that endorses actions matching the optimal
policy, a replay of previously recorded labels, or a live channel a human
answers through the service API (blocking, with a timeout that resolves the
event as unanswered).

Feedback sampling draws from its own random substream, so enabling the
feedback path never perturbs the agent's exploration or replay streams: a
run with delta=0 is bit-identical to the plain training run under the same
seed.
"""

from __future__ import annotations

import enum
import threading
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import numerics as nx
from .agents import TrainResult, train_agent
from .mdp import MaintenanceEnv


class Label(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NONE = "none"


class Source(enum.Enum):
    HUMAN = "human"
    ORACLE = "oracle"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class FeedbackConfig:
    r_positive: float = 1.0
    r_negative: float = -1.0
    delta: float = 0.5
    mode: str = "simulated"  # or "live"
    live_timeout: float = 60.0  # seconds

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        if self.mode not in ("simulated", "live"):
            raise ValueError(f"mode must be 'simulated' or 'live', got {self.mode!r}")


@dataclass
class FeedbackEvent:
    event_id: str
    run_id: str
    episode: int
    step: int
    state: int
    action: int
    label: Label = Label.NONE
    source: Source = Source.TIMEOUT
    latency_ms: float = 0.0


def human_reward(label: Label, config: FeedbackConfig) -> float:
    """r_positive / r_negative / 0 by label."""
    if label is Label.POSITIVE:
        return config.r_positive
    if label is Label.NEGATIVE:
        return config.r_negative
    return 0.0


def shape_reward(base_reward: float, label: Label, config: FeedbackConfig) -> float:
    """base + delta * human term; exactly the base when shaping is inert."""
    if config.delta == 0.0 or label is Label.NONE:
        return base_reward
    return base_reward + config.delta * human_reward(label, config)


def oracle_feedback(s: int, a: int, pi_star: Sequence[int]) -> Label:
    """Positive iff the action matches the optimal policy at the state."""
    return Label.POSITIVE if int(a) == int(pi_star[s]) else Label.NEGATIVE


class SubmitStatus(enum.Enum):
    ACCEPTED = "accepted"
    UNKNOWN_EVENT = "unknown_event"
    ALREADY_LABELED = "already_labeled"


class FeedbackChannel:
    """Synchronized exchange between one training loop and label submitters.

    At most one event is pending at any instant; the trainer blocks in
    publish_and_wait until a label arrives or the timeout lapses. Label
    submission is first-write-wins: late or duplicate submissions are
    rejected, including after a timeout resolved the event as NONE.
    """

    def __init__(self):
        self._cv = threading.Condition()
        self._pending: Optional[FeedbackEvent] = None
        self._label: Optional[Label] = None
        self._resolved: dict[str, Label] = {}
        self._closed = False

    def publish_and_wait(self, event: FeedbackEvent, timeout: float) -> Tuple[Label, Source, float]:
        start = time.monotonic()
        with self._cv:
            if self._closed:
                warnings.warn("feedback channel closed; continuing without a label")
                return Label.NONE, Source.TIMEOUT, 0.0
            self._pending = event
            self._label = None
            self._cv.notify_all()
            deadline = start + timeout
            while self._label is None and not self._closed:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    break
                self._cv.wait(remaining)
            label = self._label
            self._pending = None
            self._label = None
            elapsed_ms = (time.monotonic() - start) * 1000.0
            if label is None:
                self._resolved[event.event_id] = Label.NONE
                if self._closed:
                    warnings.warn("feedback channel closed; continuing without a label")
                return Label.NONE, Source.TIMEOUT, elapsed_ms
            self._resolved[event.event_id] = label
            return label, Source.HUMAN, elapsed_ms

    def pending(self) -> Optional[FeedbackEvent]:
        with self._cv:
            return self._pending

    def submit(self, event_id: str, label: Label) -> SubmitStatus:
        with self._cv:
            if self._pending is not None and self._pending.event_id == event_id:
                if self._label is not None:
                    return SubmitStatus.ALREADY_LABELED
                self._label = label
                self._cv.notify_all()
                return SubmitStatus.ACCEPTED
            if event_id in self._resolved:
                return SubmitStatus.ALREADY_LABELED
            return SubmitStatus.UNKNOWN_EVENT

    def close(self):
        with self._cv:
            self._closed = True
            self._cv.notify_all()


# providers: event -> (label, source, latency_ms)
Provider = Callable[[FeedbackEvent], Tuple[Label, Source, float]]


class SimulatedOracleProvider:
    """Expert stand-in: endorses actions agreeing with the optimal policy."""

    def __init__(self, pi_star: Sequence[int]):
        self.pi_star = [int(a) for a in pi_star]

    def __call__(self, event: FeedbackEvent) -> Tuple[Label, Source, float]:
        return oracle_feedback(event.state, event.action, self.pi_star), Source.ORACLE, 0.0


class ReplayProvider:
    """Replays a recorded label sequence in order; exhausts to NONE."""

    def __init__(self, labels: Sequence[Label]):
        self.labels = list(labels)
        self._i = 0

    def __call__(self, event: FeedbackEvent) -> Tuple[Label, Source, float]:
        if self._i >= len(self.labels):
            return Label.NONE, Source.TIMEOUT, 0.0
        label = self.labels[self._i]
        self._i += 1
        return label, Source.HUMAN, 0.0


class LiveProvider:
    def __init__(self, channel: FeedbackChannel, timeout: float):
        self.channel = channel
        self.timeout = timeout

    def __call__(self, event: FeedbackEvent) -> Tuple[Label, Source, float]:
        return self.channel.publish_and_wait(event, self.timeout)


def request_feedback(channel: FeedbackChannel, event: FeedbackEvent, timeout: float) -> Label:
    """Publish an event and block for its label (or NONE on timeout)."""
    label, source, latency = channel.publish_and_wait(event, timeout)
    event.label, event.source, event.latency_ms = label, source, latency
    return label


@dataclass
class ShapingRecord:
    event_id: str
    base_reward: float
    shaped_reward: float


@dataclass
class RlhfResult:
    train: TrainResult
    events: List[FeedbackEvent] = field(default_factory=list)
    shaping: List[ShapingRecord] = field(default_factory=list)


def feedback_log_csv(events: Sequence[FeedbackEvent]) -> str:
    lines = ["event_id,episode,step,state,action,label,source,latency_ms"]
    for e in events:
        lines.append(
            f"{e.event_id},{e.episode},{e.step},{e.state},{e.action},"
            f"{e.label.value},{e.source.value},{e.latency_ms:.3f}"
        )
    return "\n".join(lines) + "\n"


def shaping_log_csv(records: Sequence[ShapingRecord]) -> str:
    from .artifacts import fmt_float

    lines = ["event_id,base_reward,shaped_reward"]
    for r in records:
        lines.append(f"{r.event_id},{fmt_float(r.base_reward)},{fmt_float(r.shaped_reward)}")
    return "\n".join(lines) + "\n"


def train_rlhf(
    agent_kind: str,
    env: MaintenanceEnv,
    feedback_config: FeedbackConfig,
    budget_steps: int,
    seed: int,
    feedback_rate: float,
    provider: Provider,
    agent_config=None,
    run_id: str = "run",
    demo_policy: Optional[Sequence[int]] = None,
    on_episode: Optional[Callable[[int, float, float], None]] = None,
) -> RlhfResult:
    """train_agent with rewards passed through shape_reward on sampled steps.

    feedback_rate in [0, 1] is the fraction of steps on which a label is
    requested; sampling uses its own substream of the seed.
    """
    if not (0.0 <= feedback_rate <= 1.0):
        raise ValueError(f"feedback_rate must be in [0, 1], got {feedback_rate}")
    sample_rng = nx.substream(seed, "feedback-sampling")
    events: List[FeedbackEvent] = []
    shaping: List[ShapingRecord] = []
    counter = [0]

    def hook(episode: int, global_step: int, s: int, a: int, base_r: float) -> float:
        if feedback_rate <= 0.0 or sample_rng.random() >= feedback_rate:
            return base_r
        event = FeedbackEvent(
            event_id=f"{run_id}-{counter[0]:06d}",
            run_id=run_id,
            episode=episode,
            step=global_step,
            state=s,
            action=a,
        )
        counter[0] += 1
        label, source, latency = provider(event)
        event.label, event.source, event.latency_ms = label, source, latency
        shaped = shape_reward(base_r, label, feedback_config)
        events.append(event)
        shaping.append(ShapingRecord(event.event_id, base_r, shaped))
        return shaped

    result = train_agent(
        agent_kind,
        env,
        budget_steps,
        seed,
        config=agent_config,
        reward_hook=hook,
        demo_policy=demo_policy,
        on_episode=on_episode,
    )
    return RlhfResult(train=result, events=events, shaping=shaping)


def load_demo_policy(path) -> List[int]:
    """state -> action warm-start table: CSV rows `state,action`."""
    lines = [ln for ln in open(path).read().splitlines() if ln.strip()]
    start = 1 if lines and not lines[0].split(",")[0].isdigit() else 0
    pairs = sorted(
        (int(ln.split(",")[0]), int(ln.split(",")[1])) for ln in lines[start:]
    )
    return [a for _, a in pairs]
