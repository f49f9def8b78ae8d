"""Discretized machine-health MDP.

Predicted-RUL sequences become feature rows (value, first difference,
trailing mean), a PCA featurizer projects them onto the leading component,
and equal-frequency decile binning yields 10 health states. Transition rows
are calibrated from observed state sequences per action with additive
smoothing; rewards combine expected RUL gain against action cost and
downtime through configurable weights. An exact value-iteration solver
provides the oracle policy the learning agents are measured against.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

N_STATES = 10
N_ACTIONS = 3
ACTION_NAMES = ("NoAction", "PartialMaintenance", "CompleteOverhaul")
DEFAULT_COST = (0.0, 1.0, 5.0)
DEFAULT_DOWNTIME = (0.0, 0.5, 3.0)
TRAILING_MEAN_WINDOW = 5


class Recommendation(enum.Enum):
    IMMEDIATE_MAINTENANCE = "ImmediateMaintenance"
    PERIODIC_INSPECTION = "PeriodicInspection"


def rule_based_recommend(predicted_rul: float, threshold: float) -> Recommendation:
    """Immediate maintenance iff the prediction falls strictly below the limit."""
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    if predicted_rul < threshold:
        return Recommendation.IMMEDIATE_MAINTENANCE
    return Recommendation.PERIODIC_INSPECTION


# ---------------------------------------------------------------------------
# featurization


def rul_features(rul_sequence: Sequence[float]) -> np.ndarray:
    """Per-step feature rows from a predicted-RUL series: the value itself,
    its one-step difference, and a trailing mean over the last 5 steps."""
    r = np.asarray(rul_sequence, dtype=np.float64)
    if r.ndim != 1 or r.size == 0:
        raise ValueError("rul_sequence must be a non-empty 1-D series")
    diff = np.zeros_like(r)
    diff[1:] = r[1:] - r[:-1]
    trailing = np.array(
        [r[max(0, i - TRAILING_MEAN_WINDOW + 1) : i + 1].mean() for i in range(r.size)]
    )
    return np.column_stack([r, diff, trailing])


@dataclass
class StateFeaturizer:
    components: np.ndarray  # [p x d] orthonormal rows, descending eigenvalue
    eigenvalues: np.ndarray  # [p]
    explained_variance_ratio: np.ndarray  # [p]
    mean: np.ndarray  # [d]
    bin_edges: np.ndarray  # 9 inner decile edges on the first component
    bin_centers: Optional[np.ndarray] = None  # mean calibration RUL per bin
    feature_window: int = TRAILING_MEAN_WINDOW

    def project(self, rows: np.ndarray) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        return (rows - self.mean) @ self.components.T


def fit_pca(
    feature_matrix: np.ndarray,
    p: int,
    rul_values: Optional[np.ndarray] = None,
    n_bins: int = N_STATES,
) -> StateFeaturizer:
    """PCA featurizer with decile state bins on the first component.

    Components are the top-p eigenvectors of the sample covariance, sorted by
    descending eigenvalue, with the sign fixed so each component's first
    nonzero coordinate is positive. If rul_values (aligned with the rows)
    are supplied, per-bin mean RUL values are recorded as bin centers.
    """
    X = np.asarray(feature_matrix, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < p + 1:
        raise ValueError(f"need at least p+1={p + 1} rows, got {X.shape}")
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / X.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    tol = max(1e-12, 1e-12 * abs(eigvals[0]))
    rank = int((eigvals > tol).sum())
    if p > rank:
        raise ValueError(f"requested {p} components but covariance rank is {rank}")
    components = eigvecs[:, :p].T.copy()
    for i in range(p):
        row = components[i]
        nz = np.nonzero(np.abs(row) > 1e-12)[0]
        if nz.size and row[nz[0]] < 0:
            components[i] = -row
    eigvals_p = eigvals[:p]
    total = eigvals.sum()
    ratio = eigvals_p / total if total > 0 else np.zeros(p)

    projected = (centered @ components.T)[:, 0]
    edges = np.percentile(projected, np.arange(1, n_bins) * (100.0 / n_bins))
    featurizer = StateFeaturizer(
        components=components,
        eigenvalues=eigvals_p,
        explained_variance_ratio=ratio,
        mean=mean,
        bin_edges=edges,
    )
    if rul_values is not None:
        rul_values = np.asarray(rul_values, dtype=np.float64)
        bins = np.clip(np.searchsorted(edges, projected, side="right"), 0, n_bins - 1)
        centers = np.empty(n_bins)
        overall = rul_values.mean()
        for b in range(n_bins):
            members = rul_values[bins == b]
            centers[b] = members.mean() if members.size else overall
        featurizer.bin_centers = centers
    return featurizer


def discretize(featurizer: StateFeaturizer, feature_row: np.ndarray) -> int:
    """State index in [0, 9]: project onto the first component and locate
    among the decile edges; out-of-range values clamp to the end bins."""
    value = float(featurizer.project(feature_row)[0, 0])
    n_bins = featurizer.bin_edges.size + 1
    return int(np.clip(np.searchsorted(featurizer.bin_edges, value, side="right"), 0, n_bins - 1))


def discretize_sequence(featurizer: StateFeaturizer, rul_sequence: Sequence[float]) -> List[int]:
    rows = rul_features(rul_sequence)
    return [discretize(featurizer, rows[i]) for i in range(rows.shape[0])]


# ---------------------------------------------------------------------------
# the MDP


@dataclass
class MdpSpec:
    transitions: np.ndarray  # [S x A x S]
    cost: np.ndarray  # [A]
    downtime: np.ndarray  # [A]
    rul_gain: np.ndarray  # [S x A] expected bin-center change
    alpha: float = 1.0
    beta: float = 1.0
    gamma_weight: float = 1.0
    discount: float = 0.99
    episode_len: int = 200
    bin_centers: Optional[np.ndarray] = None
    initial_dist: Optional[np.ndarray] = None

    def __post_init__(self):
        self.transitions = np.asarray(self.transitions, dtype=np.float64)
        self.cost = np.asarray(self.cost, dtype=np.float64)
        self.downtime = np.asarray(self.downtime, dtype=np.float64)
        self.rul_gain = np.asarray(self.rul_gain, dtype=np.float64)
        s, a, s2 = self.transitions.shape
        if s != s2:
            raise ValueError(f"transition tensor must be square in states, got {self.transitions.shape}")
        if np.any(self.transitions < 0):
            raise ValueError("transition probabilities must be non-negative")
        sums = self.transitions.sum(axis=2)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise ValueError("every transition row must sum to 1 within 1e-9")
        if not (0.0 <= self.discount < 1.0):
            raise ValueError(f"discount must be in [0, 1), got {self.discount}")
        if np.any(self.cost < 0) or np.any(self.downtime < 0):
            raise ValueError("cost and downtime must be non-negative")
        if self.initial_dist is None:
            self.initial_dist = np.full(s, 1.0 / s)
        else:
            self.initial_dist = np.asarray(self.initial_dist, dtype=np.float64)

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[1]


def calibrate_mdp(
    sequences_by_action: Sequence[Sequence[Sequence[int]]],
    cost: Sequence[float] = DEFAULT_COST,
    downtime: Sequence[float] = DEFAULT_DOWNTIME,
    weights: Tuple[float, float, float] = (1.0, 1.0, 1.0),
    bin_centers: Optional[np.ndarray] = None,
    n_states: int = N_STATES,
    smoothing: float = 1.0,
    discount: float = 0.99,
    episode_len: int = 200,
) -> MdpSpec:
    """Empirical transition tensor with additive smoothing.

    sequences_by_action[a] holds state sequences observed under action a;
    each consecutive pair contributes one (s, a, s') count. Rows are
    P[s][a][s'] = (count + smoothing) / (total + smoothing * n_states); a
    row with no observations at all becomes uniform, with a warning.

    rul_gain[s][a] is the expected bin-center change under P[s][a] when bin
    centers are available, otherwise zero. The episode initial-state
    distribution is calibrated from observed state occupancy: an episode
    models an attention window that may begin wherever a machine currently
    sits in its life, which also gives learning agents coverage of every
    health state.
    """
    n_actions = len(sequences_by_action)
    counts = np.zeros((n_states, n_actions, n_states))
    for a, sequences in enumerate(sequences_by_action):
        for seq in sequences:
            for s, s_next in zip(seq[:-1], seq[1:]):
                counts[s, a, s_next] += 1.0
    totals = counts.sum(axis=2)
    unobserved = [
        (s, a) for s in range(n_states) for a in range(n_actions) if totals[s, a] == 0
    ]
    if unobserved:
        warnings.warn(
            f"no observed transitions for (state, action) pairs {unobserved}; "
            "their rows default to uniform"
        )
    transitions = np.empty_like(counts)
    for s in range(n_states):
        for a in range(n_actions):
            if totals[s, a] == 0 and smoothing == 0:
                transitions[s, a] = np.full(n_states, 1.0 / n_states)
            else:
                transitions[s, a] = (counts[s, a] + smoothing) / (
                    totals[s, a] + smoothing * n_states
                )
    if bin_centers is not None:
        centers = np.asarray(bin_centers, dtype=np.float64)
        gain = np.einsum("sat,t->sa", transitions, centers) - centers[:, None]
    else:
        gain = np.zeros((n_states, n_actions))
    alpha, beta, gamma_weight = weights

    occupancy = np.zeros(n_states)
    for seq in sequences_by_action[0]:
        for s in seq:
            occupancy[s] += 1.0
    initial = occupancy / occupancy.sum() if occupancy.sum() > 0 else None
    return MdpSpec(
        transitions=transitions,
        cost=np.asarray(cost, dtype=np.float64),
        downtime=np.asarray(downtime, dtype=np.float64),
        rul_gain=gain,
        alpha=alpha,
        beta=beta,
        gamma_weight=gamma_weight,
        discount=discount,
        episode_len=episode_len,
        bin_centers=None if bin_centers is None else np.asarray(bin_centers, dtype=np.float64),
        initial_dist=initial,
    )


def reward(spec: MdpSpec, s: int, a: int, s_next: int) -> float:
    """Per-transition reward alpha*gain - beta*cost - gamma*downtime.

    With bin centers, the gain term is the realized center change
    center(s') - center(s); otherwise the expected-gain table entry is used
    (the two coincide in expectation by construction).
    """
    if spec.bin_centers is not None:
        gain = spec.bin_centers[s_next] - spec.bin_centers[s]
    else:
        gain = spec.rul_gain[s, a]
    return float(spec.alpha * gain - spec.beta * spec.cost[a] - spec.gamma_weight * spec.downtime[a])


def expected_reward(spec: MdpSpec, s: int, a: int) -> float:
    """Sum over successors of P(s'|s,a) * reward(s, a, s')."""
    return float(
        spec.alpha * spec.rul_gain[s, a]
        - spec.beta * spec.cost[a]
        - spec.gamma_weight * spec.downtime[a]
    )


def expected_reward_table(spec: MdpSpec) -> np.ndarray:
    return (
        spec.alpha * spec.rul_gain
        - spec.beta * spec.cost[None, :]
        - spec.gamma_weight * spec.downtime[None, :]
    )


def step(spec: MdpSpec, s: int, a: int, rng: np.random.Generator) -> Tuple[int, float]:
    """Sample a successor from P[s][a] and return it with the step reward."""
    s_next = int(rng.choice(spec.n_states, p=spec.transitions[s, a]))
    return s_next, reward(spec, s, a, s_next)


# ---------------------------------------------------------------------------
# exact solvers


def value_iteration(spec: MdpSpec, tol: float = 1e-8, max_iter: int = 1_000_000):
    """Bellman-optimality fixed point from V=0.

    Stops when the sup-norm step falls below tol*(1-g)/(2g), which bounds the
    Bellman residual of the returned V below tol. Greedy ties break toward
    the lowest action index.
    """
    g = spec.discount
    r_sa = expected_reward_table(spec)
    threshold = tol if g == 0.0 else tol * (1.0 - g) / (2.0 * g)
    v = np.zeros(spec.n_states)
    for _ in range(max_iter):
        q = r_sa + g * np.einsum("sat,t->sa", spec.transitions, v)
        v_new = q.max(axis=1)
        delta = np.abs(v_new - v).max()
        v = v_new
        if delta < threshold:
            break
    q = r_sa + g * np.einsum("sat,t->sa", spec.transitions, v)
    policy = q.argmax(axis=1)
    return v, policy


def bellman_residual(spec: MdpSpec, v: np.ndarray) -> float:
    g = spec.discount
    q = expected_reward_table(spec) + g * np.einsum("sat,t->sa", spec.transitions, v)
    return float(np.abs(q.max(axis=1) - v).max())


def policy_evaluation(spec: MdpSpec, policy: Sequence[int], tol: float = 1e-8) -> np.ndarray:
    """V^pi via the exact linear system (I - g P_pi) V = R_pi."""
    policy = np.asarray(policy, dtype=int)
    if policy.shape != (spec.n_states,) or np.any(policy < 0) or np.any(policy >= spec.n_actions):
        raise ValueError("policy must map every state to a valid action")
    idx = np.arange(spec.n_states)
    p_pi = spec.transitions[idx, policy]
    r_pi = expected_reward_table(spec)[idx, policy]
    return np.linalg.solve(np.eye(spec.n_states) - spec.discount * p_pi, r_pi)


def expected_episode_return(spec: MdpSpec, policy: Sequence[int]) -> float:
    """Exact expected undiscounted return of one episode under the policy,
    starting from the spec's initial distribution."""
    policy = np.asarray(policy, dtype=int)
    idx = np.arange(spec.n_states)
    p_pi = spec.transitions[idx, policy]
    r_pi = expected_reward_table(spec)[idx, policy]
    occupancy = spec.initial_dist.copy()
    total = 0.0
    for _ in range(spec.episode_len):
        total += float(occupancy @ r_pi)
        occupancy = occupancy @ p_pi
    return total


# ---------------------------------------------------------------------------
# bundled specs and environment


def toy_two_state_spec() -> MdpSpec:
    """Two states (healthy, failed) x two actions (keep, repair).

    keep: healthy stays healthy for +1, failed stays failed for 0.
    repair: healthy stays healthy for +0.5, failed returns to healthy for -1.
    With discount 0.9 the optimal values are (10, 8) and the optimal policy
    is (keep, repair).
    """
    transitions = np.array(
        [
            [[1.0, 0.0], [1.0, 0.0]],  # from healthy: keep, repair
            [[0.0, 1.0], [1.0, 0.0]],  # from failed: keep, repair
        ]
    )
    gain = np.array([[1.0, 0.5], [0.0, -1.0]])
    return MdpSpec(
        transitions=transitions,
        cost=np.zeros(2),
        downtime=np.zeros(2),
        rul_gain=gain,
        discount=0.9,
        episode_len=200,
    )


TOY_OPTIMAL_VALUES = (10.0, 8.0)
TOY_OPTIMAL_POLICY = (0, 1)


def random_spec(
    rng: np.random.Generator,
    n_states: int = N_STATES,
    n_actions: int = N_ACTIONS,
    discount: Optional[float] = None,
) -> MdpSpec:
    """Random valid spec for property tests."""
    transitions = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    gain = rng.normal(0.0, 5.0, size=(n_states, n_actions))
    cost = rng.uniform(0.0, 3.0, size=n_actions)
    downtime = rng.uniform(0.0, 2.0, size=n_actions)
    if discount is None:
        discount = float(rng.uniform(0.8, 0.99))
    return MdpSpec(
        transitions=transitions,
        cost=cost,
        downtime=downtime,
        rul_gain=gain,
        discount=discount,
    )


class MaintenanceEnv:
    """Episodic sampler over an MdpSpec; owns its rng, single-context."""

    def __init__(self, spec: MdpSpec, rng: np.random.Generator):
        self.spec = spec
        self.rng = rng
        self.state = 0
        self.steps = 0

    def reset(self) -> int:
        self.state = int(self.rng.choice(self.spec.n_states, p=self.spec.initial_dist))
        self.steps = 0
        return self.state

    def step(self, action: int) -> Tuple[int, float, bool]:
        s_next, r = step(self.spec, self.state, action, self.rng)
        self.state = s_next
        self.steps += 1
        done = self.steps >= self.spec.episode_len
        return s_next, r, done


# ---------------------------------------------------------------------------
# action-effect synthesis for calibration


def synthesize_action_outcomes(
    no_action_sequences: Sequence[Sequence[int]],
    bin_centers: np.ndarray,
    samples_per_state: int = 2000,
    partial_ranks: int = 3,
    n_states: int = N_STATES,
) -> List[List[List[int]]]:
    """Per-action state sequences for calibration.

    Run-to-failure data only ever shows the no-action dynamics, so outcomes
    for the maintenance actions are synthesized with a deterministic effect
    model over the health ranking implied by bin centers (higher mean RUL =
    healthier): partial maintenance restores `partial_ranks` decile ranks, a
    complete overhaul restores the healthiest rank. Deterministic effects
    keep the per-step reward variance down to what the data itself carries,
    which is what makes the calibrated process learnable by sample-based
    agents.
    """
    order = np.argsort(-np.asarray(bin_centers))  # order[0] = healthiest state
    rank_of = np.empty(n_states, dtype=int)
    rank_of[order] = np.arange(n_states)
    partial: List[List[int]] = []
    overhaul: List[List[int]] = []
    for s in range(n_states):
        improved = int(order[max(0, rank_of[s] - partial_ranks)])
        partial.extend([[s, improved]] * samples_per_state)
        overhaul.extend([[s, int(order[0])]] * samples_per_state)
    return [list(map(list, no_action_sequences)), partial, overhaul]
