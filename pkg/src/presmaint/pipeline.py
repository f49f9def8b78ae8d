"""End-to-end wiring: sensor data -> RUL forecasts -> health MDP -> actions.

Phase 1 trains (or loads) the forecaster and predicts per-unit RUL series.
Phase 2 featurizes the predictions, calibrates the (10, 3, 10) decision
process, solves it, and recommends the policy action for each unit's most
recent state, cross-checked against the rule-based threshold recommender.

Calibration constants that are not externally configurable were chosen for
learnability of the resulting process: the effect model is deterministic and
transition smoothing is light, so per-step reward noise stays at the level
the prediction data itself carries.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import forecaster as fc
from . import ingest, mdp

# pipeline calibration constants (see module docstring)
CALIBRATION_SMOOTHING = 0.05
SYNTHESIS_SAMPLES_PER_STATE = 2000
PARTIAL_MAINTENANCE_RANKS = 3
PCA_COMPONENTS = 2
DEFAULT_RULE_THRESHOLD = 10.0


def predict_unit_sequences(
    model: fc.Forecaster, windows: Sequence[ingest.RulWindow]
) -> Dict[int, List[float]]:
    """Per-unit predicted-RUL series in cycle order."""
    out: Dict[int, List[float]] = {}
    for w in windows:
        out.setdefault(w.unit_id, []).append(model.predict(w.inputs))
    return out


def build_featurizer(
    sequences: Dict[int, List[float]], p: int = PCA_COMPONENTS
) -> mdp.StateFeaturizer:
    rows = np.concatenate([mdp.rul_features(seq) for seq in sequences.values()])
    ruls = np.concatenate([np.asarray(seq, dtype=np.float64) for seq in sequences.values()])
    return mdp.fit_pca(rows, p=p, rul_values=ruls)


def calibrate_from_sequences(
    sequences: Dict[int, List[float]],
    featurizer: mdp.StateFeaturizer,
    cost: Sequence[float] = mdp.DEFAULT_COST,
    downtime: Sequence[float] = mdp.DEFAULT_DOWNTIME,
    weights: Tuple[float, float, float] = (1.0, 1.0, 1.0),
    discount: float = 0.99,
    episode_len: int = 200,
) -> mdp.MdpSpec:
    """Calibrated decision process from predicted-RUL sequences."""
    observed = [mdp.discretize_sequence(featurizer, seq) for seq in sequences.values()]
    per_action = mdp.synthesize_action_outcomes(
        observed,
        featurizer.bin_centers,
        samples_per_state=SYNTHESIS_SAMPLES_PER_STATE,
        partial_ranks=PARTIAL_MAINTENANCE_RANKS,
    )
    with warnings.catch_warnings():
        # synthetic pairs cover every (state, action); stray uniform-row
        # warnings would only concern states absent from the data entirely
        warnings.simplefilter("ignore", UserWarning)
        return mdp.calibrate_mdp(
            per_action,
            cost=cost,
            downtime=downtime,
            weights=weights,
            bin_centers=featurizer.bin_centers,
            smoothing=CALIBRATION_SMOOTHING,
            discount=discount,
            episode_len=episode_len,
        )


@dataclass
class UnitRecommendation:
    unit_id: int
    end_cycle: int
    predicted_rul: float
    state_bin: int
    policy_action: int
    policy_action_name: str
    rule_based: str


@dataclass
class PipelineReport:
    recommendations: List[UnitRecommendation]
    policy: np.ndarray
    values: np.ndarray
    spec: mdp.MdpSpec = field(repr=False, default=None)
    featurizer: mdp.StateFeaturizer = field(repr=False, default=None)
    forecaster_rmse: Optional[float] = None


def recommend_for_units(
    model: fc.Forecaster,
    units: Sequence[ingest.UnitSeries],
    stats: ingest.NormStats,
    featurizer: mdp.StateFeaturizer,
    policy: Sequence[int],
    window_len: int,
    rul_cap: float,
    rule_threshold: float = DEFAULT_RULE_THRESHOLD,
) -> List[UnitRecommendation]:
    """Policy action for each unit's latest cycle (treated as `now`)."""
    out = []
    for unit in units:
        windows = ingest.make_windows(unit, stats, window_len, rul_cap)
        seq = [model.predict(w.inputs) for w in windows]
        features = mdp.rul_features(seq)
        state = mdp.discretize(featurizer, features[-1])
        action = int(policy[state])
        out.append(
            UnitRecommendation(
                unit_id=unit.unit_id,
                end_cycle=windows[-1].end_cycle,
                predicted_rul=seq[-1],
                state_bin=state,
                policy_action=action,
                policy_action_name=mdp.ACTION_NAMES[action],
                rule_based=mdp.rule_based_recommend(seq[-1], rule_threshold).value,
            )
        )
    return out


def run_pipeline(
    units: Sequence[ingest.UnitSeries],
    seed: int = 42,
    rul_cap: float = ingest.DEFAULT_RUL_CAP,
    window_len: int = ingest.DEFAULT_WINDOW_LEN,
    model_config: Optional[fc.TransformerConfig] = None,
    train_epochs: int = 8,
    lr: float = 1e-3,
    batch_size: int = 32,
    loss_kind: str = "mse",
    cost: Sequence[float] = mdp.DEFAULT_COST,
    downtime: Sequence[float] = mdp.DEFAULT_DOWNTIME,
    weights: Tuple[float, float, float] = (1.0, 1.0, 1.0),
    rule_threshold: float = DEFAULT_RULE_THRESHOLD,
    policy_override: Optional[Sequence[int]] = None,
    current_units: Optional[Sequence[ingest.UnitSeries]] = None,
) -> PipelineReport:
    """Full run: ingest -> forecast -> calibrate -> solve -> recommend.

    `units` is run-to-failure training data. `current_units` (default: the
    training units) are the series to recommend actions for, using each
    unit's last available cycle as the present moment.
    """
    stats = ingest.fit_normalizer(units)
    windows = ingest.make_all_windows(units, stats, window_len, rul_cap)
    if model_config is None:
        model_config = fc.TransformerConfig(window_len=window_len, rul_cap=rul_cap)
    model = fc.Forecaster.create(model_config, feature_dim=windows[0].inputs.shape[1], seed=seed)
    if train_epochs > 0:
        fc.train(model, windows, loss_kind=loss_kind, epochs=train_epochs, seed=seed,
                 lr=lr, batch_size=batch_size)
    sequences = predict_unit_sequences(model, windows)
    featurizer = build_featurizer(sequences)
    spec = calibrate_from_sequences(
        sequences, featurizer, cost=cost, downtime=downtime, weights=weights
    )
    values, policy = mdp.value_iteration(spec, tol=1e-8)
    if policy_override is not None:
        policy = np.asarray(policy_override, dtype=int)
    recommendations = recommend_for_units(
        model,
        current_units if current_units is not None else units,
        stats,
        featurizer,
        policy,
        window_len,
        rul_cap,
        rule_threshold,
    )
    return PipelineReport(
        recommendations=recommendations,
        policy=policy,
        values=values,
        spec=spec,
        featurizer=featurizer,
        forecaster_rmse=fc.evaluate(model, windows).rmse,
    )
