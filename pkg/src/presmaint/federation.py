"""Simulated federated training: K machines, parameter-mean aggregation,
ensemble prediction.

Machines exchange full parameter sets (not gradients) through an explicit
serialize/parse step at each dispatch and collect boundary, so a real
transport could replace the function call without changing semantics. With
uniform averaging, exchanging full parameters is equivalent to exchanging
deltas against the shared central state.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import forecaster as fc
from .artifacts import dumps_checkpoint, loads_checkpoint
from .ingest import RulWindow
from .numerics import Tensor, tensor


@dataclass(frozen=True)
class FederationConfig:
    n_machines: int = 4
    rounds: int = 2
    local_epochs: int = 2
    seed: int = 42
    lr: float = 1e-3
    batch_size: int = 32

    def __post_init__(self):
        if self.n_machines < 1:
            raise ValueError("n_machines must be >= 1")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")


Params = Dict[str, Tensor]


def local_update(
    central: fc.Forecaster,
    local_windows: Sequence[RulWindow],
    local_epochs: int,
    seed: int,
    lr: float = 1e-3,
    batch_size: int = 32,
    loss_kind: str = "mse",
) -> fc.Forecaster:
    """Train a copy of the central model on one machine's data."""
    model = central.copy()
    if local_epochs > 0 and local_windows:
        fc.train(
            model, local_windows, loss_kind=loss_kind, epochs=local_epochs,
            seed=seed, lr=lr, batch_size=batch_size,
        )
    return model


def aggregate(param_sets: Sequence[Params]) -> Params:
    """Element-wise arithmetic mean of each named parameter tensor."""
    if not param_sets:
        raise ValueError("aggregate requires at least one parameter set")
    reference = param_sets[0]
    for i, ps in enumerate(param_sets[1:], start=1):
        if set(ps) != set(reference):
            raise ValueError(f"machine {i}: parameter names differ from machine 0")
        for name, p in ps.items():
            if p.shape != reference[name].shape:
                raise ValueError(
                    f"machine {i}: parameter {name!r} shape {p.shape} "
                    f"!= machine 0 shape {reference[name].shape}"
                )
    out: Params = {}
    k = len(param_sets)
    for name in reference:
        stacked = np.stack([ps[name].data for ps in param_sets])
        # canonicalize the addition order so the mean is bit-identical under
        # any permutation of the machines
        np.ndarray.sort(stacked, axis=0)
        out[name] = tensor(np.add.reduce(stacked, axis=0) / k, requires_grad=True)
    return out


@dataclass
class FederatedEnsemble:
    members: List[fc.Forecaster]

    def __post_init__(self):
        if not self.members:
            raise ValueError("ensemble requires at least one member")
        cfg0 = self.members[0].config
        for m in self.members[1:]:
            if m.config != cfg0:
                raise ValueError("all ensemble members must share one configuration")


def ensemble_predict(ensemble: FederatedEnsemble, window: np.ndarray) -> float:
    """Arithmetic mean of member predictions."""
    preds = [m.predict(window) for m in ensemble.members]
    return float(np.mean(preds))


@dataclass
class FederationResult:
    central: fc.Forecaster
    metrics: List[tuple]  # (round, machine_id, local_rmse, central_rmse)
    final_predictions: List[List[float]] = field(default_factory=list)


def _through_wire(model: fc.Forecaster) -> fc.Forecaster:
    """Explicit serialization boundary standing in for a network transport."""
    return loads_checkpoint(dumps_checkpoint(model))


def run_federation(
    config: FederationConfig,
    datasets: Sequence[Sequence[RulWindow]],
    model_config: Optional[fc.TransformerConfig] = None,
    validation: Optional[Sequence[Sequence[RulWindow]]] = None,
) -> FederationResult:
    """rounds x (dispatch -> local update per machine -> aggregate).

    Machine k in round r trains with seed = config.seed + r*K + k, so the
    degenerate single-machine single-round run consumes exactly the stream of
    a plain training run with the same seed. Machines with empty data are
    skipped with a warning. After the last round the final central model
    produces per-machine prediction series.
    """
    if len(datasets) != config.n_machines:
        raise ValueError(f"expected {config.n_machines} datasets, got {len(datasets)}")
    non_empty = [d for d in datasets if d]
    if not non_empty:
        raise ValueError("all machines have empty datasets")
    if model_config is None:
        model_config = fc.TransformerConfig()
    feature_dim = non_empty[0][0].inputs.shape[1]
    if validation is None:
        validation = datasets
    central = fc.Forecaster.create(model_config, feature_dim, seed=config.seed)
    metrics: List[tuple] = []
    for rnd in range(config.rounds):
        local_models: List[fc.Forecaster] = []
        local_rmse: Dict[int, float] = {}
        for k, windows in enumerate(datasets):
            if not windows:
                warnings.warn(f"machine {k} has no data; skipped this round")
                continue
            dispatched = _through_wire(central)
            updated = local_update(
                dispatched, windows, config.local_epochs,
                seed=config.seed + rnd * config.n_machines + k,
                lr=config.lr, batch_size=config.batch_size,
            )
            updated = _through_wire(updated)
            local_models.append(updated)
            if validation[k]:
                local_rmse[k] = fc.evaluate(updated, validation[k]).rmse
        central = fc.Forecaster(
            config=model_config,
            feature_dim=feature_dim,
            params=aggregate([m.params for m in local_models]),
        )
        for k in range(config.n_machines):
            if k in local_rmse:
                central_rmse = fc.evaluate(central, validation[k]).rmse if validation[k] else float("nan")
                metrics.append((rnd, k, local_rmse[k], central_rmse))
    final_predictions = [
        [central.predict(w.inputs) for w in windows] for windows in datasets
    ]
    return FederationResult(central=central, metrics=metrics, final_predictions=final_predictions)
