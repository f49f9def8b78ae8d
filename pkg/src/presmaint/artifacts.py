"""On-disk artifact formats shared by the CLI, the service, and federation.

All documents are JSON with lexicographically ordered keys and floats
rendered with 17 significant digits, so identical values always serialize to
identical bytes and round-trip exactly. CSV files use the same float
rendering. None of the formats embed timestamps.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np

from .forecaster import Forecaster, config_from_dict, config_to_dict
from .ingest import NormStats, RulWindow
from .numerics import Tensor, tensor

CHECKPOINT_VERSION = 1

STATS_FILE = "stats.json"
WINDOWS_FILE = "windows.csv"
MODEL_FILE = "model.ckpt.json"
MDP_FILE = "mdp.spec.json"
POLICY_FILE = "policy.csv"
CURVE_FILE = "curve.csv"


def fmt_float(v: float) -> str:
    """17-significant-digit rendering that still parses back as a float."""
    s = format(float(v), ".17g")
    if not any(c in s for c in ".eEn"):
        s += ".0"
    return s


def _emit(obj, out: List[str]) -> None:
    if isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if i:
                out.append(",")
            out.append(json.dumps(key))
            out.append(":")
            _emit(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _emit(item, out)
        out.append("]")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(fmt_float(obj))
    elif obj is None:
        out.append("null")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    else:
        raise TypeError(f"cannot serialize {type(obj)!r}")


def dumps_document(obj: dict) -> str:
    """Deterministic JSON: sorted keys, 17-digit floats, trailing newline."""
    parts: List[str] = []
    _emit(obj, parts)
    return "".join(parts) + "\n"


# ---------------------------------------------------------------------------
# forecaster checkpoints


def checkpoint_document(model: Forecaster) -> dict:
    params = {
        name: {"shape": list(p.shape), "data": p.data.reshape(-1).tolist()}
        for name, p in model.params.items()
    }
    return {
        "format_version": CHECKPOINT_VERSION,
        "config": config_to_dict(model.config),
        "feature_dim": model.feature_dim,
        "params": params,
    }


def dumps_checkpoint(model: Forecaster) -> str:
    return dumps_document(checkpoint_document(model))


def loads_checkpoint(text: str) -> Forecaster:
    doc = json.loads(text)
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('format_version')!r}")
    config = config_from_dict(doc["config"])
    params: Dict[str, Tensor] = {}
    for name, entry in doc["params"].items():
        arr = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        params[name] = tensor(arr, requires_grad=True)
    return Forecaster(config=config, feature_dim=int(doc["feature_dim"]), params=params)


def save_checkpoint(model: Forecaster, path: Path) -> None:
    Path(path).write_text(dumps_checkpoint(model))


def load_checkpoint(path: Path) -> Forecaster:
    return loads_checkpoint(Path(path).read_text())


# ---------------------------------------------------------------------------
# ingest artifacts


def stats_document(stats: NormStats, window_len: int, rul_cap: float) -> dict:
    return {
        "format_version": 1,
        "mean": stats.mean.tolist(),
        "std": stats.std.tolist(),
        "dropped": list(stats.dropped),
        "n_features_in": stats.n_features_in,
        "window_len": window_len,
        "rul_cap": rul_cap,
    }


def save_stats(stats: NormStats, window_len: int, rul_cap: float, path: Path) -> None:
    Path(path).write_text(dumps_document(stats_document(stats, window_len, rul_cap)))


def load_stats(path: Path) -> tuple[NormStats, int, float]:
    doc = json.loads(Path(path).read_text())
    stats = NormStats(
        mean=np.array(doc["mean"], dtype=np.float64),
        std=np.array(doc["std"], dtype=np.float64),
        dropped=[int(i) for i in doc["dropped"]],
        n_features_in=int(doc["n_features_in"]),
    )
    return stats, int(doc["window_len"]), float(doc["rul_cap"])


def windows_csv(windows: Sequence[RulWindow]) -> str:
    if not windows:
        return "unit_id,end_cycle,target_rul\n"
    w0 = windows[0]
    n, f = w0.inputs.shape
    header = ["unit_id", "end_cycle", "target_rul"]
    header += [f"x{t}_{j}" for t in range(n) for j in range(f)]
    lines = [",".join(header)]
    for w in windows:
        fields = [str(w.unit_id), str(w.end_cycle), fmt_float(w.target_rul)]
        fields += [fmt_float(v) for v in w.inputs.reshape(-1)]
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def save_windows(windows: Sequence[RulWindow], path: Path) -> None:
    Path(path).write_text(windows_csv(windows))


def load_windows(path: Path) -> List[RulWindow]:
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    if len(header) <= 3:
        return []
    last = header[-1]  # x{t}_{j}
    t_max, j_max = (int(v) for v in last[1:].split("_"))
    shape = (t_max + 1, j_max + 1)
    out = []
    for line in lines[1:]:
        if not line:
            continue
        fields = line.split(",")
        out.append(
            RulWindow(
                inputs=np.array([float(v) for v in fields[3:]], dtype=np.float64).reshape(shape),
                target_rul=float(fields[2]),
                unit_id=int(fields[0]),
                end_cycle=int(fields[1]),
            )
        )
    return out


# ---------------------------------------------------------------------------
# mdp specs


def mdp_document(spec) -> dict:
    """Fixed-field document: dimensions, transitions flattened state-major
    (then action, then successor), tables, weights."""
    return {
        "format_version": 1,
        "n_states": spec.n_states,
        "n_actions": spec.n_actions,
        "transitions": spec.transitions.reshape(-1).tolist(),
        "cost": spec.cost.tolist(),
        "downtime": spec.downtime.tolist(),
        "rul_gain": spec.rul_gain.reshape(-1).tolist(),
        "alpha": spec.alpha,
        "beta": spec.beta,
        "gamma_weight": spec.gamma_weight,
        "discount": spec.discount,
        "episode_len": spec.episode_len,
        "bin_centers": None if spec.bin_centers is None else spec.bin_centers.tolist(),
        "initial_dist": spec.initial_dist.tolist(),
    }


def dumps_mdp(spec) -> str:
    return dumps_document(mdp_document(spec))


def loads_mdp(text: str):
    from .mdp import MdpSpec

    doc = json.loads(text)
    s, a = int(doc["n_states"]), int(doc["n_actions"])
    return MdpSpec(
        transitions=np.array(doc["transitions"], dtype=np.float64).reshape(s, a, s),
        cost=np.array(doc["cost"], dtype=np.float64),
        downtime=np.array(doc["downtime"], dtype=np.float64),
        rul_gain=np.array(doc["rul_gain"], dtype=np.float64).reshape(s, a),
        alpha=float(doc["alpha"]),
        beta=float(doc["beta"]),
        gamma_weight=float(doc["gamma_weight"]),
        discount=float(doc["discount"]),
        episode_len=int(doc["episode_len"]),
        bin_centers=None
        if doc["bin_centers"] is None
        else np.array(doc["bin_centers"], dtype=np.float64),
        initial_dist=np.array(doc["initial_dist"], dtype=np.float64),
    )


def save_mdp(spec, path: Path) -> None:
    Path(path).write_text(dumps_mdp(spec))


def load_mdp(path: Path):
    return loads_mdp(Path(path).read_text())


# ---------------------------------------------------------------------------
# featurizers


def featurizer_document(f) -> dict:
    return {
        "format_version": 1,
        "components": f.components.tolist(),
        "eigenvalues": f.eigenvalues.tolist(),
        "explained_variance_ratio": f.explained_variance_ratio.tolist(),
        "mean": f.mean.tolist(),
        "bin_edges": f.bin_edges.tolist(),
        "bin_centers": None if f.bin_centers is None else f.bin_centers.tolist(),
        "feature_window": f.feature_window,
    }


def save_featurizer(f, path: Path) -> None:
    Path(path).write_text(dumps_document(featurizer_document(f)))


def load_featurizer(path: Path):
    from .mdp import StateFeaturizer

    doc = json.loads(Path(path).read_text())
    return StateFeaturizer(
        components=np.array(doc["components"], dtype=np.float64),
        eigenvalues=np.array(doc["eigenvalues"], dtype=np.float64),
        explained_variance_ratio=np.array(doc["explained_variance_ratio"], dtype=np.float64),
        mean=np.array(doc["mean"], dtype=np.float64),
        bin_edges=np.array(doc["bin_edges"], dtype=np.float64),
        bin_centers=None
        if doc["bin_centers"] is None
        else np.array(doc["bin_centers"], dtype=np.float64),
        feature_window=int(doc["feature_window"]),
    )


def load_policy_csv(path: Path) -> list[int]:
    lines = Path(path).read_text().splitlines()
    pairs = []
    for line in lines[1:]:
        if line.strip():
            fields = line.split(",")
            pairs.append((int(fields[0]), int(fields[1])))
    pairs.sort()
    return [a for _, a in pairs]


# ---------------------------------------------------------------------------
# curves and tables


def eval_curve_csv(rows: Sequence[tuple]) -> str:
    lines = ["unit_id,end_cycle,true_rul,pred_rul"]
    for unit_id, end_cycle, true_rul, pred in rows:
        lines.append(f"{unit_id},{end_cycle},{fmt_float(true_rul)},{fmt_float(pred)}")
    return "\n".join(lines) + "\n"


def learning_curve_csv(curve: Sequence[tuple]) -> str:
    """Rows of (episode, total_reward, epsilon_or_entropy)."""
    lines = ["episode,total_reward,epsilon_or_entropy"]
    for episode, total, aux in curve:
        lines.append(f"{episode},{fmt_float(total)},{fmt_float(aux)}")
    return "\n".join(lines) + "\n"


def loss_history_csv(history: Sequence[float]) -> str:
    lines = ["epoch,loss"]
    for epoch, loss in enumerate(history):
        lines.append(f"{epoch},{fmt_float(loss)}")
    return "\n".join(lines) + "\n"


def policy_csv(policy: Sequence[int], values: Sequence[float]) -> str:
    """One row per state: the chosen action and its value (Q or logit)."""
    lines = ["state,action,q_or_logits"]
    for s, (a, v) in enumerate(zip(policy, values)):
        lines.append(f"{s},{int(a)},{fmt_float(v)}")
    return "\n".join(lines) + "\n"


def federation_metrics_csv(rows: Sequence[tuple]) -> str:
    """Rows of (round, machine_id, local_rmse, central_rmse)."""
    lines = ["round,machine_id,local_rmse,central_rmse"]
    for rnd, machine, local, central in rows:
        lines.append(f"{rnd},{machine},{fmt_float(local)},{fmt_float(central)}")
    return "\n".join(lines) + "\n"
