"""Encoder-decoder attention model for RUL regression.

The default inference path is encoder-only: embed the sensor window, add
sinusoidal position codes, run L blocks of (multi-head self-attention ->
add&norm -> position-wise FFN -> add&norm), mean-pool the hidden states and
squash a linear readout through a sigmoid scaled by the RUL cap, so estimates
stay strictly inside (0, cap). A masked-self-attention + cross-attention
decoder path is available behind ``use_decoder``.

Scores are scaled by 1/sqrt(d_k); per-head attention weights are exposed for
inspection, and causally masked positions carry weight exactly 0.0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import numerics as nx
from .ingest import DEFAULT_RUL_CAP, RulWindow
from .numerics import Tensor


class TrainingError(RuntimeError):
    """Training aborted (non-finite loss or gradients)."""


@dataclass(frozen=True)
class TransformerConfig:
    d_model: int = 32
    n_heads: int = 4
    d_k: int = 8
    d_v: int = 8
    n_layers: int = 2
    d_ff: int = 64
    window_len: int = 30
    dropout: float = 0.1
    use_decoder: bool = False
    rul_cap: float = DEFAULT_RUL_CAP

    def __post_init__(self):
        if self.d_model != self.n_heads * self.d_k:
            raise ValueError(
                f"d_model ({self.d_model}) must equal n_heads*d_k ({self.n_heads}*{self.d_k})"
            )
        if self.d_k < 1 or self.d_v < 1:
            raise ValueError("d_k and d_v must be >= 1")
        if self.n_layers < 1:
            raise ValueError("n_layers must be >= 1")


@dataclass
class AttentionOutput:
    combined: Tensor  # [n x d_model] after head concat + output projection
    head_values: List[Tensor]  # per head, [n x d_v]
    weights: List[Tensor]  # per head, [n_queries x n_keys]


Params = Dict[str, Tensor]


def positional_encoding(n: int, d_model: int) -> Tensor:
    """Fixed sinusoidal position codes: sin on even columns, cos on odd."""
    if n < 1 or d_model < 1:
        raise ValueError("positional_encoding needs n, d_model >= 1")
    pos = np.arange(n, dtype=np.float64).reshape(-1, 1)
    idx = np.arange(d_model, dtype=np.float64)
    angle = pos / np.power(10000.0, 2.0 * np.floor(idx / 2.0) / d_model)
    pe = np.where(idx % 2 == 0, np.sin(angle), np.cos(angle))
    return nx.tensor(pe)


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def _init_attention(params: Params, prefix: str, cfg: TransformerConfig, rng) -> None:
    for h in range(cfg.n_heads):
        params[f"{prefix}.h{h}.wq"] = nx.tensor(_glorot(rng, cfg.d_model, cfg.d_k), True)
        params[f"{prefix}.h{h}.wk"] = nx.tensor(_glorot(rng, cfg.d_model, cfg.d_k), True)
        params[f"{prefix}.h{h}.wv"] = nx.tensor(_glorot(rng, cfg.d_model, cfg.d_v), True)
    params[f"{prefix}.wo"] = nx.tensor(
        _glorot(rng, cfg.n_heads * cfg.d_v, cfg.d_model), True
    )


def _init_ln(params: Params, prefix: str, d: int) -> None:
    params[f"{prefix}.g"] = nx.tensor(np.ones((1, d)), True)
    params[f"{prefix}.b"] = nx.tensor(np.zeros((1, d)), True)


def _init_ffn(params: Params, prefix: str, d: int, d_ff: int, rng) -> None:
    params[f"{prefix}.w1"] = nx.tensor(_glorot(rng, d, d_ff), True)
    params[f"{prefix}.b1"] = nx.tensor(np.zeros((1, d_ff)), True)
    params[f"{prefix}.w2"] = nx.tensor(_glorot(rng, d_ff, d), True)
    params[f"{prefix}.b2"] = nx.tensor(np.zeros((1, d)), True)


def init_params(cfg: TransformerConfig, feature_dim: int, seed: int) -> Params:
    """All model weights, seeded; parameter names are stable across runs."""
    rng = nx.substream(seed, "forecaster-init")
    params: Params = {}
    params["embed.w"] = nx.tensor(_glorot(rng, feature_dim, cfg.d_model), True)
    params["embed.b"] = nx.tensor(np.zeros((1, cfg.d_model)), True)
    for l in range(cfg.n_layers):
        _init_attention(params, f"enc{l}.attn", cfg, rng)
        _init_ln(params, f"enc{l}.ln1", cfg.d_model)
        _init_ffn(params, f"enc{l}.ffn", cfg.d_model, cfg.d_ff, rng)
        _init_ln(params, f"enc{l}.ln2", cfg.d_model)
    if cfg.use_decoder:
        params["dec_embed.w"] = nx.tensor(_glorot(rng, 1, cfg.d_model), True)
        params["dec_embed.b"] = nx.tensor(np.zeros((1, cfg.d_model)), True)
        for l in range(cfg.n_layers):
            _init_attention(params, f"dec{l}.self", cfg, rng)
            _init_ln(params, f"dec{l}.ln1", cfg.d_model)
            _init_attention(params, f"dec{l}.cross", cfg, rng)
            _init_ln(params, f"dec{l}.ln2", cfg.d_model)
            _init_ffn(params, f"dec{l}.ffn", cfg.d_model, cfg.d_ff, rng)
            _init_ln(params, f"dec{l}.ln3", cfg.d_model)
    params["head.w"] = nx.tensor(_glorot(rng, cfg.d_model, 1), True)
    params["head.b"] = nx.tensor(np.zeros((1, 1)), True)
    return params


def clone_params(params: Params) -> Params:
    return {k: nx.tensor(v.data.copy(), requires_grad=v.requires_grad) for k, v in params.items()}


@dataclass
class Forecaster:
    config: TransformerConfig
    feature_dim: int
    params: Params = field(repr=False)

    @classmethod
    def create(cls, config: TransformerConfig, feature_dim: int, seed: int) -> "Forecaster":
        return cls(config=config, feature_dim=feature_dim, params=init_params(config, feature_dim, seed))

    def copy(self) -> "Forecaster":
        return Forecaster(config=self.config, feature_dim=self.feature_dim, params=clone_params(self.params))

    def predict(self, window: np.ndarray) -> float:
        return forward_rul(self.config, self.params, window).item()


def causal_mask(n: int) -> np.ndarray:
    """True above the diagonal: position i may not attend to j > i."""
    return np.triu(np.ones((n, n), dtype=bool), k=1)


def _attention(
    query_src: Tensor,
    key_src: Tensor,
    params: Params,
    prefix: str,
    n_heads: int,
    d_k: int,
    mask: Optional[np.ndarray],
) -> AttentionOutput:
    inv_sqrt = 1.0 / math.sqrt(d_k)
    head_values, weights, head_outs = [], [], []
    for h in range(n_heads):
        q = nx.matmul(query_src, params[f"{prefix}.h{h}.wq"])
        k = nx.matmul(key_src, params[f"{prefix}.h{h}.wk"])
        v = nx.matmul(key_src, params[f"{prefix}.h{h}.wv"])
        scores = nx.scale(nx.matmul(q, nx.transpose(k)), inv_sqrt)
        alpha = nx.softmax_rows(scores, mask=mask)
        out = nx.matmul(alpha, v)
        weights.append(alpha)
        head_values.append(out)
        head_outs.append(out)
    combined = nx.matmul(nx.concat(head_outs, axis=1), params[f"{prefix}.wo"])
    return AttentionOutput(combined=combined, head_values=head_values, weights=weights)


def self_attention(
    x: Tensor, params: Params, prefix: str, cfg: TransformerConfig,
    mask: Optional[np.ndarray] = None,
) -> AttentionOutput:
    """Multi-head self-attention over x [n x d_model]; optional boolean mask
    (True = excluded) applied to the score matrix before normalization."""
    if x.shape[1] != cfg.d_model:
        raise nx.ShapeError(f"self_attention expects [n x {cfg.d_model}], got {x.shape}")
    return _attention(x, x, params, prefix, cfg.n_heads, cfg.d_k, mask)


def cross_attention(
    decoder_state: Tensor, encoder_output: Tensor, params: Params, prefix: str,
    cfg: TransformerConfig,
) -> AttentionOutput:
    """Queries from the decoder state, keys/values from the encoder output."""
    if decoder_state.shape[1] != encoder_output.shape[1]:
        raise nx.ShapeError(
            f"cross_attention model-width mismatch: decoder {decoder_state.shape} "
            f"vs encoder {encoder_output.shape}"
        )
    return _attention(decoder_state, encoder_output, params, prefix, cfg.n_heads, cfg.d_k, None)


def ffn_block(x: Tensor, w_in: Tensor, b_in: Tensor, w_out: Tensor, b_out: Tensor) -> Tensor:
    """Position-wise max(0, x W_in + b_in) W_out + b_out."""
    return nx.add(nx.matmul(nx.relu(nx.add(nx.matmul(x, w_in), b_in)), w_out), b_out)


def _maybe_dropout(x: Tensor, cfg: TransformerConfig, rng) -> Tensor:
    if rng is None or cfg.dropout <= 0.0:
        return x
    return nx.dropout(x, cfg.dropout, rng)


def encode(
    window, cfg: TransformerConfig, params: Params, rng: Optional[np.random.Generator] = None
) -> Tensor:
    """Hidden states [n x d_model] for a sensor window [n x feature_dim].

    rng enables training-time dropout; evaluation passes None and is
    deterministic.
    """
    w = window if isinstance(window, Tensor) else nx.tensor(np.asarray(window, dtype=np.float64))
    x = nx.add(nx.matmul(w, params["embed.w"]), params["embed.b"])
    x = nx.add(x, positional_encoding(x.shape[0], cfg.d_model))
    for l in range(cfg.n_layers):
        attn = self_attention(x, params, f"enc{l}.attn", cfg)
        x = nx.layer_norm(
            nx.add(x, _maybe_dropout(attn.combined, cfg, rng)),
            params[f"enc{l}.ln1.g"], params[f"enc{l}.ln1.b"],
        )
        f = ffn_block(
            x,
            params[f"enc{l}.ffn.w1"], params[f"enc{l}.ffn.b1"],
            params[f"enc{l}.ffn.w2"], params[f"enc{l}.ffn.b2"],
        )
        x = nx.layer_norm(
            nx.add(x, _maybe_dropout(f, cfg, rng)),
            params[f"enc{l}.ln2.g"], params[f"enc{l}.ln2.b"],
        )
    return x


def decode(
    targets_shifted,
    encoder_h: Tensor,
    cfg: TransformerConfig,
    params: Params,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Output states [m x d_model]; position i depends only on targets <= i."""
    if not cfg.use_decoder:
        raise ValueError("decoder path is disabled (use_decoder=False)")
    t = np.asarray(targets_shifted, dtype=np.float64).reshape(-1, 1)
    x = nx.add(nx.matmul(nx.tensor(t), params["dec_embed.w"]), params["dec_embed.b"])
    x = nx.add(x, positional_encoding(x.shape[0], cfg.d_model))
    mask = causal_mask(x.shape[0])
    for l in range(cfg.n_layers):
        self_attn = self_attention(x, params, f"dec{l}.self", cfg, mask=mask)
        x = nx.layer_norm(
            nx.add(x, _maybe_dropout(self_attn.combined, cfg, rng)),
            params[f"dec{l}.ln1.g"], params[f"dec{l}.ln1.b"],
        )
        cross = cross_attention(x, encoder_h, params, f"dec{l}.cross", cfg)
        x = nx.layer_norm(
            nx.add(x, _maybe_dropout(cross.combined, cfg, rng)),
            params[f"dec{l}.ln2.g"], params[f"dec{l}.ln2.b"],
        )
        f = ffn_block(
            x,
            params[f"dec{l}.ffn.w1"], params[f"dec{l}.ffn.b1"],
            params[f"dec{l}.ffn.w2"], params[f"dec{l}.ffn.b2"],
        )
        x = nx.layer_norm(
            nx.add(x, _maybe_dropout(f, cfg, rng)),
            params[f"dec{l}.ln3.g"], params[f"dec{l}.ln3.b"],
        )
    return x


def predict_rul(h: Tensor, params: Params, rul_cap: float) -> Tensor:
    """cap * sigmoid(mean-pooled h . W + b); strictly inside (0, cap)."""
    pooled = nx.mean_axis(h, 0)
    logit = nx.add(nx.matmul(pooled, params["head.w"]), params["head.b"])
    return nx.scale(nx.sigmoid(logit), rul_cap)


def forward_rul(
    cfg: TransformerConfig, params: Params, window, rng: Optional[np.random.Generator] = None
) -> Tensor:
    return predict_rul(encode(window, cfg, params, rng=rng), params, cfg.rul_cap)


def _scaled_prediction(cfg, params, window, rng) -> Tensor:
    """sigmoid output in (0,1); training operates on cap-scaled targets."""
    pooled = nx.mean_axis(encode(window, cfg, params, rng=rng), 0)
    logit = nx.add(nx.matmul(pooled, params["head.w"]), params["head.b"])
    return nx.sigmoid(logit)


def _batch_loss(cfg, params, batch: Sequence[RulWindow], loss_kind: str, rng) -> Tensor:
    preds = nx.concat([_scaled_prediction(cfg, params, w.inputs, rng) for w in batch], axis=0)
    targets = nx.tensor(
        np.array([w.target_rul / cfg.rul_cap for w in batch]).reshape(-1, 1)
    )
    if loss_kind == "mse":
        diff = nx.sub(preds, targets)
        return nx.mean_all(nx.mul(diff, diff))
    if loss_kind == "smape":
        diff = nx.absolute(nx.sub(preds, targets))
        denom = nx.add(nx.add(preds, targets), nx.tensor([[1e-8]]))
        return nx.mean_all(nx.scale(nx.div(diff, denom), 2.0))
    raise ValueError(f"unknown loss_kind {loss_kind!r} (expected 'mse' or 'smape')")


def train(
    model: Forecaster,
    windows: Sequence[RulWindow],
    loss_kind: str = "mse",
    epochs: int = 10,
    seed: int = 42,
    lr: float = 1e-3,
    batch_size: int = 32,
) -> List[float]:
    """Minibatch Adam training; returns the per-epoch mean loss history.

    Deterministic for a fixed seed: shuffling and dropout draw from streams
    derived from it. Raises TrainingError with epoch/batch diagnostics if the
    loss goes non-finite.
    """
    if not windows:
        raise ValueError("train requires a non-empty window list")
    cfg, params = model.config, model.params
    state = nx.AdamState(lr=lr)
    shuffle_rng = nx.substream(seed, "forecaster-shuffle")
    dropout_rng = nx.substream(seed, "forecaster-dropout")
    history: List[float] = []
    order = np.arange(len(windows))
    for epoch in range(epochs):
        shuffle_rng.shuffle(order)
        total, count = 0.0, 0
        for start in range(0, len(order), batch_size):
            batch = [windows[i] for i in order[start : start + batch_size]]
            nx.zero_grads(params)
            with nx.Tape() as tape:
                loss = _batch_loss(cfg, params, batch, loss_kind, dropout_rng)
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch {start // batch_size}"
                )
            tape.backward(loss)
            nx.adam_step(params, nx.collect_grads(params), state)
            total += value * len(batch)
            count += len(batch)
        history.append(total / count)
    return history


@dataclass
class EvalResult:
    rmse: float
    mae: float
    rows: List[Tuple[int, int, float, float]]  # unit_id, end_cycle, true, predicted


def rmse(predictions, targets) -> float:
    predictions = np.asarray(predictions, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    return float(np.sqrt(np.mean((predictions - targets) ** 2)))


def evaluate(model: Forecaster, windows: Sequence[RulWindow]) -> EvalResult:
    """RMSE/MAE against labeled RUL plus per-window prediction rows."""
    if not windows:
        raise ValueError("evaluate requires a non-empty window list")
    rows = []
    preds, targets = [], []
    for w in windows:
        pred = model.predict(w.inputs)
        rows.append((w.unit_id, w.end_cycle, w.target_rul, pred))
        preds.append(pred)
        targets.append(w.target_rul)
    errs = np.array(preds) - np.array(targets)
    return EvalResult(
        rmse=rmse(preds, targets),
        mae=float(np.mean(np.abs(errs))),
        rows=rows,
    )


def persistence_predictions(windows: Sequence[RulWindow], rul_cap: float) -> np.ndarray:
    """The minimal non-learning comparator: predict the previously observed
    label in dataset order (first prediction falls back to the cap).

    The comparator is deliberately ignorant of unit boundaries; at each
    boundary it pays the full jump from end-of-life back to a fresh unit.
    """
    targets = np.array([w.target_rul for w in windows])
    preds = np.empty_like(targets)
    preds[0] = rul_cap
    preds[1:] = targets[:-1]
    return preds


def persistence_rmse(windows: Sequence[RulWindow], rul_cap: float) -> float:
    preds = persistence_predictions(windows, rul_cap)
    targets = np.array([w.target_rul for w in windows])
    return rmse(preds, targets)


def config_to_dict(cfg: TransformerConfig) -> dict:
    return {
        "d_model": cfg.d_model,
        "n_heads": cfg.n_heads,
        "d_k": cfg.d_k,
        "d_v": cfg.d_v,
        "n_layers": cfg.n_layers,
        "d_ff": cfg.d_ff,
        "window_len": cfg.window_len,
        "dropout": cfg.dropout,
        "use_decoder": cfg.use_decoder,
        "rul_cap": cfg.rul_cap,
    }


def config_from_dict(doc: dict) -> TransformerConfig:
    return TransformerConfig(**doc)


def small_config(**overrides) -> TransformerConfig:
    """Compact configuration used by fast tests and examples."""
    base = dict(d_model=16, n_heads=2, d_k=8, d_v=8, n_layers=1, d_ff=32, window_len=30)
    base.update(overrides)
    return TransformerConfig(**base)
