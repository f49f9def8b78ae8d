"""Local HTTP service: run management, training status, live feedback.

Single process; each run trains on its own worker thread and owns its state.
Handlers touch a run only through its feedback channel and an append-only
metrics log guarded by a lock (single writer, many readers). Run logs
persist under run_dir/<run_id>/ so curves survive a restart.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from pathlib import Path
from typing import List, Literal, Optional, Union

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, ConfigDict, Field

from . import agents as ag
from . import artifacts as art
from . import federation as fed
from . import forecaster as fc
from . import mdp, rlhf

API_VERSION = "1"
POLL_INTERVAL = 0.05

RunKind = Literal["forecaster", "federation", "agent", "rlhf"]
RunStatus = Literal["pending", "running", "done", "failed"]

_STATUS_ORDER = {"pending": 0, "running": 1, "done": 2, "failed": 2}


class ForecasterRunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["forecaster"]
    dir: str = "."
    epochs: int = 8
    lr: float = 1e-3
    batch_size: int = 32
    loss: Literal["mse", "smape"] = "mse"
    seed: int = 42
    d_model: int = 32
    heads: int = 4
    layers: int = 2
    d_ff: int = 64
    dropout: float = 0.1


class FederationRunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["federation"]
    dir: str = "."
    machines: int = 4
    rounds: int = 2
    local_epochs: int = 2
    seed: int = 42
    lr: float = 1e-3
    batch_size: int = 32
    d_model: int = 32
    heads: int = 4
    layers: int = 2
    d_ff: int = 64
    dropout: float = 0.1


class AgentRunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["agent"]
    dir: str = "."
    agent: Literal["dqn", "ppo", "sac"] = "dqn"
    steps: int = 20_000
    seed: int = 42


class RlhfRunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["rlhf"]
    dir: str = "."
    agent: Literal["dqn", "ppo", "sac"] = "dqn"
    steps: int = 20_000
    seed: int = 42
    mode: Literal["simulated", "live"] = "simulated"
    delta: float = 0.5
    feedback_rate: float = 0.05
    r_positive: float = 1.0
    r_negative: float = -1.0
    live_timeout: float = 60.0


RunConfig = Union[ForecasterRunConfig, FederationRunConfig, AgentRunConfig, RlhfRunConfig]


class CreateRunRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    config: RunConfig = Field(discriminator="kind")
    idempotency_key: Optional[str] = None


class RunCreated(BaseModel):
    run_id: str


class RunDescriptor(BaseModel):
    run_id: str
    kind: RunKind
    status: RunStatus
    created_at: float
    config: dict


class StatusResponse(BaseModel):
    run_id: str
    kind: RunKind
    status: RunStatus
    episodes: int
    last_total_reward: Optional[float] = None
    epsilon_or_entropy: Optional[float] = None
    error: Optional[str] = None


class PendingEventDoc(BaseModel):
    event_id: str
    run_id: str
    episode: int
    step: int
    state: int
    action: int
    action_name: str
    state_rul_center: Optional[float] = None


class PendingResponse(BaseModel):
    event: Optional[PendingEventDoc] = None


class FeedbackRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    event_id: str
    label: Literal["positive", "negative"]


class FeedbackAck(BaseModel):
    status: Literal["accepted"]
    event_id: str


class CurvePoint(BaseModel):
    episode: int
    total_reward: float


class RunState:
    def __init__(self, run_id: str, config: RunConfig, run_dir: Path):
        self.run_id = run_id
        self.config = config
        self.run_dir = run_dir
        self.status: str = "pending"
        self.created_at = time.time()
        self.error: Optional[str] = None
        self.curve: List[tuple] = []  # (episode, total_reward, aux)
        self.lock = threading.Lock()
        self.channel: Optional[rlhf.FeedbackChannel] = None
        self.spec: Optional[mdp.MdpSpec] = None
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "config.json").write_text(
            json.dumps(config.model_dump(), sort_keys=True) + "\n"
        )
        self._write_status()

    def _write_status(self):
        doc = {"run_id": self.run_id, "status": self.status, "error": self.error}
        (self.run_dir / "status.json").write_text(json.dumps(doc, sort_keys=True) + "\n")

    def transition(self, status: str):
        with self.lock:
            if _STATUS_ORDER[status] < _STATUS_ORDER[self.status]:
                raise RuntimeError(f"illegal status transition {self.status} -> {status}")
            self.status = status
            self._write_status()

    def append_episode(self, episode: int, total: float, aux: float):
        with self.lock:
            self.curve.append((episode, total, aux))
            with open(self.run_dir / "curve.csv", "a") as f:
                if episode == 0:
                    f.write("episode,total_reward\n")
                f.write(f"{episode},{art.fmt_float(total)}\n")

    def descriptor(self) -> RunDescriptor:
        return RunDescriptor(
            run_id=self.run_id,
            kind=self.config.kind,
            status=self.status,  # type: ignore[arg-type]
            created_at=self.created_at,
            config=self.config.model_dump(),
        )


def _run_forecaster(state: RunState, cfg: ForecasterRunConfig):
    stats, window_len, cap, windows = _load_ingest(Path(cfg.dir))
    model_cfg = fc.TransformerConfig(
        d_model=cfg.d_model, n_heads=cfg.heads, d_k=cfg.d_model // cfg.heads,
        d_v=cfg.d_model // cfg.heads, n_layers=cfg.layers, d_ff=cfg.d_ff,
        window_len=window_len, dropout=cfg.dropout, rul_cap=cap,
    )
    model = fc.Forecaster.create(model_cfg, windows[0].inputs.shape[1], seed=cfg.seed)
    history = fc.train(
        model, windows, loss_kind=cfg.loss, epochs=cfg.epochs, seed=cfg.seed,
        lr=cfg.lr, batch_size=cfg.batch_size,
    )
    for epoch, loss in enumerate(history):
        state.append_episode(epoch, loss, 0.0)
    art.save_checkpoint(model, state.run_dir / art.MODEL_FILE)


def _run_federation(state: RunState, cfg: FederationRunConfig):
    base = Path(cfg.dir)
    stats, window_len, cap, _ = _load_ingest(base)
    datasets = []
    if cfg.machines == 1:
        datasets.append(art.load_windows(base / art.WINDOWS_FILE))
    else:
        for m in range(cfg.machines):
            datasets.append(art.load_windows(base / f"windows_m{m}.csv"))
    model_cfg = fc.TransformerConfig(
        d_model=cfg.d_model, n_heads=cfg.heads, d_k=cfg.d_model // cfg.heads,
        d_v=cfg.d_model // cfg.heads, n_layers=cfg.layers, d_ff=cfg.d_ff,
        window_len=window_len, dropout=cfg.dropout, rul_cap=cap,
    )
    config = fed.FederationConfig(
        n_machines=cfg.machines, rounds=cfg.rounds, local_epochs=cfg.local_epochs,
        seed=cfg.seed, lr=cfg.lr, batch_size=cfg.batch_size,
    )
    result = fed.run_federation(config, datasets, model_config=model_cfg)
    for i, (rnd, machine, local_rmse, central_rmse) in enumerate(result.metrics):
        state.append_episode(i, central_rmse, local_rmse)
    art.save_checkpoint(result.central, state.run_dir / art.MODEL_FILE)


def _load_ingest(base: Path):
    stats, window_len, cap = art.load_stats(base / art.STATS_FILE)
    windows = art.load_windows(base / art.WINDOWS_FILE)
    return stats, window_len, cap, windows


def _run_agent(state: RunState, cfg: AgentRunConfig):
    spec = art.load_mdp(Path(cfg.dir) / art.MDP_FILE)
    state.spec = spec
    result = ag.train_agent(
        cfg.agent, ag.make_env(spec, cfg.seed), cfg.steps, cfg.seed,
        on_episode=state.append_episode,
    )
    (state.run_dir / art.POLICY_FILE).write_text(
        art.policy_csv(result.greedy_policy, result.policy_values)
    )


def _run_rlhf(state: RunState, cfg: RlhfRunConfig):
    spec = art.load_mdp(Path(cfg.dir) / art.MDP_FILE)
    state.spec = spec
    feedback_cfg = rlhf.FeedbackConfig(
        r_positive=cfg.r_positive, r_negative=cfg.r_negative, delta=cfg.delta,
        mode=cfg.mode, live_timeout=cfg.live_timeout,
    )
    if cfg.mode == "live":
        provider = rlhf.LiveProvider(state.channel, cfg.live_timeout)
    else:
        _, pi_star = mdp.value_iteration(spec, tol=1e-8)
        provider = rlhf.SimulatedOracleProvider(pi_star)
    out = rlhf.train_rlhf(
        cfg.agent, ag.make_env(spec, cfg.seed), feedback_cfg, cfg.steps, cfg.seed,
        cfg.feedback_rate, provider, run_id=state.run_id,
        on_episode=state.append_episode,
    )
    (state.run_dir / "feedback_log.csv").write_text(rlhf.feedback_log_csv(out.events))
    (state.run_dir / "shaping.csv").write_text(rlhf.shaping_log_csv(out.shaping))
    (state.run_dir / art.POLICY_FILE).write_text(
        art.policy_csv(out.train.greedy_policy, out.train.policy_values)
    )


_WORKERS = {
    "forecaster": _run_forecaster,
    "federation": _run_federation,
    "agent": _run_agent,
    "rlhf": _run_rlhf,
}


class RunRegistry:
    def __init__(self, run_dir: Path):
        self.run_dir = Path(run_dir)
        self.runs: dict[str, RunState] = {}
        self.by_idempotency: dict[str, str] = {}
        self.lock = threading.Lock()
        self._load_persisted()

    def _load_persisted(self):
        if not self.run_dir.exists():
            return
        for status_file in sorted(self.run_dir.glob("*/status.json")):
            doc = json.loads(status_file.read_text())
            run_id = doc["run_id"]
            config_file = status_file.parent / "config.json"
            if not config_file.exists():
                continue
            raw = json.loads(config_file.read_text())
            request = CreateRunRequest(config=raw)
            state = RunState.__new__(RunState)
            state.run_id = run_id
            state.config = request.config
            state.run_dir = status_file.parent
            state.status = doc["status"] if doc["status"] in ("done", "failed") else "failed"
            state.error = doc.get("error")
            state.created_at = status_file.stat().st_mtime
            state.lock = threading.Lock()
            state.channel = None
            state.spec = None
            state.curve = []
            curve_file = state.run_dir / "curve.csv"
            if curve_file.exists():
                for line in curve_file.read_text().splitlines()[1:]:
                    episode, total = line.split(",")
                    state.curve.append((int(episode), float(total), 0.0))
            self.runs[run_id] = state

    def create(self, request: CreateRunRequest) -> tuple[RunState, bool]:
        with self.lock:
            if request.idempotency_key and request.idempotency_key in self.by_idempotency:
                return self.runs[self.by_idempotency[request.idempotency_key]], False
            run_id = f"run-{uuid.uuid4().hex[:12]}"
            state = RunState(run_id, request.config, self.run_dir / run_id)
            if request.config.kind == "rlhf" and request.config.mode == "live":
                state.channel = rlhf.FeedbackChannel()
            self.runs[run_id] = state
            if request.idempotency_key:
                self.by_idempotency[request.idempotency_key] = run_id
        worker = _WORKERS[request.config.kind]

        def target():
            state.transition("running")
            try:
                worker(state, state.config)
            except Exception as exc:  # noqa: BLE001 - surface any failure in status
                state.error = str(exc)
                state.transition("failed")
            else:
                state.transition("done")
            finally:
                if state.channel is not None:
                    state.channel.close()

        threading.Thread(target=target, daemon=True).start()
        return state, True

    def get(self, run_id: str) -> RunState:
        state = self.runs.get(run_id)
        if state is None:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id!r}")
        return state


def create_app(run_dir: Path = Path("runs"), poll_window: float = 10.0,
               console_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="presmaint service", version=API_VERSION)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    registry = RunRegistry(Path(run_dir))
    app.state.registry = registry
    app.state.poll_window = poll_window

    @app.middleware("http")
    async def version_header(request, call_next):
        response = await call_next(request)
        response.headers["X-API-Version"] = API_VERSION
        return response

    @app.post("/runs", response_model=RunCreated, status_code=201)
    def create_run(request: CreateRunRequest, response: Response):
        state, created = registry.create(request)
        if not created:
            response.status_code = 200
        return RunCreated(run_id=state.run_id)

    @app.get("/runs", response_model=List[RunDescriptor])
    def list_runs():
        return [state.descriptor() for state in registry.runs.values()]

    @app.get("/runs/{run_id}/status", response_model=StatusResponse)
    def run_status(run_id: str):
        state = registry.get(run_id)
        with state.lock:
            last = state.curve[-1] if state.curve else None
        return StatusResponse(
            run_id=state.run_id,
            kind=state.config.kind,
            status=state.status,  # type: ignore[arg-type]
            episodes=len(state.curve),
            last_total_reward=last[1] if last else None,
            epsilon_or_entropy=last[2] if last else None,
            error=state.error,
        )

    @app.get("/runs/{run_id}/pending", response_model=PendingResponse)
    def pending_event(run_id: str):
        state = registry.get(run_id)
        if state.config.kind != "rlhf" or state.config.mode != "live":
            raise HTTPException(
                status_code=409, detail="run does not take live feedback"
            )
        deadline = time.monotonic() + app.state.poll_window
        while time.monotonic() < deadline:
            event = state.channel.pending() if state.channel else None
            if event is not None:
                center = None
                if state.spec is not None and state.spec.bin_centers is not None:
                    center = float(state.spec.bin_centers[event.state])
                return PendingResponse(
                    event=PendingEventDoc(
                        event_id=event.event_id,
                        run_id=state.run_id,
                        episode=event.episode,
                        step=event.step,
                        state=event.state,
                        action=event.action,
                        action_name=mdp.ACTION_NAMES[event.action]
                        if event.action < len(mdp.ACTION_NAMES)
                        else str(event.action),
                        state_rul_center=center,
                    )
                )
            if state.status in ("done", "failed"):
                break
            time.sleep(POLL_INTERVAL)
        return PendingResponse(event=None)

    @app.post("/runs/{run_id}/feedback", response_model=FeedbackAck)
    def submit_feedback(run_id: str, request: FeedbackRequest):
        state = registry.get(run_id)
        if state.channel is None:
            raise HTTPException(status_code=409, detail="run does not take live feedback")
        label = rlhf.Label(request.label)
        status = state.channel.submit(request.event_id, label)
        if status is rlhf.SubmitStatus.UNKNOWN_EVENT:
            raise HTTPException(status_code=404, detail=f"unknown event {request.event_id!r}")
        if status is rlhf.SubmitStatus.ALREADY_LABELED:
            raise HTTPException(status_code=409, detail=f"event {request.event_id!r} already labeled")
        return FeedbackAck(status="accepted", event_id=request.event_id)

    @app.get("/runs/{run_id}/curve")
    def run_curve(run_id: str, format: str = "csv"):
        state = registry.get(run_id)
        with state.lock:
            rows = list(state.curve)
        if format == "json":
            return [CurvePoint(episode=e, total_reward=t) for e, t, _ in rows]
        lines = ["episode,total_reward"] + [f"{e},{art.fmt_float(t)}" for e, t, _ in rows]
        return Response("\n".join(lines) + "\n", media_type="text/csv")

    if console_dir is not None and Path(console_dir).exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/console", StaticFiles(directory=str(console_dir), html=True), name="console")

    return app


def serve(host: str = "127.0.0.1", port: int = 8080, run_dir: Path = Path("runs"),
          console_dir: Optional[Path] = None):
    import uvicorn

    app = create_app(run_dir=run_dir, console_dir=console_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
