"""Command-line entry point.

Subcommands compose through a working-directory artifact convention:
stats.json, windows.csv, model.ckpt.json, featurizer.json, mdp.spec.json,
policy.csv, curve.csv. Every randomized command takes --seed and reproduces
byte-identical artifacts for identical inputs and seed.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import artifacts as art
from . import federation as fed
from . import forecaster as fc
from . import ingest, mdp, pipeline, rlhf
from . import agents as ag
from .numerics import NonFiniteError
from .synthetic import make_linear_units, split_units

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class DataError(click.ClickException):
    exit_code = EXIT_DATA


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise DataError(f"missing expected file {path} ({hint})")
    return path


@click.group(context_settings={"show_default": True})
def cli():
    """Prescriptive maintenance engine: RUL forecasting, health MDPs, and
    maintenance-policy learning."""


@cli.command("synth-data")
@click.option("--units", default=20, help="Units per machine.")
@click.option("--machines", default=1, help="Number of machine datasets to emit.")
@click.option("--seed", default=42, help="Generator seed.")
@click.option("--cap", default=125.0, help="RUL cap for the degradation profile.")
@click.option("--out", default="data.txt", type=click.Path(), help="Output file (suffix _mK for machines > 1).")
def synth_data(units, machines, seed, cap, out):
    """Generate synthetic run-to-failure data in the 26-column layout."""
    if units < 1 or machines < 1:
        raise click.UsageError("--units and --machines must be >= 1")
    out = Path(out)
    for m in range(machines):
        series = make_linear_units(n_units=units, seed=seed, rul_cap=cap, machine_id=m)
        path = out if machines == 1 else out.with_name(f"{out.stem}_m{m}{out.suffix}")
        path.write_text(ingest.serialize_cmapss(series))
        click.echo(f"wrote {path} ({units} units)")


@cli.command("ingest")
@click.argument("data_file", type=click.Path(path_type=Path))
@click.option("--cap", default=125.0, help="Piecewise-linear RUL cap.")
@click.option("--window", default=30, help="Window length in cycles.")
@click.option("--out", default=".", type=click.Path(path_type=Path), help="Artifact directory.")
def ingest_cmd(data_file, cap, window, out):
    """Parse run-to-failure data; write normalization stats and windows."""
    if cap <= 0:
        raise click.UsageError("--cap must be positive")
    if window < 1:
        raise click.UsageError("--window must be >= 1")
    _require(data_file, "input data")
    try:
        units = ingest.parse_cmapss(data_file.read_text())
    except ingest.ParseError as exc:
        raise DataError(str(exc))
    if not units:
        raise DataError(f"{data_file}: no records")
    try:
        stats = ingest.fit_normalizer(units)
    except ingest.NormalizationError as exc:
        raise DataError(str(exc))
    windows = ingest.make_all_windows(units, stats, window, cap)
    out.mkdir(parents=True, exist_ok=True)
    art.save_stats(stats, window, cap, out / art.STATS_FILE)
    art.save_windows(windows, out / art.WINDOWS_FILE)
    click.echo(
        f"ingested {len(units)} units, {len(windows)} windows "
        f"({sum(w.padded for w in windows)} padded), {len(stats.dropped)} constant features dropped"
    )


def _load_windows_and_stats(dir_path: Path):
    stats, window_len, cap = art.load_stats(_require(dir_path / art.STATS_FILE, "run `ingest` first"))
    windows = art.load_windows(_require(dir_path / art.WINDOWS_FILE, "run `ingest` first"))
    if not windows:
        raise DataError(f"{dir_path / art.WINDOWS_FILE}: no windows")
    return stats, window_len, cap, windows


def _model_config(window_len, cap, d_model, heads, layers, d_ff, dropout, use_decoder=False):
    try:
        return fc.TransformerConfig(
            d_model=d_model, n_heads=heads, d_k=d_model // heads, d_v=d_model // heads,
            n_layers=layers, d_ff=d_ff, window_len=window_len, dropout=dropout,
            use_decoder=use_decoder, rul_cap=cap,
        )
    except ValueError as exc:
        raise click.UsageError(str(exc))


_FORECASTER_OPTIONS = [
    click.option("--d-model", default=32, help="Model width."),
    click.option("--heads", default=4, help="Attention heads."),
    click.option("--layers", default=2, help="Encoder layers."),
    click.option("--d-ff", default=64, help="Feed-forward width."),
    click.option("--dropout", default=0.1, help="Training-time dropout rate."),
    click.option("--epochs", default=8, help="Training epochs."),
    click.option("--lr", default=1e-3, help="Adam learning rate."),
    click.option("--batch", default=32, help="Minibatch size."),
    click.option("--loss", default="mse", type=click.Choice(["mse", "smape"]), help="Training loss."),
]


def forecaster_options(f):
    for opt in reversed(_FORECASTER_OPTIONS):
        f = opt(f)
    return f


@cli.command("train-forecaster")
@click.option("--dir", "dir_path", default=".", type=click.Path(path_type=Path), help="Artifact directory.")
@click.option("--seed", default=42, help="Training seed.")
@forecaster_options
def train_forecaster(dir_path, seed, d_model, heads, layers, d_ff, dropout, epochs, lr, batch, loss):
    """Train the RUL forecaster on ingested windows; write a checkpoint."""
    stats, window_len, cap, windows = _load_windows_and_stats(dir_path)
    cfg = _model_config(window_len, cap, d_model, heads, layers, d_ff, dropout)
    model = fc.Forecaster.create(cfg, feature_dim=windows[0].inputs.shape[1], seed=seed)
    try:
        history = fc.train(model, windows, loss_kind=loss, epochs=epochs, seed=seed, lr=lr, batch_size=batch)
    except fc.TrainingError as exc:
        raise click.ClickException(str(exc))
    art.save_checkpoint(model, dir_path / art.MODEL_FILE)
    (dir_path / "train_history.csv").write_text(art.loss_history_csv(history))
    final = f"{history[-1]:.6f}" if history else "n/a"
    click.echo(f"trained {epochs} epochs, final loss {final}; wrote {dir_path / art.MODEL_FILE}")


@cli.command("federate")
@click.option("--machines", default=4, help="Number of machines (expects windows_m<K>.csv).")
@click.option("--rounds", default=2, help="Federation rounds.")
@click.option("--local-epochs", default=2, help="Local epochs per round.")
@click.option("--dir", "dir_path", default=".", type=click.Path(path_type=Path), help="Artifact directory.")
@click.option("--seed", default=42, help="Seed.")
@forecaster_options
def federate(machines, rounds, local_epochs, dir_path, seed, d_model, heads, layers, d_ff,
             dropout, epochs, lr, batch, loss):
    """Federated training over per-machine window files; write the central model.

    With --machines 1 --rounds 1 the single machine's data is windows.csv,
    local training runs for --epochs (not --local-epochs), and the run
    reproduces `train-forecaster` byte for byte given the same seed.
    """
    if machines < 1 or rounds < 1:
        raise click.UsageError("--machines and --rounds must be >= 1")
    stats, window_len, cap, _ = _load_windows_and_stats(dir_path)
    datasets = []
    if machines == 1:
        datasets.append(art.load_windows(_require(dir_path / art.WINDOWS_FILE, "run `ingest`")))
    else:
        for m in range(machines):
            path = _require(dir_path / f"windows_m{m}.csv", "per-machine windows (run `ingest` per machine)")
            datasets.append(art.load_windows(path))
    cfg = _model_config(window_len, cap, d_model, heads, layers, d_ff, dropout)
    config = fed.FederationConfig(
        n_machines=machines, rounds=rounds,
        local_epochs=local_epochs if machines > 1 or rounds > 1 else epochs,
        seed=seed, lr=lr, batch_size=batch,
    )
    result = fed.run_federation(config, datasets, model_config=cfg)
    art.save_checkpoint(result.central, dir_path / art.MODEL_FILE)
    (dir_path / "fed_metrics.csv").write_text(art.federation_metrics_csv(result.metrics))
    click.echo(f"federated {machines} machines x {rounds} rounds; wrote {dir_path / art.MODEL_FILE}")


@cli.command("calibrate-mdp")
@click.option("--dir", "dir_path", default=".", type=click.Path(path_type=Path), help="Artifact directory.")
@click.option("--alpha", default=1.0, help="RUL-gain weight.")
@click.option("--beta", default=1.0, help="Cost weight.")
@click.option("--gamma", "gamma_w", default=1.0, help="Downtime weight.")
@click.option("--cost", default="0,1,5", help="Per-action cost table.")
@click.option("--downtime", default="0,0.5,3", help="Per-action downtime table.")
@click.option("--discount", default=0.99, help="MDP discount factor.")
@click.option("--episode-len", default=200, help="Episode length in decision steps.")
def calibrate_mdp_cmd(dir_path, alpha, beta, gamma_w, cost, downtime, discount, episode_len):
    """Calibrate the health MDP from forecaster predictions on the windows."""
    stats, window_len, cap, windows = _load_windows_and_stats(dir_path)
    model = art.load_checkpoint(_require(dir_path / art.MODEL_FILE, "run `train-forecaster`"))
    cost_t = tuple(float(v) for v in cost.split(","))
    downtime_t = tuple(float(v) for v in downtime.split(","))
    if len(cost_t) != 3 or len(downtime_t) != 3:
        raise click.UsageError("--cost and --downtime need exactly 3 comma-separated values")
    sequences = pipeline.predict_unit_sequences(model, windows)
    featurizer = pipeline.build_featurizer(sequences)
    spec = pipeline.calibrate_from_sequences(
        sequences, featurizer, cost=cost_t, downtime=downtime_t,
        weights=(alpha, beta, gamma_w), discount=discount, episode_len=episode_len,
    )
    art.save_mdp(spec, dir_path / art.MDP_FILE)
    art.save_featurizer(featurizer, dir_path / "featurizer.json")
    click.echo(
        f"calibrated ({spec.n_states},{spec.n_actions},{spec.n_states}) MDP; "
        f"wrote {dir_path / art.MDP_FILE}"
    )


@cli.command("solve-mdp")
@click.option("--dir", "dir_path", default=".", type=click.Path(path_type=Path), help="Artifact directory.")
@click.option("--toy", is_flag=True, help="Solve the bundled 2-state toy process instead.")
@click.option("--tol", default=1e-8, help="Bellman residual tolerance.")
def solve_mdp_cmd(dir_path, toy, tol):
    """Solve the MDP exactly; print V* and the optimal policy, write policy.csv."""
    if toy:
        spec = mdp.toy_two_state_spec()
        names = ("keep", "repair")
    else:
        spec = art.load_mdp(_require(dir_path / art.MDP_FILE, "run `calibrate-mdp`"))
        names = mdp.ACTION_NAMES
    values, policy = mdp.value_iteration(spec, tol=tol)
    click.echo("state  V*          action")
    for s in range(spec.n_states):
        click.echo(f"{s:>5}  {values[s]:<10.4f}  {names[policy[s]]}")
    if not toy:
        (dir_path / art.POLICY_FILE).write_text(
            art.policy_csv(policy, [float(v) for v in values])
        )
        click.echo(f"wrote {dir_path / art.POLICY_FILE}")


@cli.command("train-agent")
@click.argument("kind", type=click.Choice(["dqn", "ppo", "sac"]))
@click.option("--dir", "dir_path", default=".", type=click.Path(path_type=Path), help="Artifact directory.")
@click.option("--steps", default=50_000, help="Environment-step budget.")
@click.option("--seed", default=42, help="Seed.")
def train_agent_cmd(kind, dir_path, steps, seed):
    """Train a maintenance agent on the calibrated MDP; write curve and policy."""
    spec = art.load_mdp(_require(dir_path / art.MDP_FILE, "run `calibrate-mdp`"))
    try:
        result = ag.train_agent(kind, ag.make_env(spec, seed), steps, seed)
    except NonFiniteError as exc:
        raise click.ClickException(str(exc))
    (dir_path / art.CURVE_FILE).write_text(art.learning_curve_csv(result.curve))
    (dir_path / art.POLICY_FILE).write_text(
        art.policy_csv(result.greedy_policy, result.policy_values)
    )
    click.echo(
        f"trained {kind} for {steps} steps ({len(result.curve)} episodes); "
        f"wrote {dir_path / art.CURVE_FILE} and {dir_path / art.POLICY_FILE}"
    )


@cli.command("rlhf")
@click.argument("kind", type=click.Choice(["dqn", "ppo", "sac"]))
@click.option("--simulated/--serve", default=True,
              help="Simulated oracle feedback, or launch the live service.")
@click.option("--dir", "dir_path", default=".", type=click.Path(path_type=Path), help="Artifact directory.")
@click.option("--steps", default=20_000, help="Environment-step budget.")
@click.option("--seed", default=42, help="Seed.")
@click.option("--delta", default=0.5, help="Feedback shaping weight.")
@click.option("--feedback-rate", default=1.0, help="Fraction of steps receiving feedback.")
@click.option("--r-positive", default=1.0, help="Reward for positive feedback.")
@click.option("--r-negative", default=-1.0, help="Reward for negative feedback.")
@click.option("--live-timeout", default=60.0, help="Seconds to wait for a live label.")
@click.option("--demo-policy", type=click.Path(path_type=Path), default=None,
              help="Optional state,action CSV used to steer exploration.")
@click.option("--host", default="127.0.0.1", help="Service bind host (with --serve).")
@click.option("--port", default=8080, help="Service bind port (with --serve).")
def rlhf_cmd(kind, simulated, dir_path, steps, seed, delta, feedback_rate, r_positive,
             r_negative, live_timeout, demo_policy, host, port):
    """Feedback-shaped agent training: simulated oracle, or live via the service."""
    if not simulated:
        from .service import serve

        serve(host=host, port=port, run_dir=dir_path / "runs")
        return
    spec = art.load_mdp(_require(dir_path / art.MDP_FILE, "run `calibrate-mdp`"))
    _, pi_star = mdp.value_iteration(spec, tol=1e-8)
    config = rlhf.FeedbackConfig(
        r_positive=r_positive, r_negative=r_negative, delta=delta,
        mode="simulated", live_timeout=live_timeout,
    )
    demo = art.load_policy_csv(demo_policy) if demo_policy else None
    try:
        out = rlhf.train_rlhf(
            kind, ag.make_env(spec, seed), config, steps, seed, feedback_rate,
            provider=rlhf.SimulatedOracleProvider(pi_star), demo_policy=demo,
        )
    except NonFiniteError as exc:
        raise click.ClickException(str(exc))
    (dir_path / art.CURVE_FILE).write_text(art.learning_curve_csv(out.train.curve))
    (dir_path / art.POLICY_FILE).write_text(
        art.policy_csv(out.train.greedy_policy, out.train.policy_values)
    )
    (dir_path / "feedback_log.csv").write_text(rlhf.feedback_log_csv(out.events))
    (dir_path / "shaping.csv").write_text(rlhf.shaping_log_csv(out.shaping))
    agree = int((out.train.greedy_policy == pi_star).sum())
    click.echo(
        f"rlhf-{kind}: {len(out.events)} feedback events, "
        f"policy agrees with the oracle on {agree}/{spec.n_states} states"
    )


@cli.command("eval")
@click.option("--dir", "dir_path", default=".", type=click.Path(path_type=Path), help="Artifact directory.")
def eval_cmd(dir_path):
    """Evaluate the trained forecaster; print RMSE/MAE vs the persistence baseline."""
    stats, window_len, cap, windows = _load_windows_and_stats(dir_path)
    model = art.load_checkpoint(_require(dir_path / art.MODEL_FILE, "run `train-forecaster`"))
    result = fc.evaluate(model, windows)
    baseline = fc.persistence_rmse(windows, cap)
    (dir_path / "eval_curve.csv").write_text(art.eval_curve_csv(result.rows))
    click.echo(f"rmse {result.rmse:.4f}  mae {result.mae:.4f}  persistence rmse {baseline:.4f}")
    click.echo(f"wrote {dir_path / 'eval_curve.csv'}")


@cli.command("export-curves")
@click.option("--dir", "dir_path", default=".", type=click.Path(path_type=Path), help="Artifact directory.")
@click.option("--out", default=None, type=click.Path(path_type=Path),
              help="Output CSV (default <dir>/curves_export.csv).")
def export_curves(dir_path, out):
    """Consolidate curve artifacts into one plot-ready long-format CSV."""
    out = out or dir_path / "curves_export.csv"
    rows = []
    history = dir_path / "train_history.csv"
    if history.exists():
        for line in history.read_text().splitlines()[1:]:
            epoch, loss = line.split(",")
            rows.append(("forecaster", "loss", epoch, loss))
    curve = dir_path / art.CURVE_FILE
    if curve.exists():
        for line in curve.read_text().splitlines()[1:]:
            episode, total, aux = line.split(",")
            rows.append(("agent", "total_reward", episode, total))
            rows.append(("agent", "epsilon_or_entropy", episode, aux))
    eval_curve = dir_path / "eval_curve.csv"
    if eval_curve.exists():
        for line in eval_curve.read_text().splitlines()[1:]:
            unit, cycle, true_rul, pred = line.split(",")
            rows.append((f"eval_unit_{unit}", "true_rul", cycle, true_rul))
            rows.append((f"eval_unit_{unit}", "pred_rul", cycle, pred))
    fed_metrics = dir_path / "fed_metrics.csv"
    if fed_metrics.exists():
        for line in fed_metrics.read_text().splitlines()[1:]:
            rnd, machine, local, central = line.split(",")
            rows.append((f"federation_m{machine}", "local_rmse", rnd, local))
            rows.append((f"federation_m{machine}", "central_rmse", rnd, central))
    if not rows:
        raise DataError(f"no curve artifacts found in {dir_path}")
    lines = ["source,series,step,value"] + [",".join(r) for r in rows]
    Path(out).write_text("\n".join(lines) + "\n")
    click.echo(f"wrote {out} ({len(rows)} rows)")


@cli.command("pipeline")
@click.argument("data_file", type=click.Path(path_type=Path))
@click.option("--cap", default=125.0, help="RUL cap.")
@click.option("--window", default=30, help="Window length.")
@click.option("--seed", default=42, help="Seed.")
@click.option("--epochs", default=8, help="Forecaster training epochs.")
@click.option("--rule-threshold", default=10.0, help="Immediate-maintenance threshold (cycles).")
@click.option("--policy-file", type=click.Path(path_type=Path), default=None,
              help="Use a trained agent policy.csv instead of the exact solution.")
@click.option("--out", default=None, type=click.Path(path_type=Path),
              help="Write the report JSON here.")
def pipeline_cmd(data_file, cap, window, seed, epochs, rule_threshold, policy_file, out):
    """Run the full pipeline and print per-unit action recommendations."""
    if cap <= 0:
        raise click.UsageError("--cap must be positive")
    _require(data_file, "input data")
    try:
        units = ingest.parse_cmapss(data_file.read_text())
    except ingest.ParseError as exc:
        raise DataError(str(exc))
    override = art.load_policy_csv(policy_file) if policy_file else None
    try:
        report = pipeline.run_pipeline(
            units, seed=seed, rul_cap=cap, window_len=window, train_epochs=epochs,
            rule_threshold=rule_threshold, policy_override=override,
        )
    except (fc.TrainingError, NonFiniteError) as exc:
        raise click.ClickException(f"pipeline stage failed: {exc}")
    click.echo("unit  cycle  pred_rul  state  action               rule_based")
    for r in report.recommendations:
        click.echo(
            f"{r.unit_id:>4}  {r.end_cycle:>5}  {r.predicted_rul:>8.2f}  {r.state_bin:>5}"
            f"  {r.policy_action_name:<19}  {r.rule_based}"
        )
    if out:
        doc = {
            "policy": [int(a) for a in report.policy],
            "values": [float(v) for v in report.values],
            "forecaster_rmse": report.forecaster_rmse,
            "recommendations": [
                {
                    "unit_id": r.unit_id,
                    "end_cycle": r.end_cycle,
                    "predicted_rul": r.predicted_rul,
                    "state_bin": r.state_bin,
                    "policy_action": r.policy_action,
                    "policy_action_name": r.policy_action_name,
                    "rule_based": r.rule_based,
                }
                for r in report.recommendations
            ],
        }
        Path(out).write_text(art.dumps_document(doc))
        click.echo(f"wrote {out}")


@cli.command("serve")
@click.option("--host", default="127.0.0.1", help="Bind host.")
@click.option("--port", default=8080, help="Bind port.")
@click.option("--run-dir", default="runs", type=click.Path(path_type=Path), help="Run-log directory.")
def serve_cmd(host, port, run_dir):
    """Launch the HTTP service (run management + live feedback exchange)."""
    from .service import serve

    serve(host=host, port=port, run_dir=run_dir)


def main():
    try:
        cli.main(standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        sys.exit(EXIT_USAGE)
    except DataError as exc:
        exc.show()
        sys.exit(EXIT_DATA)
    except click.ClickException as exc:
        exc.show()
        sys.exit(EXIT_RUNTIME)
    except click.exceptions.Abort:
        sys.exit(EXIT_USAGE)
    except (ingest.ParseError, ingest.NormalizationError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    except (fc.TrainingError, NonFiniteError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)


if __name__ == "__main__":
    main()
