"""Shared fixtures: the synthetic dataset, a trained forecaster, and the
calibrated decision process, built once per session. Acceptance tests report
one pass/fail line per criterion in the terminal summary."""

import numpy as np
import pytest

import presmaint.forecaster as fc
from presmaint import ingest, mdp, pipeline
from presmaint.synthetic import make_linear_units

ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


def record_criterion(name: str, passed: bool, detail: str = ""):
    ACCEPTANCE_RESULTS.append((name, f"{'PASS' if passed else 'FAIL'} {detail}".strip()))
    assert passed, f"{name}: {detail}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, result in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{result.split()[0]}] {name}"
                                    + (f" ({result.split(' ', 1)[1]})" if " " in result else ""))


@pytest.fixture(scope="session")
def synthetic_units():
    return make_linear_units(n_units=20, seed=42)


@pytest.fixture(scope="session")
def synthetic_windows(synthetic_units):
    stats = ingest.fit_normalizer(synthetic_units)
    windows = ingest.make_all_windows(synthetic_units, stats, window_len=30, rul_cap=125.0)
    return stats, windows


@pytest.fixture(scope="session")
def trained_forecaster(synthetic_windows):
    _, windows = synthetic_windows
    cfg = fc.small_config()
    model = fc.Forecaster.create(cfg, feature_dim=windows[0].inputs.shape[1], seed=42)
    fc.train(model, windows, epochs=8, seed=42, lr=1e-3, batch_size=32)
    return model


@pytest.fixture(scope="session")
def calibrated_mdp(trained_forecaster, synthetic_windows):
    """The canonical calibrated (10, 3, 10) decision process plus its oracle."""
    _, windows = synthetic_windows
    sequences = pipeline.predict_unit_sequences(trained_forecaster, windows)
    featurizer = pipeline.build_featurizer(sequences)
    spec = pipeline.calibrate_from_sequences(sequences, featurizer)
    values, policy = mdp.value_iteration(spec, tol=1e-8)
    return spec, values, policy
