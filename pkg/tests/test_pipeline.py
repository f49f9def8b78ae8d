import numpy as np
import pytest

from presmaint import forecaster as fc
from presmaint import ingest, mdp, pipeline
from presmaint.ingest import UnitSeries
from presmaint.synthetic import make_linear_units


def truncate(unit: UnitSeries, at_cycle: int) -> UnitSeries:
    records = [r for r in unit.records if r.cycle <= at_cycle]
    return UnitSeries(unit_id=unit.unit_id, records=records, failure_cycle=records[-1].cycle)


@pytest.fixture(scope="module")
def small_report():
    units = make_linear_units(n_units=6, seed=31, lifespan_range=(60, 90))
    return pipeline.run_pipeline(
        units,
        seed=31,
        window_len=10,
        model_config=fc.small_config(window_len=10, dropout=0.0),
        train_epochs=3,
    )


class TestRunPipeline:
    def test_report_shape(self, small_report):
        assert len(small_report.recommendations) == 6
        assert small_report.policy.shape == (10,)
        assert small_report.spec.n_actions == 3
        assert small_report.forecaster_rmse is not None

    def test_actions_have_names(self, small_report):
        for rec in small_report.recommendations:
            assert rec.policy_action_name == mdp.ACTION_NAMES[rec.policy_action]
            assert rec.rule_based in ("ImmediateMaintenance", "PeriodicInspection")

    def test_transition_rows_are_distributions(self, small_report):
        sums = small_report.spec.transitions.sum(axis=2)
        assert np.all(np.abs(sums - 1.0) <= 1e-9)

    def test_deterministic_for_seed(self, small_report):
        units = make_linear_units(n_units=6, seed=31, lifespan_range=(60, 90))
        again = pipeline.run_pipeline(
            units,
            seed=31,
            window_len=10,
            model_config=fc.small_config(window_len=10, dropout=0.0),
            train_epochs=3,
        )
        assert [r.__dict__ for r in again.recommendations] == [
            r.__dict__ for r in small_report.recommendations
        ]
        assert np.array_equal(again.policy, small_report.policy)


class TestRecommendations:
    """Semantic checks on the session-scoped calibrated pipeline."""

    def test_healthy_unit_gets_no_action(
        self, trained_forecaster, synthetic_units, synthetic_windows, calibrated_mdp
    ):
        stats, _ = synthetic_windows
        spec, _, policy = calibrated_mdp
        sequences = pipeline.predict_unit_sequences(
            trained_forecaster,
            ingest.make_all_windows(synthetic_units, stats, 30, 125.0),
        )
        featurizer = pipeline.build_featurizer(sequences)
        healthy = [truncate(synthetic_units[0], at_cycle=40)]
        recs = pipeline.recommend_for_units(
            trained_forecaster, healthy, stats, featurizer, policy,
            window_len=30, rul_cap=125.0,
        )
        assert recs[0].predicted_rul > 100.0
        assert recs[0].policy_action_name == "NoAction"
        assert recs[0].rule_based == "PeriodicInspection"

    def test_near_failure_unit_gets_maintenance(
        self, trained_forecaster, synthetic_units, synthetic_windows, calibrated_mdp
    ):
        stats, _ = synthetic_windows
        spec, _, policy = calibrated_mdp
        sequences = pipeline.predict_unit_sequences(
            trained_forecaster,
            ingest.make_all_windows(synthetic_units, stats, 30, 125.0),
        )
        featurizer = pipeline.build_featurizer(sequences)
        failing = [synthetic_units[1]]  # full run-to-failure series
        recs = pipeline.recommend_for_units(
            trained_forecaster, failing, stats, featurizer, policy,
            window_len=30, rul_cap=125.0,
        )
        assert recs[0].predicted_rul < 20.0
        assert recs[0].policy_action_name in ("PartialMaintenance", "CompleteOverhaul")
        assert recs[0].rule_based == "ImmediateMaintenance"

    def test_policy_override_is_used(self, small_report):
        units = make_linear_units(n_units=6, seed=31, lifespan_range=(60, 90))
        forced = pipeline.run_pipeline(
            units,
            seed=31,
            window_len=10,
            model_config=fc.small_config(window_len=10, dropout=0.0),
            train_epochs=3,
            policy_override=[2] * 10,
        )
        assert all(r.policy_action == 2 for r in forced.recommendations)
