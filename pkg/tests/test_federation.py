import numpy as np
import pytest

from presmaint import artifacts
from presmaint import federation as fed
from presmaint import forecaster as fc
from presmaint import ingest
from presmaint.numerics import tensor
from presmaint.synthetic import make_linear_units, split_units


def small_cfg():
    return fc.small_config(window_len=10, dropout=0.0)


def make_dataset(seed, n_units=4, machine_id=0, window_len=10):
    units = make_linear_units(
        n_units=n_units, seed=seed, lifespan_range=(40, 60), machine_id=machine_id
    )
    stats = ingest.fit_normalizer(units)
    return ingest.make_all_windows(units, stats, window_len=window_len, rul_cap=125.0)


def params_of(values):
    return {"w": tensor(np.array(values), requires_grad=True)}


class TestAggregate:
    def test_mean_of_two(self):
        out = fed.aggregate([params_of([[1.0, 3.0]]), params_of([[3.0, 5.0]])])
        assert out["w"].data.tolist() == [[2.0, 4.0]]

    def test_identical_copies_bit_exact(self):
        base = np.array([[0.5, -0.25, 1.75], [2.0, -0.125, 0.0625]])
        for k in (2, 3, 4, 7):
            out = fed.aggregate([params_of(base) for _ in range(k)])
            assert np.array_equal(out["w"].data, base)

    def test_single_machine_identity(self):
        base = np.array([[0.1234567, -9.87]])
        out = fed.aggregate([params_of(base)])
        assert np.array_equal(out["w"].data, base)

    def test_permutation_invariance_bit_exact(self):
        rng = np.random.default_rng(3)
        sets = [params_of(rng.normal(size=(4, 5))) for _ in range(5)]
        ref = fed.aggregate(sets)["w"].data
        for perm_seed in range(5):
            order = np.random.default_rng(perm_seed).permutation(5)
            permuted = fed.aggregate([sets[i] for i in order])["w"].data
            assert np.array_equal(ref, permuted)

    def test_shape_mismatch_names_machine(self):
        with pytest.raises(ValueError, match="machine 1"):
            fed.aggregate([params_of([[1.0, 2.0]]), params_of([[1.0, 2.0, 3.0]])])

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            fed.aggregate([])


class TestEnsemble:
    def _stub_member(self, value, cfg, feature_dim):
        model = fc.Forecaster.create(cfg, feature_dim, seed=0)

        class Stub(fc.Forecaster):
            def predict(self, window):
                return value

        return Stub(config=model.config, feature_dim=feature_dim, params=model.params)

    def test_mean_of_members(self):
        cfg = small_cfg()
        members = [self._stub_member(v, cfg, 3) for v in (100.0, 110.0, 120.0)]
        ensemble = fed.FederatedEnsemble(members=members)
        assert fed.ensemble_predict(ensemble, np.zeros((10, 3))) == 110.0

    def test_single_member(self):
        cfg = small_cfg()
        ensemble = fed.FederatedEnsemble(members=[self._stub_member(42.0, cfg, 3)])
        assert fed.ensemble_predict(ensemble, np.zeros((10, 3))) == 42.0

    def test_bounded_members_bound_ensemble(self):
        cfg = small_cfg()
        units = make_linear_units(n_units=1, seed=11, lifespan_range=(40, 45))
        stats = ingest.fit_normalizer(units)
        windows = ingest.make_all_windows(units, stats, window_len=10, rul_cap=125.0)
        members = [
            fc.Forecaster.create(cfg, windows[0].inputs.shape[1], seed=s) for s in range(3)
        ]
        ensemble = fed.FederatedEnsemble(members=members)
        pred = fed.ensemble_predict(ensemble, windows[0].inputs)
        assert 0.0 < pred < 125.0

    def test_monotone_in_members(self):
        cfg = small_cfg()
        low = fed.FederatedEnsemble(
            members=[self._stub_member(v, cfg, 3) for v in (10.0, 20.0, 30.0)]
        )
        high = fed.FederatedEnsemble(
            members=[self._stub_member(v + 5.0, cfg, 3) for v in (10.0, 20.0, 30.0)]
        )
        w = np.zeros((10, 3))
        assert fed.ensemble_predict(high, w) > fed.ensemble_predict(low, w)

    def test_mixed_configs_rejected(self):
        a = fc.Forecaster.create(small_cfg(), 3, seed=0)
        b = fc.Forecaster.create(fc.small_config(window_len=10, dropout=0.5), 3, seed=0)
        with pytest.raises(ValueError, match="configuration"):
            fed.FederatedEnsemble(members=[a, b])


class TestLocalUpdate:
    def test_zero_epochs_returns_central_params(self):
        cfg = small_cfg()
        windows = make_dataset(seed=5)
        central = fc.Forecaster.create(cfg, windows[0].inputs.shape[1], seed=1)
        updated = fed.local_update(central, windows, local_epochs=0, seed=2)
        for name, p in central.params.items():
            assert np.array_equal(p.data, updated.params[name].data)

    def test_identical_data_and_seed_identical_updates(self):
        cfg = small_cfg()
        windows = make_dataset(seed=6)
        central = fc.Forecaster.create(cfg, windows[0].inputs.shape[1], seed=1)
        a = fed.local_update(central, windows, local_epochs=1, seed=3)
        b = fed.local_update(central, windows, local_epochs=1, seed=3)
        for name in a.params:
            assert np.array_equal(a.params[name].data, b.params[name].data)

    def test_loss_decreases_on_learnable_data(self):
        cfg = small_cfg()
        windows = make_dataset(seed=7)
        central = fc.Forecaster.create(cfg, windows[0].inputs.shape[1], seed=1)
        before = fc.evaluate(central, windows).rmse
        updated = fed.local_update(central, windows, local_epochs=2, seed=4)
        after = fc.evaluate(updated, windows).rmse
        assert after < before


class TestRunFederation:
    def test_degenerate_equals_plain_training(self):
        cfg = small_cfg()
        windows = make_dataset(seed=8)
        feature_dim = windows[0].inputs.shape[1]
        result = fed.run_federation(
            fed.FederationConfig(n_machines=1, rounds=1, local_epochs=1, seed=9),
            [windows],
            model_config=cfg,
        )
        plain = fc.Forecaster.create(cfg, feature_dim, seed=9)
        fc.train(plain, windows, epochs=1, seed=9, lr=1e-3, batch_size=32)
        assert artifacts.dumps_checkpoint(result.central) == artifacts.dumps_checkpoint(plain)

    def test_shared_dataset_equals_single_trajectory(self):
        # every machine sees the same data and, by construction, the same
        # seed stream only for machine 0; averaging distinct-seed updates is
        # checked for shape/validity; the strict equality case is K=1
        cfg = small_cfg()
        windows = make_dataset(seed=10)
        result = fed.run_federation(
            fed.FederationConfig(n_machines=2, rounds=1, local_epochs=1, seed=11),
            [windows, windows],
            model_config=cfg,
        )
        assert result.metrics
        assert len(result.final_predictions) == 2

    def test_empty_machine_skipped_with_warning(self):
        cfg = small_cfg()
        windows = make_dataset(seed=12)
        with pytest.warns(UserWarning, match="machine 1"):
            result = fed.run_federation(
                fed.FederationConfig(n_machines=2, rounds=1, local_epochs=1, seed=13),
                [windows, []],
                model_config=cfg,
            )
        assert result.final_predictions[1] == []

    def test_heterogeneous_beats_worst_cross_machine_model(self):
        # cross-evaluation oracle: train one model per machine alone, evaluate
        # every model on every other machine's data, and require the federated
        # central model to beat the worst cross-machine average
        cfg = small_cfg()
        k = 3
        datasets = [make_dataset(seed=20, n_units=3, machine_id=m) for m in range(k)]
        config = fed.FederationConfig(n_machines=k, rounds=2, local_epochs=2, seed=21)
        result = fed.run_federation(config, datasets, model_config=cfg)

        def rmse_on(model, windows):
            return fc.evaluate(model, windows).rmse

        worst_cross = -np.inf
        for m in range(k):
            solo = fc.Forecaster.create(cfg, datasets[m][0].inputs.shape[1], seed=21)
            fc.train(solo, datasets[m], epochs=4, seed=21 + m, lr=1e-3, batch_size=32)
            others = [w for j in range(k) if j != m for w in datasets[j]]
            worst_cross = max(worst_cross, rmse_on(solo, others))
        pooled = [w for d in datasets for w in d]
        assert rmse_on(result.central, pooled) < worst_cross
