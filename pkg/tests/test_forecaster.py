import math

import numpy as np
import pytest

import presmaint.numerics as nx
from presmaint import forecaster as fc
from presmaint import ingest
from presmaint.ingest import RulWindow
from presmaint.synthetic import make_linear_units


def tiny_cfg(**overrides):
    base = dict(
        d_model=8, n_heads=2, d_k=4, d_v=4, n_layers=1, d_ff=16,
        window_len=4, dropout=0.0,
    )
    base.update(overrides)
    return fc.TransformerConfig(**base)


def make_window(rng, cfg, feature_dim=5, target=60.0, unit=1, cycle=10):
    return RulWindow(
        inputs=rng.uniform(-1, 1, size=(cfg.window_len, feature_dim)),
        target_rul=target,
        unit_id=unit,
        end_cycle=cycle,
    )


class TestPositionalEncoding:
    def test_origin_values(self):
        pe = fc.positional_encoding(3, 6).data
        assert pe[0, 0] == 0.0  # sin(0)
        assert pe[0, 1] == 1.0  # cos(0)

    def test_deterministic(self):
        a = fc.positional_encoding(7, 8).data
        b = fc.positional_encoding(7, 8).data
        assert np.array_equal(a, b)


class TestConfig:
    def test_head_width_invariant(self):
        with pytest.raises(ValueError, match="d_model"):
            fc.TransformerConfig(d_model=10, n_heads=4, d_k=3)


class TestSelfAttention:
    def setup_method(self):
        self.cfg = tiny_cfg()
        self.params = fc.init_params(self.cfg, feature_dim=5, seed=0)
        self.rng = np.random.default_rng(5)

    def test_single_token_output_equals_value_row(self):
        x = nx.tensor(self.rng.uniform(-1, 1, size=(1, self.cfg.d_model)))
        out = fc.self_attention(x, self.params, "enc0.attn", self.cfg)
        v = nx.matmul(x, self.params["enc0.attn.h0.wv"])
        assert np.array_equal(out.head_values[0].data, v.data)

    def test_identical_tokens_attend_uniformly(self):
        row = self.rng.uniform(-1, 1, size=(1, self.cfg.d_model))
        x = nx.tensor(np.repeat(row, 2, axis=0))
        out = fc.self_attention(x, self.params, "enc0.attn", self.cfg)
        for alpha in out.weights:
            assert np.array_equal(alpha.data, np.full((2, 2), 0.5))

    def test_causal_mask_zeroes_future(self):
        x = nx.tensor(self.rng.uniform(-1, 1, size=(3, self.cfg.d_model)))
        out = fc.self_attention(x, self.params, "enc0.attn", self.cfg, mask=fc.causal_mask(3))
        for alpha in out.weights:
            assert alpha.data[0, 1] == 0.0
            assert alpha.data[0, 2] == 0.0
            assert alpha.data[1, 2] == 0.0

    def test_weight_rows_sum_to_one(self):
        for _ in range(50):
            x = nx.tensor(self.rng.uniform(-3, 3, size=(6, self.cfg.d_model)))
            out = fc.self_attention(x, self.params, "enc0.attn", self.cfg)
            for alpha in out.weights:
                assert np.all(np.abs(alpha.data.sum(axis=1) - 1.0) <= 1e-9)

    def test_shape_mismatch(self):
        with pytest.raises(nx.ShapeError):
            fc.self_attention(nx.zeros(3, 5), self.params, "enc0.attn", self.cfg)


class TestCrossAttention:
    def setup_method(self):
        self.cfg = tiny_cfg(use_decoder=True)
        self.params = fc.init_params(self.cfg, feature_dim=5, seed=1)
        self.rng = np.random.default_rng(6)

    def test_single_encoder_state_takes_all_attention(self):
        dec = nx.tensor(self.rng.uniform(-1, 1, size=(4, self.cfg.d_model)))
        enc = nx.tensor(self.rng.uniform(-1, 1, size=(1, self.cfg.d_model)))
        out = fc.cross_attention(dec, enc, self.params, "dec0.cross", self.cfg)
        for alpha in out.weights:
            assert np.array_equal(alpha.data, np.ones((4, 1)))

    def test_equal_encoder_rows_give_identical_attended_values(self):
        dec = nx.tensor(self.rng.uniform(-1, 1, size=(3, self.cfg.d_model)))
        enc_row = self.rng.uniform(-1, 1, size=(1, self.cfg.d_model))
        enc = nx.tensor(np.repeat(enc_row, 5, axis=0))
        out = fc.cross_attention(dec, enc, self.params, "dec0.cross", self.cfg)
        for values in out.head_values:
            assert np.allclose(values.data, values.data[0], atol=1e-12)

    def test_weight_rows_sum_to_one(self):
        dec = nx.tensor(self.rng.uniform(-2, 2, size=(3, self.cfg.d_model)))
        enc = nx.tensor(self.rng.uniform(-2, 2, size=(6, self.cfg.d_model)))
        out = fc.cross_attention(dec, enc, self.params, "dec0.cross", self.cfg)
        for alpha in out.weights:
            assert np.all(np.abs(alpha.data.sum(axis=1) - 1.0) <= 1e-9)

    def test_width_mismatch_rejected(self):
        with pytest.raises(nx.ShapeError, match="mismatch"):
            fc.cross_attention(nx.zeros(2, 8), nx.zeros(3, 6), self.params, "dec0.cross", self.cfg)


class TestFfn:
    def test_identity_relu_passthrough(self):
        x = nx.tensor([[-1.0, 2.0]])
        eye = nx.tensor(np.eye(2))
        zero = nx.tensor(np.zeros((1, 2)))
        out = fc.ffn_block(x, eye, zero, eye, zero)
        assert out.data.tolist() == [[0.0, 2.0]]

    def test_zero_input_returns_output_bias(self):
        rng = np.random.default_rng(2)
        w_in = nx.tensor(rng.uniform(-1, 1, (3, 4)))
        w_out = nx.tensor(rng.uniform(-1, 1, (4, 3)))
        b_out = nx.tensor([[1.0, -2.0, 0.5]])
        out = fc.ffn_block(nx.zeros(1, 3), w_in, nx.tensor(np.zeros((1, 4))), w_out, b_out)
        assert np.allclose(out.data, b_out.data)

    def test_positive_homogeneity_pre_activation(self):
        rng = np.random.default_rng(3)
        x = nx.tensor(np.abs(rng.uniform(0.1, 1, (2, 3))))
        w_in = nx.tensor(np.abs(rng.uniform(0.1, 1, (3, 4))))
        zero = nx.tensor(np.zeros((1, 4)))
        h1 = nx.relu(nx.add(nx.matmul(x, w_in), zero))
        h2 = nx.relu(nx.add(nx.matmul(nx.scale(x, 2.0), w_in), zero))
        assert np.allclose(h2.data, 2.0 * h1.data)


class TestEncodeDecode:
    def setup_method(self):
        self.cfg = tiny_cfg(use_decoder=True)
        self.params = fc.init_params(self.cfg, feature_dim=5, seed=4)
        self.rng = np.random.default_rng(8)
        self.window = self.rng.uniform(-1, 1, size=(self.cfg.window_len, 5))

    def test_encode_shape_and_determinism(self):
        h1 = fc.encode(self.window, self.cfg, self.params)
        h2 = fc.encode(self.window, self.cfg, self.params)
        assert h1.shape == (self.cfg.window_len, self.cfg.d_model)
        assert np.array_equal(h1.data, h2.data)

    def test_decoder_causality_bit_exact(self):
        enc = fc.encode(self.window, self.cfg, self.params)
        targets = self.rng.uniform(0, 1, size=4)
        base = fc.decode(targets, enc, self.cfg, self.params).data.copy()
        perturbed = targets.copy()
        perturbed[3] += 5.0
        out = fc.decode(perturbed, enc, self.cfg, self.params).data
        assert np.array_equal(out[:3], base[:3])
        assert not np.array_equal(out[3], base[3])

    def test_decoder_length_one(self):
        enc = fc.encode(self.window, self.cfg, self.params)
        out = fc.decode([0.5], enc, self.cfg, self.params)
        assert out.shape == (1, self.cfg.d_model)

    def test_decoder_output_shape(self):
        enc = fc.encode(self.window, self.cfg, self.params)
        out = fc.decode([0.1, 0.2, 0.3], enc, self.cfg, self.params)
        assert out.shape == (3, self.cfg.d_model)

    def test_decoder_disabled_error(self):
        cfg = tiny_cfg(use_decoder=False)
        params = fc.init_params(cfg, feature_dim=5, seed=4)
        enc = fc.encode(self.window, cfg, params)
        with pytest.raises(ValueError, match="decoder"):
            fc.decode([0.5], enc, cfg, params)

    def test_permuting_time_steps_changes_encoding(self):
        for trial in range(5):
            rng = np.random.default_rng(100 + trial)
            window = rng.uniform(-1, 1, size=(self.cfg.window_len, 5))
            swapped = window.copy()
            swapped[[0, 1]] = swapped[[1, 0]]
            h1 = fc.encode(window, self.cfg, self.params).data
            h2 = fc.encode(swapped, self.cfg, self.params).data
            assert not np.allclose(h1, h2)

    def test_encode_gradients_match_finite_differences(self):
        grad_params = {k: v for k, v in self.params.items() if k.startswith("enc0.")}

        def loss_fn():
            return nx.mean_all(fc.encode(self.window, self.cfg, self.params))

        assert nx.max_relative_error(loss_fn, grad_params) < 1e-4


class TestPredictRul:
    def setup_method(self):
        self.cfg = tiny_cfg()
        self.params = fc.init_params(self.cfg, feature_dim=5, seed=9)

    def _with_head(self, bias):
        self.params["head.w"] = nx.tensor(np.zeros((self.cfg.d_model, 1)), True)
        self.params["head.b"] = nx.tensor([[bias]], True)

    def test_zero_logit_gives_half_cap(self):
        self._with_head(0.0)
        h = nx.tensor(np.random.default_rng(0).uniform(-1, 1, (4, self.cfg.d_model)))
        out = fc.predict_rul(h, self.params, 125.0)
        assert out.item() == pytest.approx(62.5)

    def test_log3_logit(self):
        # sigmoid(ln 3) = 0.75, so the estimate is 0.75 * 125 = 93.75
        self._with_head(math.log(3.0))
        h = nx.tensor(np.zeros((4, self.cfg.d_model)))
        out = fc.predict_rul(h, self.params, 125.0)
        assert out.item() == pytest.approx(93.75, abs=1e-12)

    def test_saturation_limits_stay_strict(self):
        for bias in (1e4, -1e4):
            self._with_head(bias)
            h = nx.tensor(np.zeros((4, self.cfg.d_model)))
            y = fc.predict_rul(h, self.params, 125.0).item()
            assert 0.0 < y < 125.0
            if bias > 0:
                assert y > 124.9
            else:
                assert y < 0.1

    def test_strictly_inside_for_random_inputs(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            h = nx.tensor(rng.uniform(-50, 50, (4, self.cfg.d_model)))
            y = fc.predict_rul(h, self.params, 125.0).item()
            assert 0.0 < y < 125.0


class TestFullModelGradients:
    def test_acceptance_config_gradcheck(self):
        cfg = tiny_cfg()  # d_model=8, heads=2, L=1, window 4
        params = fc.init_params(cfg, feature_dim=3, seed=12)
        rng = np.random.default_rng(13)
        window = rng.uniform(-1, 1, size=(4, 3))
        target = 0.4

        def loss_fn():
            pred = fc.forward_rul(cfg, params, window)
            diff = nx.sub(nx.scale(pred, 1.0 / cfg.rul_cap), nx.tensor([[target]]))
            return nx.mul(diff, diff)

        assert nx.max_relative_error(loss_fn, params) < 1e-4

    def test_decoder_path_gradcheck(self):
        cfg = tiny_cfg(use_decoder=True)
        params = fc.init_params(cfg, feature_dim=3, seed=14)
        rng = np.random.default_rng(15)
        window = rng.uniform(-1, 1, size=(4, 3))
        targets = rng.uniform(0, 1, size=3)

        def loss_fn():
            enc = fc.encode(window, cfg, params)
            out = fc.decode(targets, enc, cfg, params)
            return nx.mean_all(out)

        dec_params = {k: v for k, v in params.items() if k.startswith(("dec", "enc"))}
        assert nx.max_relative_error(loss_fn, dec_params) < 1e-4


class TestTrain:
    def _windows(self, rng, cfg, n=24, target=60.0):
        return [make_window(rng, cfg, target=target, cycle=i + 10) for i in range(n)]

    def test_constant_target_fits(self):
        cfg = tiny_cfg()
        rng = np.random.default_rng(20)
        windows = self._windows(rng, cfg, target=100.0)
        model = fc.Forecaster.create(cfg, feature_dim=5, seed=21)
        history = fc.train(model, windows, epochs=60, seed=22, lr=3e-3, batch_size=8)
        assert history[-1] < 1e-2  # MSE on targets scaled to [0,1]

    def test_zero_epochs_leaves_params(self):
        cfg = tiny_cfg()
        rng = np.random.default_rng(23)
        model = fc.Forecaster.create(cfg, feature_dim=5, seed=24)
        before = {k: v.data.copy() for k, v in model.params.items()}
        history = fc.train(model, self._windows(rng, cfg), epochs=0, seed=25)
        assert history == []
        for k, v in model.params.items():
            assert np.array_equal(before[k], v.data)

    def test_seed_reproducibility(self):
        cfg = tiny_cfg(dropout=0.1)
        rng = np.random.default_rng(26)
        windows = self._windows(rng, cfg)
        h1 = fc.train(fc.Forecaster.create(cfg, 5, seed=1), windows, epochs=3, seed=7)
        h2 = fc.train(fc.Forecaster.create(cfg, 5, seed=1), windows, epochs=3, seed=7)
        assert h1 == h2

    def test_unknown_loss_kind(self):
        cfg = tiny_cfg()
        rng = np.random.default_rng(27)
        model = fc.Forecaster.create(cfg, 5, seed=2)
        with pytest.raises(ValueError, match="loss_kind"):
            fc.train(model, self._windows(rng, cfg), loss_kind="mape", epochs=1)

    def test_smape_trains(self):
        cfg = tiny_cfg()
        rng = np.random.default_rng(28)
        windows = self._windows(rng, cfg, target=80.0)
        model = fc.Forecaster.create(cfg, 5, seed=3)
        history = fc.train(model, windows, loss_kind="smape", epochs=8, seed=4, lr=3e-3)
        assert history[-1] < history[0]


class TestEvaluate:
    def test_perfect_predictions_rmse_zero(self):
        assert fc.rmse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0

    def test_cap_predictor_on_zero_targets(self):
        assert fc.rmse([125.0] * 10, [0.0] * 10) == 125.0

    def test_persistence_is_previous_label(self):
        windows = [
            RulWindow(inputs=np.zeros((2, 2)), target_rul=t, unit_id=1, end_cycle=i)
            for i, t in enumerate([5.0, 4.0, 3.0])
        ]
        preds = fc.persistence_predictions(windows, rul_cap=125.0)
        assert preds.tolist() == [125.0, 5.0, 4.0]

    def test_evaluate_on_synthetic(self):
        units = make_linear_units(n_units=2, seed=30, lifespan_range=(45, 55))
        stats = ingest.fit_normalizer(units)
        windows = ingest.make_all_windows(units, stats, window_len=10, rul_cap=125.0)
        cfg = tiny_cfg(window_len=10)
        model = fc.Forecaster.create(cfg, feature_dim=windows[0].inputs.shape[1], seed=31)
        result = fc.evaluate(model, windows)
        assert result.rmse > 0
        assert len(result.rows) == len(windows)
