import numpy as np
import pytest

from presmaint import artifacts, mdp
from presmaint.numerics import substream


class TestRuleBased:
    def test_below_threshold_fires(self):
        assert mdp.rule_based_recommend(5.0, 10.0) is mdp.Recommendation.IMMEDIATE_MAINTENANCE

    def test_boundary_is_periodic(self):
        # strict less-than at the limit
        assert mdp.rule_based_recommend(10.0, 10.0) is mdp.Recommendation.PERIODIC_INSPECTION

    def test_high_rul_periodic(self):
        assert mdp.rule_based_recommend(500.0, 10.0) is mdp.Recommendation.PERIODIC_INSPECTION


class TestPca:
    def test_collinear_points(self):
        points = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [-1.0, -1.0]])
        f = mdp.fit_pca(points, p=1)
        expected = np.array([1.0, 1.0]) / np.sqrt(2.0)
        assert np.allclose(np.abs(f.components[0]), expected, atol=1e-12)
        assert f.components[0][0] > 0  # sign convention
        assert f.explained_variance_ratio[0] == pytest.approx(1.0)

    def test_orthonormality(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(200, 3))
        f = mdp.fit_pca(X, p=3)
        gram = f.components @ f.components.T
        assert np.allclose(gram, np.eye(3), atol=1e-9)

    def test_isotropic_determinism(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(500, 2))
        a = mdp.fit_pca(X, p=2)
        b = mdp.fit_pca(X, p=2)
        assert np.array_equal(a.components, b.components)

    def test_one_dimensional_data(self):
        X = np.array([[1.0], [4.0], [9.0]])
        f = mdp.fit_pca(X, p=1)
        assert np.allclose(np.abs(f.components), [[1.0]])

    def test_rank_deficient_rejected(self):
        points = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [-1.0, -1.0]])
        with pytest.raises(ValueError, match="rank"):
            mdp.fit_pca(points, p=2)


class TestDiscretize:
    def _featurizer(self):
        values = np.arange(100, dtype=np.float64).reshape(-1, 1)
        return mdp.fit_pca(values, p=1, rul_values=np.arange(100, dtype=np.float64))

    def test_percentile_5_maps_to_bin_0(self):
        f = self._featurizer()
        assert mdp.discretize(f, np.array([5.0])) == 0

    def test_percentile_95_maps_to_bin_9(self):
        f = self._featurizer()
        assert mdp.discretize(f, np.array([95.0])) == 9

    def test_below_range_clamps_to_0(self):
        f = self._featurizer()
        assert mdp.discretize(f, np.array([-1000.0])) == 0

    def test_monotone_in_projection(self):
        f = self._featurizer()
        bins = [mdp.discretize(f, np.array([v])) for v in np.linspace(-10, 110, 200)]
        assert all(a <= b for a, b in zip(bins, bins[1:]))

    def test_bin_centers_recorded(self):
        f = self._featurizer()
        assert f.bin_centers is not None
        assert all(a < b for a, b in zip(f.bin_centers, f.bin_centers[1:]))


class TestRulFeatures:
    def test_shape_and_first_difference(self):
        rows = mdp.rul_features([10.0, 8.0, 7.0])
        assert rows.shape == (3, 3)
        assert rows[0, 1] == 0.0
        assert rows[1, 1] == -2.0
        assert rows[2, 2] == pytest.approx((10 + 8 + 7) / 3)


class TestCalibrate:
    def test_empirical_frequencies_without_smoothing(self):
        seqs = [[[0, 0], [0, 0], [0, 0], [0, 1]]]
        with pytest.warns(UserWarning, match="uniform"):
            spec = mdp.calibrate_mdp(seqs, cost=[0.0], downtime=[0.0], smoothing=0.0, n_states=10)
        assert spec.transitions[0, 0, 0] == pytest.approx(0.75)
        assert spec.transitions[0, 0, 1] == pytest.approx(0.25)

    def test_unobserved_row_uniform(self):
        with pytest.warns(UserWarning, match="uniform"):
            spec = mdp.calibrate_mdp([[[0, 1]]], cost=[0.0], downtime=[0.0], n_states=10)
        assert np.allclose(spec.transitions[5, 0], 0.1)

    def test_smoothing_formula(self):
        seqs = [[[3, 4]] * 100]
        with pytest.warns(UserWarning):
            spec = mdp.calibrate_mdp(seqs, cost=[0.0], downtime=[0.0], smoothing=1.0, n_states=10)
        assert spec.transitions[3, 0, 4] == pytest.approx(101.0 / 110.0)

    def test_rows_are_distributions(self):
        rng = substream(1, "calib")
        seqs = [
            [[int(rng.integers(0, 10)) for _ in range(50)] for _ in range(5)]
            for _ in range(3)
        ]
        spec = mdp.calibrate_mdp(seqs, bin_centers=np.linspace(0, 90, 10))
        sums = spec.transitions.sum(axis=2)
        assert np.all(np.abs(sums - 1.0) <= 1e-9)
        assert np.all(spec.transitions >= 0.0)


class TestReward:
    def _table_spec(self, gain=5.0, cost=2.0, downtime=1.0, alpha=1.0, beta=1.0, gamma=1.0):
        transitions = np.ones((1, 1, 1))
        return mdp.MdpSpec(
            transitions=transitions,
            cost=np.array([cost]),
            downtime=np.array([downtime]),
            rul_gain=np.array([[gain]]),
            alpha=alpha,
            beta=beta,
            gamma_weight=gamma,
            discount=0.9,
        )

    def test_plug_in(self):
        spec = self._table_spec()
        assert mdp.reward(spec, 0, 0, 0) == 2.0

    def test_zero_weights(self):
        spec = self._table_spec(alpha=0.0, beta=0.0, gamma=0.0)
        assert mdp.reward(spec, 0, 0, 0) == 0.0

    def test_beta_scales_cost_only(self):
        base = self._table_spec()
        doubled = self._table_spec(beta=2.0)
        assert mdp.reward(doubled, 0, 0, 0) == mdp.reward(base, 0, 0, 0) - 2.0

    def test_expected_reward_consistent_with_transition_rewards(self):
        centers = np.linspace(0.0, 90.0, 10)
        rng = substream(2, "calib2")
        seqs = [[[int(rng.integers(0, 10)) for _ in range(80)]] for _ in range(2)]
        spec = mdp.calibrate_mdp(seqs, cost=[0.0, 1.0], downtime=[0.0, 0.5], bin_centers=centers)
        for s in range(10):
            for a in range(2):
                mc = sum(
                    spec.transitions[s, a, t] * mdp.reward(spec, s, a, t) for t in range(10)
                )
                assert mdp.expected_reward(spec, s, a) == pytest.approx(mc, abs=1e-12)

    def test_uniform_row_mean(self):
        # centers 0, c, ..., 9c and a uniform row from state 0 average to 4.5c
        c = 2.0
        centers = np.arange(10) * c
        transitions = np.full((10, 1, 10), 0.1)
        gain = np.einsum("sat,t->sa", transitions, centers) - centers[:, None]
        spec = mdp.MdpSpec(
            transitions=transitions,
            cost=np.array([0.0]),
            downtime=np.array([0.0]),
            rul_gain=gain,
            bin_centers=centers,
            discount=0.9,
        )
        assert mdp.expected_reward(spec, 0, 0) == pytest.approx(4.5 * c)


class TestStep:
    def test_deterministic_row(self):
        spec = mdp.toy_two_state_spec()
        rng = substream(3, "step")
        for _ in range(20):
            s_next, _ = mdp.step(spec, 1, 1, rng)
            assert s_next == 0

    def test_uniform_frequencies_within_3_sigma(self):
        transitions = np.full((10, 1, 10), 0.1)
        spec = mdp.MdpSpec(
            transitions=transitions,
            cost=np.zeros(1),
            downtime=np.zeros(1),
            rul_gain=np.zeros((10, 1)),
            discount=0.9,
        )
        rng = substream(4, "uniform")
        n = 100_000
        draws = np.array([mdp.step(spec, 0, 0, rng)[0] for _ in range(n)])
        p = 0.1
        sigma = np.sqrt(p * (1 - p) / n)
        freq = np.bincount(draws, minlength=10) / n
        assert np.all(np.abs(freq - p) <= 3 * sigma)

    def test_same_seed_same_trajectory(self):
        spec = mdp.random_spec(substream(5, "spec"))
        t1 = [mdp.step(spec, 3, 1, substream(6, "t"))[0] for _ in range(1)]
        a = substream(7, "traj")
        b = substream(7, "traj")
        traj_a = [mdp.step(spec, s % 10, 0, a) for s in range(50)]
        traj_b = [mdp.step(spec, s % 10, 0, b) for s in range(50)]
        assert traj_a == traj_b


class TestValueIteration:
    def test_toy_oracle(self):
        spec = mdp.toy_two_state_spec()
        v, policy = mdp.value_iteration(spec, tol=1e-10)
        assert np.allclose(v, mdp.TOY_OPTIMAL_VALUES, atol=1e-8)
        assert tuple(policy) == mdp.TOY_OPTIMAL_POLICY

    def test_myopic_limit(self):
        rng = substream(8, "myopic")
        spec = mdp.random_spec(rng, discount=0.0)
        v, _ = mdp.value_iteration(spec, tol=1e-10)
        r_sa = mdp.expected_reward_table(spec)
        assert np.allclose(v, r_sa.max(axis=1), atol=1e-10)

    def test_reward_shift_shifts_values(self):
        rng = substream(9, "shift")
        for _ in range(5):
            spec = mdp.random_spec(rng)
            c = 3.7
            shifted = mdp.MdpSpec(
                transitions=spec.transitions,
                cost=spec.cost,
                downtime=spec.downtime,
                rul_gain=spec.rul_gain + c,
                alpha=spec.alpha,
                beta=spec.beta,
                gamma_weight=spec.gamma_weight,
                discount=spec.discount,
            )
            v, policy = mdp.value_iteration(spec, tol=1e-10)
            v2, policy2 = mdp.value_iteration(shifted, tol=1e-10)
            assert np.allclose(v2, v + c / (1.0 - spec.discount), atol=1e-6)
            assert np.array_equal(policy, policy2)

    def test_residual_on_random_specs(self):
        rng = substream(10, "resid")
        for _ in range(20):
            spec = mdp.random_spec(rng)
            v, _ = mdp.value_iteration(spec, tol=1e-8)
            assert mdp.bellman_residual(spec, v) < 1e-8

    def test_greedy_invariant_under_positive_affine_rewards(self):
        rng = substream(11, "affine")
        for _ in range(10):
            spec = mdp.random_spec(rng)
            k, c = 2.5, -1.2
            scaled = mdp.MdpSpec(
                transitions=spec.transitions,
                cost=spec.cost * k,
                downtime=spec.downtime * k,
                rul_gain=spec.rul_gain * k + c,
                discount=spec.discount,
            )
            _, policy = mdp.value_iteration(spec, tol=1e-10)
            _, policy2 = mdp.value_iteration(scaled, tol=1e-10)
            assert np.array_equal(policy, policy2)

    def test_tie_breaks_to_lowest_action(self):
        transitions = np.ones((1, 2, 1))
        spec = mdp.MdpSpec(
            transitions=transitions,
            cost=np.zeros(2),
            downtime=np.zeros(2),
            rul_gain=np.array([[5.0, 5.0]]),
            discount=0.5,
        )
        _, policy = mdp.value_iteration(spec)
        assert policy[0] == 0


class TestPolicyEvaluation:
    def test_toy_optimal_policy(self):
        spec = mdp.toy_two_state_spec()
        v = mdp.policy_evaluation(spec, [0, 1])
        assert np.allclose(v, (10.0, 8.0), atol=1e-10)

    def test_toy_keep_keep(self):
        spec = mdp.toy_two_state_spec()
        v = mdp.policy_evaluation(spec, [0, 0])
        assert np.allclose(v, (10.0, 0.0), atol=1e-10)

    def test_zero_reward_mdp(self):
        transitions = np.full((3, 2, 3), 1.0 / 3.0)
        spec = mdp.MdpSpec(
            transitions=transitions,
            cost=np.zeros(2),
            downtime=np.zeros(2),
            rul_gain=np.zeros((3, 2)),
            discount=0.9,
        )
        assert np.allclose(mdp.policy_evaluation(spec, [0, 1, 0]), 0.0)

    def test_agrees_with_value_iteration(self):
        rng = substream(12, "pe")
        for _ in range(10):
            spec = mdp.random_spec(rng)
            tol = 1e-8
            v, policy = mdp.value_iteration(spec, tol=tol)
            v_pi = mdp.policy_evaluation(spec, policy, tol=tol)
            assert np.abs(v - v_pi).max() < 2 * tol


class TestEnv:
    def test_episode_truncation(self):
        spec = mdp.toy_two_state_spec()
        env = mdp.MaintenanceEnv(spec, substream(13, "env"))
        env.reset()
        done = False
        steps = 0
        while not done:
            _, _, done = env.step(0)
            steps += 1
        assert steps == spec.episode_len

    def test_seeded_determinism(self):
        spec = mdp.random_spec(substream(14, "env-spec"))
        a = mdp.MaintenanceEnv(spec, substream(15, "env-a"))
        b = mdp.MaintenanceEnv(spec, substream(15, "env-a"))
        a.reset(), b.reset()
        for _ in range(50):
            ra = a.step(1)
            rb = b.step(1)
            assert ra == rb


class TestSerialization:
    def test_round_trip(self):
        rng = substream(16, "serde")
        spec = mdp.random_spec(rng)
        text = artifacts.dumps_mdp(spec)
        back = artifacts.loads_mdp(text)
        assert np.array_equal(spec.transitions, back.transitions)
        assert np.array_equal(spec.rul_gain, back.rul_gain)
        assert np.array_equal(spec.initial_dist, back.initial_dist)
        assert artifacts.dumps_mdp(back) == text

    def test_toy_round_trip(self):
        spec = mdp.toy_two_state_spec()
        back = artifacts.loads_mdp(artifacts.dumps_mdp(spec))
        v, policy = mdp.value_iteration(back)
        assert np.allclose(v, (10.0, 8.0), atol=1e-8)


class TestSynthesizedOutcomes:
    def test_shapes_and_direction(self):
        centers = np.linspace(5.0, 120.0, 10)  # state 9 healthiest
        no_action = [[9, 8, 7, 6, 5, 4, 3, 2, 1, 0]]
        seqs = mdp.synthesize_action_outcomes(no_action, centers, samples_per_state=4)
        assert len(seqs) == 3
        # overhaul restores the healthiest state
        for s, s_next in seqs[2]:
            assert s_next == 9
        # partial maintenance restores exactly 3 ranks (clamped at the top)
        for s, s_next in seqs[1]:
            assert s_next == min(9, s + 3)
        assert seqs[0] == no_action

    def test_no_action_passthrough_preserves_counts(self):
        centers = np.linspace(5.0, 120.0, 10)
        seqs = mdp.synthesize_action_outcomes([[0, 1], [2, 3]], centers, samples_per_state=2)
        assert len(seqs[1]) == 20 and len(seqs[2]) == 20
