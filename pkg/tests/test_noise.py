"""Noise-injection tests: tolerance/scale formulas, policies, protection."""

import math

import numpy as np
import pytest

from fedsdp import (ConfigurationError, DpParams, ModelParams, RoundContext,
                    clamp_ratio, clip, fedsdp_sigma, make_policy, mlp_layout,
                    policy_sigma, privacy_tolerance, protect_upload, sensitivity)
from fedsdp.model import layout_size
from fedsdp.noise import (ConstantPolicy, FedSdpPolicy, NoProtection,
                          SensitivityPolicy, TimeVaryingPolicy)


def dp(epsilon=0.2, delta=0.02, alpha=2.0, beta=0.1, clip_bound=20.0):
    return DpParams(epsilon=epsilon, delta=delta, alpha=alpha, beta=beta,
                    clip_bound=clip_bound)


# Independent one-line oracles, written with a different operation order
# than the implementation.
def oracle_tolerance(ratio, alpha, delta):
    return ratio + alpha * math.log(1.0 / delta)


def oracle_sigma(tolerance, clip_bound, beta, epsilon, size):
    return (2.0 * clip_bound / (epsilon * size)) * math.sqrt(max(tolerance, beta))


class TestFormulas:
    def test_worked_tolerance_example(self):
        # ratio 0.5, alpha 2, delta 0.02 (reciprocal of a 50-sample batch)
        t = privacy_tolerance(0.5, dp())
        assert t == pytest.approx(0.5 + 2 * math.log(50), rel=1e-12)
        assert t == pytest.approx(8.32404601, abs=1e-7)

    def test_tolerance_alpha_limit(self):
        assert privacy_tolerance(0.37, dp(alpha=1e-12)) == pytest.approx(0.37, abs=1e-9)

    def test_tolerance_unit_logarithm(self):
        assert privacy_tolerance(0.0, dp(alpha=1.0, delta=math.exp(-1))) == pytest.approx(1.0)

    def test_worked_sigma_example(self):
        t = privacy_tolerance(0.5, dp())
        assert fedsdp_sigma(t, dp(), 500) == pytest.approx(1.15406, abs=1e-5)

    def test_floor_activation(self):
        params = dp(epsilon=1.0, beta=1.0)
        assert fedsdp_sigma(0.01, params, 40) == pytest.approx(1.0, rel=1e-12)

    def test_epsilon_inverse_scaling(self):
        lo = fedsdp_sigma(5.0, dp(epsilon=0.2), 100)
        hi = fedsdp_sigma(5.0, dp(epsilon=0.4), 100)
        assert lo == pytest.approx(2 * hi, rel=1e-12)

    def test_formula_fidelity_random_tuples(self):
        rng = np.random.default_rng(23)
        for _ in range(1000):
            ratio = rng.uniform(-1, 2)
            alpha = rng.uniform(0.01, 5)
            delta = rng.uniform(1e-6, 0.5)
            eps = rng.uniform(0.01, 5)
            c = rng.uniform(0.1, 50)
            size = int(rng.integers(1, 100_000))
            beta = rng.uniform(1e-3, 10)
            params = dp(epsilon=eps, delta=delta, alpha=alpha, beta=beta, clip_bound=c)
            t = privacy_tolerance(ratio, params)
            assert t == pytest.approx(oracle_tolerance(ratio, alpha, delta), rel=1e-12)
            assert fedsdp_sigma(t, params, size) == pytest.approx(
                oracle_sigma(t, c, beta, eps, size), rel=1e-12)

    def test_sensitivity(self):
        assert sensitivity(dp(clip_bound=20.0), 500) == pytest.approx(40 / 500, rel=1e-15)
        with pytest.raises(ConfigurationError):
            sensitivity(dp(), 0)

    def test_invalid_dp_params_name_the_field(self):
        with pytest.raises(ConfigurationError, match="epsilon"):
            dp(epsilon=-1.0)
        with pytest.raises(ConfigurationError, match="delta"):
            dp(delta=1.0)
        with pytest.raises(ConfigurationError, match="beta"):
            dp(beta=0.0)


class TestMonotonicity:
    def test_sigma_increases_with_ratio_above_floor(self):
        rng = np.random.default_rng(29)
        for _ in range(2000):
            params = dp(epsilon=rng.uniform(0.05, 2), delta=rng.uniform(1e-4, 0.5),
                        alpha=rng.uniform(0.1, 4), beta=1e-6,
                        clip_bound=rng.uniform(0.5, 30))
            size = int(rng.integers(10, 5000))
            r1, r2 = sorted(rng.uniform(0, 1, size=2))
            if r1 == r2:
                continue
            s1 = fedsdp_sigma(privacy_tolerance(r1, params), params, size)
            s2 = fedsdp_sigma(privacy_tolerance(r2, params), params, size)
            assert s1 < s2

    def test_floor_always_respected(self):
        rng = np.random.default_rng(31)
        for _ in range(2000):
            params = dp(epsilon=rng.uniform(0.05, 2), delta=rng.uniform(1e-4, 0.5),
                        alpha=rng.uniform(0.1, 4), beta=rng.uniform(0.01, 20),
                        clip_bound=rng.uniform(0.5, 30))
            size = int(rng.integers(10, 5000))
            t = privacy_tolerance(rng.uniform(-1, 2), params)
            floor = 2 * params.clip_bound * math.sqrt(params.beta) / (params.epsilon * size)
            assert fedsdp_sigma(t, params, size) >= floor * (1 - 1e-12)

    def test_alpha_monotonicity(self):
        for a1, a2 in [(0.5, 1.0), (1.0, 2.0), (2.0, 5.0)]:
            t1 = privacy_tolerance(0.3, dp(alpha=a1))
            t2 = privacy_tolerance(0.3, dp(alpha=a2))
            assert t1 < t2
            assert fedsdp_sigma(t1, dp(), 100) <= fedsdp_sigma(t2, dp(), 100)


class TestClampRatio:
    def test_passthrough_inside_unit_interval(self):
        assert clamp_ratio(0.42) == 0.42

    def test_clamps_outside(self):
        assert clamp_ratio(-0.3) == 0.0
        assert clamp_ratio(1.7) == 1.0


class TestPolicies:
    def ctx(self, **kw):
        defaults = dict(dp=dp(), dataset_size=500, ratio=0.5, round_index=0,
                        total_rounds=100, prev_delta_norm=0.0)
        defaults.update(kw)
        return RoundContext(**defaults)

    def test_fedsdp_composition_matches_worked_example(self):
        sigma = policy_sigma(FedSdpPolicy(), self.ctx())
        assert sigma == pytest.approx(1.15406, abs=1e-5)

    def test_fedsdp_clamps_ratio(self):
        over = policy_sigma(FedSdpPolicy(), self.ctx(ratio=3.0))
        assert over == policy_sigma(FedSdpPolicy(), self.ctx(ratio=1.0))
        under = policy_sigma(FedSdpPolicy(), self.ctx(ratio=-2.0))
        assert under == policy_sigma(FedSdpPolicy(), self.ctx(ratio=0.0))

    def test_constant_is_round_independent_and_pins_worst_case(self):
        policy = ConstantPolicy()
        s1 = policy_sigma(policy, self.ctx(round_index=0, ratio=0.1))
        s2 = policy_sigma(policy, self.ctx(round_index=77, ratio=0.9))
        assert s1 == s2
        expected = (2 * 20.0 / (0.2 * 500)) * math.sqrt(1 - 2.0 * math.log(0.02))
        assert s1 == pytest.approx(expected, rel=1e-12)

    def test_time_varying_geometric_ratio(self):
        policy = TimeVaryingPolicy(rho_decay=0.95)
        sigmas = [policy_sigma(policy, self.ctx(round_index=t)) for t in range(10)]
        for t in range(9):
            assert sigmas[t + 1] / sigmas[t] == pytest.approx(0.95, rel=1e-12)

    def test_time_varying_matches_constant_noise_energy(self):
        total = 60
        constant = ConstantPolicy()
        varying = TimeVaryingPolicy(rho_decay=0.98)
        const_energy = sum(
            policy_sigma(constant, self.ctx(round_index=t, total_rounds=total)) ** 2
            for t in range(total))
        varying_energy = sum(
            policy_sigma(varying, self.ctx(round_index=t, total_rounds=total)) ** 2
            for t in range(total))
        assert varying_energy == pytest.approx(const_energy, rel=1e-10)

    def test_sensitivity_policy_clamps_scale(self):
        policy = SensitivityPolicy()
        base = policy_sigma(ConstantPolicy(), self.ctx())
        low = policy_sigma(policy, self.ctx(prev_delta_norm=0.0))
        mid = policy_sigma(policy, self.ctx(prev_delta_norm=10.0))  # 10/20 = 0.5
        high = policy_sigma(policy, self.ctx(prev_delta_norm=1e6))
        assert low == pytest.approx(0.25 * base, rel=1e-12)
        assert mid == pytest.approx(0.5 * base, rel=1e-12)
        assert high == pytest.approx(base, rel=1e-12)

    def test_none_policy_is_silent(self):
        policy = NoProtection()
        assert policy_sigma(policy, self.ctx()) == 0.0
        assert not policy.protects

    def test_missing_context_fields_are_configuration_errors(self):
        with pytest.raises(ConfigurationError, match="ratio"):
            policy_sigma(FedSdpPolicy(), self.ctx(ratio=None))
        with pytest.raises(ConfigurationError, match="total_rounds"):
            policy_sigma(TimeVaryingPolicy(), self.ctx(total_rounds=None))
        with pytest.raises(ConfigurationError, match="prev_delta_norm"):
            policy_sigma(SensitivityPolicy(), self.ctx(prev_delta_norm=None))

    def test_make_policy_registry(self):
        assert isinstance(make_policy("fedsdp"), FedSdpPolicy)
        assert isinstance(make_policy("none"), NoProtection)
        with pytest.raises(ConfigurationError):
            make_policy("laplace")

    def test_all_policies_nonnegative(self):
        rng = np.random.default_rng(37)
        for name in ("fedsdp", "constant", "time_varying", "sensitivity", "none"):
            policy = make_policy(name)
            for _ in range(200):
                ctx = self.ctx(ratio=rng.uniform(-1, 2),
                               round_index=int(rng.integers(0, 100)),
                               prev_delta_norm=float(rng.uniform(0, 100)))
                assert policy_sigma(policy, ctx) >= 0.0


class TestProtectUpload:
    def params(self, values):
        layout = mlp_layout(1, (), len(values) // 2)
        return ModelParams(np.array(values, dtype=np.float64), layout)

    def test_noop_path(self):
        params = self.params([0.3, 0.4])
        out = protect_upload(params, 0.0, 10.0, np.random.default_rng(0))
        assert np.array_equal(out.values, params.values)

    def test_clip_only_path(self):
        params = self.params([6.0, 8.0])  # norm 10 = 2 * clip bound
        out = protect_upload(params, 0.0, 5.0, np.random.default_rng(0))
        assert out.norm() == pytest.approx(5.0, rel=1e-12)

    def test_noise_is_replayable_and_clip_precedes_noise(self):
        params = self.params([6.0, 8.0, 1.0, -2.0])
        out = protect_upload(params, 1.0, 5.0, np.random.default_rng(9))
        clipped = clip(params, 5.0)
        noise = np.random.default_rng(9).normal(0.0, 1.0, size=4)
        assert np.array_equal(out.values, clipped.values + noise)
        # removing the replayed noise always lands back inside the ball
        assert np.linalg.norm(out.values - noise) <= 5.0 * (1 + 1e-12)
