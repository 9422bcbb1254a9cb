"""Tests for the memory-trace engine.

The heart of this file is the equivalence harness: the filtered channel
values produced by walking a trace system event by event must agree, to
rounding error, with literal evaluation of the history-based definitions.
Every rule family is exercised on randomized specs and spike trains.
"""

import math

import numpy as np
import pytest

from stdpsim.kernels import (
    CalciumSpec,
    ExponentialCurve,
    PairBasedSpec,
    TabulatedCurve,
    zero_curve,
)
from stdpsim.markov import (
    FastState,
    FullState,
    KernelOutputs,
    LinearJump,
    LinearOutput,
    PositivityError,
    TraceKernel,
    apply_jump,
    as_trace_kernel,
    build_kernel,
    calcium_kernel,
    custom_kernel,
    drift_breakpoints,
    event_masses,
    generator_apply,
    jump_z,
    omega_drift,
    pair_kernel,
    replay_filtered,
    z_flow,
)
from stdpsim.spike_core import SpikeTrain
from stdpsim.testing import (
    RULE_FAMILIES,
    oracle_filtered,
    random_spec,
    random_train,
)


def clock_kernel(scheme="nearest_symmetric"):
    spec = PairBasedSpec.hebbian(
        ExponentialCurve(1.0, 1.0), ExponentialCurve(1.0, 1.0), scheme=scheme
    )
    return pair_kernel(spec, representation="clock")


class TestFlow:
    def test_clock_grows_linearly(self):
        k = clock_kernel()
        out = z_flow(k, np.array([0.3, 2.0]), 0.7)
        np.testing.assert_allclose(out, [1.0, 2.7], atol=1e-15)

    def test_decay_relaxes_to_drift_ratio(self):
        k = custom_kernel(
            decay=[2.0], drift=[4.0], pre_offset=[0.0], pre_gain=[[0.0]],
            post_offset=[0.0], post_gain=[[0.0]], outputs=KernelOutputs(),
        )
        out = z_flow(k, np.array([5.0]), 1.5)
        expected = 2.0 + 3.0 * math.exp(-3.0)
        assert out[0] == pytest.approx(expected, abs=1e-15)

    def test_infinite_clock_stays_infinite(self):
        k = clock_kernel()
        out = z_flow(k, np.array([math.inf, 1.0]), 2.0)
        assert out[0] == math.inf and out[1] == 3.0

    def test_semigroup_randomized(self):
        rng = np.random.default_rng(3)
        spec = random_spec(rng, "suppression")
        k = as_trace_kernel(spec)
        for _ in range(200):
            z = rng.uniform(0.0, 2.0, size=k.dim)
            dt = rng.uniform(0.0, 3.0)
            s = dt * rng.random()
            direct = z_flow(k, z, dt)
            split = z_flow(k, z_flow(k, z, s), dt - s)
            np.testing.assert_allclose(split, direct, rtol=1e-12, atol=1e-14)


class TestJumps:
    def test_clock_reset(self):
        k = clock_kernel()
        z = np.array([3.0, 5.0])
        np.testing.assert_array_equal(jump_z(k, z, "pre"), [0.0, 5.0])
        np.testing.assert_array_equal(jump_z(k, z, "post"), [3.0, 0.0])

    def test_clock_reset_from_infinity(self):
        k = clock_kernel()
        z = np.array([math.inf, math.inf])
        out = jump_z(k, z, "pre")
        assert out[0] == 0.0 and out[1] == math.inf

    def test_additive_jump(self):
        spec = PairBasedSpec.hebbian(
            ExponentialCurve(0.5, 1.0), ExponentialCurve(0.25, 2.0)
        )
        k = pair_kernel(spec)
        z = np.array([1.0, 0.0, 0.0, 2.0])
        out = jump_z(k, z, "pre")
        np.testing.assert_allclose(out, [1.5, 0.0, 0.0, 2.0])

    def test_masses_read_left_limit(self):
        # The pre atom of an all-to-all rule reads z_p2 before the jump.
        spec = PairBasedSpec(
            phi_p1=zero_curve(),
            phi_p2=ExponentialCurve(1.0, 1.0),
            phi_d1=zero_curve(),
            phi_d2=zero_curve(),
        )
        k = pair_kernel(spec)
        z = np.array([0.0, 0.7, 0.0, 0.0])
        pot, dep = event_masses(k, z, "pre")
        assert pot == 0.7 and dep == 0.0

    def test_apply_jump_full_state(self):
        k = calcium_kernel(CalciumSpec(1.0, 0.5, 1.0, 2.0, 0.5, 1.0, 1.0))
        state = FullState(x=1.5, z=np.array([0.2]), omega_p=0.0, omega_d=0.0, w=2.0)
        after_pre = apply_jump(k, state, "pre")
        assert after_pre.x == 3.5  # membrane gains the weight
        assert after_pre.z[0] == pytest.approx(1.2)
        after_post = apply_jump(k, state, "post")
        assert after_post.x == 0.0  # default full reset
        assert after_post.z[0] == pytest.approx(0.7)
        dropped = apply_jump(k, state, "post", drop=lambda x: 1.0)
        assert dropped.x == 0.5

    def test_positivity_violation_raises(self):
        with pytest.raises(PositivityError):
            custom_kernel(
                decay=[1.0], drift=[0.0],
                pre_offset=[0.0], pre_gain=[[-2.0]],  # overshoots below zero
                post_offset=[0.0], post_gain=[[0.0]],
                outputs=KernelOutputs(),
            )

    def test_negative_output_raises(self):
        with pytest.raises(PositivityError):
            custom_kernel(
                decay=[1.0], drift=[0.0],
                pre_offset=[1.0], pre_gain=[[0.0]],
                post_offset=[0.0], post_gain=[[0.0]],
                outputs=KernelOutputs(pot_pre=LinearOutput([1.0], const=-0.5)),
            )


class TestDriftBreakpoints:
    def test_calcium_crossing_exact(self):
        spec = CalciumSpec(1.0, 0.0, 1.0, 2.0, 0.5, 1.0, 1.0)
        k = calcium_kernel(spec)
        cuts = drift_breakpoints(k, np.array([1.0]), 3.0)
        assert cuts == [pytest.approx(math.log(2.0), abs=1e-12)]

    def test_no_crossing_when_already_below(self):
        spec = CalciumSpec(1.0, 0.0, 1.0, 2.0, 0.5, 1.0, 1.0)
        k = calcium_kernel(spec)
        assert drift_breakpoints(k, np.array([0.3]), 3.0) == []

    def test_two_thresholds_both_cut(self):
        spec = CalciumSpec(1.0, 0.0, 1.0, 1.5, 0.5, 1.0, 1.0)
        k = calcium_kernel(spec)
        cuts = drift_breakpoints(k, np.array([2.0]), 5.0)
        assert cuts == [
            pytest.approx(math.log(2.0 / 1.5), abs=1e-12),
            pytest.approx(math.log(4.0), abs=1e-12),
        ]


class TestOracleEquivalence:
    """Engine walk vs literal history sums, all rule families."""

    @pytest.mark.parametrize("family", RULE_FAMILIES)
    def test_filtered_channels_agree(self, family):
        rng = np.random.default_rng(abs(hash(family)) % 2**32)
        horizon = 6.0
        worst = 0.0
        for _ in range(40):
            spec = random_spec(rng, family)
            m1 = random_train(rng, horizon)
            m2 = random_train(rng, horizon)
            alpha = rng.uniform(0.2, 2.0)
            want = oracle_filtered(spec, m1, m2, alpha, horizon)
            kernel = as_trace_kernel(spec)
            got = replay_filtered(kernel, m1, m2, alpha, horizon)
            worst = max(worst, abs(want[0] - got[0]), abs(want[1] - got[1]))
        assert worst <= 1e-9

    @pytest.mark.parametrize("scheme", ["nearest_symmetric", "nearest_reduced"])
    def test_trace_and_clock_representations_agree(self, scheme):
        rng = np.random.default_rng(99)
        horizon = 6.0
        for _ in range(40):
            spec = random_spec(rng, f"pair_{scheme}")
            m1 = random_train(rng, horizon)
            m2 = random_train(rng, horizon)
            alpha = rng.uniform(0.2, 2.0)
            trace = replay_filtered(pair_kernel(spec, "trace"), m1, m2, alpha, horizon)
            clock = replay_filtered(pair_kernel(spec, "clock"), m1, m2, alpha, horizon)
            assert trace[0] == pytest.approx(clock[0], abs=1e-10)
            assert trace[1] == pytest.approx(clock[1], abs=1e-10)

    def test_clock_representation_accepts_tabulated_curves(self):
        phi = TabulatedCurve(np.array([0.0, 1.0, 2.0]), np.array([1.0, 0.4, 0.0]))
        spec = PairBasedSpec.hebbian(phi, phi, scheme="nearest_symmetric")
        kernel = pair_kernel(spec, "clock")
        m1 = SpikeTrain.from_times([0.5])
        m2 = SpikeTrain.from_times([1.0])
        got = replay_filtered(kernel, m1, m2, 1.0, 2.0)
        want = oracle_filtered(spec, m1, m2, 1.0, 2.0)
        assert got == pytest.approx(want, abs=1e-12)

    def test_trace_factory_rejects_tabulated_curves(self):
        phi = TabulatedCurve(np.array([0.0, 1.0]), np.array([1.0, 0.0]))
        spec = PairBasedSpec.hebbian(phi, phi, scheme="nearest_symmetric")
        with pytest.raises(TypeError):
            pair_kernel(spec, "trace")


class TestGenerator:
    def setup_method(self):
        self.kernel = calcium_kernel(CalciumSpec(1.0, 0.5, 2.0, 2.0, 0.5, 1.0, 1.0))
        self.lam = 0.8
        self.w = 1.3
        self.activation = lambda x: 0.6 * max(x, 0.0)
        self.drop = lambda x: 1.0

    def test_constant_function_maps_to_zero(self):
        f = lambda x, z: 1.0
        grad = lambda x, z: (0.0, np.zeros(1))
        val = generator_apply(
            self.kernel, f, grad, FastState(1.1, np.array([0.4])),
            self.w, self.lam, self.activation, self.drop,
        )
        assert val == 0.0

    def test_linear_membrane_function(self):
        # For f(x, z) = x the generator is -x + lam * w - activation(x) * drop.
        f = lambda x, z: x
        grad = lambda x, z: (1.0, np.zeros(1))
        for x in (0.2, 1.7, 3.0):
            val = generator_apply(
                self.kernel, f, grad, FastState(x, np.array([0.4])),
                self.w, self.lam, self.activation, self.drop,
            )
            expected = -x + self.lam * self.w - self.activation(x) * 1.0
            assert val == pytest.approx(expected, abs=1e-12)

    def test_trace_function(self):
        # For f(x, z) = z the generator is -decay z + lam c1 + activation(x) c2.
        f = lambda x, z: float(z[0])
        grad = lambda x, z: (0.0, np.ones(1))
        x, c = 0.9, 0.7
        val = generator_apply(
            self.kernel, f, grad, FastState(x, np.array([c])),
            self.w, self.lam, self.activation, self.drop,
        )
        expected = -2.0 * c + self.lam * 1.0 + self.activation(x) * 0.5
        assert val == pytest.approx(expected, abs=1e-12)


class TestBuildKernel:
    def test_round_trip_via_origin(self):
        rng = np.random.default_rng(5)
        spec = random_spec(rng, "pair_nearest_reduced")
        kernel = as_trace_kernel(spec)
        rule, params = kernel.origin
        rebuilt = build_kernel(rule, params)
        np.testing.assert_array_equal(rebuilt.decay, kernel.decay)
        np.testing.assert_array_equal(rebuilt.pre_jump.offset, kernel.pre_jump.offset)
        np.testing.assert_array_equal(rebuilt.z_init, kernel.z_init)

    def test_unknown_rule_rejected(self):
        with pytest.raises(ValueError, match="unknown kernel rule"):
            build_kernel("nope", {})

    def test_unknown_field_rejected(self):
        with pytest.raises(ValueError, match="unknown"):
            build_kernel(
                "calcium",
                {"c1": 1.0, "c2": 1.0, "decay": 1.0, "theta_p": 1.0,
                 "theta_d": 1.0, "rate_p": 1.0, "rate_d": 1.0, "bogus": 3},
            )

    def test_custom_rule_positivity_diagnostic(self):
        with pytest.raises(PositivityError, match="jump"):
            build_kernel(
                "custom",
                {"decay": [1.0], "pre_offset": [0.0], "pre_gain": [[-2.0]],
                 "post_offset": [0.0]},
            )
