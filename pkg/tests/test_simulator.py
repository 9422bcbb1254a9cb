"""Event-loop simulator tests.

The load-bearing checks are oracle comparisons: replay runs against the
brute-force kernel measure, weight rules against an adaptive ODE solver,
the thinned post sampler against its exact defective law, and unfiltered
runs against direct sums of the kernel measure.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad, solve_ivp

from stdpsim.kernels import (
    CalciumSpec,
    ExponentialCurve,
    PairBasedSpec,
    density_segments,
    kernel_atoms,
    zero_curve,
)
from stdpsim.markov import replay_filtered, as_trace_kernel
from stdpsim.simulator import (
    AdditiveRule,
    BoundedMultiplicativeRule,
    ConstantDrop,
    ExcitatoryRule,
    FrozenRule,
    FullReset,
    GatedAdditiveRule,
    LinearActivation,
    NeuronSpec,
    NoReset,
    OmegaPath,
    SigmoidActivation,
    SimConfig,
    SimulationLimitError,
    TableActivation,
    WeightDomainError,
    build_activation,
    build_reset,
    build_weight_rule,
    integrate_weight,
    next_post_spike,
    read_trace,
    run,
    run_unfiltered,
    toy_closed_form,
    toy_trajectories,
    write_trace,
)
from stdpsim.spike_core import RngStream, SpikeTrain
from stdpsim.testing import RULE_FAMILIES, oracle_filtered, random_spec, random_train


def hebbian_pair(pot_amp=1.0, pot_rate=1.0, dep_amp=0.5, dep_rate=2.0):
    return PairBasedSpec.hebbian(
        ExponentialCurve(pot_amp, pot_rate),
        ExponentialCurve(dep_amp, dep_rate),
        scheme="all_to_all",
    )


def linear_neuron(rate=1.0, slope=1.0, reset=None):
    return NeuronSpec(
        rate=rate,
        activation=LinearActivation(slope),
        reset=FullReset() if reset is None else reset,
    )


class TestActivations:
    def test_linear_rectifies(self):
        act = LinearActivation(2.0)
        assert act.rate(1.5) == 3.0
        assert act.rate(-0.5) == 0.0
        assert act.envelope(-1.0, 2.0) == 4.0
        assert act.envelope(-3.0, -1.0) == 0.0

    def test_sigmoid_bounded_and_monotone(self):
        act = SigmoidActivation(max_rate=5.0, center=1.0, scale=0.5)
        xs = np.linspace(-10.0, 10.0, 101)
        rates = np.array([act.rate(x) for x in xs])
        assert np.all(np.diff(rates) > 0.0)
        assert np.all(rates < 5.0)
        assert act.rate(1.0) == pytest.approx(2.5)
        assert act.envelope(-2.0, 3.0) == act.rate(3.0)

    def test_table_lookup(self):
        act = TableActivation(np.array([0.5, 1.0, 2.0]), np.array([1.0, 4.0, 0.5]))
        assert act.rate(0.2) == 0.0
        assert act.rate(0.5) == 1.0
        assert act.rate(1.7) == 4.0
        assert act.rate(100.0) == 0.5

    def test_table_envelope_covers_interval(self):
        act = TableActivation(np.array([0.5, 1.0, 2.0]), np.array([1.0, 4.0, 0.5]))
        assert act.envelope(0.0, 0.4) == 0.0
        assert act.envelope(0.6, 0.9) == 1.0
        assert act.envelope(0.6, 1.1) == 4.0
        assert act.envelope(2.1, 5.0) == 0.5
        assert act.envelope(0.0, 5.0) == 4.0

    def test_validation(self):
        with pytest.raises(ValueError):
            LinearActivation(-1.0)
        with pytest.raises(ValueError):
            SigmoidActivation(1.0, scale=0.0)
        with pytest.raises(ValueError):
            TableActivation(np.array([1.0, 1.0]), np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            TableActivation(np.array([1.0, 2.0]), np.array([1.0, -2.0]))


class TestResets:
    def test_drop_amounts(self):
        assert FullReset().drop(3.5) == 3.5
        assert ConstantDrop(0.4).drop(3.5) == 0.4
        assert NoReset().drop(3.5) == 0.0
        with pytest.raises(ValueError):
            ConstantDrop(-0.1)


class TestWeightRules:
    def test_additive_matches_quadrature(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            alpha = rng.uniform(0.3, 2.0)
            h, p0, pd, d0, dd = rng.uniform(0.1, 3.0, size=5)
            path = OmegaPath.single(alpha, h, p0, pd, d0, dd)

            def omega(a0, drift, u):
                fade = math.exp(-alpha * u)
                return a0 * fade + drift * (1.0 - fade) / alpha

            want, _ = quad(lambda u: omega(p0, pd, u) - omega(d0, dd, u), 0.0, h)
            got = integrate_weight(AdditiveRule(), path, 0.0)
            assert got == pytest.approx(want, abs=1e-10)

    def test_multiplicative_constant_channels_closed_form(self):
        # stationary channel paths (start value = drift / alpha) keep the
        # channels constant, making the rule a scalar linear ODE
        alpha, p, d = 0.8, 0.9, 0.6
        rule = BoundedMultiplicativeRule(
            floor=-1.0, ceil=2.0, rest=0.3, exponent=1.0, relax=0.4
        )
        path = OmegaPath.single(alpha, 2.5, p, alpha * p, d, alpha * d)
        k = p + d + rule.relax
        fixed = (rule.ceil * p + rule.floor * d + rule.relax * rule.rest) / k
        w0 = 0.5
        want = fixed + (w0 - fixed) * math.exp(-k * 2.5)
        got = integrate_weight(rule, path, w0, h_max=0.01)
        assert got == pytest.approx(want, abs=1e-7)

    def test_relaxation_alone_is_exponential(self):
        rule = BoundedMultiplicativeRule(floor=0.0, ceil=2.0, rest=0.5, relax=0.8)
        path = OmegaPath.single(1.0, 2.0, 0.0, 0.0, 0.0, 0.0)
        got = integrate_weight(rule, path, 1.7, h_max=0.01)
        want = 0.5 + 1.2 * math.exp(-1.6)
        assert got == pytest.approx(want, abs=1e-9)

    def test_excitatory_constant_channels_closed_form(self):
        alpha, p, d = 1.1, 0.7, 0.9
        path = OmegaPath.single(alpha, 3.0, p, alpha * p, d, alpha * d)
        w0 = 2.0
        want = p / d + (w0 - p / d) * math.exp(-d * 3.0)
        got = integrate_weight(ExcitatoryRule(), path, w0, h_max=0.01)
        assert got == pytest.approx(want, abs=1e-8)

    @pytest.mark.parametrize("exponent", [1.0, 1.5, 2.0])
    def test_rk4_matches_adaptive_solver(self, exponent):
        rng = np.random.default_rng(5)
        rule = BoundedMultiplicativeRule(
            floor=-1.0, ceil=2.0, rest=0.2, exponent=exponent, relax=0.3
        )
        for _ in range(10):
            alpha = rng.uniform(0.3, 2.0)
            segs = tuple(
                tuple(rng.uniform(0.1, 2.0, size=5)) for _ in range(rng.integers(1, 4))
            )
            w0 = rng.uniform(-1.0, 2.0)

            def omega(a0, drift, u):
                fade = math.exp(-alpha * u)
                return a0 * fade + drift * (1.0 - fade) / alpha

            w_ref = w0
            for h, p0, pd, d0, dd in segs:
                sol = solve_ivp(
                    lambda u, y: [rule.rate(omega(p0, pd, u), omega(d0, dd, u), y[0])],
                    (0.0, h),
                    [w_ref],
                    rtol=1e-11,
                    atol=1e-12,
                )
                w_ref = float(sol.y[0, -1])
            got = integrate_weight(rule, OmegaPath(alpha, segs), w0, h_max=0.01)
            assert got == pytest.approx(w_ref, abs=1e-7)

    def test_multiplicative_stays_in_interval(self):
        rng = np.random.default_rng(6)
        rule = BoundedMultiplicativeRule(floor=0.0, ceil=1.0, exponent=1.0)
        for _ in range(100):
            segs = tuple(
                tuple(rng.uniform(0.0, 4.0, size=5)) for _ in range(rng.integers(1, 3))
            )
            w = integrate_weight(rule, OmegaPath(1.0, segs), rng.uniform(0.0, 1.0))
            assert 0.0 <= w <= 1.0

    def test_domain_error_outside_interval(self):
        rule = BoundedMultiplicativeRule(floor=0.0, ceil=1.0)
        path = OmegaPath.single(1.0, 1.0, 0.0)
        with pytest.raises(WeightDomainError):
            integrate_weight(rule, path, 1.5)

    def test_frozen_never_moves(self):
        path = OmegaPath.single(1.0, 5.0, 3.0, 2.0, 1.0, 4.0)
        assert integrate_weight(FrozenRule(), path, 0.75) == 0.75

    def test_infinite_window(self):
        path = OmegaPath.single(2.0, math.inf, 3.0)
        assert integrate_weight(AdditiveRule(), path, 0.0) == pytest.approx(1.5)
        with pytest.raises(ValueError):
            integrate_weight(AdditiveRule(), OmegaPath.single(2.0, math.inf, 3.0, 1.0), 0.0)
        with pytest.raises(ValueError):
            integrate_weight(ExcitatoryRule(), path, 0.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            BoundedMultiplicativeRule(floor=1.0, ceil=1.0)
        with pytest.raises(ValueError):
            BoundedMultiplicativeRule(floor=0.0, ceil=1.0, rest=2.0)
        with pytest.raises(ValueError):
            BoundedMultiplicativeRule(floor=0.0, ceil=1.0, exponent=0.0)
        with pytest.raises(ValueError):
            GatedAdditiveRule(gain_p=-1.0)


class TestThinning:
    def test_defective_first_spike_law(self):
        # membrane decays from 1 with unit slope: the first-spike law has
        # total mass 1 - e^{-1} and cdf 1 - exp(-(1 - e^{-t}))
        rng = RngStream(11)
        neuron = linear_neuron(rate=0.0)
        n = 15000
        draws = [next_post_spike(1.0, neuron, rng, math.inf, h_max=0.8) for _ in range(n)]
        misses = sum(d is None for d in draws) / n
        p_miss = math.exp(-1.0)
        se = math.sqrt(p_miss * (1.0 - p_miss) / n)
        assert abs(misses - p_miss) < 4.0 * se
        hits = np.sort([d for d in draws if d is not None])
        total = 1.0 - p_miss
        cdf = (1.0 - np.exp(-(1.0 - np.exp(-hits)))) / total
        emp = np.arange(1, hits.size + 1) / hits.size
        assert np.max(np.abs(emp - cdf)) < 0.02

    def test_empty_and_dead_windows(self):
        rng = RngStream(0)
        neuron = linear_neuron()
        assert next_post_spike(1.0, neuron, rng, 0.0) is None
        assert next_post_spike(-2.0, neuron, rng, math.inf) is None
        assert next_post_spike(0.0, neuron, rng, math.inf) is None

    def test_table_band_spikes_inside_band(self):
        # rate 3 only while the membrane sits in [0.5, 0.8)
        act = TableActivation(np.array([0.5, 0.8]), np.array([3.0, 0.0]))
        neuron = NeuronSpec(rate=0.0, activation=act)
        lo, hi = math.log(1.0 / 0.8), math.log(1.0 / 0.5)
        rng = RngStream(21)
        hits = []
        for _ in range(3000):
            d = next_post_spike(1.0, neuron, rng, math.inf, h_max=0.3)
            if d is not None:
                hits.append(d)
        hits = np.array(hits)
        assert hits.size > 0
        assert np.all(hits >= lo) and np.all(hits <= hi)
        p_hit = 1.0 - math.exp(-3.0 * (hi - lo))
        assert hits.size / 3000 == pytest.approx(p_hit, abs=4.0 * math.sqrt(p_hit / 3000))

    def test_chunk_size_does_not_bias(self):
        neuron = linear_neuron(rate=0.0)
        estimates = []
        for h_max, seed in ((0.25, 1), (2.5, 2)):
            rng = RngStream(seed)
            n = 6000
            misses = sum(
                next_post_spike(1.0, neuron, rng, math.inf, h_max=h_max) is None
                for _ in range(n)
            )
            estimates.append(misses / n)
        se = math.sqrt(2.0 * 0.37 * 0.63 / 6000)
        assert abs(estimates[0] - estimates[1]) < 4.0 * se

    def test_deterministic_given_seed(self):
        neuron = linear_neuron(rate=0.0)
        a = [next_post_spike(1.0, neuron, RngStream(3), 5.0) for _ in range(1)]
        b = [next_post_spike(1.0, neuron, RngStream(3), 5.0) for _ in range(1)]
        assert a == b


class TestReplayRuns:
    @pytest.mark.parametrize("family", RULE_FAMILIES)
    def test_matches_kernel_measure_oracle(self, family):
        rng = np.random.default_rng(99)
        for _ in range(6):
            spec = random_spec(rng, family)
            m1 = random_train(rng, 15.0)
            m2 = random_train(rng, 15.0)
            alpha = rng.uniform(0.3, 2.0)
            cfg = SimConfig(
                neuron=linear_neuron(rate=0.0),
                kernel=spec,
                weight=FrozenRule(),
                alpha=alpha,
                horizon=15.0,
                pre_train=m1,
                post_train=m2,
            )
            res = run(cfg)
            want_p, want_d = oracle_filtered(spec, m1, m2, alpha, 15.0)
            assert res.final.omega_p == pytest.approx(want_p, abs=1e-12)
            assert res.final.omega_d == pytest.approx(want_d, abs=1e-12)

    def test_tied_spikes_process_pre_first(self):
        spec = hebbian_pair()
        kern = as_trace_kernel(spec)
        m1 = SpikeTrain(np.array([1.0, 2.0]))
        m2 = SpikeTrain(np.array([1.0, 3.0]))
        cfg = SimConfig(
            neuron=linear_neuron(rate=0.0),
            kernel=kern,
            weight=FrozenRule(),
            alpha=0.9,
            horizon=4.0,
            pre_train=m1,
            post_train=m2,
        )
        res = run(cfg)
        want = replay_filtered(kern, m1, m2, 0.9, 4.0)
        assert res.final.omega_p == pytest.approx(want[0], abs=1e-13)
        assert res.final.omega_d == pytest.approx(want[1], abs=1e-13)

    def test_record_structure(self):
        cfg = SimConfig(
            neuron=linear_neuron(rate=0.0),
            kernel=hebbian_pair(),
            weight=AdditiveRule(),
            alpha=1.0,
            horizon=3.0,
            pre_train=SpikeTrain(np.array([0.5, 1.5])),
            post_train=SpikeTrain(np.array([1.0])),
            sample_dt=0.5,
        )
        res = run(cfg)
        times = [r.t for r in res.records]
        assert times == sorted(times)
        assert res.records[0].t == 0.0 and res.records[0].event == "sample"
        assert res.records[-1].t == 3.0 and res.records[-1].event == "sample"
        kinds = {r.event for r in res.records}
        assert kinds <= {"pre", "post", "threshold", "sample"}
        assert [r.t for r in res.records if r.event == "pre"] == [0.5, 1.5]
        assert [r.t for r in res.records if r.event == "post"] == [1.0]
        # every sample multiple appears, as a sample record unless an event
        # already sits there
        for k in range(7):
            assert any(abs(r.t - 0.5 * k) < 1e-12 for r in res.records)
        assert any(r.event == "sample" and r.t == 2.0 for r in res.records)

    def test_threshold_records_sit_on_threshold(self):
        spec = CalciumSpec(
            c1=0.8, c2=1.1, decay=1.2, theta_p=1.0, theta_d=0.45,
            rate_p=0.9, rate_d=0.7,
        )
        cfg = SimConfig(
            neuron=linear_neuron(rate=0.0),
            kernel=spec,
            weight=AdditiveRule(),
            alpha=1.0,
            horizon=10.0,
            pre_train=SpikeTrain(np.array([0.5, 1.0, 4.0])),
            post_train=SpikeTrain(np.array([0.8, 4.2])),
        )
        res = run(cfg)
        crossings = [r for r in res.records if r.event == "threshold"]
        assert crossings
        for r in crossings:
            c = r.z[0]
            assert min(abs(c - 1.0), abs(c - 0.45)) < 1e-9

    def test_spec_accepted_directly(self):
        cfg = SimConfig(
            neuron=linear_neuron(rate=0.0),
            kernel=hebbian_pair(),
            weight=FrozenRule(),
            alpha=1.0,
            horizon=1.0,
            pre_train=SpikeTrain.empty(),
            post_train=SpikeTrain.empty(),
        )
        assert cfg.kernel.origin is not None

    def test_config_validation(self):
        neuron = linear_neuron()
        kern = hebbian_pair()
        with pytest.raises(ValueError):
            SimConfig(neuron=neuron, kernel=kern, weight=AdditiveRule(),
                      alpha=0.0, horizon=1.0, seed=1)
        with pytest.raises(ValueError):
            SimConfig(neuron=neuron, kernel=kern, weight=AdditiveRule(),
                      alpha=1.0, horizon=1.0,
                      pre_train=SpikeTrain(np.array([2.0])),
                      post_train=SpikeTrain.empty())
        with pytest.raises(ValueError):
            SimConfig(neuron=neuron, kernel=kern, weight=AdditiveRule(),
                      alpha=1.0, horizon=1.0)


class TestClosedLoopRuns:
    def base_config(self, **kw):
        defaults = dict(
            neuron=linear_neuron(rate=1.5),
            kernel=hebbian_pair(),
            weight=AdditiveRule(),
            alpha=1.0,
            horizon=40.0,
            seed=7,
            w_init=0.5,
        )
        defaults.update(kw)
        return SimConfig(**defaults)

    def test_same_seed_identical(self):
        a = run(self.base_config())
        b = run(self.base_config())
        assert a.pre_times == b.pre_times
        assert a.post_times == b.post_times
        assert a.final.w == b.final.w
        assert [(r.t, r.x, r.w) for r in a.records] == [
            (r.t, r.x, r.w) for r in b.records
        ]

    def test_different_seed_differs(self):
        a = run(self.base_config())
        b = run(self.base_config(seed=8))
        assert a.pre_times != b.pre_times

    def test_pre_count_is_poisson(self):
        # frozen zero weight keeps the membrane at zero, so only the pre
        # train fires and its count is Poisson(rate * horizon)
        cfg = self.base_config(weight=FrozenRule(), w_init=0.0, horizon=400.0, seed=3)
        res = run(cfg)
        assert res.counts["post"] == 0
        mean = 1.5 * 400.0
        assert abs(res.counts["pre"] - mean) < 4.0 * math.sqrt(mean)

    def test_stationary_membrane_mean_without_reset(self):
        # without resets the membrane is a filtered Poisson process with
        # stationary mean rate * w
        cfg = self.base_config(
            neuron=NeuronSpec(rate=2.0, activation=LinearActivation(1.0), reset=NoReset()),
            weight=FrozenRule(),
            w_init=0.5,
            horizon=2000.0,
            seed=12,
        )
        res = run(cfg)
        area = 0.0
        for a, b in zip(res.records[:-1], res.records[1:]):
            area += a.x * (1.0 - math.exp(-(b.t - a.t)))
        assert area / 2000.0 == pytest.approx(1.0, abs=0.08)

    def test_potentiation_only_weight_non_decreasing(self):
        spec = PairBasedSpec.hebbian(
            ExponentialCurve(1.0, 1.0), zero_curve(), scheme="all_to_all"
        )
        cfg = self.base_config(kernel=spec, horizon=20.0)
        res = run(cfg)
        ws = [r.w for r in res.records]
        assert all(b >= a - 1e-12 for a, b in zip(ws[:-1], ws[1:]))
        assert res.final.w > 0.5

    def test_depression_only_weight_non_increasing(self):
        spec = PairBasedSpec.hebbian(
            zero_curve(), ExponentialCurve(1.0, 1.0), scheme="all_to_all"
        )
        cfg = self.base_config(kernel=spec, horizon=20.0)
        res = run(cfg)
        ws = [r.w for r in res.records]
        assert all(b <= a + 1e-12 for a, b in zip(ws[:-1], ws[1:]))

    def test_bounded_rule_respects_interval(self):
        rule = BoundedMultiplicativeRule(floor=0.0, ceil=1.0, rest=0.5, relax=0.1)
        cfg = self.base_config(weight=rule, w_init=0.9, horizon=60.0)
        res = run(cfg)
        for r in res.records:
            assert 0.0 <= r.w <= 1.0

    def test_event_ceiling_raises(self):
        act = TableActivation(np.array([-1e18]), np.array([50.0]))
        cfg = self.base_config(
            neuron=NeuronSpec(rate=0.0, activation=act, reset=NoReset()),
            weight=FrozenRule(),
            event_ceiling=100,
        )
        with pytest.raises(SimulationLimitError, match="event ceiling"):
            run(cfg)

    def test_membrane_jumps(self):
        # frozen weight, no reset: the membrane at a pre record equals the
        # decayed previous value plus the weight
        cfg = self.base_config(
            neuron=NeuronSpec(rate=2.0, activation=LinearActivation(0.0), reset=NoReset()),
            weight=FrozenRule(),
            w_init=0.7,
            horizon=10.0,
            seed=5,
        )
        res = run(cfg)
        prev = res.records[0]
        for r in res.records[1:]:
            if r.event == "pre":
                want = prev.x * math.exp(-(r.t - prev.t)) + 0.7
                assert r.x == pytest.approx(want, rel=1e-12)
            prev = r

    def test_full_reset_zeroes_membrane(self):
        cfg = self.base_config(horizon=30.0, seed=9)
        res = run(cfg)
        posts = [r for r in res.records if r.event == "post"]
        assert posts
        for r in posts:
            assert r.x == 0.0

    def test_record_toggle(self):
        cfg = self.base_config(record=False)
        res = run(cfg)
        assert res.records == []
        assert res.counts["pre"] > 0
        assert res.trains[0].times.size == res.counts["pre"]


class TestUnfilteredRuns:
    def setup_method(self):
        gen = np.random.default_rng(2)
        self.m1 = SpikeTrain(np.sort(gen.uniform(0.0, 12.0, 9)))
        self.m2 = SpikeTrain(np.sort(gen.uniform(0.0, 12.0, 11)))
        self.neuron = linear_neuron(rate=0.0)

    def replay_config(self, spec, rule, w0=0.0):
        return SimConfig(
            neuron=self.neuron, kernel=spec, weight=rule, alpha=1.0,
            horizon=12.0, pre_train=self.m1, post_train=self.m2, w_init=w0,
        )

    def test_additive_equals_atom_sums(self):
        spec = hebbian_pair(1.3, 0.9, 0.6, 1.7)
        res = run_unfiltered(self.replay_config(spec, AdditiveRule(), w0=0.25))
        atoms = kernel_atoms(spec, self.m1, self.m2, 12.0)
        want = 0.25 + sum(a.pot - a.dep for a in atoms)
        assert res.final.w == pytest.approx(want, abs=1e-12)

    def test_additive_equals_density_integrals(self):
        spec = CalciumSpec(c1=0.8, c2=1.1, decay=1.2, theta_p=1.0, theta_d=0.45,
                           rate_p=0.9, rate_d=0.7)
        res = run_unfiltered(self.replay_config(spec, AdditiveRule()))
        segs = density_segments(spec, self.m1, self.m2, 12.0)
        want = sum((s.stop - s.start) * (s.pot_rate - s.dep_rate) for s in segs)
        assert res.final.w == pytest.approx(want, abs=1e-12)

    def test_gated_pure_potentiation_ignores_gate(self):
        spec = CalciumSpec(c1=0.8, c2=1.1, decay=1.2, theta_p=0.6, theta_d=10.0,
                           rate_p=0.9, rate_d=0.7)
        rule = GatedAdditiveRule(gain_p=1.5, gain_d=2.0)
        res = run_unfiltered(self.replay_config(spec, rule, w0=-0.3))
        segs = density_segments(spec, self.m1, self.m2, 12.0)
        want = -0.3 + 1.5 * sum((s.stop - s.start) * s.pot_rate for s in segs)
        assert res.final.w == pytest.approx(want, abs=1e-12)

    def test_gated_depression_slides_at_zero(self):
        # depression drains a small weight to zero, where the gate holds it
        spec = CalciumSpec(c1=0.8, c2=1.1, decay=1.2, theta_p=10.0, theta_d=0.3,
                           rate_p=0.9, rate_d=0.7)
        res = run_unfiltered(self.replay_config(spec, GatedAdditiveRule(), w0=0.05))
        assert res.final.w == 0.0
        res2 = run_unfiltered(self.replay_config(spec, GatedAdditiveRule(), w0=-0.4))
        assert res2.final.w == -0.4

    def test_rejects_multiplicative_rules(self):
        rule = BoundedMultiplicativeRule(floor=0.0, ceil=1.0)
        with pytest.raises(ValueError, match="jump-additive"):
            run_unfiltered(self.replay_config(hebbian_pair(), rule))


class TestToyModel:
    def test_closed_form_values(self):
        filtered, plain = toy_closed_form(1.0, 0.0, 0.5, 2.0)
        assert float(plain) == pytest.approx(0.6321205588285577, abs=1e-15)
        assert float(filtered) == pytest.approx(0.8494256348541123, abs=1e-13)

    def test_rk4_confirms_closed_form(self):
        ts = np.linspace(0.0, 10.0, 41)
        f_ref, u_ref = toy_closed_form(1.0, 0.0, 0.5, ts)
        f_num, u_num = toy_trajectories(1.0, 0.0, 0.5, ts, step=1e-3)
        np.testing.assert_allclose(f_num, f_ref, atol=1e-7)
        np.testing.assert_allclose(u_num, u_ref, atol=1e-7)

    def test_filtered_overshoots_plain_relaxes(self):
        ts = np.linspace(0.0, 20.0, 400)
        filtered, plain = toy_closed_form(1.0, 0.0, 0.3, ts)
        assert np.max(filtered) > 1.0
        assert np.all(np.diff(plain) > 0.0) and np.max(plain) < 1.0

    def test_eps_validation(self):
        with pytest.raises(ValueError):
            toy_closed_form(1.0, 0.0, 1.5, 1.0)


class TestTraceIO:
    def make_result(self):
        from stdpsim.markov import pair_kernel

        spec = PairBasedSpec.hebbian(
            ExponentialCurve(1.0, 1.0),
            ExponentialCurve(0.5, 2.0),
            scheme="nearest_symmetric",
        )
        cfg = SimConfig(
            neuron=linear_neuron(rate=1.0),
            # delay clocks start at infinity, exercising inf serialization
            kernel=pair_kernel(spec, representation="clock"),
            weight=AdditiveRule(),
            alpha=1.0,
            horizon=8.0,
            seed=13,
            w_init=0.4,
        )
        return run(cfg)

    @pytest.mark.parametrize("fmt", ["tsv", "jsonl"])
    def test_round_trip_exact(self, tmp_path, fmt):
        res = self.make_result()
        path = tmp_path / f"trace.{fmt}"
        write_trace(path, res, fmt=fmt)
        back = read_trace(path, fmt=fmt)
        assert len(back) == len(res.records)
        for a, b in zip(res.records, back):
            assert a == b

    def test_infinities_survive(self, tmp_path):
        # nearest-neighbor clock traces start at infinity
        res = self.make_result()
        assert math.isinf(res.records[0].z[0])
        path = tmp_path / "trace.tsv"
        write_trace(path, res, fmt="tsv")
        assert math.isinf(read_trace(path)[0].z[0])

    def test_bad_format_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_trace(tmp_path / "x", [], fmt="csv")


class TestBuilders:
    def test_activation(self):
        act = build_activation("sigmoid", {"max_rate": 2.0})
        assert isinstance(act, SigmoidActivation)
        act = build_activation("table", {"breaks": [0.0, 1.0], "values": [1.0, 2.0]})
        assert isinstance(act, TableActivation)
        with pytest.raises(ValueError, match="unknown activation"):
            build_activation("cubic", {})
        with pytest.raises(ValueError, match="unknown activation fields"):
            build_activation("linear", {"slope": 1.0, "bias": 2.0})

    def test_reset(self):
        assert isinstance(build_reset("constant", {"amount": 0.5}), ConstantDrop)
        with pytest.raises(ValueError, match="unknown reset"):
            build_reset("half", {})

    def test_weight_rule(self):
        rule = build_weight_rule("bounded_multiplicative", {"floor": 0.0, "ceil": 1.0})
        assert isinstance(rule, BoundedMultiplicativeRule)
        with pytest.raises(ValueError, match="unknown weight rule"):
            build_weight_rule("cubic", {})
        with pytest.raises(ValueError, match="unknown weight rule fields"):
            build_weight_rule("additive", {"gain": 2.0})
