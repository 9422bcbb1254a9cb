"""Exact event-driven simulation of the coupled synapse process.

The full state is ``(x, z, omega_p, omega_d, w)``: membrane value, kernel
memory traces, the exponentially filtered plasticity channels, and the
synaptic weight.  Between events every component evolves in closed form:

* ``x`` decays exponentially (the membrane time constant is the unit of
  time),
* ``z`` follows its linear flow,
* ``omega_a`` decays at rate ``alpha`` while gaining the kernel's channel
  density, which is piecewise constant with explicitly solvable
  breakpoints,
* ``w`` integrates the weight rule along the closed-form ``omega`` paths
  (exactly for jump-linear rules, with classical fixed-step RK4 otherwise).

Events are pre-synaptic spikes (Poisson at rate ``lam``), post-synaptic
spikes (thinning of the membrane-dependent rate along the decaying
trajectory), and channel-density breakpoints.  Pre spikes add the current
weight to the membrane; post spikes subtract the reset amount.  The weight
never jumps: it is continuous across events.

Runs are driven either closed-loop (both trains sampled, seeded) or in
replay mode (either train pinned to given spike times), which is how fixed
stimulation protocols are reproduced.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from stdpsim.markov import (
    FullState,
    TraceKernel,
    as_trace_kernel,
    drift_breakpoints,
    event_masses,
    jump_z,
    omega_drift,
    z_flow,
)
from stdpsim.spike_core import FLOAT_FMT, RngStream, SpikeTrain

__all__ = [
    "LinearActivation",
    "SigmoidActivation",
    "TableActivation",
    "FullReset",
    "ConstantDrop",
    "NoReset",
    "NeuronSpec",
    "AdditiveRule",
    "BoundedMultiplicativeRule",
    "ExcitatoryRule",
    "GatedAdditiveRule",
    "FrozenRule",
    "WeightRule",
    "WeightDomainError",
    "SimulationLimitError",
    "OmegaPath",
    "integrate_weight",
    "next_post_spike",
    "SimConfig",
    "TraceRecord",
    "SimResult",
    "run",
    "run_unfiltered",
    "toy_closed_form",
    "toy_trajectories",
    "write_trace",
    "read_trace",
    "build_activation",
    "build_reset",
    "build_weight_rule",
]


class WeightDomainError(RuntimeError):
    """The weight left its rule's invariant interval by more than rounding."""


class SimulationLimitError(RuntimeError):
    """The event ceiling was hit; the configuration is likely explosive."""


# ---------------------------------------------------------------------------
# Post-synaptic activation and reset variants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearActivation:
    """Rate ``slope * max(x, 0)``: zero for hyperpolarized membranes."""

    slope: float

    def __post_init__(self) -> None:
        if self.slope < 0.0:
            raise ValueError("slope must be non-negative")

    def rate(self, x: float) -> float:
        return self.slope * x if x > 0.0 else 0.0

    def envelope(self, lo: float, hi: float) -> float:
        return self.rate(max(lo, hi))


@dataclass(frozen=True)
class SigmoidActivation:
    """Rate ``max_rate / (1 + exp(-(x - center) / scale))``: globally bounded."""

    max_rate: float
    center: float = 0.0
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.max_rate < 0.0:
            raise ValueError("max_rate must be non-negative")
        if not self.scale > 0.0:
            raise ValueError("scale must be positive")

    def rate(self, x: float) -> float:
        return self.max_rate / (1.0 + math.exp(-(x - self.center) / self.scale))

    def envelope(self, lo: float, hi: float) -> float:
        return self.rate(max(lo, hi))


@dataclass(frozen=True)
class TableActivation:
    """Piecewise-constant rate: ``values[i]`` on ``[breaks[i], breaks[i+1])``.

    Zero below the first breakpoint; the last value extends to ``+inf`` (so
    the global bound is ``max(values)``).
    """

    breaks: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        breaks = np.asarray(self.breaks, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if breaks.ndim != 1 or breaks.shape != values.shape or breaks.size < 1:
            raise ValueError("breaks and values must be equal-length 1-d arrays")
        if np.any(np.diff(breaks) <= 0.0):
            raise ValueError("breakpoints must be increasing")
        if np.any(values < 0.0):
            raise ValueError("rates must be non-negative")
        breaks, values = breaks.copy(), values.copy()
        breaks.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "breaks", breaks)
        object.__setattr__(self, "values", values)

    def rate(self, x: float) -> float:
        idx = int(np.searchsorted(self.breaks, x, side="right")) - 1
        return 0.0 if idx < 0 else float(self.values[idx])

    def envelope(self, lo: float, hi: float) -> float:
        if hi < lo:
            lo, hi = hi, lo
        i0 = max(int(np.searchsorted(self.breaks, lo, side="right")) - 1, 0)
        i1 = int(np.searchsorted(self.breaks, hi, side="right"))
        window = self.values[i0:i1]
        return float(window.max()) if window.size else 0.0


Activation = "LinearActivation | SigmoidActivation | TableActivation"


@dataclass(frozen=True)
class FullReset:
    """Post spikes reset the membrane to zero."""

    def drop(self, x: float) -> float:
        return x


@dataclass(frozen=True)
class ConstantDrop:
    """Post spikes subtract a fixed amount from the membrane."""

    amount: float

    def __post_init__(self) -> None:
        if self.amount < 0.0:
            raise ValueError("drop amount must be non-negative")

    def drop(self, x: float) -> float:
        return self.amount


@dataclass(frozen=True)
class NoReset:
    """Post spikes leave the membrane untouched."""

    def drop(self, x: float) -> float:
        return 0.0


@dataclass(frozen=True)
class NeuronSpec:
    """Pre-synaptic rate plus the post-synaptic activation and reset."""

    rate: float
    activation: "LinearActivation | SigmoidActivation | TableActivation"
    reset: "FullReset | ConstantDrop | NoReset" = field(default_factory=FullReset)

    def __post_init__(self) -> None:
        if self.rate < 0.0:
            raise ValueError("pre-synaptic rate must be non-negative")


# ---------------------------------------------------------------------------
# Weight rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdditiveRule:
    """``dw/dt = omega_p - omega_d``; unconstrained weight."""

    interval = (-math.inf, math.inf)
    exact = True

    def rate(self, omega_p: float, omega_d: float, w: float) -> float:
        return omega_p - omega_d


@dataclass(frozen=True)
class BoundedMultiplicativeRule:
    """Soft-bounded rule confined to ``[floor, ceil]`` with optional relaxation.

    ``dw/dt = (ceil - w)^n omega_p - (w - floor)^n omega_d
              - relax * (w - rest)``.

    The distance factors vanish at the boundary, which keeps the weight
    inside the interval; ``relax`` pulls toward ``rest`` regardless of
    channel input.  For ``exponent >= 1`` the walls are unreachable in
    finite time; for ``exponent < 1`` trajectories can reach a wall and
    stick until the drive reverses, and the integrator projects onto the
    wall when a step lands past the touch point.
    """

    floor: float
    ceil: float
    rest: float | None = None
    exponent: float = 1.0
    relax: float = 0.0
    exact = False

    def __post_init__(self) -> None:
        if not self.floor < self.ceil:
            raise ValueError("floor must be below ceil")
        rest = self.rest if self.rest is not None else self.floor
        if not (self.floor <= rest <= self.ceil):
            raise ValueError("rest must lie in [floor, ceil]")
        object.__setattr__(self, "rest", rest)
        if not self.exponent > 0.0:
            raise ValueError("exponent must be positive")
        if self.relax < 0.0:
            raise ValueError("relax must be non-negative")

    @property
    def interval(self) -> tuple[float, float]:
        return (self.floor, self.ceil)

    def rate(self, omega_p: float, omega_d: float, w: float) -> float:
        # clipped distances keep RK4 stage values finite just outside the
        # interval for non-integer exponents
        up = max(self.ceil - w, 0.0) ** self.exponent
        down = max(w - self.floor, 0.0) ** self.exponent
        return up * omega_p - down * omega_d - self.relax * (w - self.rest)


@dataclass(frozen=True)
class ExcitatoryRule:
    """``dw/dt = omega_p - w * omega_d``; stays non-negative, unbounded above."""

    interval = (0.0, math.inf)
    exact = False

    def rate(self, omega_p: float, omega_d: float, w: float) -> float:
        return omega_p - w * omega_d


@dataclass(frozen=True)
class GatedAdditiveRule:
    """``dw/dt = gain_p omega_p - gain_d omega_d 1{w >= 0}``.

    Depression switches off while the weight is negative, so trajectories
    hug zero from above; useful for matching the integer-quanta model,
    whose depression jumps are gated the same way.
    """

    gain_p: float = 1.0
    gain_d: float = 1.0
    interval = (-math.inf, math.inf)
    exact = False

    def __post_init__(self) -> None:
        if self.gain_p < 0.0 or self.gain_d < 0.0:
            raise ValueError("gains must be non-negative")

    def rate(self, omega_p: float, omega_d: float, w: float) -> float:
        dep = self.gain_d * omega_d if w >= 0.0 else 0.0
        return self.gain_p * omega_p - dep


@dataclass(frozen=True)
class FrozenRule:
    """The weight never moves; turns the run into the fast process alone."""

    interval = (-math.inf, math.inf)
    exact = True

    def rate(self, omega_p: float, omega_d: float, w: float) -> float:
        return 0.0


WeightRule = "AdditiveRule | BoundedMultiplicativeRule | ExcitatoryRule | GatedAdditiveRule | FrozenRule"

_CLAMP_TOL = 1e-9


def _clamp_weight(rule, w: float) -> float:
    lo, hi = rule.interval
    # sub-linear boundary factors are non-Lipschitz at the walls, so the
    # exact trajectory can touch a wall in finite time and stick there; a
    # fixed-step landing just past the touch point is projected back silently
    soft = getattr(rule, "exponent", 1.0) < 1.0
    if w < lo:
        if not soft and lo - w > _CLAMP_TOL:
            raise WeightDomainError(
                f"weight {w!r} fell below the invariant floor {lo!r}"
            )
        return lo
    if w > hi:
        if not soft and w - hi > _CLAMP_TOL:
            raise WeightDomainError(
                f"weight {w!r} exceeded the invariant ceiling {hi!r}"
            )
        return hi
    return w


# ---------------------------------------------------------------------------
# Weight integration along closed-form channel paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OmegaPath:
    """Channel paths over one spike-free window, as closed-form segments.

    Each segment is ``(duration, pot0, pot_drift, dep0, dep_drift)``: the
    channel starts the segment at ``a0``, decays at ``alpha`` and gains a
    constant density, so ``omega(u) = a0 e^{-alpha u}
    + drift (1 - e^{-alpha u}) / alpha`` within the segment.
    """

    alpha: float
    segments: tuple[tuple[float, float, float, float, float], ...]

    def __post_init__(self) -> None:
        if not self.alpha > 0.0:
            raise ValueError("alpha must be positive")

    @classmethod
    def single(cls, alpha, duration, pot0, pot_drift=0.0, dep0=0.0, dep_drift=0.0):
        return cls(alpha, ((duration, pot0, pot_drift, dep0, dep_drift),))


def _omega_at(a0: float, drift: float, alpha: float, u: float) -> float:
    fade = math.exp(-alpha * u)
    return a0 * fade + drift * (1.0 - fade) / alpha


def _omega_integral(a0: float, drift: float, alpha: float, h: float) -> float:
    if math.isinf(h):
        if drift != 0.0:
            raise ValueError("infinite window requires zero drift")
        return a0 / alpha
    mass = (1.0 - math.exp(-alpha * h)) / alpha
    return a0 * mass + drift * (h - mass) / alpha


def _rk4_segment(rule, w, alpha, h, p0, pd, d0, dd, h_max):
    steps = max(1, math.ceil(h / h_max))
    dt = h / steps
    u = 0.0
    for _ in range(steps):
        op0, od0 = _omega_at(p0, pd, alpha, u), _omega_at(d0, dd, alpha, u)
        opm = _omega_at(p0, pd, alpha, u + 0.5 * dt)
        odm = _omega_at(d0, dd, alpha, u + 0.5 * dt)
        op1, od1 = _omega_at(p0, pd, alpha, u + dt), _omega_at(d0, dd, alpha, u + dt)
        k1 = rule.rate(op0, od0, w)
        k2 = rule.rate(opm, odm, w + 0.5 * dt * k1)
        k3 = rule.rate(opm, odm, w + 0.5 * dt * k2)
        k4 = rule.rate(op1, od1, w + dt * k3)
        w += dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        w = _clamp_weight(rule, w)
        u += dt
    return w


def integrate_weight(rule, path: OmegaPath, w0: float, h_max: float = 0.05) -> float:
    """Advance the weight along closed-form channel paths.

    Jump-linear rules (additive, frozen) integrate exactly; the others use
    classical fixed-step fourth-order Runge-Kutta with steps of at most
    ``h_max``, evaluating the channels in closed form at every stage.  The
    result is clamped to the rule's invariant interval only within rounding
    tolerance; larger excursions raise :class:`WeightDomainError`.
    """
    w = _clamp_weight(rule, float(w0))
    for duration, p0, pd, d0, dd in path.segments:
        if duration <= 0.0:
            continue
        if isinstance(rule, FrozenRule):
            continue
        if isinstance(rule, AdditiveRule):
            w += _omega_integral(p0, pd, path.alpha, duration) - _omega_integral(
                d0, dd, path.alpha, duration
            )
            continue
        if math.isinf(duration):
            raise ValueError("only jump-linear rules support infinite windows")
        w = _rk4_segment(rule, w, path.alpha, duration, p0, pd, d0, dd, h_max)
    return _clamp_weight(rule, w)


# ---------------------------------------------------------------------------
# Post-spike thinning
# ---------------------------------------------------------------------------

_ENVELOPE_FLOOR = 1e-14


def next_post_spike(
    x0: float,
    neuron: NeuronSpec,
    rng: RngStream,
    window: float,
    h_max: float = 1.0,
) -> float | None:
    """First post spike of the thinned membrane-dependent rate, or ``None``.

    The membrane decays freely from ``x0``; the window ``[0, window)`` is cut
    into chunks of at most ``h_max`` and each chunk is thinned against the
    supremum of the rate over the membrane values it traverses.  The
    envelope is refreshed every chunk, so non-monotone rate tables are
    handled and the candidate rate shrinks along with the membrane.  When
    the envelope falls below ``1e-14`` on an unbounded window the remaining
    spike probability is below any testable resolution and the sampler
    reports no spike.
    """
    if window <= 0.0:
        return None
    t = 0.0
    while t < window:
        h = min(h_max, window - t)
        x_a = x0 * math.exp(-t)
        x_b = x0 * math.exp(-(t + h))
        env = neuron.activation.envelope(min(x_a, x_b), max(x_a, x_b))
        if env <= _ENVELOPE_FLOOR:
            if math.isinf(window):
                return None
            t += h
            continue
        u = t
        while True:
            u += rng.exponential(1.0 / env)
            if u >= t + h:
                break
            if rng.random() * env <= neuron.activation.rate(x0 * math.exp(-u)):
                return u
        t += h
    return None


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceRecord:
    """State snapshot: at events, density breakpoints, and the sample cadence."""

    t: float
    x: float
    z: tuple[float, ...]
    omega_p: float
    omega_d: float
    w: float
    event: str  # "pre" | "post" | "threshold" | "sample"


@dataclass(frozen=True)
class SimConfig:
    """Everything a run needs; value-semantic and reusable across seeds."""

    neuron: NeuronSpec
    kernel: TraceKernel
    weight: object
    alpha: float
    horizon: float
    seed: int | None = None
    w_init: float = 0.0
    x_init: float = 0.0
    omega_init: tuple[float, float] = (0.0, 0.0)
    h_max: float = 1.0
    rk_step: float = 0.05
    sample_dt: float | None = None
    event_ceiling: int = 10_000_000
    pre_train: SpikeTrain | None = None
    post_train: SpikeTrain | None = None
    record: bool = True

    def __post_init__(self) -> None:
        if not self.alpha > 0.0:
            raise ValueError("alpha must be positive")
        if not self.horizon >= 0.0:
            raise ValueError("horizon must be non-negative")
        if not self.h_max > 0.0 or not self.rk_step > 0.0:
            raise ValueError("step bounds must be positive")
        if self.sample_dt is not None and not self.sample_dt > 0.0:
            raise ValueError("sample_dt must be positive")
        if self.event_ceiling < 1:
            raise ValueError("event ceiling must be positive")
        for train, name in ((self.pre_train, "pre"), (self.post_train, "post")):
            if train is not None and len(train) and train.times[-1] > self.horizon:
                raise ValueError(f"{name}_train extends beyond the horizon")
        if self.seed is None and (self.pre_train is None or self.post_train is None):
            raise ValueError("a seed is required unless both trains are replayed")
        object.__setattr__(self, "kernel", as_trace_kernel(self.kernel))


@dataclass
class SimResult:
    """Trace records (if recorded), final state, and event counts."""

    records: list[TraceRecord]
    final: FullState
    counts: dict[str, int]
    pre_times: list[float]
    post_times: list[float]

    @property
    def trains(self) -> tuple[SpikeTrain, SpikeTrain]:
        return (
            SpikeTrain(np.asarray(self.pre_times)),
            SpikeTrain(np.asarray(self.post_times)),
        )


class _Engine:
    """Shared event loop for filtered and unfiltered weight dynamics."""

    def __init__(self, config: SimConfig, unfiltered: bool):
        self.cfg = config
        self.kernel = config.kernel
        self.unfiltered = unfiltered
        if unfiltered and not isinstance(
            config.weight, (AdditiveRule, GatedAdditiveRule, FrozenRule)
        ):
            raise ValueError(
                "unfiltered weights need a jump-additive rule "
                "(additive, gated additive, or frozen)"
            )
        self.rng = RngStream(config.seed) if config.seed is not None else None
        self.records: list[TraceRecord] = []
        self.counts = {"pre": 0, "post": 0, "threshold": 0, "sample": 0}
        self.pre_times: list[float] = []
        self.post_times: list[float] = []

    # -- record helpers -----------------------------------------------------

    def snap(self, t, kind):
        if kind in self.counts:
            self.counts[kind] += 1
        if self.cfg.record:
            self.records.append(
                TraceRecord(
                    t, self.x, tuple(float(v) for v in self.z),
                    self.omega_p, self.omega_d, self.w, kind,
                )
            )

    # -- weight updates -----------------------------------------------------

    def advance_weight(self, duration, rate_p, rate_d):
        """One drift segment: channels decay toward their density targets."""
        if self.unfiltered:
            self._advance_unfiltered(duration, rate_p, rate_d)
            return
        path = OmegaPath.single(
            self.cfg.alpha, duration, self.omega_p, rate_p, self.omega_d, rate_d
        )
        self.w = integrate_weight(self.cfg.weight, path, self.w, h_max=self.cfg.rk_step)
        self.omega_p = _omega_at(self.omega_p, rate_p, self.cfg.alpha, duration)
        self.omega_d = _omega_at(self.omega_d, rate_d, self.cfg.alpha, duration)

    def _advance_unfiltered(self, duration, rate_p, rate_d):
        rule = self.cfg.weight
        if isinstance(rule, FrozenRule):
            return
        if isinstance(rule, AdditiveRule):
            self.w += (rate_p - rate_d) * duration
            return
        # gated additive: piecewise-linear path with an exact switch at zero
        left = duration
        up, down = rule.gain_p * rate_p, rule.gain_d * rate_d
        w = self.w
        while left > 0.0:
            if w > 0.0:
                net = up - down
                if net >= 0.0:
                    w += net * left
                    break
                hit = w / -net
                if hit >= left:
                    w += net * left
                    break
                w = 0.0
                left -= hit
            elif w < 0.0:
                if up <= 0.0:
                    break
                hit = -w / up
                if hit >= left:
                    w += up * left
                    break
                w = 0.0
                left -= hit
            else:
                if up > down:
                    w += (up - down) * left
                break  # sliding at zero otherwise
        self.w = w

    def jump_weight(self, mass_p, mass_d):
        """Unfiltered runs convert atom masses into weight jumps directly."""
        rule = self.cfg.weight
        if isinstance(rule, FrozenRule):
            return
        if isinstance(rule, AdditiveRule):
            self.w += mass_p - mass_d
            return
        dep = rule.gain_d * mass_d if self.w >= 0.0 else 0.0
        self.w += rule.gain_p * mass_p - dep

    # -- state advancement ---------------------------------------------------

    def advance(self, t0, dt):
        """Advance every component over a spike-free window of length ``dt``.

        The window is split at channel-density breakpoints (recorded as
        threshold events) and at the sampling cadence; each piece updates
        ``w`` and the channels in closed form, then the traces and membrane.
        """
        if dt <= 0.0:
            return
        cuts: list[tuple[float, str]] = [
            (u, "threshold") for u in drift_breakpoints(self.kernel, self.z, dt)
        ]
        if self.cfg.sample_dt is not None and self.cfg.record:
            step = self.cfg.sample_dt
            k = math.floor(t0 / step) + 1
            while k * step < t0 + dt:
                u = k * step - t0
                if 0.0 < u < dt:
                    cuts.append((u, "sample"))
                k += 1
        cuts.sort()
        z0 = self.z
        u0 = 0.0
        for u1, kind in cuts + [(dt, "")]:
            if u1 > u0:
                # densities are constant between cuts; read them mid-segment
                mid = z_flow(self.kernel, z0, 0.5 * (u0 + u1))
                rate_p, rate_d = omega_drift(self.kernel, mid)
                self.advance_weight(u1 - u0, rate_p, rate_d)
                u0 = u1
            if kind:
                self.z = z_flow(self.kernel, z0, u1)
                x_save = self.x
                self.x = x_save * math.exp(-u1)
                self.snap(t0 + u1, kind)
                self.x = x_save
        self.z = z_flow(self.kernel, z0, dt)
        self.x *= math.exp(-dt)

    def apply_event(self, t, kind):
        mass_p, mass_d = event_masses(self.kernel, self.z, kind)
        if self.unfiltered:
            self.jump_weight(mass_p, mass_d)
        else:
            self.omega_p += mass_p
            self.omega_d += mass_d
        self.z = jump_z(self.kernel, self.z, kind)
        if kind == "pre":
            self.x += self.w
            self.pre_times.append(t)
        else:
            self.x -= self.cfg.neuron.reset.drop(self.x)
            self.post_times.append(t)
        self.snap(t, kind)

    # -- the loop -------------------------------------------------------------

    def run(self) -> SimResult:
        cfg = self.cfg
        self.x = float(cfg.x_init)
        self.z = np.array(self.kernel.z_init, dtype=float)
        self.omega_p, self.omega_d = (float(v) for v in cfg.omega_init)
        if self.unfiltered:
            self.omega_p = self.omega_d = 0.0
        self.w = float(cfg.w_init)
        t = 0.0
        self.snap(0.0, "sample")

        pre_iter = iter(cfg.pre_train.times) if cfg.pre_train is not None else None
        post_iter = iter(cfg.post_train.times) if cfg.post_train is not None else None

        def draw_pre(now: float) -> float:
            if pre_iter is not None:
                return float(next(pre_iter, math.inf))
            if cfg.neuron.rate == 0.0:
                return math.inf
            return now + self.rng.exponential(1.0 / cfg.neuron.rate)

        next_pre = draw_pre(0.0)
        next_post = math.inf if post_iter is None else float(next(post_iter, math.inf))
        events = 0
        while True:
            window_end = min(next_pre, cfg.horizon)
            if post_iter is None:
                off = next_post_spike(
                    self.x, cfg.neuron, self.rng, window_end - t, cfg.h_max
                )
                post_t = math.inf if off is None else t + off
            else:
                post_t = next_post
            # pre wins ties, matching the merged-train ordering convention
            if post_t < next_pre and post_t <= cfg.horizon:
                self.advance(t, post_t - t)
                t = post_t
                self.apply_event(t, "post")
                if post_iter is not None:
                    next_post = float(next(post_iter, math.inf))
            elif next_pre <= cfg.horizon:
                self.advance(t, next_pre - t)
                t = next_pre
                self.apply_event(t, "pre")
                next_pre = draw_pre(t)
            else:
                self.advance(t, cfg.horizon - t)
                t = cfg.horizon
                self.snap(t, "sample")
                break
            events += 1
            if events > cfg.event_ceiling:
                raise SimulationLimitError(
                    f"event ceiling {cfg.event_ceiling} reached at t={t:.6g} "
                    f"(pre={self.counts['pre']}, post={self.counts['post']}); "
                    "the configuration looks explosive"
                )
        final = FullState(self.x, self.z, self.omega_p, self.omega_d, self.w)
        return SimResult(
            self.records, final, dict(self.counts), self.pre_times, self.post_times
        )


def run(config: SimConfig) -> SimResult:
    """Simulate the coupled process with exponentially filtered channels."""
    return _Engine(config, unfiltered=False).run()


def run_unfiltered(config: SimConfig) -> SimResult:
    """Simulate with the raw kernel measure driving the weight directly.

    Atom masses become weight jumps and channel densities become drift; no
    exponential filtering is applied.  Only jump-additive weight rules make
    sense here.  The weight moves exactly at spike events (and through
    density drift), and stops moving after the last event -- unlike the
    filtered weight, which keeps integrating its decaying channels.
    """
    return _Engine(config, unfiltered=True).run()


# ---------------------------------------------------------------------------
# Two-timescale toy model
# ---------------------------------------------------------------------------


def toy_closed_form(drive: float, w0: float, eps: float, t) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form weights of the deterministic toy relaxation problem.

    The unfiltered weight relaxes straight to the drive,
    ``F + (w0 - F) e^{-eps t}``.  The filtered weight integrates the same
    discrepancy through a filter of rate ``2 eps`` (critical ratio), giving
    the damped oscillation
    ``F + (w0 - F) e^{-eps t} (cos(r t) + (eps / r) sin(r t))`` with
    ``r = sqrt(1 - eps^2)``; it requires ``eps < 1``.  Returns
    ``(filtered, unfiltered)`` evaluated at ``t`` (scalar or array).
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    t = np.asarray(t, dtype=float)
    unfiltered = drive + (w0 - drive) * np.exp(-eps * t)
    r = math.sqrt(1.0 - eps * eps)
    filtered = drive + (w0 - drive) * np.exp(-eps * t) * (
        np.cos(r * t) + (eps / r) * np.sin(r * t)
    )
    return filtered, unfiltered


def toy_trajectories(
    drive: float, w0: float, eps: float, times, step: float = 1e-3
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate the toy model numerically (RK4) at the requested times.

    The filtered system is the pair ``w' = v``, ``v' = -2 eps v + drive - w``
    started from ``(w0, 0)``; the unfiltered one is
    ``w' = eps (drive - w)``.  Useful as an independent cross-check of
    :func:`toy_closed_form`.
    """
    times = np.asarray(times, dtype=float)
    out_f = np.empty_like(times)
    out_u = np.empty_like(times)
    w, v = float(w0), 0.0
    wu = float(w0)
    t = 0.0

    def f_rhs(state):
        w_, v_ = state
        return np.array([v_, -2.0 * eps * v_ + drive - w_])

    order = np.argsort(times)
    for idx in order:
        target = times[idx]
        while t < target - 1e-12:
            h = min(step, target - t)
            y = np.array([w, v])
            k1 = f_rhs(y)
            k2 = f_rhs(y + 0.5 * h * k1)
            k3 = f_rhs(y + 0.5 * h * k2)
            k4 = f_rhs(y + h * k3)
            w, v = y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
            ku1 = eps * (drive - wu)
            ku2 = eps * (drive - (wu + 0.5 * h * ku1))
            ku3 = eps * (drive - (wu + 0.5 * h * ku2))
            ku4 = eps * (drive - (wu + h * ku3))
            wu += h * (ku1 + 2 * ku2 + 2 * ku3 + ku4) / 6.0
            t += h
        out_f[idx] = w
        out_u[idx] = wu
    return out_f, out_u


# ---------------------------------------------------------------------------
# Trace serialization
# ---------------------------------------------------------------------------


def write_trace(path, result: SimResult | Sequence[TraceRecord], fmt: str = "tsv") -> None:
    """Write trace records as delimited text (default) or JSON lines.

    The text form has a header row and one record per line with 17
    significant digits, so reading it back reproduces the floats exactly.
    """
    records = result.records if isinstance(result, SimResult) else list(result)
    if fmt == "tsv":
        dim = len(records[0].z) if records else 0
        header = ["time", "x"] + [f"z{i}" for i in range(dim)] + [
            "omega_p", "omega_d", "w", "event",
        ]
        with open(path, "w") as fh:
            fh.write("\t".join(header) + "\n")
            for r in records:
                nums = [r.t, r.x, *r.z, r.omega_p, r.omega_d, r.w]
                fh.write(
                    "\t".join(FLOAT_FMT % v for v in nums) + "\t" + r.event + "\n"
                )
    elif fmt == "jsonl":
        with open(path, "w") as fh:
            for r in records:
                fh.write(
                    json.dumps(
                        {
                            "t": r.t, "x": r.x, "z": list(r.z),
                            "omega_p": r.omega_p, "omega_d": r.omega_d,
                            "w": r.w, "event": r.event,
                        }
                    )
                    + "\n"
                )
    else:
        raise ValueError("fmt must be 'tsv' or 'jsonl'")


def read_trace(path, fmt: str = "tsv") -> list[TraceRecord]:
    """Read a trace written by :func:`write_trace`."""
    records = []
    with open(path) as fh:
        if fmt == "tsv":
            header = fh.readline().split()
            dim = sum(1 for h in header if h.startswith("z"))
            for line in fh:
                parts = line.rstrip("\n").split("\t")
                nums = [float(v) for v in parts[:-1]]
                records.append(
                    TraceRecord(
                        nums[0], nums[1], tuple(nums[2 : 2 + dim]),
                        nums[2 + dim], nums[3 + dim], nums[4 + dim], parts[-1],
                    )
                )
        elif fmt == "jsonl":
            for line in fh:
                d = json.loads(line)
                records.append(
                    TraceRecord(
                        d["t"], d["x"], tuple(d["z"]), d["omega_p"],
                        d["omega_d"], d["w"], d["event"],
                    )
                )
        else:
            raise ValueError("fmt must be 'tsv' or 'jsonl'")
    return records


# ---------------------------------------------------------------------------
# Config-facing builders
# ---------------------------------------------------------------------------


def build_activation(kind: str, params: dict):
    table = {
        "linear": LinearActivation,
        "sigmoid": SigmoidActivation,
        "table": TableActivation,
    }
    if kind not in table:
        raise ValueError(f"unknown activation {kind!r}; known: {sorted(table)}")
    if kind == "table":
        extra = set(params) - {"breaks", "values"}
        if extra:
            raise ValueError(f"unknown activation fields: {sorted(extra)}")
        return TableActivation(
            np.asarray(params["breaks"], float), np.asarray(params["values"], float)
        )
    return _build_dataclass(table[kind], params, "activation")


def build_reset(kind: str, params: dict):
    table = {"full": FullReset, "constant": ConstantDrop, "none": NoReset}
    if kind not in table:
        raise ValueError(f"unknown reset {kind!r}; known: {sorted(table)}")
    return _build_dataclass(table[kind], params, "reset")


def build_weight_rule(kind: str, params: dict):
    table = {
        "additive": AdditiveRule,
        "bounded_multiplicative": BoundedMultiplicativeRule,
        "excitatory": ExcitatoryRule,
        "gated_additive": GatedAdditiveRule,
        "frozen": FrozenRule,
    }
    if kind not in table:
        raise ValueError(f"unknown weight rule {kind!r}; known: {sorted(table)}")
    return _build_dataclass(table[kind], params, "weight rule")


def _build_dataclass(cls, params: dict, label: str):
    import dataclasses

    valid = {f.name for f in dataclasses.fields(cls)}
    extra = set(params) - valid
    if extra:
        raise ValueError(f"unknown {label} fields: {sorted(extra)}")
    return cls(**params)
