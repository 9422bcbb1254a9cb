"""Finite-dimensional memory-trace representation of plasticity rules.

Instead of re-scanning spike history, each rule here carries a small vector
``z`` of memory traces that decays linearly between spikes and jumps when a
spike arrives.  The kernel's channels are read off ``z``:

* a drift output gives the channel *density* between events,
* a pre output gives the channel's atom *mass* when the pre train spikes,
* a post output gives the mass when the post train spikes,

always evaluated at the left limit ``z(t-)``.  Between events everything is
available in closed form, which is what makes exact event-driven simulation
possible.

The flow is ``dz = (-decay * z + drift) dt``; jumps are affine,
``z -> z + offset + gain @ z``, with the convention that a zero matrix
entry contributes exactly zero even against an infinite coordinate.  That
convention matters for the elapsed-clock representations, whose natural
"no spike yet" state is ``+inf``.

Positivity is part of the contract: jumps keep ``z`` in the non-negative
orthant and outputs are non-negative there.  Both are checked by randomized
sampling when a kernel is constructed (within per-coordinate caps covering
the reachable region) and jump application re-checks at runtime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence, Union

import numpy as np

from stdpsim.kernels import (
    CalciumSpec,
    Curve,
    ExponentialCurve,
    PairBasedSpec,
    PositivityError,
    SuppressionSpec,
    TripletSpec,
    VoltageSpec,
    zero_curve,
)

__all__ = [
    "PositivityError",
    "ZeroOutput",
    "LinearOutput",
    "ModulatedOutput",
    "CurveOutput",
    "ThresholdOutput",
    "RectifiedOutput",
    "LinearJump",
    "KernelOutputs",
    "TraceKernel",
    "FastState",
    "FullState",
    "z_flow",
    "jump_z",
    "event_masses",
    "apply_jump",
    "omega_drift",
    "drift_breakpoints",
    "replay_filtered",
    "generator_apply",
    "pair_kernel",
    "suppression_kernel",
    "triplet_kernel",
    "calcium_kernel",
    "voltage_kernel",
    "as_trace_kernel",
    "build_kernel",
    "custom_kernel",
    "KERNEL_RULES",
]


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype).copy()
    arr.flags.writeable = False
    return arr


def _masked_matvec(matrix: np.ndarray, z: np.ndarray) -> np.ndarray:
    # 0 * inf must be 0 here, not nan: absent matrix entries ignore the
    # coordinate entirely.
    with np.errstate(invalid="ignore"):
        return np.where(matrix != 0.0, matrix * z, 0.0).sum(axis=1)


# ---------------------------------------------------------------------------
# Jump maps and outputs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearJump:
    """Affine jump ``z -> z + offset + gain @ z``."""

    offset: np.ndarray
    gain: np.ndarray

    def __post_init__(self) -> None:
        offset = _frozen_array(self.offset)
        gain = _frozen_array(self.gain)
        if gain.shape != (offset.size, offset.size):
            raise ValueError("gain must be a square matrix matching offset")
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "gain", gain)
        total = _frozen_array(np.eye(offset.size) + gain)
        object.__setattr__(self, "_total", total)

    @classmethod
    def additive(cls, offset) -> "LinearJump":
        offset = np.asarray(offset, dtype=float)
        return cls(offset, np.zeros((offset.size, offset.size)))

    def apply(self, z: np.ndarray) -> np.ndarray:
        return self.offset + _masked_matvec(self._total, z)


@dataclass(frozen=True)
class ZeroOutput:
    def evaluate(self, z: np.ndarray) -> float:
        return 0.0


@dataclass(frozen=True)
class LinearOutput:
    """``coeffs . z + const`` (zero coefficients ignore their coordinate)."""

    coeffs: np.ndarray
    const: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "coeffs", _frozen_array(self.coeffs))

    def evaluate(self, z: np.ndarray) -> float:
        with np.errstate(invalid="ignore"):
            dot = float(np.where(self.coeffs != 0.0, self.coeffs * z, 0.0).sum())
        return dot + self.const


@dataclass(frozen=True)
class ModulatedOutput:
    """``(base + scale * z[j]) * z[k]`` -- suppression/boost of a trace readout."""

    j: int
    k: int
    base: float = 1.0
    scale: float = 1.0

    def evaluate(self, z: np.ndarray) -> float:
        return (self.base + self.scale * float(z[self.j])) * float(z[self.k])


@dataclass(frozen=True)
class CurveOutput:
    """``curve(z[j])`` optionally gated by ``z[j] <= z[gate]``, plus ``const``.

    Used by the elapsed-clock representations, where ``z[j]`` is the time
    since the relevant train last spiked (``+inf`` before its first spike,
    which every curve maps to 0).
    """

    curve: Curve
    j: int
    gate: int | None = None
    const: float = 0.0

    def evaluate(self, z: np.ndarray) -> float:
        val = float(self.curve(float(z[self.j])))
        if self.gate is not None and not (z[self.j] <= z[self.gate]):
            val = 0.0
        return val + self.const


@dataclass(frozen=True)
class ThresholdOutput:
    """``level * 1{z[j] >= theta}`` (closed comparison)."""

    level: float
    theta: float
    j: int

    def evaluate(self, z: np.ndarray) -> float:
        return self.level if z[self.j] >= self.theta else 0.0


@dataclass(frozen=True)
class RectifiedOutput:
    """``scale * (z[j] - theta)^+``, optionally times ``z[k]``."""

    scale: float
    j: int
    theta: float
    k: int | None = None

    def evaluate(self, z: np.ndarray) -> float:
        val = self.scale * max(float(z[self.j]) - self.theta, 0.0)
        if self.k is not None:
            val *= float(z[self.k])
        return val


Output = Union[
    ZeroOutput, LinearOutput, ModulatedOutput, CurveOutput, ThresholdOutput,
    RectifiedOutput,
]


@dataclass(frozen=True)
class KernelOutputs:
    """Channel readouts: density between events, atom masses at pre/post spikes."""

    pot_drift: Output = field(default_factory=ZeroOutput)
    pot_pre: Output = field(default_factory=ZeroOutput)
    pot_post: Output = field(default_factory=ZeroOutput)
    dep_drift: Output = field(default_factory=ZeroOutput)
    dep_pre: Output = field(default_factory=ZeroOutput)
    dep_post: Output = field(default_factory=ZeroOutput)

    def all(self):
        return (
            self.pot_drift, self.pot_pre, self.pot_post,
            self.dep_drift, self.dep_pre, self.dep_post,
        )


# ---------------------------------------------------------------------------
# The kernel itself
# ---------------------------------------------------------------------------

_POSITIVITY_SAMPLES = 128
_POSITIVITY_TOL = 1e-12


@dataclass(frozen=True)
class TraceKernel:
    """A plasticity rule as decaying memory traces plus readout functions.

    Parameters
    ----------
    decay, drift:
        Per-coordinate linear decay rates and constant drift of the flow.
    pre_jump, post_jump:
        Affine jump maps applied when the pre/post train spikes.
    outputs:
        Channel readouts (see :class:`KernelOutputs`).
    z_init:
        Default initial trace vector (may contain ``+inf`` for clocks).
    labels:
        Coordinate names, for trace headers and debugging.
    sample_caps:
        Per-coordinate upper bounds of the region sampled by the
        construction-time positivity check; defaults to a generic box.
    origin:
        ``(rule_name, params)`` when built by a factory; lets configs
        round-trip the kernel.
    """

    decay: np.ndarray
    drift: np.ndarray
    pre_jump: LinearJump
    post_jump: LinearJump
    outputs: KernelOutputs
    z_init: np.ndarray
    labels: tuple[str, ...] = ()
    sample_caps: np.ndarray | None = None
    origin: tuple[str, dict] | None = None

    def __post_init__(self) -> None:
        decay = _frozen_array(self.decay)
        drift = _frozen_array(self.drift)
        z_init = _frozen_array(self.z_init)
        if decay.ndim != 1 or drift.shape != decay.shape or z_init.shape != decay.shape:
            raise ValueError("decay, drift and z_init must be equal-length vectors")
        if np.any(decay < 0.0) or np.any(drift < 0.0):
            raise ValueError("decay and drift must be non-negative")
        if self.pre_jump.offset.size != decay.size:
            raise ValueError("pre_jump dimension mismatch")
        if self.post_jump.offset.size != decay.size:
            raise ValueError("post_jump dimension mismatch")
        object.__setattr__(self, "decay", decay)
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "z_init", z_init)
        labels = tuple(self.labels) or tuple(f"z{i}" for i in range(decay.size))
        if len(labels) != decay.size:
            raise ValueError("labels must match the trace dimension")
        object.__setattr__(self, "labels", labels)
        if self.sample_caps is None:
            scale = max(
                1.0,
                float(np.max(np.abs(self.pre_jump.offset), initial=0.0)),
                float(np.max(np.abs(self.post_jump.offset), initial=0.0)),
            )
            caps = np.full(decay.size, 10.0 * scale)
        else:
            caps = np.asarray(self.sample_caps, dtype=float)
            if caps.shape != decay.shape:
                raise ValueError("sample_caps must match the trace dimension")
        object.__setattr__(self, "sample_caps", _frozen_array(caps))
        self._check_positivity()

    @property
    def dim(self) -> int:
        return int(self.decay.size)

    def _check_positivity(self) -> None:
        rng = np.random.default_rng(20_240_817)
        samples = rng.uniform(0.0, 1.0, size=(_POSITIVITY_SAMPLES, self.dim))
        samples *= self.sample_caps
        samples[0] = 0.0
        samples[1] = self.sample_caps
        names = ("pot_drift", "pot_pre", "pot_post", "dep_drift", "dep_pre", "dep_post")
        for z in samples:
            for which, jump in (("pre", self.pre_jump), ("post", self.post_jump)):
                after = jump.apply(z)
                if np.any(after < -_POSITIVITY_TOL):
                    raise PositivityError(
                        f"{which} jump leaves the non-negative orthant at "
                        f"z={np.round(z, 6).tolist()} -> {np.round(after, 6).tolist()}"
                    )
            for name, out in zip(names, self.outputs.all()):
                if out.evaluate(z) < -_POSITIVITY_TOL:
                    raise PositivityError(
                        f"output {name} is negative at z={np.round(z, 6).tolist()}"
                    )


@dataclass(frozen=True)
class FastState:
    """Membrane value and trace vector of the fast process."""

    x: float
    z: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "z", _frozen_array(self.z))


@dataclass(frozen=True)
class FullState:
    """Fast state plus filtered channels and the synaptic weight."""

    x: float
    z: np.ndarray
    omega_p: float
    omega_d: float
    w: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "z", _frozen_array(self.z))


# ---------------------------------------------------------------------------
# Flow, jumps, readouts
# ---------------------------------------------------------------------------


def z_flow(kernel: TraceKernel, z: np.ndarray, dt: float) -> np.ndarray:
    """Exact trace flow over a spike-free window of length ``dt``.

    Coordinates with positive decay relax toward ``drift / decay``;
    zero-decay coordinates grow linearly at rate ``drift`` (the elapsed
    clocks).  Infinite coordinates stay infinite.
    """
    if dt < 0.0:
        raise ValueError("dt must be non-negative")
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = kernel.decay > 0.0
    if np.any(pos):
        g = kernel.decay[pos]
        target = kernel.drift[pos] / g
        out[pos] = target + (z[pos] - target) * np.exp(-g * dt)
    if np.any(~pos):
        out[~pos] = z[~pos] + kernel.drift[~pos] * dt
    return out


def jump_z(kernel: TraceKernel, z: np.ndarray, which: str) -> np.ndarray:
    """Apply the pre or post jump map; signals if positivity breaks."""
    jump = kernel.pre_jump if which == "pre" else kernel.post_jump
    after = jump.apply(np.asarray(z, dtype=float))
    if np.any(after < -1e-9):
        raise PositivityError(
            f"{which} jump produced a negative trace: {after.tolist()}"
        )
    return np.maximum(after, 0.0)


def event_masses(kernel: TraceKernel, z: np.ndarray, which: str) -> tuple[float, float]:
    """Channel atom masses released by a spike, read at the left limit ``z``."""
    o = kernel.outputs
    if which == "pre":
        return o.pot_pre.evaluate(z), o.dep_pre.evaluate(z)
    return o.pot_post.evaluate(z), o.dep_post.evaluate(z)


def omega_drift(kernel: TraceKernel, z: np.ndarray) -> tuple[float, float]:
    """Channel densities between events at the current traces."""
    return (
        kernel.outputs.pot_drift.evaluate(z),
        kernel.outputs.dep_drift.evaluate(z),
    )


def apply_jump(
    kernel: TraceKernel,
    state: FullState,
    which: str,
    drop: Callable[[float], float] | None = None,
) -> FullState:
    """One spike's effect on the full state, everything at left limits.

    Pre spike: the membrane gains the current weight, traces take the pre
    jump, and both channels gain their pre atom mass.  Post spike: the
    membrane loses ``drop(x)`` (full reset when ``drop`` is omitted), traces
    take the post jump, channels gain their post atom mass.  The weight
    itself never jumps.
    """
    if which not in ("pre", "post"):
        raise ValueError("which must be 'pre' or 'post'")
    pot, dep = event_masses(kernel, state.z, which)
    z_after = jump_z(kernel, state.z, which)
    if which == "pre":
        x_after = state.x + state.w
    else:
        x_after = state.x - (drop(state.x) if drop is not None else state.x)
    return FullState(
        x=x_after,
        z=z_after,
        omega_p=state.omega_p + pot,
        omega_d=state.omega_d + dep,
        w=state.w,
    )


def _exp_crossing(z0: float, decay: float, drift: float, theta: float) -> float:
    """First time the scalar flow from ``z0`` hits ``theta`` (inf if never)."""
    if z0 == theta:
        return math.inf  # already there; only a genuine sign change counts
    if decay > 0.0:
        target = drift / decay
        num, den = z0 - target, theta - target
        # monotone relaxation toward target: a crossing needs theta strictly
        # between z0 and the target
        if num == 0.0 or den == 0.0 or (num > 0.0) != (den > 0.0):
            return math.inf
        ratio = num / den
        if ratio <= 1.0:
            return math.inf
        return math.log(ratio) / decay
    if drift > 0.0 and theta > z0:
        return (theta - z0) / drift
    return math.inf


def drift_breakpoints(kernel: TraceKernel, z: np.ndarray, dt: float) -> list[float]:
    """Times in ``(0, dt)`` where a channel density changes value.

    Densities change only when a threshold readout's coordinate crosses its
    level, which happens at explicitly solvable times because the flow is a
    monotone exponential (or linear) relaxation.
    """
    times: set[float] = set()
    z = np.asarray(z, dtype=float)
    for out in (kernel.outputs.pot_drift, kernel.outputs.dep_drift):
        if isinstance(out, ThresholdOutput):
            u = _exp_crossing(
                float(z[out.j]),
                float(kernel.decay[out.j]),
                float(kernel.drift[out.j]),
                out.theta,
            )
            if 0.0 < u < dt:
                times.add(u)
        elif not isinstance(out, ZeroOutput):
            raise NotImplementedError(
                "only threshold-type densities have breakpoint logic"
            )
    return sorted(times)


def replay_filtered(
    kernel: TraceKernel,
    m1,
    m2,
    alpha: float,
    horizon: float,
    initial: tuple[float, float] = (0.0, 0.0),
) -> tuple[float, float]:
    """Exponentially filtered channel values after replaying two spike trains.

    Walks the merged event sequence, advancing the traces and the filtered
    channels in closed form between events (with density changes split at
    their exact breakpoints) and applying atom masses at events.  This is
    the trace-system counterpart of
    :func:`stdpsim.kernels.filter_kernel_measure` and must agree with it to
    rounding error on any tie-free pair of trains.
    """
    from stdpsim.spike_core import merge_events

    if not alpha > 0.0:
        raise ValueError("alpha must be positive")
    z = np.array(kernel.z_init, dtype=float)
    pot, dep = float(initial[0]), float(initial[1])
    t = 0.0
    events = merge_events(m1.clipped(horizon), m2.clipped(horizon))
    events.append((horizon, "end"))
    for time, kind in events:
        dt = time - t
        if dt > 0.0:
            cuts = drift_breakpoints(kernel, z, dt)
            u0 = 0.0
            for u1 in cuts + [dt]:
                if u1 <= u0:
                    continue
                seg = u1 - u0
                # densities are constant on the open segment; read them at
                # its midpoint to stay clear of the boundary thresholds
                mid = z_flow(kernel, z, 0.5 * (u0 + u1))
                rate_p, rate_d = omega_drift(kernel, mid)
                fade = math.exp(-alpha * seg)
                gain = (1.0 - fade) / alpha
                pot = pot * fade + rate_p * gain
                dep = dep * fade + rate_d * gain
                u0 = u1
            z = z_flow(kernel, z, dt)
            t = time
        if kind != "end":
            mass_p, mass_d = event_masses(kernel, z, kind)
            pot += mass_p
            dep += mass_d
            z = jump_z(kernel, z, kind)
    return pot, dep


def generator_apply(
    kernel: TraceKernel,
    f: Callable[[float, np.ndarray], float],
    grad: Callable[[float, np.ndarray], tuple[float, np.ndarray]],
    state: FastState,
    w: float,
    rate_pre: float,
    activation: Callable[[float], float],
    drop: Callable[[float], float],
) -> float:
    """Generator of the fast process applied to a test function at a state.

    ``f`` maps ``(x, z)`` to a scalar and ``grad`` returns its gradient as
    ``(df/dx, df/dz)``.  The value combines the deterministic drift with the
    two jump channels:

    ``-x f_x + (-decay * z + drift) . f_z
    + rate_pre * (f(x + w, z after pre jump) - f(x, z))
    + activation(x) * (f(x - drop(x), z after post jump) - f(x, z))``.

    Time-averaged along a stationary trajectory this vanishes for any
    sufficiently integrable ``f``, which is what the validation suite
    checks.
    """
    x, z = state.x, np.asarray(state.z, dtype=float)
    fx, fz = grad(x, z)
    value = -x * fx + float(np.dot(-kernel.decay * z + kernel.drift, fz))
    base = f(x, z)
    value += rate_pre * (f(x + w, jump_z(kernel, z, "pre")) - base)
    beta = activation(x)
    if beta != 0.0:
        value += beta * (f(x - drop(x), jump_z(kernel, z, "post")) - base)
    return value


# ---------------------------------------------------------------------------
# Factories: one per plasticity rule
# ---------------------------------------------------------------------------


def _exp_params(curve: Curve, name: str) -> tuple[float, float]:
    if not isinstance(curve, ExponentialCurve):
        raise TypeError(
            f"{name}: memory-trace factories require exponential curves "
            "(use the clock representation for tabulated ones)"
        )
    return curve.amplitude, curve.rate


def _pair_trace_kernel(spec: PairBasedSpec, reduced: bool) -> TraceKernel:
    amps, rates = zip(
        *(
            _exp_params(c, n)
            for c, n in (
                (spec.phi_p1, "phi_p1"),
                (spec.phi_p2, "phi_p2"),
                (spec.phi_d1, "phi_d1"),
                (spec.phi_d2, "phi_d2"),
            )
        )
    )
    ell = 4
    # Coordinates: [p1, p2, d1, d2]; z_a1 accumulates pre spikes, z_a2 posts.
    pre_offset = np.array([amps[0], 0.0, amps[2], 0.0])
    post_offset = np.array([0.0, amps[1], 0.0, amps[3]])
    pre_gain = np.zeros((ell, ell))
    post_gain = np.zeros((ell, ell))
    if spec.scheme != "all_to_all":
        pre_gain[0, 0] = -1.0  # latest pre replaces, not adds
        pre_gain[2, 2] = -1.0
        post_gain[1, 1] = -1.0
        post_gain[3, 3] = -1.0
    if reduced:
        pre_gain[1, 1] = -1.0  # a pre spike voids pending post pairings
        pre_gain[3, 3] = -1.0
        post_gain[0, 0] = -1.0
        post_gain[2, 2] = -1.0
    outputs = KernelOutputs(
        pot_pre=LinearOutput([0.0, 1.0, 0.0, 0.0], const=spec.drive_p1),
        pot_post=LinearOutput([1.0, 0.0, 0.0, 0.0], const=spec.drive_p2),
        dep_pre=LinearOutput([0.0, 0.0, 0.0, 1.0], const=spec.drive_d1),
        dep_post=LinearOutput([0.0, 0.0, 1.0, 0.0], const=spec.drive_d2),
    )
    return TraceKernel(
        decay=np.array(rates),
        drift=np.zeros(ell),
        pre_jump=LinearJump(pre_offset, pre_gain),
        post_jump=LinearJump(post_offset, post_gain),
        outputs=outputs,
        z_init=np.zeros(ell),
        labels=("z_p1", "z_p2", "z_d1", "z_d2"),
    )


def _pair_clock_kernel(spec: PairBasedSpec, reduced: bool) -> TraceKernel:
    # Coordinates: elapsed time since the last pre / post spike.  Before a
    # train's first spike its clock is +inf, which all curves map to 0; that
    # is what makes this representation agree with the memory-trace one.
    reset_pre = LinearJump(np.zeros(2), np.array([[-1.0, 0.0], [0.0, 0.0]]))
    reset_post = LinearJump(np.zeros(2), np.array([[0.0, 0.0], [0.0, -1.0]]))
    gate_pre = 0 if reduced else None  # post clock must beat the pre clock
    gate_post = 1 if reduced else None
    outputs = KernelOutputs(
        pot_pre=CurveOutput(spec.phi_p2, j=1, gate=gate_pre, const=spec.drive_p1),
        pot_post=CurveOutput(spec.phi_p1, j=0, gate=gate_post, const=spec.drive_p2),
        dep_pre=CurveOutput(spec.phi_d2, j=1, gate=gate_pre, const=spec.drive_d1),
        dep_post=CurveOutput(spec.phi_d1, j=0, gate=gate_post, const=spec.drive_d2),
    )
    return TraceKernel(
        decay=np.zeros(2),
        drift=np.ones(2),
        pre_jump=reset_pre,
        post_jump=reset_post,
        outputs=outputs,
        z_init=np.array([math.inf, math.inf]),
        labels=("t_since_pre", "t_since_post"),
        sample_caps=np.array([100.0, 100.0]),
    )


def pair_kernel(spec: PairBasedSpec, representation: str = "trace") -> TraceKernel:
    """Trace system for a pair-based rule.

    ``representation`` picks between the two equivalent state spaces:

    * ``"trace"`` -- four decaying memory traces (requires exponential
      curves); all-to-all accumulates, nearest schemes replace.
    * ``"clock"`` -- two elapsed-time clocks evaluated through the curves
      (any curve type; nearest schemes only).

    Both induce identical channel increments on identical event sequences.
    """
    if representation == "trace":
        if spec.scheme == "all_to_all":
            return replace_origin(
                _pair_trace_kernel(spec, reduced=False), "pair", spec, representation
            )
        return replace_origin(
            _pair_trace_kernel(spec, reduced=spec.scheme == "nearest_reduced"),
            "pair",
            spec,
            representation,
        )
    if representation == "clock":
        if spec.scheme == "all_to_all":
            raise ValueError("the clock representation needs a nearest scheme")
        return replace_origin(
            _pair_clock_kernel(spec, reduced=spec.scheme == "nearest_reduced"),
            "pair",
            spec,
            representation,
        )
    raise ValueError("representation must be 'trace' or 'clock'")


def suppression_kernel(spec: SuppressionSpec) -> TraceKernel:
    """Trace system for the suppression rule (exponential curves only).

    Six coordinates: four pair traces whose spike increments are scaled by
    ``1 - (own suppression trace)``, plus the two suppression traces, which
    reset to their curve's amplitude when their train spikes.
    """
    amps, rates = zip(
        *(
            _exp_params(getattr(spec, n), n)
            for n in ("phi_p1", "phi_p2", "phi_d1", "phi_d2", "supp_1", "supp_2")
        )
    )
    b_p1, b_p2, b_d1, b_d2, a1, a2 = amps
    ell = 6
    pre_offset = np.array([b_p1, 0.0, b_d1, 0.0, a1, 0.0])
    pre_gain = np.zeros((ell, ell))
    pre_gain[0, 4] = -b_p1  # increment scaled by 1 - z_s1
    pre_gain[2, 4] = -b_d1
    pre_gain[4, 4] = -1.0  # suppression trace resets to its amplitude
    post_offset = np.array([0.0, b_p2, 0.0, b_d2, 0.0, a2])
    post_gain = np.zeros((ell, ell))
    post_gain[1, 5] = -b_p2
    post_gain[3, 5] = -b_d2
    post_gain[5, 5] = -1.0
    outputs = KernelOutputs(
        pot_pre=ModulatedOutput(j=4, k=1, base=1.0, scale=-1.0),
        pot_post=ModulatedOutput(j=5, k=0, base=1.0, scale=-1.0),
        dep_pre=ModulatedOutput(j=4, k=3, base=1.0, scale=-1.0),
        dep_post=ModulatedOutput(j=5, k=2, base=1.0, scale=-1.0),
    )
    caps = np.array([10.0 * max(b_p1, 1.0), 10.0 * max(b_p2, 1.0),
                     10.0 * max(b_d1, 1.0), 10.0 * max(b_d2, 1.0), a1, a2])
    kernel = TraceKernel(
        decay=np.array(rates),
        drift=np.zeros(ell),
        pre_jump=LinearJump(pre_offset, pre_gain),
        post_jump=LinearJump(post_offset, post_gain),
        outputs=outputs,
        z_init=np.zeros(ell),
        labels=("z_p1", "z_p2", "z_d1", "z_d2", "z_s1", "z_s2"),
        sample_caps=caps,
    )
    return replace_origin(kernel, "suppression", spec, None)


def triplet_kernel(spec: TripletSpec) -> TraceKernel:
    """Trace system for the triplet rule (exponential curves only).

    Eight coordinates: the four pair traces plus four boost traces of the
    spiking train; atom masses are the pair readout scaled by ``1 + boost``.
    """
    names = (
        "phi_p1", "phi_p2", "phi_d1", "phi_d2",
        "trip_p1", "trip_p2", "trip_d1", "trip_d2",
    )
    amps, rates = zip(*(_exp_params(getattr(spec, n), n) for n in names))
    ell = 8
    pre_offset = np.array([amps[0], 0.0, amps[2], 0.0, amps[4], 0.0, amps[6], 0.0])
    post_offset = np.array([0.0, amps[1], 0.0, amps[3], 0.0, amps[5], 0.0, amps[7]])
    outputs = KernelOutputs(
        pot_pre=ModulatedOutput(j=4, k=1, base=1.0, scale=1.0),
        pot_post=ModulatedOutput(j=5, k=0, base=1.0, scale=1.0),
        dep_pre=ModulatedOutput(j=6, k=3, base=1.0, scale=1.0),
        dep_post=ModulatedOutput(j=7, k=2, base=1.0, scale=1.0),
    )
    kernel = TraceKernel(
        decay=np.array(rates),
        drift=np.zeros(ell),
        pre_jump=LinearJump.additive(pre_offset),
        post_jump=LinearJump.additive(post_offset),
        outputs=outputs,
        z_init=np.zeros(ell),
        labels=(
            "z_p1", "z_p2", "z_d1", "z_d2",
            "boost_p1", "boost_p2", "boost_d1", "boost_d2",
        ),
    )
    return replace_origin(kernel, "triplet", spec, None)


def calcium_kernel(spec: CalciumSpec) -> TraceKernel:
    """Single-coordinate trace: the calcium value with threshold densities."""
    kernel = TraceKernel(
        decay=np.array([spec.decay]),
        drift=np.zeros(1),
        pre_jump=LinearJump.additive([spec.c1]),
        post_jump=LinearJump.additive([spec.c2]),
        outputs=KernelOutputs(
            pot_drift=ThresholdOutput(spec.rate_p, spec.theta_p, 0),
            dep_drift=ThresholdOutput(spec.rate_d, spec.theta_d, 0),
        ),
        z_init=np.array([spec.c_init]),
        labels=("calcium",),
    )
    return replace_origin(kernel, "calcium", spec, None)


def voltage_kernel(spec: VoltageSpec) -> TraceKernel:
    """Three unit-amplitude filters: pre trace plus two post traces."""
    kernel = TraceKernel(
        decay=np.array([spec.decay_pre, spec.decay_post_pot, spec.decay_post_dep]),
        drift=np.zeros(3),
        pre_jump=LinearJump.additive([1.0, 0.0, 0.0]),
        post_jump=LinearJump.additive([0.0, 1.0, 1.0]),
        outputs=KernelOutputs(
            pot_post=RectifiedOutput(spec.b_p, j=1, theta=spec.theta, k=0),
            dep_pre=RectifiedOutput(spec.b_d, j=2, theta=spec.theta),
        ),
        z_init=np.zeros(3),
        labels=("pre_trace", "post_trace_pot", "post_trace_dep"),
    )
    return replace_origin(kernel, "voltage", spec, None)


def custom_kernel(
    decay,
    drift,
    pre_offset,
    pre_gain,
    post_offset,
    post_gain,
    outputs: KernelOutputs,
    z_init=None,
    labels: tuple[str, ...] = (),
) -> TraceKernel:
    """Assemble a kernel from raw arrays; positivity is still enforced."""
    decay = np.asarray(decay, dtype=float)
    return TraceKernel(
        decay=decay,
        drift=np.asarray(drift, dtype=float),
        pre_jump=LinearJump(np.asarray(pre_offset, float), np.asarray(pre_gain, float)),
        post_jump=LinearJump(np.asarray(post_offset, float), np.asarray(post_gain, float)),
        outputs=outputs,
        z_init=np.zeros(decay.size) if z_init is None else np.asarray(z_init, float),
        labels=labels,
    )


def replace_origin(kernel: TraceKernel, rule: str, spec, representation) -> TraceKernel:
    """Attach the serializable origin of a factory-built kernel."""
    params = _spec_to_params(spec)
    if representation is not None:
        params["representation"] = representation
    return replace(kernel, origin=(rule, params))


def _curve_to_params(curve: Curve) -> dict:
    if isinstance(curve, ExponentialCurve):
        return {"amplitude": curve.amplitude, "rate": curve.rate}
    return {"breaks": np.asarray(curve.breaks).tolist(),
            "values": np.asarray(curve.values).tolist()}


def _curve_from_params(params) -> Curve:
    if params is None:
        return zero_curve()
    if isinstance(params, (int, float)):
        # shorthand: a bare number is a unit-rate exponential amplitude
        return ExponentialCurve(float(params), 1.0)
    if "breaks" in params:
        return TabulatedCurve(np.asarray(params["breaks"]), np.asarray(params["values"]))
    extra = set(params) - {"amplitude", "rate"}
    if extra:
        raise ValueError(f"unknown curve fields: {sorted(extra)}")
    return ExponentialCurve(float(params["amplitude"]), float(params.get("rate", 1.0)))


_CURVE_FIELDS = {
    "pair": ("phi_p1", "phi_p2", "phi_d1", "phi_d2"),
    "suppression": ("phi_p1", "phi_p2", "phi_d1", "phi_d2", "supp_1", "supp_2"),
    "triplet": (
        "phi_p1", "phi_p2", "phi_d1", "phi_d2",
        "trip_p1", "trip_p2", "trip_d1", "trip_d2",
    ),
}


def _spec_to_params(spec) -> dict:
    if isinstance(spec, (PairBasedSpec, SuppressionSpec, TripletSpec)):
        rule = {
            PairBasedSpec: "pair", SuppressionSpec: "suppression",
            TripletSpec: "triplet",
        }[type(spec)]
        params = {
            name: _curve_to_params(getattr(spec, name))
            for name in _CURVE_FIELDS[rule]
        }
        if isinstance(spec, PairBasedSpec):
            params["scheme"] = spec.scheme
            for d in ("drive_p1", "drive_p2", "drive_d1", "drive_d2"):
                if getattr(spec, d):
                    params[d] = getattr(spec, d)
        return params
    if isinstance(spec, CalciumSpec):
        return {
            "c1": spec.c1, "c2": spec.c2, "decay": spec.decay,
            "theta_p": spec.theta_p, "theta_d": spec.theta_d,
            "rate_p": spec.rate_p, "rate_d": spec.rate_d, "c_init": spec.c_init,
        }
    if isinstance(spec, VoltageSpec):
        return {
            "b_p": spec.b_p, "b_d": spec.b_d, "decay_pre": spec.decay_pre,
            "decay_post_pot": spec.decay_post_pot,
            "decay_post_dep": spec.decay_post_dep, "theta": spec.theta,
        }
    raise TypeError(f"cannot serialize spec of type {type(spec).__name__}")


def as_trace_kernel(spec, representation: str = "trace") -> TraceKernel:
    """Convert any kernel spec from :mod:`stdpsim.kernels` to a trace system."""
    if isinstance(spec, TraceKernel):
        return spec
    if isinstance(spec, PairBasedSpec):
        return pair_kernel(spec, representation)
    if isinstance(spec, SuppressionSpec):
        return suppression_kernel(spec)
    if isinstance(spec, TripletSpec):
        return triplet_kernel(spec)
    if isinstance(spec, CalciumSpec):
        return calcium_kernel(spec)
    if isinstance(spec, VoltageSpec):
        return voltage_kernel(spec)
    raise TypeError(f"unknown kernel spec type: {type(spec).__name__}")


def _build_pair(params: dict) -> TraceKernel:
    params = dict(params)
    representation = params.pop("representation", "trace")
    # omitted curves default to zero, matching the Hebbian constructor
    curves = {n: _curve_from_params(params.pop(n, None)) for n in _CURVE_FIELDS["pair"]}
    spec = PairBasedSpec(scheme=params.pop("scheme", "all_to_all"), **curves, **{
        k: float(params.pop(k))
        for k in list(params)
        if k in ("drive_p1", "drive_p2", "drive_d1", "drive_d2")
    })
    if params:
        raise ValueError(f"unknown pair-rule fields: {sorted(params)}")
    return pair_kernel(spec, representation)


def _build_curve_rule(rule: str, params: dict, spec_cls, factory) -> TraceKernel:
    params = dict(params)
    curves = {n: _curve_from_params(params.pop(n, None)) for n in _CURVE_FIELDS[rule]}
    if params:
        raise ValueError(f"unknown {rule}-rule fields: {sorted(params)}")
    return factory(spec_cls(**curves))


def _build_plain(rule: str, params: dict, spec_cls, factory) -> TraceKernel:
    import dataclasses

    valid = {f.name for f in dataclasses.fields(spec_cls)}
    extra = set(params) - valid
    if extra:
        raise ValueError(f"unknown {rule}-rule fields: {sorted(extra)}")
    return factory(spec_cls(**params))


_OUTPUT_SLOTS = (
    "pot_drift", "pot_pre", "pot_post", "dep_drift", "dep_pre", "dep_post",
)


def _build_custom(params: dict) -> TraceKernel:
    params = dict(params)
    try:
        decay = params.pop("decay")
        pre_offset = params.pop("pre_offset")
        post_offset = params.pop("post_offset")
    except KeyError as exc:
        raise ValueError(f"custom kernel missing field {exc.args[0]!r}") from None
    dim = len(decay)
    drift = params.pop("drift", [0.0] * dim)
    pre_gain = params.pop("pre_gain", np.zeros((dim, dim)))
    post_gain = params.pop("post_gain", np.zeros((dim, dim)))
    z_init = params.pop("z_init", None)
    out_params = params.pop("outputs", {})
    if params:
        raise ValueError(f"unknown custom-kernel fields: {sorted(params)}")
    extra = set(out_params) - set(_OUTPUT_SLOTS)
    if extra:
        raise ValueError(f"unknown output slots: {sorted(extra)}")
    slots = {}
    for name, spec in out_params.items():
        unknown = set(spec) - {"coeffs", "const"}
        if unknown:
            raise ValueError(f"output {name}: unknown fields {sorted(unknown)}")
        slots[name] = LinearOutput(
            np.asarray(spec.get("coeffs", np.zeros(dim)), dtype=float),
            const=float(spec.get("const", 0.0)),
        )
    return custom_kernel(
        decay, drift, pre_offset, pre_gain, post_offset, post_gain,
        outputs=KernelOutputs(**slots), z_init=z_init,
    )


def build_kernel(rule: str, params: dict) -> TraceKernel:
    """Build a kernel from its config form: a rule name plus flat parameters."""
    if rule == "pair":
        return _build_pair(params)
    if rule == "suppression":
        return _build_curve_rule("suppression", params, SuppressionSpec, suppression_kernel)
    if rule == "triplet":
        return _build_curve_rule("triplet", params, TripletSpec, triplet_kernel)
    if rule == "calcium":
        return _build_plain("calcium", params, CalciumSpec, calcium_kernel)
    if rule == "voltage":
        return _build_plain("voltage", params, VoltageSpec, voltage_kernel)
    if rule == "custom":
        return _build_custom(params)
    raise ValueError(f"unknown kernel rule {rule!r}; known: {sorted(KERNEL_RULES)}")


KERNEL_RULES = ("pair", "suppression", "triplet", "calcium", "voltage", "custom")
