"""History-based plasticity kernels evaluated directly from spike trains.

A plasticity kernel maps a pre-synaptic train ``m1`` and a post-synaptic
train ``m2`` to a pair of non-negative measures on ``(0, horizon]``: a
potentiation channel and a depression channel.  Each measure splits into

* *atoms*: point masses located at spike times, and
* a *density*: a piecewise-constant rate between spikes (only the calcium
  rule has one; pair-based, suppression, triplet and voltage rules are
  purely atomic).

Everything in this module is computed literally from the definitions --
double sums over spike pairs, delays to the most recent spike, exact
exponential decay of the calcium trace.  The module is deliberately
unoptimized; it is the reference the event-driven engine is tested against.

Conventions shared with the rest of the package:

* sums over the history of a spike at time ``t`` run over the *strict past*
  ``s < t`` (a simultaneous pre/post pair contributes nothing to itself);
  spikes at time ``0`` are included;
* the delay to the most recent spike is ``+inf`` when there is none, and
  every decay curve maps ``+inf`` to exactly ``0``;
* calcium threshold comparisons are closed, ``{c >= theta}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence, Union

import numpy as np

from stdpsim.spike_core import (
    FLOAT_FMT,
    SpikeTrain,
    last_spike_delay,
    merge_events,
)

__all__ = [
    "PositivityError",
    "ExponentialCurve",
    "TabulatedCurve",
    "Curve",
    "zero_curve",
    "PairBasedSpec",
    "CalciumSpec",
    "SuppressionSpec",
    "TripletSpec",
    "VoltageSpec",
    "KernelAtom",
    "DensitySegment",
    "kernel_atoms",
    "kernel_density",
    "density_segments",
    "calcium_trace",
    "suppression_atoms",
    "triplet_atoms",
    "voltage_atoms",
    "filter_kernel_measure",
    "write_atoms",
    "read_atoms",
]


class PositivityError(ValueError):
    """A parameter choice lets a channel or trace leave the non-negative orthant."""


# ---------------------------------------------------------------------------
# Decay curves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExponentialCurve:
    """``phi(s) = amplitude * exp(-rate * s)``; non-increasing, vanishes at +inf."""

    amplitude: float
    rate: float

    def __post_init__(self) -> None:
        if self.amplitude < 0.0:
            raise PositivityError("curve amplitude must be non-negative")
        if not self.rate > 0.0:
            raise ValueError("curve decay rate must be positive")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = self.amplitude * np.exp(-self.rate * s)
        out = np.where(np.isinf(s), 0.0, out)
        return float(out) if out.ndim == 0 else out

    @property
    def max_value(self) -> float:
        return self.amplitude


@dataclass(frozen=True)
class TabulatedCurve:
    """Piecewise-linear decay curve given by breakpoints and values.

    Linear interpolation between breakpoints, exactly ``0`` beyond the last
    one.  Values must be non-negative and non-increasing so the curve is a
    valid decay profile; ``phi(+inf) = 0`` by construction.
    """

    breaks: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        breaks = np.asarray(self.breaks, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if breaks.ndim != 1 or breaks.shape != values.shape or breaks.size < 1:
            raise ValueError("breaks and values must be equal-length 1-d arrays")
        if breaks[0] < 0.0 or np.any(np.diff(breaks) <= 0.0):
            raise ValueError("breakpoints must be non-negative and increasing")
        if np.any(values < 0.0):
            raise PositivityError("curve values must be non-negative")
        if np.any(np.diff(values) > 0.0):
            raise ValueError("curve values must be non-increasing")
        breaks = breaks.copy()
        values = values.copy()
        breaks.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "breaks", breaks)
        object.__setattr__(self, "values", values)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.interp(
            np.where(np.isinf(s), self.breaks[-1] + 1.0, s),
            self.breaks,
            self.values,
            left=self.values[0],
            right=0.0,
        )
        return float(out) if out.ndim == 0 else out

    @property
    def max_value(self) -> float:
        return float(self.values[0])


Curve = Union[ExponentialCurve, TabulatedCurve]


def zero_curve() -> ExponentialCurve:
    return ExponentialCurve(0.0, 1.0)


def _require_curve(curve, name: str) -> None:
    if not isinstance(curve, (ExponentialCurve, TabulatedCurve)):
        raise TypeError(f"{name} must be an ExponentialCurve or TabulatedCurve")


# ---------------------------------------------------------------------------
# Rule parameter sets
# ---------------------------------------------------------------------------

PAIR_SCHEMES = ("all_to_all", "nearest_symmetric", "nearest_reduced")


@dataclass(frozen=True)
class PairBasedSpec:
    """Pair-interaction rule: each spike pairs with past spikes of the other train.

    Four decay curves control the four channel/train combinations.  Naming
    follows (channel, train whose history is summed): at a pre spike ``t``
    the potentiation atom is ``drive_p1 + sum over posts s < t of
    phi_p2(t - s)`` (all-to-all case) and at a post spike ``t`` it is
    ``drive_p2 + sum over pres s < t of phi_p1(t - s)``; depression mirrors
    this with the ``d`` curves and drives.

    ``scheme`` selects which past spikes count: every one (``all_to_all``),
    only the most recent partner spike (``nearest_symmetric``), or the most
    recent partner spike provided it is more recent than the last spike of
    the train itself (``nearest_reduced``).
    """

    phi_p1: Curve
    phi_p2: Curve
    phi_d1: Curve
    phi_d2: Curve
    scheme: str = "all_to_all"
    drive_p1: float = 0.0
    drive_p2: float = 0.0
    drive_d1: float = 0.0
    drive_d2: float = 0.0

    def __post_init__(self) -> None:
        if self.scheme not in PAIR_SCHEMES:
            raise ValueError(f"scheme must be one of {PAIR_SCHEMES}")
        for name in ("phi_p1", "phi_p2", "phi_d1", "phi_d2"):
            _require_curve(getattr(self, name), name)
        for name in ("drive_p1", "drive_p2", "drive_d1", "drive_d2"):
            if getattr(self, name) < 0.0:
                raise PositivityError("direct-drive constants must be non-negative")

    @classmethod
    def hebbian(
        cls, phi_pot: Curve, phi_dep: Curve, scheme: str = "all_to_all"
    ) -> "PairBasedSpec":
        """Hebbian wiring: pre-before-post potentiates, post-before-pre depresses.

        Potentiation mass appears only at post spikes (curve over pre
        history) and depression only at pre spikes (curve over post history).
        """
        return cls(
            phi_p1=phi_pot,
            phi_p2=zero_curve(),
            phi_d1=zero_curve(),
            phi_d2=phi_dep,
            scheme=scheme,
        )

    @property
    def is_hebbian(self) -> bool:
        return self.phi_p2.max_value == 0.0 and self.phi_d1.max_value == 0.0


@dataclass(frozen=True)
class CalciumSpec:
    """Threshold rule on a jump-and-decay calcium trace.

    The trace gains ``c1`` at each pre spike and ``c2`` at each post spike
    and decays at rate ``decay``.  Potentiation accrues as a density
    ``rate_p`` while the trace sits at or above ``theta_p``; depression
    likewise with ``rate_d`` and ``theta_d``.  Both channels are pure
    densities; this rule has no atomic part.
    """

    c1: float
    c2: float
    decay: float
    theta_p: float
    theta_d: float
    rate_p: float
    rate_d: float
    c_init: float = 0.0

    def __post_init__(self) -> None:
        if self.c1 < 0.0 or self.c2 < 0.0:
            raise PositivityError("calcium jump sizes must be non-negative")
        if not self.decay > 0.0:
            raise ValueError("calcium decay rate must be positive")
        if self.theta_p < 0.0 or self.theta_d < 0.0:
            raise ValueError("thresholds must be non-negative")
        if self.rate_p < 0.0 or self.rate_d < 0.0:
            raise PositivityError("channel rates must be non-negative")
        if self.c_init < 0.0:
            raise ValueError("initial calcium must be non-negative")


@dataclass(frozen=True)
class SuppressionSpec:
    """Nearest-spike suppression on top of all-to-all pair interactions.

    The atom a spike would produce is scaled down by how recently the same
    train spiked: the whole atom carries a factor ``1 - supp_1(delay since
    previous pre)`` when the spiking train is the pre train (``supp_2`` for
    post), and every summand is scaled by the partner history's own
    suppression at the time it fired.  Suppression curves take values in
    ``[0, 1]``: 0 = no suppression, 1 = fully suppressed.
    """

    phi_p1: Curve
    phi_p2: Curve
    phi_d1: Curve
    phi_d2: Curve
    supp_1: Curve
    supp_2: Curve

    def __post_init__(self) -> None:
        for name in ("phi_p1", "phi_p2", "phi_d1", "phi_d2", "supp_1", "supp_2"):
            _require_curve(getattr(self, name), name)
        for name in ("supp_1", "supp_2"):
            if getattr(self, name).max_value > 1.0:
                raise PositivityError("suppression curves must take values in [0, 1]")


@dataclass(frozen=True)
class TripletSpec:
    """Pair rule modulated by a second, slower trace of the spiking train.

    At a pre spike the pair sum over post history is multiplied by
    ``1 + sum over earlier pres of trip_a1(t - s)``; post spikes mirror
    this with ``trip_a2``.  With all triplet curves zero this reduces to
    the all-to-all pair rule.
    """

    phi_p1: Curve
    phi_p2: Curve
    phi_d1: Curve
    phi_d2: Curve
    trip_p1: Curve
    trip_p2: Curve
    trip_d1: Curve
    trip_d2: Curve

    def __post_init__(self) -> None:
        for name in (
            "phi_p1", "phi_p2", "phi_d1", "phi_d2",
            "trip_p1", "trip_p2", "trip_d1", "trip_d2",
        ):
            _require_curve(getattr(self, name), name)


@dataclass(frozen=True)
class VoltageSpec:
    """Voltage-style rule driven by filtered versions of the trains.

    Depression: each pre spike carries mass ``b_d * (post trace - theta)^+``
    where the post trace is the post train filtered at rate ``decay_post_dep``.
    Potentiation: each post spike carries mass ``b_p * (post trace - theta)^+
    * pre trace`` with the post train filtered at ``decay_post_pot`` and the
    pre train at ``decay_pre``.  All filters have unit jump amplitude.
    """

    b_p: float
    b_d: float
    decay_pre: float
    decay_post_pot: float
    decay_post_dep: float
    theta: float

    def __post_init__(self) -> None:
        if self.b_p < 0.0 or self.b_d < 0.0:
            raise PositivityError("amplitudes must be non-negative")
        for name in ("decay_pre", "decay_post_pot", "decay_post_dep"):
            if not getattr(self, name) > 0.0:
                raise ValueError("decay rates must be positive")
        if self.theta < 0.0:
            raise ValueError("theta must be non-negative")


KernelSpec = Union[PairBasedSpec, CalciumSpec, SuppressionSpec, TripletSpec, VoltageSpec]


# ---------------------------------------------------------------------------
# Atoms and densities
# ---------------------------------------------------------------------------


class KernelAtom(NamedTuple):
    """Point mass contributed by the spike at ``time``."""

    time: float
    pot: float
    dep: float


class DensitySegment(NamedTuple):
    """Constant channel rates on the half-open interval ``[start, stop)``."""

    start: float
    stop: float
    pot_rate: float
    dep_rate: float


def _filtered_sum(curve: Curve, history: np.ndarray, t: float) -> float:
    """``sum over s in history of curve(t - s)`` (history must lie before t)."""
    if history.size == 0:
        return 0.0
    return float(np.sum(curve(t - history)))


def _pair_masses(
    spec: PairBasedSpec, m1: SpikeTrain, m2: SpikeTrain, t: float, kind: str
) -> tuple[float, float]:
    if kind == "pre":
        partner, own = m2, m1
        curves = (spec.phi_p2, spec.phi_d2)
        drives = (spec.drive_p1, spec.drive_d1)
    else:
        partner, own = m1, m2
        curves = (spec.phi_p1, spec.phi_d1)
        drives = (spec.drive_p2, spec.drive_d2)
    if spec.scheme == "all_to_all":
        hist = partner.before(t)
        sums = tuple(_filtered_sum(c, hist, t) for c in curves)
    else:
        partner_delay = last_spike_delay(partner, t)
        if spec.scheme == "nearest_reduced":
            own_delay = last_spike_delay(own, t)
            if not partner_delay <= own_delay:
                partner_delay = math.inf
        sums = tuple(float(c(partner_delay)) for c in curves)
    return sums[0] + drives[0], sums[1] + drives[1]


def _pair_atoms(
    spec: PairBasedSpec, m1: SpikeTrain, m2: SpikeTrain, horizon: float
) -> list[KernelAtom]:
    atoms = []
    for t, kind in merge_events(m1.clipped(horizon), m2.clipped(horizon)):
        pot, dep = _pair_masses(spec, m1, m2, t, kind)
        atoms.append(KernelAtom(t, pot, dep))
    return atoms


def suppression_atoms(
    spec: SuppressionSpec, m1: SpikeTrain, m2: SpikeTrain, horizon: float
) -> list[KernelAtom]:
    """Atoms of the suppression rule, straight from the definition."""
    atoms = []
    for t, kind in merge_events(m1.clipped(horizon), m2.clipped(horizon)):
        if kind == "pre":
            own, partner = m1, m2
            own_supp, partner_supp = spec.supp_1, spec.supp_2
            curves = (spec.phi_p2, spec.phi_d2)
        else:
            own, partner = m2, m1
            own_supp, partner_supp = spec.supp_2, spec.supp_1
            curves = (spec.phi_p1, spec.phi_d1)
        outer = 1.0 - float(own_supp(last_spike_delay(own, t)))
        hist = partner.before(t)
        inner = np.array(
            [1.0 - float(partner_supp(last_spike_delay(partner, s))) for s in hist]
        )
        masses = []
        for curve in curves:
            if hist.size:
                masses.append(outer * float(np.sum(inner * curve(t - hist))))
            else:
                masses.append(0.0)
        atoms.append(KernelAtom(t, masses[0], masses[1]))
    return atoms


def triplet_atoms(
    spec: TripletSpec, m1: SpikeTrain, m2: SpikeTrain, horizon: float
) -> list[KernelAtom]:
    """Atoms of the triplet rule, straight from the definition."""
    atoms = []
    for t, kind in merge_events(m1.clipped(horizon), m2.clipped(horizon)):
        if kind == "pre":
            own, partner = m1, m2
            pair = (spec.phi_p2, spec.phi_d2)
            trip = (spec.trip_p1, spec.trip_d1)
        else:
            own, partner = m2, m1
            pair = (spec.phi_p1, spec.phi_d1)
            trip = (spec.trip_p2, spec.trip_d2)
        own_hist = own.before(t)
        partner_hist = partner.before(t)
        pot = (1.0 + _filtered_sum(trip[0], own_hist, t)) * _filtered_sum(
            pair[0], partner_hist, t
        )
        dep = (1.0 + _filtered_sum(trip[1], own_hist, t)) * _filtered_sum(
            pair[1], partner_hist, t
        )
        atoms.append(KernelAtom(t, pot, dep))
    return atoms


def voltage_atoms(
    spec: VoltageSpec, m1: SpikeTrain, m2: SpikeTrain, horizon: float
) -> list[KernelAtom]:
    """Atoms of the voltage-style rule, straight from the definition."""
    atoms = []
    for t, kind in merge_events(m1.clipped(horizon), m2.clipped(horizon)):
        post_hist = m2.before(t)
        if kind == "pre":
            trace = float(np.sum(np.exp(-spec.decay_post_dep * (t - post_hist))))
            atoms.append(KernelAtom(t, 0.0, spec.b_d * max(trace - spec.theta, 0.0)))
        else:
            pot_trace = float(np.sum(np.exp(-spec.decay_post_pot * (t - post_hist))))
            pre_hist = m1.before(t)
            pre_trace = float(np.sum(np.exp(-spec.decay_pre * (t - pre_hist))))
            mass = spec.b_p * max(pot_trace - spec.theta, 0.0) * pre_trace
            atoms.append(KernelAtom(t, mass, 0.0))
    return atoms


def kernel_atoms(
    spec: KernelSpec, m1: SpikeTrain, m2: SpikeTrain, horizon: float
) -> list[KernelAtom]:
    """All atoms on ``(0, horizon]``, one per spike, in event order.

    Atoms of zero mass are kept so the output aligns with the merged event
    sequence.  Raises for the calcium rule, whose channels are pure
    densities; use :func:`density_segments` for those.
    """
    if horizon < 0.0:
        raise ValueError("horizon must be non-negative")
    if isinstance(spec, PairBasedSpec):
        return _pair_atoms(spec, m1, m2, horizon)
    if isinstance(spec, SuppressionSpec):
        return suppression_atoms(spec, m1, m2, horizon)
    if isinstance(spec, TripletSpec):
        return triplet_atoms(spec, m1, m2, horizon)
    if isinstance(spec, VoltageSpec):
        return voltage_atoms(spec, m1, m2, horizon)
    if isinstance(spec, CalciumSpec):
        raise ValueError(
            "the calcium rule has no atomic part; use density_segments instead"
        )
    raise TypeError(f"unknown kernel spec type: {type(spec).__name__}")


def calcium_trace(
    spec: CalciumSpec, m1: SpikeTrain, m2: SpikeTrain, t: float
) -> float:
    """Exact calcium trace at ``t``: decayed initial value plus decayed jumps.

    Spikes exactly at ``t`` are included (the trace is right-continuous).
    """
    c = spec.c_init * math.exp(-spec.decay * t)
    pre = m1.times[m1.times <= t]
    post = m2.times[m2.times <= t]
    if pre.size:
        c += spec.c1 * float(np.sum(np.exp(-spec.decay * (t - pre))))
    if post.size:
        c += spec.c2 * float(np.sum(np.exp(-spec.decay * (t - post))))
    return c


def kernel_density(
    spec: KernelSpec, m1: SpikeTrain, m2: SpikeTrain, t: float
) -> tuple[float, float]:
    """Channel densities at time ``t`` (zero for purely atomic rules)."""
    if isinstance(spec, CalciumSpec):
        c = calcium_trace(spec, m1, m2, t)
        pot = spec.rate_p if c >= spec.theta_p else 0.0
        dep = spec.rate_d if c >= spec.theta_d else 0.0
        return pot, dep
    if isinstance(
        spec, (PairBasedSpec, SuppressionSpec, TripletSpec, VoltageSpec)
    ):
        return 0.0, 0.0
    raise TypeError(f"unknown kernel spec type: {type(spec).__name__}")


def _downward_crossing(c0: float, decay: float, theta: float) -> float:
    """Time for ``c0 e^{-decay u}`` to reach ``theta`` (inf if never)."""
    if theta <= 0.0 or c0 <= theta:
        return math.inf
    return math.log(c0 / theta) / decay


def density_segments(
    spec: CalciumSpec, m1: SpikeTrain, m2: SpikeTrain, horizon: float
) -> list[DensitySegment]:
    """Exact piecewise-constant channel densities of the calcium rule.

    Breakpoints are the spikes plus the exact downward threshold crossings
    of the decaying trace between spikes; within each segment both channel
    indicators are constant.  Zero-rate segments are included so the
    segments tile ``[0, horizon)``.
    """
    if horizon < 0.0:
        raise ValueError("horizon must be non-negative")
    events = merge_events(m1.clipped(horizon), m2.clipped(horizon))
    breaks = [0.0]
    c = spec.c_init
    # Walk spike to spike, inserting exact crossing times of both thresholds.
    cursor = 0.0
    idx = 0
    while True:
        seg_end = events[idx][0] if idx < len(events) else horizon
        if seg_end > cursor:
            for theta in sorted({spec.theta_p, spec.theta_d}):
                u = _downward_crossing(c, spec.decay, theta)
                if cursor + u < seg_end:
                    breaks.append(cursor + u)
            c *= math.exp(-spec.decay * (seg_end - cursor))
            if seg_end < horizon or idx < len(events):
                breaks.append(seg_end)
            cursor = seg_end
        if idx >= len(events):
            break
        c += spec.c1 if events[idx][1] == "pre" else spec.c2
        idx += 1
    breaks.append(horizon)
    breaks = sorted(set(b for b in breaks if 0.0 <= b <= horizon))
    segments = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b <= a:
            continue
        mid = 0.5 * (a + b)
        c_mid = calcium_trace(spec, m1, m2, mid)
        pot = spec.rate_p if c_mid >= spec.theta_p else 0.0
        dep = spec.rate_d if c_mid >= spec.theta_d else 0.0
        segments.append(DensitySegment(a, b, pot, dep))
    return segments


def filter_kernel_measure(
    atoms: Sequence[KernelAtom],
    segments: Sequence[DensitySegment],
    alpha: float,
    t: float,
    initial: tuple[float, float] = (0.0, 0.0),
) -> tuple[float, float]:
    """Exponentially filter the kernel measure up to time ``t``.

    Returns the pair of channel values ``(pot, dep)`` of
    ``H_a(t) = H_a(0) e^{-alpha t} + int_(0, t] e^{-alpha (t - s)} Gamma_a(ds)``
    where the measure is the given atoms plus piecewise-constant densities.
    Atoms exactly at ``t`` contribute their full mass.
    """
    if not alpha > 0.0:
        raise ValueError("alpha must be positive")
    pot = initial[0] * math.exp(-alpha * t)
    dep = initial[1] * math.exp(-alpha * t)
    for atom in atoms:
        if atom.time <= t:
            decay = math.exp(-alpha * (t - atom.time))
            pot += atom.pot * decay
            dep += atom.dep * decay
    for seg in segments:
        a, b = seg.start, min(seg.stop, t)
        if b <= a:
            continue
        mass = (math.exp(-alpha * (t - b)) - math.exp(-alpha * (t - a))) / alpha
        pot += seg.pot_rate * mass
        dep += seg.dep_rate * mass
    return pot, dep


def write_atoms(path, atoms: Sequence[KernelAtom]) -> None:
    """Write atoms as three columns: time, potentiation mass, depression mass."""
    with open(path, "w") as fh:
        for atom in atoms:
            fh.write(
                "\t".join(FLOAT_FMT % v for v in (atom.time, atom.pot, atom.dep))
                + "\n"
            )


def read_atoms(path) -> list[KernelAtom]:
    """Read an atom list written by :func:`write_atoms`."""
    atoms = []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            t, pot, dep = (float(x) for x in line.split())
            atoms.append(KernelAtom(t, pot, dep))
    return atoms
