"""Spike trains, seeded random streams, and exact exponential filtering.

These are the three primitives everything else builds on:

* :class:`SpikeTrain` -- a finite simple point measure on ``[0, inf)``,
  stored as a strictly increasing array of event times.
* :class:`RngStream` -- a seeded random source (NumPy PCG64).  One stream
  belongs to exactly one run; re-creating a stream from the same seed
  reproduces the same draws.
* :class:`FilterState` / :func:`exp_filter_advance` -- the closed-form
  solution of ``dH = -rate * H dt + mu(dt)`` for a measure ``mu`` made of
  point masses plus a constant density.  No numerical integration is ever
  needed between events.

Delays to the most recent spike use the convention that a train with no
spike strictly before ``t`` has delay ``+inf``; downstream code maps
``+inf`` through decay curves to exactly ``0.0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "SpikeTrain",
    "RngStream",
    "FilterState",
    "last_spike_delay",
    "exp_filter_advance",
    "exp_filter_integral",
    "sample_homogeneous_arrivals",
    "merge_events",
    "write_train",
    "read_train",
]

# Significant digits used by every text serializer in the package.  17 is
# enough to round-trip any float64 exactly.
FLOAT_DIGITS = 17
FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class SpikeTrain:
    """Strictly increasing, non-negative spike times.

    Parameters
    ----------
    times:
        One-dimensional float array.  Must be finite, non-negative and
        strictly increasing; an empty array is a valid (empty) train.
    """

    times: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.times, dtype=float)
        if arr.ndim != 1:
            raise ValueError("spike times must be a one-dimensional array")
        if arr.size:
            if not np.all(np.isfinite(arr)):
                raise ValueError("spike times must be finite")
            if arr[0] < 0.0:
                raise ValueError("spike times must be non-negative")
            if np.any(np.diff(arr) <= 0.0):
                raise ValueError("spike times must be strictly increasing")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "times", arr)

    @classmethod
    def from_times(cls, times: Iterable[float]) -> "SpikeTrain":
        """Build a train from any iterable of times (sorted first)."""
        arr = np.sort(np.asarray(list(times), dtype=float))
        return cls(arr)

    @classmethod
    def empty(cls) -> "SpikeTrain":
        return cls(np.empty(0))

    def __len__(self) -> int:
        return int(self.times.size)

    def __iter__(self) -> Iterator[float]:
        return iter(self.times.tolist())

    def clipped(self, horizon: float) -> "SpikeTrain":
        """Restriction to ``[0, horizon]`` (spikes at the horizon kept)."""
        return SpikeTrain(self.times[self.times <= horizon])

    def before(self, t: float) -> np.ndarray:
        """Times strictly earlier than ``t`` (the strict past)."""
        return self.times[self.times < t]


def last_spike_delay(train: SpikeTrain, t: float) -> float:
    """Delay from ``t`` back to the most recent spike strictly before ``t``.

    Returns ``math.inf`` when no spike precedes ``t``.  A spike exactly at
    ``t`` does not count as its own predecessor.
    """
    idx = int(np.searchsorted(train.times, t, side="left"))
    if idx == 0:
        return math.inf
    return t - float(train.times[idx - 1])


def merge_events(
    pre: SpikeTrain, post: SpikeTrain
) -> list[tuple[float, str]]:
    """Time-ordered ``(time, kind)`` pairs with kind ``"pre"`` or ``"post"``.

    Ties are impossible for the continuous-time model but the order is made
    total anyway: a pre-synaptic event sorts before a post-synaptic event at
    an equal timestamp, so seeded edge cases stay deterministic.
    """
    events = [(float(t), "pre") for t in pre.times]
    events += [(float(t), "post") for t in post.times]
    events.sort(key=lambda e: (e[0], 0 if e[1] == "pre" else 1))
    return events


class RngStream:
    """Seeded random source; all randomness in a run flows through one stream.

    Wraps ``numpy.random.Generator`` over the PCG64 bit generator.  Two
    streams built from the same 64-bit seed yield identical draw sequences
    (for a fixed NumPy version), which is what makes whole runs replayable.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def exponential(self, scale: float = 1.0, size=None):
        return self._gen.exponential(scale, size=size)

    def random(self, size=None):
        return self._gen.random(size=size)

    def integers(self, low: int, high: int | None = None, size=None):
        return self._gen.integers(low, high, size=size)

    def __repr__(self) -> str:  # pragma: no cover
        return f"RngStream(seed={self.seed})"


def sample_homogeneous_arrivals(
    rng: RngStream, rate: float, horizon: float
) -> SpikeTrain:
    """Sample a homogeneous Poisson train of the given rate on ``(0, horizon]``.

    Gaps are drawn as independent exponentials and accumulated until the
    horizon is passed.  ``rate = 0`` or ``horizon = 0`` gives an empty train.
    """
    if rate < 0.0:
        raise ValueError("rate must be non-negative")
    if horizon < 0.0:
        raise ValueError("horizon must be non-negative")
    if rate == 0.0 or horizon == 0.0:
        return SpikeTrain.empty()
    times: list[np.ndarray] = []
    t = 0.0
    # Draw in blocks; the expected total count is rate * horizon.
    block = max(16, int(rate * horizon * 1.25) + 16)
    while t <= horizon:
        gaps = rng.exponential(1.0 / rate, size=block)
        arrivals = t + np.cumsum(gaps)
        times.append(arrivals)
        t = float(arrivals[-1])
    all_times = np.concatenate(times)
    return SpikeTrain(all_times[all_times <= horizon])


@dataclass(frozen=True)
class FilterState:
    """State of a first-order exponential filter: current value and decay rate."""

    value: float
    rate: float

    def __post_init__(self) -> None:
        if not self.rate > 0.0:
            raise ValueError("filter decay rate must be positive")


def exp_filter_advance(
    state: FilterState,
    dt: float,
    jumps: Sequence[tuple[float, float]] = (),
    drift: float = 0.0,
) -> FilterState:
    """Advance ``dH = -rate * H dt + mu(dt)`` exactly over a window of length ``dt``.

    ``mu`` consists of point masses ``jumps = [(offset, weight), ...]`` with
    offsets in ``[0, dt]`` (in increasing order) plus a constant density
    ``drift`` over the whole window.  The result is the closed form

    ``H(dt) = H(0) e^{-rate dt} + sum_i w_i e^{-rate (dt - u_i)}
              + drift (1 - e^{-rate dt}) / rate``.

    Composing two advances over adjacent windows equals a single advance
    over the union; jumps at the window boundary belong to the window whose
    interior ends there (offset ``dt`` contributes with weight factor 1).
    """
    if dt < 0.0:
        raise ValueError("dt must be non-negative")
    a = state.rate
    value = state.value * math.exp(-a * dt)
    prev = -math.inf
    for offset, weight in jumps:
        if offset < 0.0 or offset > dt:
            raise ValueError("jump offsets must lie within [0, dt]")
        if offset < prev:
            raise ValueError("jump offsets must be non-decreasing")
        prev = offset
        value += weight * math.exp(-a * (dt - offset))
    if drift != 0.0:
        value += drift * (1.0 - math.exp(-a * dt)) / a
    return FilterState(value=value, rate=a)


def exp_filter_integral(
    state: FilterState, dt: float, drift: float = 0.0
) -> float:
    """Integral of the filter value over a jump-free window of length ``dt``.

    With ``H(u) = H(0) e^{-rate u} + drift (1 - e^{-rate u}) / rate`` this is

    ``int_0^dt H = H(0) (1 - e^{-rate dt}) / rate
                   + drift (dt - (1 - e^{-rate dt}) / rate) / rate``.

    ``dt = inf`` is allowed when ``drift = 0`` (the tail integral converges).
    """
    if dt < 0.0:
        raise ValueError("dt must be non-negative")
    a = state.rate
    if math.isinf(dt):
        if drift != 0.0:
            raise ValueError("infinite window requires zero drift")
        return state.value / a
    decay_mass = (1.0 - math.exp(-a * dt)) / a
    total = state.value * decay_mass
    if drift != 0.0:
        total += drift * (dt - decay_mass) / a
    return total


def write_train(path, train: SpikeTrain) -> None:
    """Write one spike time per line with 17 significant digits."""
    with open(path, "w") as fh:
        for t in train.times:
            fh.write(FLOAT_FMT % t + "\n")


def read_train(path) -> SpikeTrain:
    """Read a train written by :func:`write_train`."""
    with open(path) as fh:
        times = [float(line) for line in fh if line.strip()]
    return SpikeTrain(np.asarray(times, dtype=float))
