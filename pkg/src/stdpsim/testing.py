"""Utilities for randomized cross-checks: spec generators and oracle filters.

Shared between the test suite and the ``validate`` command so both exercise
the same randomized families of rules and spike trains.
"""

from __future__ import annotations

import numpy as np

from stdpsim.kernels import (
    CalciumSpec,
    ExponentialCurve,
    PairBasedSpec,
    SuppressionSpec,
    TripletSpec,
    VoltageSpec,
    density_segments,
    filter_kernel_measure,
    kernel_atoms,
)
from stdpsim.spike_core import SpikeTrain

__all__ = [
    "random_curve",
    "random_pair_spec",
    "random_suppression_spec",
    "random_triplet_spec",
    "random_calcium_spec",
    "random_voltage_spec",
    "random_spec",
    "random_train",
    "oracle_filtered",
    "RULE_FAMILIES",
]


def random_curve(rng: np.random.Generator, amp=(0.1, 2.0), rate=(0.2, 3.0)) -> ExponentialCurve:
    return ExponentialCurve(rng.uniform(*amp), rng.uniform(*rate))


def random_pair_spec(rng: np.random.Generator, scheme: str) -> PairBasedSpec:
    drives = rng.uniform(0.0, 0.3, size=4) * (rng.random(4) < 0.5)
    return PairBasedSpec(
        phi_p1=random_curve(rng),
        phi_p2=random_curve(rng),
        phi_d1=random_curve(rng),
        phi_d2=random_curve(rng),
        scheme=scheme,
        drive_p1=float(drives[0]),
        drive_p2=float(drives[1]),
        drive_d1=float(drives[2]),
        drive_d2=float(drives[3]),
    )


def random_suppression_spec(rng: np.random.Generator) -> SuppressionSpec:
    return SuppressionSpec(
        phi_p1=random_curve(rng),
        phi_p2=random_curve(rng),
        phi_d1=random_curve(rng),
        phi_d2=random_curve(rng),
        supp_1=random_curve(rng, amp=(0.0, 1.0)),
        supp_2=random_curve(rng, amp=(0.0, 1.0)),
    )


def random_triplet_spec(rng: np.random.Generator) -> TripletSpec:
    return TripletSpec(
        phi_p1=random_curve(rng),
        phi_p2=random_curve(rng),
        phi_d1=random_curve(rng),
        phi_d2=random_curve(rng),
        trip_p1=random_curve(rng, amp=(0.0, 1.0)),
        trip_p2=random_curve(rng, amp=(0.0, 1.0)),
        trip_d1=random_curve(rng, amp=(0.0, 1.0)),
        trip_d2=random_curve(rng, amp=(0.0, 1.0)),
    )


def random_calcium_spec(rng: np.random.Generator) -> CalciumSpec:
    return CalciumSpec(
        c1=rng.uniform(0.2, 1.5),
        c2=rng.uniform(0.2, 1.5),
        decay=rng.uniform(0.3, 2.0),
        theta_p=rng.uniform(0.5, 2.5),
        theta_d=rng.uniform(0.1, 1.0),
        rate_p=rng.uniform(0.2, 1.5),
        rate_d=rng.uniform(0.2, 1.5),
        c_init=rng.uniform(0.0, 1.0),
    )


def random_voltage_spec(rng: np.random.Generator) -> VoltageSpec:
    return VoltageSpec(
        b_p=rng.uniform(0.2, 1.5),
        b_d=rng.uniform(0.2, 1.5),
        decay_pre=rng.uniform(0.3, 2.0),
        decay_post_pot=rng.uniform(0.3, 2.0),
        decay_post_dep=rng.uniform(0.3, 2.0),
        theta=rng.uniform(0.0, 0.8),
    )


def random_train(rng: np.random.Generator, horizon: float, max_count: int = 30) -> SpikeTrain:
    n = int(rng.integers(0, max_count + 1))
    times = np.unique(rng.uniform(0.0, horizon, size=n))
    return SpikeTrain(times)


RULE_FAMILIES = (
    "pair_all_to_all",
    "pair_nearest_symmetric",
    "pair_nearest_reduced",
    "suppression",
    "triplet",
    "calcium",
    "voltage",
)


def random_spec(rng: np.random.Generator, family: str):
    """Random spec from one of the seven rule families."""
    if family.startswith("pair_"):
        return random_pair_spec(rng, family.removeprefix("pair_"))
    if family == "suppression":
        return random_suppression_spec(rng)
    if family == "triplet":
        return random_triplet_spec(rng)
    if family == "calcium":
        return random_calcium_spec(rng)
    if family == "voltage":
        return random_voltage_spec(rng)
    raise ValueError(f"unknown rule family {family!r}")


def oracle_filtered(spec, m1: SpikeTrain, m2: SpikeTrain, alpha: float, horizon: float):
    """Filtered channel values computed purely from the history-based oracle."""
    if isinstance(spec, CalciumSpec):
        segments = density_segments(spec, m1, m2, horizon)
        return filter_kernel_measure([], segments, alpha, horizon)
    atoms = kernel_atoms(spec, m1, m2, horizon)
    return filter_kernel_measure(atoms, [], alpha, horizon)
