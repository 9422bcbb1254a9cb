"""Self-contained validation checks comparing engines against oracles.

Each check runs a Monte Carlo or replay experiment and measures its
deviation from an independent analytic or brute-force reference.  The
checks are deterministic (fixed seeds) and return structured results so
callers can render a pass/fail table; the command-line ``validate`` verb
and the test suite both use them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from stdpsim.discrete import (
    DiscreteParams,
    analytic_pgf,
    batch_averages,
    occupation_pgf,
    simulate_fast_calcium,
    stationary_means,
    time_average,
)
from stdpsim.markov import as_trace_kernel, replay_filtered
from stdpsim.simulator import toy_closed_form, toy_trajectories
from stdpsim.spike_core import RngStream
from stdpsim.testing import RULE_FAMILIES, oracle_filtered, random_spec, random_train

__all__ = [
    "CheckResult",
    "check_oracle_equivalence",
    "check_pgf_agreement",
    "check_mean_identities",
    "check_toy_closed_form",
    "run_all_checks",
]


@dataclass(frozen=True)
class CheckResult:
    """One validation outcome: what was measured against which bound."""

    name: str
    passed: bool
    measured: float
    bound: float
    detail: str

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"{verdict} {self.name}: measured {self.measured:.3g} "
            f"(bound {self.bound:.3g}) - {self.detail}"
        )


def check_oracle_equivalence(quick: bool = False) -> CheckResult:
    """Filtered channels: trace-system replay vs brute-force kernel measure.

    Random rule specs and spike trains per family; the two independently
    computed channel pairs must agree to 1e-9 absolutely.
    """
    per_family = 5 if quick else 15
    rng = np.random.default_rng(20_240_817)
    worst = 0.0
    cases = 0
    for family in RULE_FAMILIES:
        for _ in range(per_family):
            spec = random_spec(rng, family)
            m1 = random_train(rng, 15.0)
            m2 = random_train(rng, 15.0)
            alpha = rng.uniform(0.3, 2.0)
            kernel = as_trace_kernel(spec)
            got = replay_filtered(kernel, m1, m2, alpha, 15.0)
            want = oracle_filtered(spec, m1, m2, alpha, 15.0)
            worst = max(worst, abs(got[0] - want[0]), abs(got[1] - want[1]))
            cases += 1
    return CheckResult(
        name="oracle-equivalence",
        passed=worst <= 1e-9,
        measured=worst,
        bound=1e-9,
        detail=f"{cases} random spec/train pairs across {len(RULE_FAMILIES)} families",
    )


_PGF_SETS = (
    DiscreteParams(lam=1.0, beta=1.0, gamma=1.0, c1=1, c2=1, w=2),
    DiscreteParams(lam=1.0, beta=1.0, gamma=2.0, c1=1, c2=2, w=1),
)


def check_pgf_agreement(quick: bool = False) -> CheckResult:
    """Occupation-measure pgf vs analytic generating function, 3 SE bound."""
    horizon = 6e3 if quick else 4e4
    worst = 0.0
    for i, params in enumerate(_PGF_SETS):
        trace = simulate_fast_calcium(params, horizon, RngStream(42 + i))
        for u in (0.0, 0.25, 0.5, 0.75):
            emp = occupation_pgf(trace, u)
            ana = analytic_pgf(params, u)
            batches = batch_averages(trace, np.power(u, trace.c.astype(float)), 40)
            se = float(np.std(batches, ddof=1)) / math.sqrt(len(batches))
            worst = max(worst, abs(emp - ana) / se)
    return CheckResult(
        name="pgf-agreement",
        passed=worst <= 3.0,
        measured=worst,
        bound=3.0,
        detail=f"deviation in standard errors, T={horizon:g}, "
        "two parameter sets including the removable singularity",
    )


def check_mean_identities(quick: bool = False) -> CheckResult:
    """Time-averaged x and c vs closed-form stationary means."""
    horizon = 2e4 if quick else 1e5
    bound = 0.05 if quick else 0.02
    params = DiscreteParams(lam=1.0, beta=1.0, gamma=1.0, c1=1, c2=1, w=2)
    trace = simulate_fast_calcium(params, horizon, RngStream(7))
    mean_x, mean_c = stationary_means(params)
    dev_x = abs(time_average(trace, trace.x) - mean_x) / mean_x
    dev_c = abs(time_average(trace, trace.c) - mean_c) / mean_c
    worst = max(dev_x, dev_c)
    return CheckResult(
        name="mean-identities",
        passed=worst <= bound,
        measured=worst,
        bound=bound,
        detail=f"relative deviation of occupation averages at T={horizon:g}",
    )


def check_toy_closed_form() -> CheckResult:
    """Two-timescale toy model: closed forms vs RK4 integration."""
    times = np.linspace(0.0, 10.0, 100)
    ref_f, ref_u = toy_closed_form(1.0, 0.0, 0.5, times)
    num_f, num_u = toy_trajectories(1.0, 0.0, 0.5, times, step=1e-3)
    worst = float(max(np.max(np.abs(ref_f - num_f)), np.max(np.abs(ref_u - num_u))))
    return CheckResult(
        name="toy-closed-form",
        passed=worst <= 1e-6,
        measured=worst,
        bound=1e-6,
        detail="filtered and unfiltered weights at 100 grid points",
    )


def run_all_checks(quick: bool = False) -> list[CheckResult]:
    return [
        check_oracle_equivalence(quick),
        check_pgf_agreement(quick),
        check_mean_identities(quick),
        check_toy_closed_form(),
    ]
