"""Event-driven simulation and analysis of stochastic synaptic plasticity.

The package models a single synapse driven by a pre-synaptic Poisson spike
train and a post-synaptic train generated by thinning a membrane-dependent
rate.  Plasticity rules are expressed in two interchangeable ways:

* history-based kernels over the spike trains (module :mod:`stdpsim.kernels`),
  evaluated literally from their definitions and used as oracles, and
* finite-dimensional Markovian trace systems (module :mod:`stdpsim.markov`),
  which the event-driven simulator (:mod:`stdpsim.simulator`) advances in
  closed form between events.

An integer-quanta counterpart of the coupled process lives in
:mod:`stdpsim.discrete`, together with an analytic generating-function
oracle for the stationary calcium law.  :mod:`stdpsim.cli` exposes the
``run`` / ``validate`` / ``scenarios`` command-line verbs.
"""

from stdpsim.checks import CheckResult, run_all_checks
from stdpsim.discrete import (
    DiscreteParams,
    analytic_pgf,
    occupation_pgf,
    pgf_report,
    run_discrete_full,
    simulate_fast_calcium,
    stationary_means,
)
from stdpsim.kernels import (
    CalciumSpec,
    DensitySegment,
    ExponentialCurve,
    KernelAtom,
    PairBasedSpec,
    PositivityError,
    SuppressionSpec,
    TabulatedCurve,
    TripletSpec,
    VoltageSpec,
    density_segments,
    filter_kernel_measure,
    kernel_atoms,
    zero_curve,
)
from stdpsim.markov import (
    KERNEL_RULES,
    TraceKernel,
    build_kernel,
    calcium_kernel,
    pair_kernel,
    replay_filtered,
    suppression_kernel,
    triplet_kernel,
    voltage_kernel,
)
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
    SigmoidActivation,
    SimConfig,
    SimResult,
    SimulationLimitError,
    TableActivation,
    TraceRecord,
    WeightDomainError,
    read_trace,
    run,
    run_unfiltered,
    toy_closed_form,
    write_trace,
)
from stdpsim.spike_core import (
    FilterState,
    RngStream,
    SpikeTrain,
    exp_filter_advance,
    exp_filter_integral,
    last_spike_delay,
    merge_events,
    sample_homogeneous_arrivals,
)

__version__ = "0.1.0"

__all__ = [
    "AdditiveRule",
    "BoundedMultiplicativeRule",
    "CalciumSpec",
    "CheckResult",
    "ConstantDrop",
    "DensitySegment",
    "DiscreteParams",
    "ExcitatoryRule",
    "ExponentialCurve",
    "FilterState",
    "FrozenRule",
    "FullReset",
    "GatedAdditiveRule",
    "KERNEL_RULES",
    "KernelAtom",
    "LinearActivation",
    "NeuronSpec",
    "NoReset",
    "PairBasedSpec",
    "PositivityError",
    "RngStream",
    "SigmoidActivation",
    "SimConfig",
    "SimResult",
    "SimulationLimitError",
    "SpikeTrain",
    "SuppressionSpec",
    "TableActivation",
    "TabulatedCurve",
    "TraceKernel",
    "TraceRecord",
    "TripletSpec",
    "VoltageSpec",
    "WeightDomainError",
    "analytic_pgf",
    "build_kernel",
    "calcium_kernel",
    "density_segments",
    "exp_filter_advance",
    "exp_filter_integral",
    "filter_kernel_measure",
    "kernel_atoms",
    "last_spike_delay",
    "merge_events",
    "occupation_pgf",
    "pair_kernel",
    "pgf_report",
    "read_trace",
    "replay_filtered",
    "run",
    "run_all_checks",
    "run_discrete_full",
    "run_unfiltered",
    "sample_homogeneous_arrivals",
    "simulate_fast_calcium",
    "stationary_means",
    "suppression_kernel",
    "toy_closed_form",
    "triplet_kernel",
    "voltage_kernel",
    "write_trace",
    "zero_curve",
    "__version__",
]
