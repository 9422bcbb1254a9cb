"""The integer-quanta chain and its analytic stationary oracle.

Membrane and calcium can be counted in whole quanta: pre spikes add w
membrane quanta, post spikes add calcium quanta, and each quantum
decays independently.  The resulting chain has a closed-form
generating function for the stationary calcium law, evaluated here by
quadrature and compared with the occupation measure of a long run.
When the jump sizes are scaled up and the counts are read in units of
that scale, the chain approaches the continuous trace model; the last
section checks the stationary calcium mean against a continuous run.
"""

import numpy as np

from stdpsim import (
    CalciumSpec,
    ConstantDrop,
    DiscreteParams,
    FrozenRule,
    LinearActivation,
    NeuronSpec,
    RngStream,
    SimConfig,
    analytic_pgf,
    occupation_pgf,
    run,
    simulate_fast_calcium,
    stationary_means,
)
from stdpsim.discrete import time_average

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

from pathlib import Path

OUT = Path(__file__).resolve().parent / "out"


def main() -> None:
    params = DiscreteParams(lam=1.0, beta=1.0, gamma=1.0, c1=1, c2=1, w=2)
    mean_x, mean_c = stationary_means(params)
    print("= Fast chain vs analytic generating function =")
    print(f"  params: {params}")
    print(f"  closed-form stationary means: E[x] = {mean_x}, E[c] = {mean_c}")

    trace = simulate_fast_calcium(params, 2e4, RngStream(11))
    print(f"  simulated {len(trace.times)} events over T = {trace.horizon:g}")
    grid = np.linspace(0.0, 0.95, 20)
    emp = np.array([occupation_pgf(trace, float(u)) for u in grid])
    ana = np.array([analytic_pgf(params, float(u)) for u in grid])
    print(f"{'u':>8} {'empirical':>12} {'analytic':>12}")
    for u in (0.0, 0.25, 0.5, 0.75):
        print(
            f"{u:>8.2f} {occupation_pgf(trace, u):>12.6f} "
            f"{analytic_pgf(params, u):>12.6f}"
        )
    print(f"  max |empirical - analytic| on the grid: {np.max(np.abs(emp - ana)):.4f}")

    print("\n= Quanta scaling toward the continuous trace model =")
    # one continuous calcium unit corresponds to `scale` quanta; the
    # membrane jump w is shared by both models unscaled
    scale = 50
    q = DiscreteParams(lam=1.0, beta=1.0, gamma=1.0, c1=scale, c2=scale, w=2 * scale)
    qtrace = simulate_fast_calcium(q, 1000.0, RngStream(12))
    disc_mean = time_average(qtrace, qtrace.c) / scale

    spec = CalciumSpec(
        c1=1.0, c2=1.0, decay=1.0, theta_p=0.0, theta_d=0.0, rate_p=0.0, rate_d=0.0
    )
    res = run(
        SimConfig(
            neuron=NeuronSpec(
                rate=1.0, activation=LinearActivation(1.0), reset=ConstantDrop(1.0)
            ),
            kernel=spec, weight=FrozenRule(), alpha=1.0,
            horizon=500.0, seed=13, w_init=2 * scale,
        )
    )
    t = np.array([r.t for r in res.records])
    c0 = np.array([r.z[0] for r in res.records])[:-1]
    h = np.diff(t)
    cont_mean = float(np.sum(c0 * -np.expm1(-h)) / res.records[-1].t)
    print(f"  discrete mean calcium (units of {scale} quanta): {disc_mean:.3f}")
    print(f"  continuous mean calcium:                         {cont_mean:.3f}")
    print(f"  relative difference: {abs(disc_mean - cont_mean) / cont_mean:.2%}")

    if plt is None:
        print("\nmatplotlib not available, skipping the figure")
        return
    OUT.mkdir(exist_ok=True)
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    axes[0].plot(grid, ana, lw=2.2, color="0.75", label="analytic")
    axes[0].plot(grid, emp, "o", ms=4, color="tab:blue", label="occupation measure")
    axes[0].set_xlabel("u")
    axes[0].set_ylabel("E[u^c]")
    axes[0].set_title("Stationary calcium pgf")
    axes[0].legend()
    step = np.searchsorted(qtrace.times, 100.0)
    axes[1].step(
        qtrace.times[:step], qtrace.c[:step] / scale, where="post", lw=0.7
    )
    axes[1].set_xlabel("time")
    axes[1].set_ylabel(f"calcium / {scale}")
    axes[1].set_title("Scaled-quanta path")
    fig.tight_layout()
    target = OUT / "04_discrete_quanta.png"
    fig.savefig(target, dpi=120)
    print(f"\nwrote {target}")


if __name__ == "__main__":
    main()
