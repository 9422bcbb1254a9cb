"""A fully solvable special case: constant drive against linear relaxation.

Freezing the stochastic inputs to a constant potentiation drive turns
the weight dynamics into a pair of linear equations, one for the
unfiltered weight and one driven through the exponential channel.
Both have closed forms, so the RK4 integrator used inside the event
engine can be checked against them directly, including its
convergence order as the step size shrinks.
"""

import numpy as np

from stdpsim import toy_closed_form
from stdpsim.simulator import toy_trajectories

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

from pathlib import Path

OUT = Path(__file__).resolve().parent / "out"

DRIVE, W0, EPS = 1.0, 0.0, 0.5


def main() -> None:
    times = np.linspace(0.0, 10.0, 200)
    ref_f, ref_u = toy_closed_form(DRIVE, W0, EPS, times)
    print("= Closed form =")
    print(f"  drive {DRIVE}, start {W0}, relaxation {EPS}, filter decay {2 * EPS}")
    print(f"  asymptote of both weights: {DRIVE / EPS}")
    print(f"  filtered weight lags the unfiltered one while the channel loads")

    print("\n= RK4 error vs step size =")
    # a coarse grid keeps the requested step, not the grid spacing, in
    # charge of the substep size
    coarse = np.linspace(0.0, 10.0, 11)
    ref_cf, ref_cu = toy_closed_form(DRIVE, W0, EPS, coarse)
    print(f"{'step':>10} {'max error':>12}")
    errors = []
    steps = (0.5, 0.25, 0.125, 0.0625)
    for step in steps:
        num_f, num_u = toy_trajectories(DRIVE, W0, EPS, coarse, step=step)
        err = float(
            max(np.max(np.abs(num_f - ref_cf)), np.max(np.abs(num_u - ref_cu)))
        )
        errors.append(err)
        print(f"{step:>10.4f} {err:>12.3e}")
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    print(f"  observed convergence order per halving: {orders.round(2)}")

    if plt is None:
        print("\nmatplotlib not available, skipping the figure")
        return
    OUT.mkdir(exist_ok=True)
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    axes[0].plot(times, ref_u, lw=1.4, label="unfiltered")
    axes[0].plot(times, ref_f, lw=1.4, label="filtered")
    axes[0].axhline(DRIVE / EPS, ls="--", color="0.6", lw=0.8)
    axes[0].set_xlabel("time")
    axes[0].set_ylabel("weight")
    axes[0].set_title("Closed-form trajectories")
    axes[0].legend()
    axes[1].loglog(steps, errors, "o-")
    ref = errors[-1] * (np.array(steps) / steps[-1]) ** 4
    axes[1].loglog(steps, ref, "--", color="0.6", label="slope 4")
    axes[1].set_xlabel("RK4 step")
    axes[1].set_ylabel("max error")
    axes[1].set_title("Fourth-order convergence")
    axes[1].legend()
    fig.tight_layout()
    target = OUT / "05_toy_relaxation.png"
    fig.savefig(target, dpi=120)
    print(f"\nwrote {target}")


if __name__ == "__main__":
    main()
