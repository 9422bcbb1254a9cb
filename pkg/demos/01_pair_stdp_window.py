"""The pairwise learning window and how pairing schemes reshape it.

A single pre/post spike pair produces the textbook two-branch window:
potentiation decaying with the pre-to-post delay, depression with the
post-to-pre delay.  With bursts the three pairing schemes diverge,
because all-to-all counts every pairing while the nearest-neighbour
schemes keep only adjacent partners.  Both effects are read directly
off the kernel atoms, with no simulation involved.
"""

import numpy as np

from stdpsim import ExponentialCurve, PairBasedSpec, SpikeTrain, kernel_atoms, zero_curve

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

from pathlib import Path

OUT = Path(__file__).resolve().parent / "out"

SCHEMES = ("all_to_all", "nearest_symmetric", "nearest_reduced")


def pair_spec(scheme: str) -> PairBasedSpec:
    """Potentiation at post spikes over pre history, depression mirrored."""
    return PairBasedSpec(
        phi_p1=ExponentialCurve(1.0, 2.0),
        phi_p2=zero_curve(),
        phi_d1=zero_curve(),
        phi_d2=ExponentialCurve(0.5, 1.0),
        scheme=scheme,
    )


def net_change(spec: PairBasedSpec, pre, post, horizon: float) -> float:
    """Unfiltered additive weight change: signed sum of the atom masses."""
    atoms = kernel_atoms(spec, SpikeTrain(np.asarray(pre)), SpikeTrain(np.asarray(post)), horizon)
    return sum(a.pot - a.dep for a in atoms)


def main() -> None:
    print("= Single-pair window =")
    spec = pair_spec("all_to_all")
    lags = np.linspace(-3.0, 3.0, 121)
    window = np.array(
        [net_change(spec, [5.0], [5.0 + lag], 12.0) for lag in lags]
    )
    for lag in (-2.0, -0.5, 0.5, 2.0):
        print(f"  lag {lag:+.1f}: dw = {net_change(spec, [5.0], [5.0 + lag], 12.0):+.4f}")
    print("  positive lag (pre before post) potentiates, negative lag depresses")

    print("\n= Pre doublets against a slower post train =")
    pre = np.array([1.0, 1.2, 1.6, 1.8, 2.2, 2.4])
    post = np.array([1.3, 1.9, 2.5])
    for scheme in SCHEMES:
        dw = net_change(pair_spec(scheme), pre, post, 10.0)
        print(f"  {scheme:>18}: dw = {dw:+.4f}")
    print("  all-to-all counts every pairing, nearest_symmetric only the")
    print("  most recent partner, nearest_reduced also discards partners")
    print("  older than the last spike of the same train")

    if plt is None:
        print("\nmatplotlib not available, skipping the figure")
        return
    OUT.mkdir(exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.axhline(0.0, color="0.7", lw=0.8)
    ax.axvline(0.0, color="0.7", lw=0.8)
    ax.plot(lags, window, lw=1.5)
    ax.set_xlabel("post minus pre spike time")
    ax.set_ylabel("weight change per pair")
    ax.set_title("Pairwise learning window")
    fig.tight_layout()
    target = OUT / "01_pair_stdp_window.png"
    fig.savefig(target, dpi=120)
    print(f"\nwrote {target}")


if __name__ == "__main__":
    main()
