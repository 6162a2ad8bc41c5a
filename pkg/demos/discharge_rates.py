"""Constant-current discharges of the fixture cell at several C-rates.

Higher rates end earlier: the terminal voltage drops by the ohmic and
kinetic losses and the surface of the negative particles empties before
the bulk does. The script prints the delivered capacity per rate and saves
a voltage plot next to itself.

Much above 2C the electrolyte in the positive electrode of this cell runs
dry before the voltage cutoff and the simulation stops with an error.
"""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from dfnkit import CC, build_mesh, lg_m50, run_profile

RATES = (0.5, 1.0, 2.0)


def main():
    params = lg_m50()
    mesh = build_mesh(10, 10, 10, 10, 10, params)
    fig, ax = plt.subplots(figsize=(6, 4))
    for rate in RATES:
        res = run_profile(params, mesh, CC(rate), initial_soc=1.0)
        q = res.I * (res.t - res.t[0]) / 3600.0  # constant current: Ah = I*t
        print(f"{rate:>4.1f}C: {q[-1]:.3f} Ah in {res.t[-1] / 60:.1f} min, ends at {res.V[-1]:.3f} V "
              f"({res.termination})")
        ax.plot(q, res.V, label=f"{rate:g}C")
    ax.set_xlabel("discharged capacity [Ah]")
    ax.set_ylabel("terminal voltage [V]")
    ax.legend()
    out = Path(__file__).with_suffix(".png")
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
