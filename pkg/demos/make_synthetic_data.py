"""Regenerate the synthetic measurement files shipped with the bundled configs.

The C/20 discharge is simulated on a coarse mesh at a known set of
stoichiometric windows, chosen so that both electrode windows hold exactly
the nominal 5 Ah. Identification from this file should return those values.
A zero-order-hold dynamic profile is produced the same way for validation.
"""
from pathlib import Path

import numpy as np

from dfnkit import Table, build_mesh, lg_m50, run_profile
from dfnkit.io import ExperimentData, write_experiment_csv

HERE = Path(__file__).resolve().parent
OUT = HERE.parent / "src" / "dfnkit" / "configs"

# windows holding 5 Ah in each electrode of the fixture cell
TRUE_WINDOWS = dict(theta100_p=0.27, theta100_n=0.888, theta0_p=0.8426, theta0_n=0.03)


def c20_discharge(params, mesh, dt=60.0):
    t = np.arange(0.0, 80000.0 + dt, dt)
    return run_profile(params, mesh, Table(t, np.full(t.size, 0.25)), 1.0)


def drive_cycle(params, mesh, seed=7):
    # piecewise-constant pulses between -C/2 and 2C, 10 s holds, 40 minutes
    rng = np.random.default_rng(seed)
    t = np.arange(0.0, 2400.0 + 1.0, 1.0)
    levels = rng.choice([-2.5, -1.0, 0.0, 0.0, 2.5, 5.0, 7.5, 10.0], size=t.size // 10 + 1)
    current = np.repeat(levels, 10)[: t.size]
    return run_profile(params, mesh, Table(t, current), 0.8)


def main():
    params = lg_m50().replace(**TRUE_WINDOWS)
    mesh = build_mesh(5, 5, 5, 5, 5, params)
    sim = c20_discharge(params, mesh)
    write_experiment_csv(ExperimentData(sim.t, sim.I, sim.V), OUT / "synthetic_c20.csv")
    print(f"C/20: {len(sim)} samples, ends at {sim.t[-1]:.1f} s ({sim.termination})")
    sim = drive_cycle(params, mesh)
    write_experiment_csv(ExperimentData(sim.t, sim.I, sim.V), OUT / "synthetic_drive.csv")
    print(f"drive cycle: {len(sim)} samples, V in [{sim.V.min():.3f}, {sim.V.max():.3f}] V")


if __name__ == "__main__":
    main()
