"""Recover the electrode stoichiometric windows from a slow discharge.

A C/20 discharge is close to equilibrium, so its voltage is set almost
entirely by the two open-circuit curves and by where each electrode sits
on them. The four window limits are therefore well determined by this
test while transport and kinetic parameters are not.

The measurement is the synthetic file shipped with the package, produced
by ``make_synthetic_data.py`` at known windows. Pass a smaller iteration
count on the command line for a quick look, e.g. ``python identify_windows.py 5``.
"""
import sys
import time
from importlib import resources

from dfnkit import build_mesh, lg_m50
from dfnkit.io import load_experiment_csv
from dfnkit.ident import IdentificationProblem, ParameterSpace, PSOConfig, pso_optimize

TRUTH = {"theta100_p": 0.27, "theta100_n": 0.888, "theta0_p": 0.8426, "theta0_n": 0.03}
BOUNDS = {"theta100_p": (0.22, 0.34), "theta100_n": (0.7, 1.0), "theta0_p": (0.7, 1.0),
          "theta0_n": (0.015, 0.04)}


def main(max_iters=100):
    params = lg_m50()  # starts from the preset windows, not the truth
    exp = load_experiment_csv(resources.files("dfnkit") / "configs" / "synthetic_c20.csv")
    problem = IdentificationProblem(params, build_mesh(5, 5, 5, 5, 5, params), exp, initial_soc=1.0)
    print(f"preset windows: J_tot = {problem({}).J_tot:.4g}")

    cfg = PSOConfig(swarm_size=20, max_iters=max_iters, seed=42, stall_iters=10, stall_tol=1e-6)
    t0 = time.perf_counter()
    best, obj, hist = pso_optimize(ParameterSpace.from_dict(BOUNDS), problem, cfg)
    print(f"{hist.evaluations} simulations in {time.perf_counter() - t0:.0f} s ({hist.stop_reason})")
    for name, value in best.items():
        print(f"  {name:<11} {value:.4f}   true {TRUTH[name]:.4f}")
    print(f"J_V = {obj.J_V_mV:.3g} mV, J_SOCp = {obj.J_SOCp:.3g} %, J_SOCn = {obj.J_SOCn:.3g} %")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 100)
