"""Command-line front end: ``dfnkit {simulate,identify,analyze,validate} <config>``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .errors import DFNError

log = logging.getLogger("dfnkit")


def _out_dir(cfg, args) -> Path:
    out = Path(args.out) if args.out else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config_echo(cfg) -> dict:
    return json.loads(json.dumps(cfg.raw, default=str))


def cmd_simulate(cfg, args) -> int:
    from .config import build_profile
    from .io import emit_plots, load_experiment_csv
    from .protocols import run_profile

    out = _out_dir(cfg, args)
    profile = build_profile(cfg.profile)
    t0 = time.perf_counter()
    result = run_profile(cfg.params, cfg.mesh(), profile, cfg.initial_soc, cfg.solver)
    elapsed = time.perf_counter() - t0
    exp = None
    if cfg.profile.get("type") == "table":
        try:
            exp = load_experiment_csv(cfg.profile["data"])
        except DFNError:
            exp = None  # current-only table: nothing to overlay
    files = emit_plots(result, exp, out, stem="simulate")
    print(f"simulated {result.t[-1] - result.t[0]:.6g} s ({result.termination}) in {elapsed:.3g} s; "
          f"final V = {result.V[-1]:.6g} V")
    for f in files:
        print(f"wrote {f}")
    return 0


def cmd_identify(cfg, args) -> int:
    from .ident.pso import pso_optimize
    from .ident.problem import IdentificationProblem
    from .io import emit_plots, load_experiment_csv
    from .report import IdentifiedValue, RunReport

    spec = cfg.identify
    if spec is None:
        raise DFNError("config has no [identify] section")
    exp = load_experiment_csv(spec.data)
    out = _out_dir(cfg, args)
    problem = IdentificationProblem(cfg.params, cfg.mesh(), exp, spec.initial_soc, cfg.solver)
    t0 = time.perf_counter()
    best, best_obj, hist = pso_optimize(spec.space, problem, spec.pso)
    t_pso = time.perf_counter() - t0
    if best_obj is None:
        raise DFNError("identification found no successful evaluation")
    identified = {
        n: IdentifiedValue(value=best[n], lower=lo, upper=hi, initial=float(getattr(cfg.params, n)))
        for n, lo, hi in zip(spec.space.names, spec.space.lower, spec.space.upper)
    }
    report = RunReport(identified=identified, objective=best_obj, gbest_history=hist.gbest,
                       config=_config_echo(cfg), timings={"pso_s": t_pso}, seed=spec.pso.seed,
                       evaluations=hist.evaluations, failures=hist.failures, stop_reason=hist.stop_reason)
    path = report.write(out / "identify_report.json")
    _, sim = problem.simulate(best)
    emit_plots(sim, exp, out, stem="identify")
    print(report.format_console())
    print(f"wrote {path}")
    return 0


def cmd_analyze(cfg, args) -> int:
    from .config import build_profile
    from .ident.sensitivity import identifiable_set, lsa

    spec = cfg.analyze
    if spec is None:
        raise DFNError("config has no [analyze] section")
    out = _out_dir(cfg, args)
    report = lsa(cfg.params, spec.names, build_profile(cfg.profile), spec.delta, cfg.mesh(),
                 cfg.solver, cfg.initial_soc)
    identifiable_set(report, spec.beta_LSA, spec.beta_corr)
    d = {"schema_version": 1, "version": __version__, **report.to_dict()}
    path = out / "sensitivity_report.json"
    path.write_text(json.dumps(d, indent=2) + "\n")
    for n in report.names:
        print(f"{n:<14} S = {report.S[n]:.5g}")
    print(f"LSA identifiable:  {', '.join(report.LSA_identifiable) or '(none)'}")
    print(f"corr identifiable: {', '.join(report.corr_identifiable) or '(none)'}")
    print(f"wrote {path}")
    return 0


def cmd_validate(cfg, args) -> int:
    from .ident.problem import IdentificationProblem
    from .io import emit_plots, load_experiment_csv
    from .report import RunReport

    spec = cfg.validate
    if spec is None:
        raise DFNError("config has no [validate] section")
    params = cfg.params
    if spec.report is not None:
        params = params.replace(**RunReport.read(spec.report).values())
    exp = load_experiment_csv(spec.data)
    out = _out_dir(cfg, args)
    problem = IdentificationProblem(params, cfg.mesh(params), exp, spec.initial_soc, cfg.solver)
    obj = problem({})
    _, sim = problem.simulate()
    path = out / "validate_objective.json"
    path.write_text(json.dumps({"schema_version": 1, "version": __version__, **obj.as_dict()},
                               indent=2) + "\n")
    emit_plots(sim, exp, out, stem="validate")
    print(f"J_V = {obj.J_V:.5g} [-] ({obj.J_V_mV:.5g} mV), J_SOCp = {obj.J_SOCp:.5g} %, "
          f"J_SOCn = {obj.J_SOCn:.5g} %, J_tot = {obj.J_tot:.5g}")
    print(f"wrote {path}")
    return 0


COMMANDS = {"simulate": cmd_simulate, "identify": cmd_identify, "analyze": cmd_analyze,
            "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dfnkit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"dfnkit {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "simulate": "run the configured current profile; write result CSV and plots",
        "identify": "PSO identification against measured data; write a run report",
        "analyze": "local sensitivity and correlation analysis",
        "validate": "score a parameter set against measured data",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="TOML config file, or bundled:<name>")
        p.add_argument("-o", "--out", help="output directory (overrides [output] dir)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .config import load_config

    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except (DFNError, OSError, ValueError) as exc:
        msg = " ".join(str(exc).split())
        print(f"dfnkit {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
