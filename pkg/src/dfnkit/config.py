"""TOML run configuration.

A configuration file has a ``schema_version`` key and the sections
``[cell]``, ``[mesh]``, ``[solver]``, ``[profile]``, ``[identify]``,
``[analyze]``, ``[validate]`` and ``[output]``; all but ``[cell]`` are
optional. Relative paths are resolved against the file's directory. The
layout is documented in the README.
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .dae import SolverConfig
from .discretize import RadialMethod, build_mesh
from .errors import ConfigurationError
from .ident.pso import ParameterSpace, PSOConfig, bounds_from_pct
from .params import CellParameters, PropertyCurve, lg_m50, load_ocp_csv
from .protocols import CC, HPPCSchedule

SCHEMA_VERSION = 1
THREADS_ENV = "DFNKIT_THREADS"
BUNDLED_PREFIX = "bundled:"

PRESETS = {"lg_m50": lg_m50}
_CELL_SPECIAL = {"preset", "ocp_p", "ocp_n", "De_fn", "Kappa_fn"}
_MESH_KEYS = {"nx_neg": 10, "nx_sep": 10, "nx_pos": 10, "nr_neg": 10, "nr_pos": 10,
              "radial_method": "fvm_hermite"}
_PSO_KEYS = {f.name for f in dataclasses.fields(PSOConfig)}
_SECTIONS = {"schema_version", "cell", "mesh", "solver", "profile", "identify", "analyze",
             "validate", "output"}


@dataclass
class IdentifySpec:
    data: Path
    space: ParameterSpace
    pso: PSOConfig
    initial_soc: float = 1.0


@dataclass
class AnalyzeSpec:
    names: list
    delta: float = 0.05
    beta_LSA: float = 0.01
    beta_corr: float = 0.9


@dataclass
class ValidateSpec:
    data: Path
    report: Path | None = None
    initial_soc: float = 1.0


@dataclass
class RunConfig:
    source: str
    params: CellParameters
    mesh_spec: dict
    solver: SolverConfig
    profile: dict
    identify: IdentifySpec | None = None
    analyze: AnalyzeSpec | None = None
    validate: ValidateSpec | None = None
    output_dir: Path = Path("dfnkit-out")
    raw: dict = field(default_factory=dict)

    def mesh(self, params: CellParameters | None = None):
        m = self.mesh_spec
        return build_mesh(m["nx_neg"], m["nx_sep"], m["nx_pos"], m["nr_neg"], m["nr_pos"],
                          params or self.params, m["radial_method"])

    @property
    def initial_soc(self) -> float:
        return float(self.profile.get("initial_soc", 1.0))


def bundled_config_names() -> list:
    root = resources.files("dfnkit") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def _unknown(section, table, allowed):
    extra = set(table) - set(allowed)
    if extra:
        raise ConfigurationError(f"[{section}] unknown key(s): {', '.join(sorted(extra))}")


def _number(section, key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"[{section}] {key} must be a number, got {value!r}")
    return float(value)


def _property_curve(key, value, base: Path):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return PropertyCurve(value=value)
    if isinstance(value, dict):
        _unknown(f"cell.{key}", value, {"c", "values"})
        return PropertyCurve(c=value["c"], values=value["values"])
    if isinstance(value, str):
        import numpy as np

        data = np.loadtxt(base / value, delimiter=",", skiprows=1)
        return PropertyCurve(c=data[:, 0], values=data[:, 1])
    raise ConfigurationError(f"[cell] {key} must be a number, an inline table or a CSV path")


def parse_cell(table: dict, base: Path) -> CellParameters:
    table = dict(table)
    preset = table.pop("preset", "lg_m50")
    if preset not in PRESETS:
        raise ConfigurationError(f"[cell] unknown preset {preset!r}; available: {', '.join(PRESETS)}")
    params = PRESETS[preset]()
    numeric = {f.name for f in dataclasses.fields(CellParameters)} - _CELL_SPECIAL
    _unknown("cell", table, numeric | _CELL_SPECIAL)
    changes = {}
    for key, value in table.items():
        if key in ("ocp_p", "ocp_n"):
            changes[key] = load_ocp_csv(base / value, name="positive" if key == "ocp_p" else "negative")
        elif key in ("De_fn", "Kappa_fn"):
            changes[key] = _property_curve(key, value, base)
        else:
            changes[key] = _number("cell", key, value)
    return params.replace(**changes) if changes else params


def parse_solver(table: dict) -> SolverConfig:
    allowed = {f.name for f in dataclasses.fields(SolverConfig)}
    _unknown("solver", table, allowed)
    return SolverConfig(**table)


def parse_profile(table: dict, base: Path) -> dict:
    """Profile description with the data path resolved; the profile itself is built on demand."""
    table = dict(table)
    kind = table.get("type", "cc")
    allowed = {"type", "initial_soc"}
    if kind == "cc":
        allowed |= {"c_rate", "direction", "t_max"}
    elif kind == "table":
        allowed |= {"data"}
        if "data" not in table:
            raise ConfigurationError("[profile] type = 'table' needs a data path")
        table["data"] = str(base / table["data"])
    elif kind == "hppc":
        allowed |= {f.name for f in dataclasses.fields(HPPCSchedule)}
    else:
        raise ConfigurationError(f"[profile] unknown type {kind!r}; use cc, table or hppc")
    _unknown("profile", table, allowed)
    soc = table.get("initial_soc", 1.0)
    if not 0 <= soc <= 1:
        raise ConfigurationError("[profile] initial_soc must lie in [0, 1]")
    return table


def build_profile(spec: dict):
    from .io import load_profile_csv

    kind = spec.get("type", "cc")
    if kind == "cc":
        return CC(c_rate=float(spec.get("c_rate", 1.0)), direction=spec.get("direction", "discharge"),
                  t_max=spec.get("t_max"))
    if kind == "table":
        return load_profile_csv(spec["data"])
    kw = {k: v for k, v in spec.items() if k not in ("type", "initial_soc")}
    if "soc_steps" in kw:
        kw["soc_steps"] = tuple(kw["soc_steps"])
    return HPPCSchedule(**kw)


def thread_override(default: int) -> int:
    value = os.environ.get(THREADS_ENV)
    if value is None or value == "":
        return default
    try:
        n = int(value)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be a positive integer, got {value!r}") from None
    if n < 1:
        raise ConfigurationError(f"{THREADS_ENV} must be a positive integer, got {value!r}")
    return n


def parse_identify(table: dict, base: Path, params: CellParameters) -> IdentifySpec:
    table = dict(table)
    _unknown("identify", table, {"data", "names", "bounds", "pct", "scale", "initial_soc"} | _PSO_KEYS)
    if "data" not in table:
        raise ConfigurationError("[identify] needs a data path")
    bounds = dict(table.pop("bounds", {}))
    pct = dict(table.pop("pct", {}))
    scale = dict(table.pop("scale", {}))
    names = list(table.pop("names", list(bounds) + [n for n in pct if n not in bounds]))
    if not names:
        raise ConfigurationError("[identify] lists no parameters")
    lo, hi = [], []
    for n in names:
        if n in bounds:
            pair = bounds[n]
            if len(pair) != 2:
                raise ConfigurationError(f"[identify.bounds] {n} needs [lower, upper]")
            a, b = float(pair[0]), float(pair[1])
        elif n in pct:
            nominal = getattr(params, n, None)
            if nominal is None:
                raise ConfigurationError(f"[identify.pct] unknown parameter {n!r}")
            a, b = bounds_from_pct(float(nominal), float(pct[n]))
        else:
            raise ConfigurationError(f"[identify] no bounds or pct rule for {n!r}")
        lo.append(a)
        hi.append(b)
    space = ParameterSpace(tuple(names), tuple(lo), tuple(hi), tuple(scale.get(n) for n in names))
    space.check_against(params)
    data = base / table.pop("data")
    initial_soc = float(table.pop("initial_soc", 1.0))
    pso_kw = {k: table[k] for k in _PSO_KEYS if k in table}
    pso_kw["parallel_evals"] = thread_override(int(pso_kw.get("parallel_evals", 1)))
    return IdentifySpec(data=data, space=space, pso=PSOConfig(**pso_kw), initial_soc=initial_soc)


def parse_analyze(table: dict) -> AnalyzeSpec:
    _unknown("analyze", table, {f.name for f in dataclasses.fields(AnalyzeSpec)})
    if "names" not in table:
        raise ConfigurationError("[analyze] needs a names list")
    return AnalyzeSpec(**table)


def parse_validate(table: dict, base: Path) -> ValidateSpec:
    _unknown("validate", table, {"data", "report", "initial_soc"})
    if "data" not in table:
        raise ConfigurationError("[validate] needs a data path")
    report = table.get("report")
    return ValidateSpec(data=base / table["data"], report=None if report is None else base / report,
                        initial_soc=float(table.get("initial_soc", 1.0)))


def load_config(path) -> RunConfig:
    """Parse a configuration file, or a bundled one given as ``bundled:<name>``."""
    source = str(path)
    if source.startswith(BUNDLED_PREFIX):
        name = source[len(BUNDLED_PREFIX):]
        ref = resources.files("dfnkit") / "configs" / f"{name}.toml"
        if not ref.is_file():
            raise ConfigurationError(
                f"no bundled config {name!r}; available: {', '.join(bundled_config_names())}")
        with resources.as_file(ref) as p:
            return _load(Path(p), source)
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file not found: {p}")
    return _load(p, source)


def _load(path: Path, source: str) -> RunConfig:
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    return from_dict(raw, path.parent, source)


def from_dict(raw: dict, base: Path = Path("."), source: str = "<dict>") -> RunConfig:
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigurationError(f"unsupported schema_version {version!r}; expected {SCHEMA_VERSION}")
    _unknown("top level", raw, _SECTIONS)
    base = Path(base)
    params = parse_cell(raw.get("cell", {}), base)
    mesh = dict(_MESH_KEYS)
    _unknown("mesh", raw.get("mesh", {}), _MESH_KEYS)
    mesh.update(raw.get("mesh", {}))
    RadialMethod.parse(mesh["radial_method"])
    solver = parse_solver(raw.get("solver", {}))
    profile = parse_profile(raw.get("profile", {}), base)
    cfg = RunConfig(source=source, params=params, mesh_spec=mesh, solver=solver, profile=profile, raw=raw)
    if "identify" in raw:
        cfg.identify = parse_identify(raw["identify"], base, params)
    if "analyze" in raw:
        cfg.analyze = parse_analyze(raw["analyze"])
    if "validate" in raw:
        cfg.validate = parse_validate(raw["validate"], base)
    out = raw.get("output", {})
    _unknown("output", out, {"dir"})
    cfg.output_dir = Path(out.get("dir", "dfnkit-out"))
    if not cfg.output_dir.is_absolute() and not source.startswith(BUNDLED_PREFIX):
        cfg.output_dir = base / cfg.output_dir
    return cfg
