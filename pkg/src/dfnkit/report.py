"""Identification run reports (JSON on disk, fixed key order)."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .ident.objective import ObjectiveBreakdown

REPORT_SCHEMA_VERSION = 1


@dataclass
class IdentifiedValue:
    value: float
    lower: float
    upper: float
    initial: float


@dataclass
class RunReport:
    identified: dict  # name -> IdentifiedValue
    objective: ObjectiveBreakdown
    gbest_history: list
    config: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    seed: int | None = None
    evaluations: int = 0
    failures: int = 0
    stop_reason: str = ""
    version: str = __version__
    schema_version: int = REPORT_SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "version": self.version,
            "seed": self.seed,
            "identified": {n: asdict(v) for n, v in self.identified.items()},
            "objective": self.objective.as_dict(),
            "gbest_history": [float(v) for v in self.gbest_history],
            "evaluations": self.evaluations,
            "failures": self.failures,
            "stop_reason": self.stop_reason,
            "timings": dict(self.timings),
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        if d.get("schema_version") != REPORT_SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema_version {d.get('schema_version')!r}")
        obj = d["objective"]
        return cls(
            identified={n: IdentifiedValue(**v) for n, v in d["identified"].items()},
            objective=ObjectiveBreakdown(J_V=obj["J_V"], J_SOCp=obj["J_SOCp"], J_SOCn=obj["J_SOCn"],
                                         J_V_mV=obj["J_V_mV"], J_tot=obj["J_tot"]),
            gbest_history=list(d["gbest_history"]),
            config=d.get("config", {}),
            timings=d.get("timings", {}),
            seed=d.get("seed"),
            evaluations=d.get("evaluations", 0),
            failures=d.get("failures", 0),
            stop_reason=d.get("stop_reason", ""),
            version=d.get("version", ""),
            schema_version=d["schema_version"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_jsonable) + "\n"

    def write(self, path) -> Path:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(self.to_json())
        tmp.replace(path)
        return path

    @classmethod
    def read(cls, path) -> "RunReport":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def values(self) -> dict:
        return {n: v.value for n, v in self.identified.items()}

    def without_timings(self) -> dict:
        d = self.to_dict()
        d.pop("timings")
        return d

    def format_console(self) -> str:
        """Human-readable summary of the identified values and the objective."""
        lines = ["Identified parameters", "-" * 72]
        width = max(len(n) for n in self.identified) if self.identified else 0
        for n, v in self.identified.items():
            lines.append(f"{n:<{width}}  {v.value:.5g}  "
                         f"[lower {v.lower:.5g} | initial {v.initial:.5g} | upper {v.upper:.5g}]")
        o = self.objective
        lines += [
            "-" * 72,
            f"J_V    = {o.J_V:.5g} [-]  ({o.J_V_mV:.5g} mV)",
            f"J_SOCp = {o.J_SOCp:.5g} [%]",
            f"J_SOCn = {o.J_SOCn:.5g} [%]",
            f"J_tot  = {o.J_tot:.5g} [-]",
        ]
        return "\n".join(lines)


def _jsonable(obj):
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if hasattr(obj, "isoformat"):
        return obj.isoformat()
    if hasattr(obj, "tolist"):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")
