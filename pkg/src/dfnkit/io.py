"""Experiment CSV ingestion, resampling onto experiment grids, and plot emission."""
from __future__ import annotations

import csv
import os
import shutil
import tempfile
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import AlignmentError, LoadError
from .protocols import SimulationResult

REQUIRED_COLUMNS = ("time_s", "current_a", "voltage_v")
RESULT_COLUMNS = ("time_s", "voltage_v", "current_a", "soc_p", "soc_n")


@dataclass(frozen=True)
class ExperimentData:
    """Measured time [s], current [A, discharge positive] and voltage [V]."""

    t: np.ndarray
    I: np.ndarray
    V: np.ndarray
    source_path: Optional[str] = None

    def __post_init__(self):
        arrays = []
        for name in ("t", "I", "V"):
            a = np.array(getattr(self, name), dtype=float)
            a.flags.writeable = False
            object.__setattr__(self, name, a)
            arrays.append(a)
        t, I, V = arrays
        if not (t.ndim == 1 and t.shape == I.shape == V.shape):
            raise LoadError("t, I and V must be 1-D arrays of equal length")
        if t.size < 2:
            raise LoadError(f"experiment needs at least 2 samples, got {t.size}")
        if np.any(np.diff(t) <= 0):
            raise LoadError("experiment time must be strictly increasing")

    @property
    def M(self) -> int:
        return int(self.t.size)

    def __eq__(self, other):
        if not isinstance(other, ExperimentData):
            return NotImplemented
        return (np.array_equal(self.t, other.t) and np.array_equal(self.I, other.I)
                and np.array_equal(self.V, other.V))

    __hash__ = None


def _read_columns(path, columns, what="data"):
    """Header-keyed numeric columns of a CSV file, duplicate timestamps collapsed.

    The first requested column is the time axis.
    """
    path = Path(path)
    if not path.is_file():
        raise LoadError(f"{what} file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise LoadError(f"{path}: empty file") from None
        missing = [c for c in columns if c not in header]
        if missing:
            raise LoadError(f"{path}: missing column(s) {', '.join(missing)} in header {header}")
        idx = [header.index(c) for c in columns]
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rows.append((line_no, *(float(row[i]) for i in idx)))
            except (ValueError, IndexError):
                raise LoadError(f"{path}: row {line_no}: non-numeric or missing value in {row}") from None
    if not rows:
        raise LoadError(f"{path}: no data rows")
    kept, seen, dropped = [], set(), 0
    for r in rows:
        if r[1] in seen:
            dropped += 1
            continue
        seen.add(r[1])
        kept.append(r)
    if dropped:
        warnings.warn(f"{path}: dropped {dropped} row(s) with duplicate timestamps", stacklevel=3)
    for prev, cur in zip(kept, kept[1:]):
        if not cur[1] > prev[1]:
            raise LoadError(f"{path}: row {cur[0]}: time {cur[1]} does not increase")
    if len(kept) < 2:
        raise LoadError(f"{path}: need at least 2 distinct samples")
    data = np.array([r[1:] for r in kept])
    return {c: data[:, k] for k, c in enumerate(columns)}


def load_experiment_csv(path) -> ExperimentData:
    """Read ``time_s``, ``current_a`` and ``voltage_v`` columns (any order, extra columns ignored).

    Repeated timestamps keep their first row; a warning reports how many were dropped.
    """
    cols = _read_columns(path, REQUIRED_COLUMNS, "experiment")
    return ExperimentData(t=cols["time_s"], I=cols["current_a"], V=cols["voltage_v"],
                          source_path=str(path))


def load_profile_csv(path):
    """Current table from ``time_s`` and ``current_a`` columns."""
    from .protocols import Table

    cols = _read_columns(path, ("time_s", "current_a"), "profile")
    return Table(cols["time_s"], cols["current_a"])


def resample_to_experiment(sim: SimulationResult, exp: ExperimentData, extend: str = "truncate"
                           ) -> SimulationResult:
    """Linear interpolation of the simulated traces onto the experiment timestamps.

    Experiment samples after the end of the simulation are dropped with a
    warning (``extend="truncate"``) or filled with the last simulated values
    (``extend="hold"``). Samples before the start are always dropped.
    """
    if extend not in ("truncate", "hold"):
        raise ValueError("extend must be 'truncate' or 'hold'")
    t0, t1 = sim.t[0], sim.t[-1]
    tq = exp.t[exp.t >= t0 - 1e-9]
    if tq.size == 0 or (extend == "truncate" and tq[0] > t1 + 1e-9):
        raise AlignmentError("simulation and experiment time ranges do not overlap")
    if extend == "truncate":
        if tq.size and tq[-1] > t1 + 1e-9:
            warnings.warn(f"simulation ends at {t1:.6g} s before the experiment ({tq[-1]:.6g} s); "
                          "truncating to the overlap", stacklevel=2)
        tq = tq[tq <= t1 + 1e-9]
    if tq.size == 0:
        raise AlignmentError("simulation and experiment time ranges do not overlap")

    def interp(y):
        return np.interp(tq, sim.t, y)

    return SimulationResult(t=tq, V=interp(sim.V), I=interp(sim.I), SOC_p=interp(sim.SOC_p),
                            SOC_n=interp(sim.SOC_n), termination=sim.termination,
                            final_state=sim.final_state, snapshots=sim.snapshots)


# ------------------------------------------------------------------ output
def write_result_csv(result: SimulationResult, path) -> Path:
    path = Path(path)
    data = np.column_stack([result.t, result.V, result.I, result.SOC_p, result.SOC_n])
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_COLUMNS)
        w.writerows([repr(float(v)) for v in row] for row in data)
    return path


def write_experiment_csv(exp: ExperimentData, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REQUIRED_COLUMNS)
        w.writerows((repr(float(a)), repr(float(b)), repr(float(c))) for a, b, c in zip(exp.t, exp.I, exp.V))
    return path


def emit_plots(result: SimulationResult, exp: ExperimentData | None, out_dir, stem: str = "result"):
    """Write voltage and SOC plots (SVG) plus the plotted series as CSV.

    Files are built in a scratch directory and moved into ``out_dir`` only
    once all of them exist, so a failure leaves no partial output.

    Returns
    -------
    list of Path
        ``[<stem>_voltage.svg, <stem>_soc.svg, <stem>.csv]`` and, with
        experiment data, ``<stem>_experiment.csv``.
    """
    if result is None or len(result) == 0:
        raise ValueError("cannot plot an empty result")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not os.access(out_dir, os.W_OK):
        raise PermissionError(f"output directory is not writable: {out_dir}")

    names = [f"{stem}_voltage.svg", f"{stem}_soc.svg", f"{stem}.csv"]
    if exp is not None:
        names.append(f"{stem}_experiment.csv")
    scratch = Path(tempfile.mkdtemp(prefix=".dfnkit-", dir=out_dir))
    try:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(result.t, result.V, label="simulation")
        if exp is not None:
            ax.plot(exp.t, exp.V, "--", label="experiment")
        ax.set_xlabel("time [s]")
        ax.set_ylabel("voltage [V]")
        ax.legend()
        fig.tight_layout()
        fig.savefig(scratch / names[0], format="svg")
        plt.close(fig)

        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(result.t, result.SOC_p, label="SOC positive")
        ax.plot(result.t, result.SOC_n, label="SOC negative")
        ax.set_xlabel("time [s]")
        ax.set_ylabel("SOC [-]")
        ax.legend()
        fig.tight_layout()
        fig.savefig(scratch / names[1], format="svg")
        plt.close(fig)

        write_result_csv(result, scratch / names[2])
        if exp is not None:
            write_experiment_csv(exp, scratch / names[3])
        paths = []
        for n in names:
            os.replace(scratch / n, out_dir / n)
            paths.append(out_dir / n)
        return paths
    finally:
        shutil.rmtree(scratch, ignore_errors=True)

