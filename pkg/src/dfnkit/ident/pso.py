"""Global-best particle swarm optimization over a bounded parameter box."""
from __future__ import annotations

import enum
import logging
import math
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from ..errors import ConfigurationError, DFNError, DomainError, OptimizationError

log = logging.getLogger(__name__)

PENALTY = 1e6


class Scale(str, enum.Enum):
    LINEAR = "linear"
    LOG10 = "log10"


def bounds_from_pct(nominal: float, pct: float) -> tuple[float, float]:
    """Bounds spread multiplicatively in log10 space around ``nominal``.

    ``a = 10**(log10(nominal)*(1+pct))``, ``b = 10**(log10(nominal)*(1-pct))``,
    returned in increasing order. A nominal of exactly 1 collapses to (1, 1).
    """
    if not nominal > 0:
        raise DomainError(f"nominal value must be positive, got {nominal}")
    e = math.log10(nominal)
    a = 10.0 ** (e * (1.0 + pct))
    b = 10.0 ** (e * (1.0 - pct))
    if a == b:
        warnings.warn(f"bounds_from_pct({nominal}, {pct}) is degenerate", stacklevel=2)
    return (min(a, b), max(a, b))


@dataclass(frozen=True)
class ParameterSpace:
    """Named box with a per-name scaling.

    ``scale`` entries left as ``None`` are chosen automatically: LOG10 when
    the bounds are positive and span at least two decades, LINEAR otherwise.
    """

    names: tuple
    lower: tuple
    upper: tuple
    scale: tuple = None

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if not (len(names) == len(lo) == len(hi)) or not names:
            raise ConfigurationError("names, lower and upper must be non-empty and of equal length")
        if len(set(names)) != len(names):
            raise ConfigurationError(f"parameter names must be unique: {names}")
        for n, a, b in zip(names, lo, hi):
            if not a < b:
                raise ConfigurationError(f"{n}: lower bound {a} must be below upper bound {b}")
        scales = self.scale if self.scale is not None else (None,) * len(names)
        if len(scales) != len(names):
            raise ConfigurationError("scale must have one entry per name")
        resolved = []
        for n, a, b, s in zip(names, lo, hi, scales):
            if s is None:
                s = Scale.LOG10 if a > 0 and b / a >= 100.0 else Scale.LINEAR
            s = Scale(s)
            if s is Scale.LOG10 and not a > 0:
                raise ConfigurationError(f"{n}: LOG10 scaling needs positive bounds")
            resolved.append(s)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "scale", tuple(resolved))

    @classmethod
    def from_dict(cls, bounds: dict, scale: dict | None = None) -> "ParameterSpace":
        names = list(bounds)
        scale = scale or {}
        return cls(tuple(names), tuple(bounds[n][0] for n in names),
                   tuple(bounds[n][1] for n in names), tuple(scale.get(n) for n in names))

    @property
    def dimension(self) -> int:
        return len(self.names)

    def check_against(self, params) -> None:
        """Raise if a name is not a numeric field of ``params``."""
        for n in self.names:
            v = getattr(params, n, None)
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ConfigurationError(f"{n!r} is not a numeric cell parameter")

    def _scaled_bounds(self):
        lg = np.array([s is Scale.LOG10 for s in self.scale])
        lo = np.array([math.log10(v) if g else v for v, g in zip(self.lower, lg)])
        hi = np.array([math.log10(v) if g else v for v, g in zip(self.upper, lg)])
        return lg, lo, hi

    def to_unit(self, x):
        """Native values to [0, 1] coordinates."""
        lg, lo, hi = self._scaled_bounds()
        x = np.asarray(x, dtype=float)
        xs = np.array([math.log10(v) if g else v for v, g in zip(x, lg)])
        return (xs - lo) / (hi - lo)

    def from_unit(self, u):
        """[0, 1] coordinates to native values, clipped to the bounds."""
        lg, lo, hi = self._scaled_bounds()
        xs = lo + np.asarray(u, dtype=float) * (hi - lo)
        x = np.where(lg, 10.0 ** np.where(lg, xs, 0.0), xs)
        # guard the endpoints against round-off in the log round trip
        return np.clip(x, self.lower, self.upper)

    def as_dict(self, x) -> dict:
        return {n: float(v) for n, v in zip(self.names, x)}


@dataclass(frozen=True)
class PSOConfig:
    swarm_size: int | None = None
    max_iters: int = 100
    w: float = 0.729
    c1: float = 1.49445
    c2: float = 1.49445
    seed: int = 0
    parallel_evals: int = 1
    stall_tol: float = 0.0
    stall_iters: int | None = None
    penalty: float = PENALTY

    def __post_init__(self):
        if self.swarm_size is not None and self.swarm_size < 2:
            raise ConfigurationError("swarm_size must be at least 2")
        if min(self.w, self.c1, self.c2) < 0:
            raise ConfigurationError("PSO coefficients must be nonnegative")
        if self.max_iters < 0 or self.parallel_evals < 1:
            raise ConfigurationError("max_iters must be >= 0 and parallel_evals >= 1")
        if self.stall_iters is not None and self.stall_iters < 1:
            raise ConfigurationError("stall_iters must be positive")

    def resolved_swarm(self, dimension: int) -> int:
        if self.swarm_size is not None:
            return int(self.swarm_size)
        return int(math.ceil(20.0 * math.sqrt(dimension)))


@dataclass
class PSOHistory:
    """Per-iteration record; entry 0 is the initial swarm."""

    gbest: list = field(default_factory=list)  # J_tot of the global best
    gbest_position: list = field(default_factory=list)  # named values
    evaluations: int = 0
    failures: int = 0
    stop_reason: str = ""
    positions: list = field(default_factory=list)  # every evaluated position, native units


class PSOResult(NamedTuple):
    best_params: dict
    best_objective: object
    history: PSOHistory


def _name_streams(names: Sequence[str], seed: int):
    # one stream per parameter name: draws do not depend on name order
    return {n: np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(zlib.crc32(n.encode()),)))
            for n in names}


def _score(obj) -> float:
    v = getattr(obj, "J_tot", obj)
    v = float(v)
    return v if math.isfinite(v) else math.inf


class _Guarded:
    """Picklable wrapper turning evaluation failures into a penalty."""

    def __init__(self, fn):
        self.fn = fn

    def __call__(self, values):
        try:
            out = self.fn(values)
            if not math.isfinite(_score(out)):
                return None, "non-finite objective"
            return out, None
        except (DFNError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            return None, f"{type(exc).__name__}: {exc}"


def pso_optimize(space: ParameterSpace, eval: Callable, config: PSOConfig | None = None,
                 keep_positions: bool = False) -> PSOResult:
    """Minimize ``eval(values: dict)`` over ``space``.

    ``eval`` returns an object with ``J_tot`` or a plain number. Evaluations
    that raise a package error, or return a non-finite value, score
    ``config.penalty``. Results are identical for any ``parallel_evals``.

    Returns
    -------
    PSOResult
        ``(best_params, best_objective, history)``.
    """
    cfg = config or PSOConfig()
    d = space.dimension
    n = cfg.resolved_swarm(d)
    names = space.names
    streams = _name_streams(names, cfg.seed)
    fn = _Guarded(eval)
    pool = ProcessPoolExecutor(max_workers=cfg.parallel_evals) if cfg.parallel_evals > 1 else None
    history = PSOHistory()

    def draw(size_fn):
        return np.column_stack([size_fn(streams[nm]) for nm in names])

    def evaluate(U):
        X = np.array([space.from_unit(u) for u in U])
        jobs = [space.as_dict(x) for x in X]
        outs = list(pool.map(fn, jobs)) if pool is not None else [fn(j) for j in jobs]
        scores, objs = np.empty(len(outs)), []
        for i, (obj, err) in enumerate(outs):
            if obj is None:
                history.failures += 1
                log.debug("particle %d failed: %s", i, err)
                scores[i] = cfg.penalty
                objs.append(None)
            else:
                scores[i] = _score(obj)
                objs.append(obj)
        history.evaluations += len(outs)
        if keep_positions:
            history.positions.extend(X)
        return X, scores, objs

    try:
        U = draw(lambda g: g.random(n))
        V = draw(lambda g: g.uniform(-1.0, 1.0, n)) * 0.1
        X, scores, objs = evaluate(U)
        if all(o is None for o in objs):
            raise OptimizationError("every particle failed in the initial swarm")
        pbest_u, pbest_s, pbest_o, pbest_x = U.copy(), scores.copy(), list(objs), X.copy()
        g = int(np.argmin(pbest_s))  # first index wins ties
        gbest_u, gbest_s, gbest_o, gbest_x = pbest_u[g].copy(), pbest_s[g], pbest_o[g], pbest_x[g].copy()
        history.gbest.append(float(gbest_s))
        history.gbest_position.append(space.as_dict(gbest_x))
        stall = 0
        history.stop_reason = "max_iters"
        for it in range(1, cfg.max_iters + 1):
            r = draw(lambda gen: gen.random((2, n)).T)
            r1, r2 = r[:, 0::2], r[:, 1::2]
            V = cfg.w * V + cfg.c1 * r1 * (pbest_u - U) + cfg.c2 * r2 * (gbest_u - U)
            U = U + V
            clamped = (U < 0.0) | (U > 1.0)
            U = np.clip(U, 0.0, 1.0)
            V[clamped] = 0.0
            X, scores, objs = evaluate(U)
            better = scores < pbest_s
            pbest_u[better] = U[better]
            pbest_s[better] = scores[better]
            pbest_x[better] = X[better]
            for i in np.flatnonzero(better):
                pbest_o[i] = objs[i]
            g = int(np.argmin(pbest_s))
            improvement = gbest_s - pbest_s[g]
            if pbest_s[g] < gbest_s:
                gbest_u, gbest_s, gbest_o, gbest_x = pbest_u[g].copy(), pbest_s[g], pbest_o[g], pbest_x[g].copy()
            history.gbest.append(float(gbest_s))
            history.gbest_position.append(space.as_dict(gbest_x))
            if cfg.stall_iters is not None:
                stall = stall + 1 if improvement <= cfg.stall_tol else 0
                if stall >= cfg.stall_iters:
                    history.stop_reason = f"stalled for {stall} iterations"
                    break
    finally:
        if pool is not None:
            pool.shutdown()
    return PSOResult(space.as_dict(gbest_x), gbest_o, history)
