import math
import warnings

import numpy as np
import pytest

from dfnkit import ConfigurationError, DomainError, OptimizationError
from dfnkit.ident import ParameterSpace, PSOConfig, Scale, bounds_from_pct, pso_optimize


def sphere(values):
    return sum(v * v for v in values.values())


def shifted(values):
    target = {"a": 0.3, "b": -1.2, "c": 2.0}
    return sum((values[k] - target[k]) ** 2 for k in values)


def flaky(values):
    if values["a"] > 2.0:
        raise DomainError("unphysical region")
    return sphere(values)


def always_fails(values):
    raise DomainError("nope")


CUBE = ParameterSpace(("a", "b", "c"), (-5.0,) * 3, (5.0,) * 3)


def test_sphere_converges():
    best, obj, hist = pso_optimize(CUBE, sphere, PSOConfig(swarm_size=20, max_iters=100, seed=42))
    assert obj < 1e-4
    assert set(best) == {"a", "b", "c"}
    assert len(hist.gbest) == 101


def test_bounds_respected():
    space = ParameterSpace(("a", "b", "c"), (0.5, -5.0, 1.0), (1.0, 5.0, 3.0))
    _, _, hist = pso_optimize(space, sphere, PSOConfig(swarm_size=10, max_iters=30, seed=1),
                              keep_positions=True)
    X = np.array(hist.positions)
    assert X.shape == (310, 3)
    assert np.all(X >= space.lower) and np.all(X <= space.upper)


def test_history_nonincreasing():
    _, _, hist = pso_optimize(CUBE, shifted, PSOConfig(swarm_size=8, max_iters=40, seed=3))
    assert all(b <= a for a, b in zip(hist.gbest, hist.gbest[1:]))


def test_parallel_determinism():
    cfg = dict(swarm_size=12, max_iters=15, seed=7)
    a = pso_optimize(CUBE, shifted, PSOConfig(parallel_evals=1, **cfg))
    b = pso_optimize(CUBE, shifted, PSOConfig(parallel_evals=8, **cfg))
    assert a.best_params == b.best_params
    assert a.history.gbest == b.history.gbest
    assert a.history.gbest_position == b.history.gbest_position


def test_permutation_invariance():
    cfg = PSOConfig(swarm_size=10, max_iters=20, seed=11)
    a = pso_optimize(CUBE, shifted, cfg)
    perm = ParameterSpace(("c", "a", "b"), (-5.0,) * 3, (5.0,) * 3)
    b = pso_optimize(perm, shifted, cfg)
    assert a.best_params == b.best_params


def test_failures_get_penalty():
    space = ParameterSpace(("a", "b"), (-5.0, -5.0), (5.0, 5.0))
    best, obj, hist = pso_optimize(space, flaky, PSOConfig(swarm_size=10, max_iters=10, seed=2))
    assert hist.failures > 0
    assert best["a"] <= 2.0 and obj < 1e6


def test_all_fail_initially():
    with pytest.raises(OptimizationError):
        pso_optimize(CUBE, always_fails, PSOConfig(swarm_size=4, max_iters=2))


def test_stall_stop():
    cfg = PSOConfig(swarm_size=10, max_iters=500, seed=0, stall_iters=5, stall_tol=1e-12)
    _, _, hist = pso_optimize(CUBE, lambda v: 1.0, cfg)
    assert hist.stop_reason.startswith("stalled")
    assert len(hist.gbest) == 6


def test_default_swarm_size():
    assert PSOConfig().resolved_swarm(4) == 40
    assert PSOConfig().resolved_swarm(8) == math.ceil(20 * math.sqrt(8))


def test_config_validation():
    with pytest.raises(ConfigurationError):
        PSOConfig(swarm_size=1)
    with pytest.raises(ConfigurationError):
        PSOConfig(w=-0.1)


def test_space_validation():
    with pytest.raises(ConfigurationError):
        ParameterSpace(("a", "a"), (0, 0), (1, 1))
    with pytest.raises(ConfigurationError):
        ParameterSpace(("a",), (1.0,), (0.5,))


def test_auto_log_scaling_and_unit_map():
    lo, hi = bounds_from_pct(4e-15, 0.2)
    space = ParameterSpace(("Dsp", "theta"), (lo, 0.2), (hi, 0.4))
    assert space.scale == (Scale.LOG10, Scale.LINEAR)
    u = space.to_unit([4e-15, 0.3])
    mid = (math.log10(4e-15) - math.log10(lo)) / (math.log10(hi) - math.log10(lo))
    np.testing.assert_allclose(u, [mid, 0.5], rtol=1e-12)
    np.testing.assert_allclose(space.from_unit(u), [4e-15, 0.3], rtol=1e-12)
    np.testing.assert_array_equal(space.from_unit([0.0, 1.0]), [lo, 0.4])


def test_bounds_from_pct_printed():
    lo, hi = bounds_from_pct(4e-15, 0.2)
    assert f"{lo:.4g}" == "5.278e-18" and f"{hi:.4e}" == "3.0314e-12"
    lo, hi = bounds_from_pct(3.3e-14, 0.2)
    assert f"{lo:.4e}" == "6.6407e-17" and f"{hi:.4e}" == "1.6399e-11"


def test_bounds_from_pct_degenerate_and_domain():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        assert bounds_from_pct(1.0, 0.2) == (1.0, 1.0)
    assert any("degenerate" in str(x.message) for x in w)
    with pytest.raises(DomainError):
        bounds_from_pct(0.0, 0.2)
    with pytest.raises(DomainError):
        bounds_from_pct(-1.0, 0.2)
