import math

import numpy as np
import pytest

from randsplit import euler2d as E, lorenz96 as L
from randsplit.errors import ConfigurationError, IntegrationError
from randsplit.reference import IntegratorConfig, integrate


def test_zero_horizon_returns_start():
    x0 = np.array([1.0, 2.0])
    np.testing.assert_array_equal(integrate(lambda x: -x, x0, 0.0), x0)


def test_linear_decay():
    cfg = IntegratorConfig()
    y = integrate(lambda x: -x, [1.0], 1.0, cfg)
    assert abs(y[0] - math.exp(-1)) <= cfg.rel_tol * math.exp(-1)


def test_lorenz_norm_preserved(rng):
    spec = L.LorenzSpec(6)
    cfg = IntegratorConfig()
    for _ in range(3):
        x0 = rng.standard_normal(6)
        y = integrate(lambda x: L.full_rhs(spec, x), x0, 1.0, cfg)
        assert abs(np.linalg.norm(y) / np.linalg.norm(x0) - 1) < 10 * cfg.rel_tol


def test_euler_invariants_over_five_time_units(rng):
    spec = E.EulerSpec(2)
    cfg = IntegratorConfig()
    q0 = rng.standard_normal(24)
    y = integrate(lambda q: E.full_rhs(spec, q), q0, 5.0, cfg)
    for f in (E.energy, E.enstrophy):
        assert abs(f(y) / f(q0) - 1) < 10 * cfg.rel_tol


def test_self_convergence(rng):
    spec = L.LorenzSpec(6)
    x0 = rng.standard_normal(6)
    coarse = integrate(lambda x: L.full_rhs(spec, x), x0, 2.0, IntegratorConfig(1e-8, 1e-10))
    fine = integrate(lambda x: L.full_rhs(spec, x), x0, 2.0, IntegratorConfig(5e-9, 5e-11))
    assert np.max(np.abs(coarse - fine) / np.maximum(np.abs(fine), 1.0)) < 1e-8


def test_deterministic(rng):
    x0 = rng.standard_normal(6)
    spec = L.LorenzSpec(6)
    a = integrate(lambda x: L.full_rhs(spec, x), x0, 1.5)
    b = integrate(lambda x: L.full_rhs(spec, x), x0, 1.5)
    assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("kw", [dict(rel_tol=0.0), dict(rel_tol=1e-2), dict(abs_tol=-1.0),
                                dict(max_steps=0), dict(max_steps=1.5)])
def test_invalid_config(kw):
    with pytest.raises(ConfigurationError):
        IntegratorConfig(**kw)


def test_negative_horizon_rejected():
    with pytest.raises(ConfigurationError):
        integrate(lambda x: -x, [1.0], -1.0)


def test_step_budget_and_blowup():
    with pytest.raises(IntegrationError):
        integrate(lambda x: -x, [1.0], 100.0, IntegratorConfig(max_steps=3))
    with pytest.raises(IntegrationError):
        integrate(lambda x: x * x, [1.0], 2.0)
