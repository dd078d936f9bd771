"""High-accuracy deterministic integration of the unsplit dynamics.

Backed by scipy's DOP853 (explicit Runge-Kutta of order 8 with embedded
error control). The step budget is enforced by counting right-hand-side
evaluations, twelve per step.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigurationError, IntegrationError

_EVALS_PER_STEP = 12


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_steps: int = 1_000_000

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol"):
            v = getattr(self, name)
            if not (0 < v <= 1e-3):
                raise ConfigurationError(f"{name} must lie in (0, 1e-3], got {v!r}")
        if int(self.max_steps) != self.max_steps or self.max_steps < 1:
            raise ConfigurationError(f"max_steps must be >= 1, got {self.max_steps!r}")


class _Budget(Exception):
    pass


def integrate(rhs, x0, t: float, cfg: IntegratorConfig = IntegratorConfig()) -> np.ndarray:
    """Solve ``x' = rhs(x)`` from ``x0`` up to time ``t >= 0``."""
    x0 = np.array(x0, dtype=float)
    if t < 0:
        raise ConfigurationError(f"integration horizon must be nonnegative, got {t!r}")
    if t == 0:
        return x0
    limit = _EVALS_PER_STEP * cfg.max_steps + 1
    count = 0

    def f(_, x):
        nonlocal count
        count += 1
        if count > limit:
            raise _Budget
        return rhs(x)

    try:
        sol = solve_ivp(f, (0.0, float(t)), x0, method="DOP853", rtol=cfg.rel_tol,
                        atol=cfg.abs_tol, t_eval=[float(t)])
    except _Budget:
        raise IntegrationError(f"step budget of {cfg.max_steps} exhausted before t={t}") from None
    if not sol.success:
        raise IntegrationError(sol.message)
    y = sol.y[:, -1]
    if not np.all(np.isfinite(y)):
        raise IntegrationError("non-finite state")
    return y
