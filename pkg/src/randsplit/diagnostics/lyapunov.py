"""Dissipation bounds for the forced chains."""

import numpy as np

from .. import core
from ..errors import UsageError
from ..timelaw import TimeLaw
from . import models
from .reports import DriftReport, LyapunovReport

# relative floating-point allowance on the pathwise bound
ROUNDING = 1e-12


def _forcing(spec):
    if spec.conservative:
        raise UsageError("Lyapunov checks need a forced spec")
    return float(spec.nu), float(spec.alpha), float(np.linalg.norm(spec.F))


def pathwise_bound(x0_norm2: float, s: np.ndarray, nu: float, alpha: float, F_norm: float):
    """``|x_0|^2 e^{-nu alpha s} + (|F| / (nu alpha))^2 (1 - e^{-nu alpha s})``."""
    decay = np.exp(-nu * alpha * np.asarray(s, dtype=float))
    return x0_norm2 * decay + (F_norm / (nu * alpha)) ** 2 * (1.0 - decay)


def lyapunov_check(spec, trajectory: core.Trajectory, times=None) -> LyapunovReport:
    """Check the squared-norm bound at every recorded cycle.

    ``times`` (default ``trajectory.times``) holds the per-cycle durations
    with the dissipative field in column 0.
    """
    nu, alpha, Fn = _forcing(spec)
    times = trajectory.times if times is None else np.asarray(times, dtype=float)
    if times is None:
        raise UsageError("the trajectory must carry its durations (record_times=True)")
    s = np.concatenate([[0.0], np.cumsum(times[:, 0])])[trajectory.cycles]
    x = trajectory.states
    n2 = np.einsum("ij,ij->i", x, x)
    bound = pathwise_bound(n2[0], s, nu, alpha, Fn)
    slack = bound - n2
    viol = int(np.sum(slack < -ROUNDING * np.maximum(bound, 1.0)))
    return LyapunovReport(int(trajectory.cycles[-1]), float(slack.min()),
                          float(np.min(slack / np.maximum(bound, 1e-300))), viol)


def drift_constants(spec, law: TimeLaw):
    """``(gamma, K)`` with ``gamma = E exp(-nu alpha T / 2)`` and ``K = |F| / (nu alpha)``.

    For the exponential law ``gamma = (1 + nu alpha h / 2)^{-1}``.
    """
    nu, alpha, Fn = _forcing(spec)
    return law.laplace(nu * alpha / 2.0), Fn / (nu * alpha)


def lyapunov_drift(spec, radius: float, h: float, samples: int, seed: int,
                   law_kind: str = "exponential", direction=None) -> DriftReport:
    """Monte Carlo estimate of ``E|Phi(x)|`` over one cycle at ``|x| = radius``."""
    law = TimeLaw(law_kind, h)
    scheme = models.build_scheme(spec, law)
    if direction is None:
        direction = np.random.default_rng(seed).standard_normal(scheme.dim)
    x = radius * np.asarray(direction, dtype=float) / np.linalg.norm(direction)
    mean, se = core.estimate_kernel_average(
        scheme, lambda X: np.linalg.norm(X, axis=1), x, 1, samples, seed)
    gamma, K = drift_constants(spec, law)
    return DriftReport(float(radius), mean, se, gamma * radius + K, gamma, K)
