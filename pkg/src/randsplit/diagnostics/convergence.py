"""Weak and pathwise convergence studies against the exact flow."""

from typing import Callable, Optional, Sequence

import numpy as np

from .. import core
from ..errors import UsageError
from ..reference import IntegratorConfig, integrate
from ..timelaw import TimeLaw
from . import models
from .reports import ConvergenceReport

NOISE_RATIO = 0.25        # points with SE above this fraction of the error are not fitted
INCONCLUSIVE_RATIO = 0.5  # SE above this fraction of the error flags the observable
REFERENCE_MARGIN = 100.0  # required ratio between the smallest fitted error and the oracle error


def _named(observables):
    if isinstance(observables, dict):
        return list(observables.keys()), list(observables.values())
    names, fs = [], []
    for i, item in enumerate(observables):
        if isinstance(item, tuple):
            names.append(str(item[0]))
            fs.append(item[1])
        else:
            names.append(getattr(item, "__name__", f"f{i}"))
            fs.append(item)
    return names, fs


def grid_seeds(seed: int, count: int) -> list:
    """Independent 64-bit seeds for the grid points of one study."""
    ss = np.random.SeedSequence(int(seed))
    return [int(c.generate_state(1, np.uint64)[0]) for c in ss.spawn(count)]


def fit_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.size < 2:
        return float("nan")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def weak_error_study(spec, observables, x0, t: float, h_grid: Sequence[float], samples: int,
                     seed: int, law_kind: str = "exponential", order_policy: str = "fixed",
                     ref_cfg: IntegratorConfig = IntegratorConfig(), chunk: int = 1 << 16
                     ) -> ConvergenceReport:
    """Weak error ``|E f(Phi^{t/h}(x0)) - f(Psi_t(x0))|`` over ``h_grid``.

    ``observables`` is a dict ``name -> f`` or a list of callables, each
    mapping an ``(S, d)`` array of states to ``S`` values.
    """
    names, fs = _named(observables)
    x0 = np.asarray(x0, dtype=float)
    h_grid = np.asarray(sorted(h_grid, reverse=True), dtype=float)
    cycles = []
    for h in h_grid:
        m = t / h
        if h <= 0 or abs(m - round(m)) > 1e-9 * max(1.0, m):
            raise UsageError(f"step {h} does not divide the horizon {t}")
        cycles.append(int(round(m)))
    rhs = models.rhs(spec)
    ref = integrate(rhs, x0, t, ref_cfg)
    fine = integrate(rhs, x0, t, IntegratorConfig(ref_cfg.rel_tol / 100, ref_cfg.abs_tol / 100,
                                                  ref_cfg.max_steps))
    f_ref = np.array([float(np.asarray(f(ref[None, :])).ravel()[0]) for f in fs])
    f_fine = np.array([float(np.asarray(f(fine[None, :])).ravel()[0]) for f in fs])
    ref_err = float(np.max(np.abs(f_ref - f_fine) + ref_cfg.rel_tol * np.abs(f_ref)))

    n, k = len(h_grid), len(fs)
    errors = np.empty((n, k))
    ses = np.empty((n, k))
    for i, (h, m, s) in enumerate(zip(h_grid, cycles, grid_seeds(seed, n))):
        scheme = models.build_scheme(spec, TimeLaw(law_kind, float(h)), order_policy)
        means, se = core.estimate_kernel_averages(scheme, fs, x0, m, samples, s, chunk)
        errors[i] = np.abs(means - f_ref)
        ses[i] = se
    used = ses <= NOISE_RATIO * errors
    inconclusive = np.any(ses > INCONCLUSIVE_RATIO * errors, axis=0)
    slopes = np.array([fit_slope(h_grid[used[:, j]], errors[used[:, j], j]) for j in range(k)])
    notes = []
    if np.any(np.isnan(slopes)):
        notes.append("slope fit skipped where fewer than two points stand above the noise floor")
    fitted = errors[used]
    dominant = bool(fitted.size == 0 or REFERENCE_MARGIN * ref_err <= fitted.min())
    return ConvergenceReport("weak", h_grid, errors, ses, names, slopes, used, inconclusive,
                             ref_err, dominant, notes)


def pathwise_study(spec, x0, t: float, m_list: Sequence[int], seed: int,
                   time_stream: Optional[np.ndarray] = None, law_kind: str = "exponential",
                   ref_cfg: IntegratorConfig = IntegratorConfig()) -> ConvergenceReport:
    """Distance between ``m^2`` rescaled cycles and the exact flow, one shared time stream."""
    x0 = np.asarray(x0, dtype=float)
    m_list = np.asarray(sorted(int(m) for m in m_list))
    scheme = models.build_scheme(spec, TimeLaw(law_kind, 1.0))
    need = int(m_list.max()) ** 2 * scheme.n_fields
    if time_stream is None:
        time_stream = core.unit_time_stream(need, seed, TimeLaw(law_kind, 1.0))
    ref = integrate(models.rhs(spec), x0, t, ref_cfg)
    errors = np.array([[np.linalg.norm(core.pathwise_rescaled_run(scheme, x0, t, int(m), time_stream)
                                       - ref)] for m in m_list])
    used = np.ones_like(errors, dtype=bool)
    slopes = np.array([fit_slope(m_list, errors[:, 0])])
    return ConvergenceReport("pathwise", m_list.astype(float), errors, np.zeros_like(errors),
                             ["distance"], slopes, used, np.array([False]), 0.0, True,
                             ["no rate is guaranteed; a factor-4 reduction from the first to the "
                              "last m is an empirical target"])
