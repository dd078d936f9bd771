"""Lorenz-96 with its rotation splitting.

Field ``k`` (1-based, cyclic indices) is ``V_k(x) = (x_{k+1} e_k - x_k e_{k+1}) x_{k-1}``,
a rotation of the ``(x_k, x_{k+1})`` plane at angular velocity ``x_{k-1}``.
The fields sum to the conservative right-hand side
``(x_{k+1} - x_{k-2}) x_{k-1}``. The forced model adds ``V_0(x) = -nu x + F``,
applied first in every cycle.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as K
from .core import FieldTables, FlowPrimitive, SplittingScheme, evaluate_fields, table_flow
from .errors import ConfigurationError, UsageError
from .timelaw import TimeLaw

# diagnostics treat a residual below this as a fixed point (states of size O(1))
FIXED_POINT_TOL = 1e-24


@dataclass(frozen=True)
class LorenzSpec:
    n: int
    conservative: bool = True
    nu: float = 0.0
    forcing: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4:
            raise ConfigurationError(f"Lorenz-96 needs n >= 4, got {self.n!r}")
        if self.conservative:
            return
        if not np.isfinite(self.nu) or self.nu <= 0:
            raise ConfigurationError(f"forced Lorenz-96 needs nu > 0, got {self.nu!r}")
        F = self.F
        if F.shape != (self.n,):
            raise ConfigurationError(f"forcing must have length {self.n}")
        if np.any(F < 0) or not np.any(F != 0) or not np.all(np.isfinite(F)):
            raise ConfigurationError("forcing entries must be finite, nonnegative and not all zero")

    @property
    def F(self) -> np.ndarray:
        if self.forcing is None:
            return np.zeros(self.n)
        F = np.asarray(self.forcing, dtype=float)
        if F.ndim == 0:
            return np.full(self.n, float(F))
        if F.shape != (self.n,):
            raise ConfigurationError(f"forcing must be a scalar or have length {self.n}")
        return F.copy()

    @property
    def dim(self) -> int:
        return self.n

    # Lambda = identity
    alpha = 1.0


def _vec(x, n=None):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or (n is not None and x.size != n):
        raise UsageError(f"expected a state of length {n}, got shape {x.shape}")
    return x


def full_rhs(spec: LorenzSpec, x) -> np.ndarray:
    """``(x_{k+1} - x_{k-2}) x_{k-1}``, minus ``nu x_k`` plus ``F_k`` when forced."""
    x = _vec(x, spec.n)
    v = (np.roll(x, -1) - np.roll(x, 2)) * np.roll(x, 1)
    if not spec.conservative:
        v = v - spec.nu * x + spec.F
    return v


def _plane(n, k):
    if int(k) != k or not 1 <= k <= n:
        raise UsageError(f"field index must be in 1..{n}, got {k!r}")
    p = k - 1
    return p, (p + 1) % n, (p - 1) % n


def rotation_flow(x, k: int, t: float) -> np.ndarray:
    """Exact flow of ``V_k`` for time ``t``."""
    x = _vec(x)
    p, r, f = _plane(x.size, k)
    y = x.copy()
    om = x[f]
    if om != 0.0 and t != 0.0:
        s, c = np.sin(om * t), np.cos(om * t)
        y[p] = x[p] * c + x[r] * s
        y[r] = -x[p] * s + x[r] * c
    return y


def dissipative_flow(x, t: float, nu: float, F) -> np.ndarray:
    """Exact flow of ``-nu x + F``: ``e^{-nu t} x + (1 - e^{-nu t}) F / nu``."""
    x = _vec(x)
    if nu <= 0:
        raise ConfigurationError("dissipative flow needs nu > 0")
    if t == 0:
        return x.copy()
    F = np.broadcast_to(np.asarray(F, dtype=float), x.shape)
    target = F / nu
    return target + (x - target) * np.exp(-nu * t)


def fixed_point_residual(x) -> float:
    """``sum_k (x_k^2 + x_{k+1}^2) x_{k-1}^2``; zero exactly at fixed points."""
    x = _vec(x)
    x2 = x * x
    return float(np.sum((x2 + np.roll(x2, -1)) * np.roll(x2, 1)))


def is_fixed_point(x, tol: float = FIXED_POINT_TOL) -> bool:
    return fixed_point_residual(x) < tol


def field_tables(spec: LorenzSpec) -> FieldTables:
    n = spec.n
    rows = []
    if not spec.conservative:
        rows.append((K.AFFINE, 0, 0, 0))
    rows += [(K.ROTATION,) + _plane(n, k) for k in range(1, n + 1)]
    fi = np.array(rows, dtype=np.int64)
    ff = np.zeros((len(rows), 6))
    ff[:, 0] = [0.0 if r[0] == K.AFFINE else 1.0 for r in rows]
    if spec.conservative:
        rate, force = np.zeros(n), np.zeros(n)
    else:
        rate, force = np.full(n, float(spec.nu)), spec.F
    return FieldTables(fi, ff, rate, force)


def splitting_fields(spec: LorenzSpec, x) -> np.ndarray:
    """Field values at ``x``, one row per scheme field (``V_0`` first when forced)."""
    return evaluate_fields(field_tables(spec), _vec(x, spec.n))


def build_scheme(spec: LorenzSpec, time_law: Optional[TimeLaw] = None,
                 order_policy: str = "fixed") -> SplittingScheme:
    tables = field_tables(spec)
    ids = ([0] if not spec.conservative else []) + list(range(1, spec.n + 1))
    fields = [FlowPrimitive(i, table_flow(tables, r)) for r, i in enumerate(ids)]
    return SplittingScheme(fields, time_law or TimeLaw(), order_policy, tables, spec.n, spec)
