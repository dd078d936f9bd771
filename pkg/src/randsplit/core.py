"""Model-agnostic random-splitting chain engine.

One cycle composes the flows of all splitting fields, each for its own
random duration, in list order (first listed is applied first). A chain is
the iteration of such cycles with fresh independent durations.

Schemes built by the model modules carry compact field tables and run in
compiled code; schemes assembled by hand from arbitrary ``FlowPrimitive``
callables run through a plain Python loop with the same random streams.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels as K
from .errors import (ConfigurationError, IntegrationError, NumericalDivergenceError,
                     UsageError)
from .timelaw import Stream, TimeLaw, as_seed

ORDER_POLICIES = ("fixed", "random-permutation")

# substream 0 drives single chains; Monte Carlo sample s uses substream s + 1
CHAIN_STREAM = 0


@dataclass(frozen=True)
class FlowPrimitive:
    """A splitting field identified by ``id`` with its exact flow map."""

    id: object
    flow: Callable[[np.ndarray, float], np.ndarray]

    def __call__(self, x, t):
        return self.flow(x, t)


@dataclass(frozen=True)
class FieldTables:
    """Compiled encoding of a scheme's fields (see ``_kernels``)."""

    fi: np.ndarray
    ff: np.ndarray
    rate: np.ndarray
    force: np.ndarray

    @property
    def n_fields(self) -> int:
        return self.fi.shape[0]


def table_flow(tables: FieldTables, k: int) -> Callable[[np.ndarray, float], np.ndarray]:
    """Flow map of table row ``k`` returning a new array."""

    def flow(x, t):
        y = np.array(x, dtype=float, copy=True)
        st = K.apply_field(y, k, float(t), tables.fi, tables.ff, tables.rate, tables.force)
        _check_status(st, None, f"field {k}")
        return y

    return flow


@dataclass
class SplittingScheme:
    """Ordered splitting fields plus the time law and cycle-order policy."""

    fields: list
    time_law: TimeLaw = field(default_factory=TimeLaw)
    order_policy: str = "fixed"
    tables: Optional[FieldTables] = None
    dim: Optional[int] = None
    model: object = None

    def __post_init__(self):
        if self.order_policy not in ORDER_POLICIES:
            raise ConfigurationError(
                f"order_policy must be one of {ORDER_POLICIES}, got {self.order_policy!r}")
        if len(self.fields) == 0:
            raise ConfigurationError("a splitting scheme needs at least one field")
        if self.tables is not None and self.tables.n_fields != len(self.fields):
            raise ConfigurationError("field tables do not match the field list")

    @property
    def n_fields(self) -> int:
        return len(self.fields)

    @property
    def permute(self) -> bool:
        return self.order_policy == "random-permutation"

    def with_time_law(self, law: TimeLaw) -> "SplittingScheme":
        return SplittingScheme(self.fields, law, self.order_policy, self.tables, self.dim, self.model)

    def with_order_policy(self, policy: str) -> "SplittingScheme":
        return SplittingScheme(self.fields, self.time_law, policy, self.tables, self.dim, self.model)


@dataclass(frozen=True)
class ChainRunConfig:
    cycles: int
    seed: int = 0
    record_every: int = 1
    record_times: bool = False

    def __post_init__(self):
        if int(self.cycles) != self.cycles or self.cycles < 0:
            raise ConfigurationError(f"cycles must be a nonnegative integer, got {self.cycles!r}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ConfigurationError(f"record_every must be >= 1, got {self.record_every!r}")
        as_seed(self.seed)


@dataclass
class Trajectory:
    """Recorded chain states.

    ``states[i]`` is the state after ``cycles[i]`` cycles; ``times`` holds the
    durations of every cycle (row per cycle, column per field in list
    order) when requested.
    """

    states: np.ndarray
    cycles: np.ndarray
    times: Optional[np.ndarray] = None

    def __len__(self):
        return self.states.shape[0]


def _check_status(status: int, cycle, context: str = ""):
    if status == K.STATUS_OK:
        return
    if status == K.STATUS_NONFINITE:
        raise NumericalDivergenceError(cycle)
    raise IntegrationError("triad integrator exhausted its step budget",
                           context or (f"cycle {cycle}" if cycle is not None else None))


def _state(scheme: SplittingScheme, x) -> np.ndarray:
    x = np.array(x, dtype=float, copy=True)
    if x.ndim != 1:
        raise UsageError("state must be a one-dimensional vector")
    if scheme.dim is not None and x.size != scheme.dim:
        raise UsageError(f"state has dimension {x.size}, scheme expects {scheme.dim}")
    return x


def evaluate_fields(tables: FieldTables, x: np.ndarray) -> np.ndarray:
    """Values of every tabled field at ``x`` as rows of an ``(n_fields, d)`` array."""
    x = np.asarray(x, dtype=float)
    out = np.zeros((tables.n_fields, x.size))
    for k in range(tables.n_fields):
        kind, i0, i1, i2 = tables.fi[k]
        c = tables.ff[k]
        if kind == K.ROTATION:
            out[k, i0] = c[0] * x[i2] * x[i1]
            out[k, i1] = -c[0] * x[i2] * x[i0]
        elif kind == K.TRIAD:
            out[k, i0] = c[0] * x[i1] * x[i2]
            out[k, i1] = c[1] * x[i0] * x[i2]
            out[k, i2] = c[2] * x[i0] * x[i1]
        else:
            out[k] = -tables.rate * x + tables.force
    return out


def apply_cycle(scheme: SplittingScheme, x, times, order: Optional[Sequence[int]] = None) -> np.ndarray:
    """Compose all flows once; ``times[k]`` is the duration of field ``k``.

    ``order`` is the concrete composition order for this cycle (default:
    list order).
    """
    x = _state(scheme, x)
    times = np.asarray(times, dtype=float)
    if times.shape != (scheme.n_fields,):
        raise UsageError(f"expected {scheme.n_fields} durations, got shape {times.shape}")
    if order is None:
        order = np.arange(scheme.n_fields)
    else:
        order = np.asarray(order, dtype=np.int64)
        if sorted(order.tolist()) != list(range(scheme.n_fields)):
            raise UsageError("order must be a permutation of the field indices")
    if scheme.tables is not None:
        t = scheme.tables
        _check_status(K.apply_cycle(x, times, order, t.fi, t.ff, t.rate, t.force), 1)
        return x
    for k in order:
        x = np.asarray(scheme.fields[k].flow(x, float(times[k])), dtype=float)
    if not np.all(np.isfinite(x)):
        raise NumericalDivergenceError(1)
    return x


def _python_cycle(scheme, x, key, pkey, c, times, order):
    nf = scheme.n_fields
    law = scheme.time_law
    K.fill_times(times, key, c * nf, law.code, float(law.mean), float(law.shape))
    if scheme.permute:
        K.fill_permutation(order, pkey, c)
    for k in order:
        x = np.asarray(scheme.fields[k].flow(x, float(times[k])), dtype=float)
    return x


def run_chain(scheme: SplittingScheme, x0, cfg: ChainRunConfig) -> Trajectory:
    """Iterate ``cfg.cycles`` cycles from ``x0``, recording every ``record_every``."""
    x = _state(scheme, x0)
    nf = scheme.n_fields
    key = K.key_for(as_seed(cfg.seed), CHAIN_STREAM)
    n_rec = cfg.cycles // cfg.record_every + 1
    states = np.empty((n_rec, x.size))
    times = np.empty((cfg.cycles if cfg.record_times else 0, nf))
    law = scheme.time_law
    if scheme.tables is not None:
        t = scheme.tables
        st, cyc = K.run_chain(x, key, 0, cfg.cycles, cfg.record_every, law.code,
                              float(law.mean), float(law.shape), scheme.permute,
                              t.fi, t.ff, t.rate, t.force, states, times, cfg.record_times)
        _check_status(st, cyc)
    else:
        pkey = K.perm_key_for(key)
        buf = np.empty(nf)
        order = np.arange(nf)
        states[0] = x
        r = 1
        for c in range(cfg.cycles):
            x = _python_cycle(scheme, x, key, pkey, c, buf, order)
            if not np.all(np.isfinite(x)):
                raise NumericalDivergenceError(c + 1)
            if cfg.record_times:
                times[c] = buf
            if (c + 1) % cfg.record_every == 0:
                states[r] = x
                r += 1
    return Trajectory(states=states,
                      cycles=np.arange(n_rec, dtype=np.int64) * cfg.record_every,
                      times=times if cfg.record_times else None)


def final_states(scheme: SplittingScheme, x0, cycles: int, samples: int, seed: int,
                 first_sample: int = 0) -> np.ndarray:
    """``Phi^cycles(x0)`` for independent samples; sample ``s`` owns substream ``s + 1``."""
    x = _state(scheme, x0)
    seed = as_seed(seed)
    out = np.empty((samples, x.size))
    law = scheme.time_law
    if scheme.tables is not None:
        t = scheme.tables
        status = np.zeros(samples, dtype=np.int64)
        K.mc_final_states(x, seed, first_sample + CHAIN_STREAM + 1, cycles, law.code, float(law.mean),
                          float(law.shape), scheme.permute, t.fi, t.ff, t.rate, t.force,
                          out, status)
        bad = np.flatnonzero(status)
        if bad.size:
            code, cyc = divmod(int(status[bad[0]]), 1_000_000_000)
            _check_status(code, cyc)
        return out
    nf = scheme.n_fields
    buf = np.empty(nf)
    order = np.arange(nf)
    for s in range(samples):
        key = K.key_for(seed, first_sample + s + 1)
        pkey = K.perm_key_for(key)
        y = x.copy()
        for c in range(cycles):
            y = _python_cycle(scheme, y, key, pkey, c, buf, order)
            if not np.all(np.isfinite(y)):
                raise NumericalDivergenceError(c + 1)
        out[s] = y
    return out


class _Accumulator:
    """Streaming mean and standard error with an exact constant-value shortcut."""

    def __init__(self):
        self.n = 0
        self.shift = None
        self.s1 = 0.0
        self.s2 = 0.0
        self.lo = np.inf
        self.hi = -np.inf

    def add(self, v):
        v = np.asarray(v, dtype=float)
        if self.shift is None:
            self.shift = float(v[0])
        d = v - self.shift
        self.s1 += float(d.sum())
        self.s2 += float((d * d).sum())
        self.n += v.size
        self.lo = min(self.lo, float(v.min()))
        self.hi = max(self.hi, float(v.max()))

    def result(self):
        if self.lo == self.hi:
            return self.lo, 0.0
        m = self.s1 / self.n
        var = max(self.s2 - self.n * m * m, 0.0) / (self.n - 1)
        return self.shift + m, float(np.sqrt(var / self.n))


def estimate_kernel_averages(scheme: SplittingScheme, fs: Sequence[Callable], x0, cycles: int,
                             samples: int, seed: int, chunk: int = 1 << 16):
    """Monte Carlo estimates of ``E f(Phi^cycles(x0))`` for several observables.

    Each ``f`` maps an ``(S, d)`` array of states to ``S`` values. All
    observables share the same samples. Returns ``(means, standard_errors)``.
    """
    if int(samples) != samples or samples < 2:
        raise UsageError(f"samples must be an integer >= 2, got {samples!r}")
    if int(cycles) != cycles or cycles < 0:
        raise UsageError(f"cycles must be a nonnegative integer, got {cycles!r}")
    accs = [_Accumulator() for _ in fs]
    done = 0
    while done < samples:
        size = min(chunk, samples - done)
        xs = final_states(scheme, x0, int(cycles), size, seed, first_sample=done)
        for f, acc in zip(fs, accs):
            v = np.broadcast_to(np.asarray(f(xs), dtype=float), (size,))
            acc.add(v)
        done += size
    res = [a.result() for a in accs]
    return np.array([r[0] for r in res]), np.array([r[1] for r in res])


def estimate_kernel_average(scheme: SplittingScheme, f: Callable, x0, cycles: int, samples: int,
                            seed: int, chunk: int = 1 << 16):
    """Monte Carlo estimate of ``P_h^m f(x0)`` as ``(mean, standard_error)``."""
    m, se = estimate_kernel_averages(scheme, [f], x0, cycles, samples, seed, chunk)
    return float(m[0]), float(se[0])


def unit_time_stream(n_entries: int, seed: int, law: Optional[TimeLaw] = None) -> np.ndarray:
    """Unit-mean durations for :func:`pathwise_rescaled_run` (prefix-stable in ``n_entries``)."""
    law = (law or TimeLaw()).with_mean(1.0)
    out = np.empty(int(n_entries))
    K.fill_times(out, K.key_for(as_seed(seed), CHAIN_STREAM), 0,
                 law.code, 1.0, float(law.shape))
    return out


def pathwise_rescaled_run(scheme: SplittingScheme, x0, t: float, m: int, time_stream) -> np.ndarray:
    """Run ``m**2`` cycles in list order with durations ``t * tau / m**2``.

    The first ``m**2 * n_fields`` entries of ``time_stream`` are consumed row
    by row, so the same stream can be reused for every ``m``.
    """
    x = _state(scheme, x0)
    if int(m) != m or m < 1:
        raise UsageError(f"m must be a positive integer, got {m!r}")
    nf = scheme.n_fields
    need = m * m * nf
    tau = np.asarray(time_stream, dtype=float).ravel()
    if tau.size < need:
        raise UsageError(f"time stream has {tau.size} entries, need {need}")
    times = tau[:need].reshape(m * m, nf) * (t / (m * m))
    if scheme.tables is not None:
        tb = scheme.tables
        y, st, cyc = K.run_with_times(x, times, tb.fi, tb.ff, tb.rate, tb.force)
        _check_status(st, cyc)
        return y
    for c in range(m * m):
        x = apply_cycle(scheme, x, times[c])
    return x
