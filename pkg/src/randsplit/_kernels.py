"""Compiled inner loops.

Every splitting field of both models is encoded in two small tables so a
single set of jitted routines can drive any scheme:

``fi[k] = (kind, i0, i1, i2)`` and ``ff[k] = (c0, c1, c2, w0, w1, w2)``.

* ``ROTATION``: rotate ``(x[i0], x[i1])`` at angular velocity ``c0 * x[i2]``.
* ``TRIAD``: the three-mode quadratic system ``y0' = c0 y1 y2``,
  ``y1' = c1 y0 y2``, ``y2' = c2 y0 y1`` on coordinates ``(i0, i1, i2)``,
  with squared mode norms ``(w0, w1, w2)`` weighting the second invariant.
* ``AFFINE``: ``x' = -rate * x + force`` on every coordinate.

Random times come from a counter-based generator: the draw for counter ``c``
of stream key ``k`` is ``splitmix64(k + (c + 1) * golden)``. Any draw can be
recomputed independently, which makes chunked, restarted and per-sample runs
reproducible without carrying generator state around.
"""

import math
import os

import numba
import numpy as np
from numba import njit, prange

# Prefer OpenMP or the built-in work queue; older TBB builds only produce warnings.
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


def set_threads(count=None):
    """Set the worker count for parallel loops, by default from ``RANDSPLIT_THREADS``."""
    if count is None:
        env = os.environ.get("RANDSPLIT_THREADS", "").strip()
        if not env:
            return numba.get_num_threads()
        count = int(env)
    count = max(1, min(int(count), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(count)
    return count

ROTATION = 0
TRIAD = 1
AFFINE = 2

LAW_EXPONENTIAL = 0
LAW_GAMMA = 1
LAW_UNIFORM = 2

STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_INTEGRATOR = 2

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_SALT_SEED = np.uint64(0x5DEECE66D1234567)
_SALT_PERM = np.uint64(0xA0761D6478BD642F)
_SALT_SUB = np.uint64(0xE7037ED1A0B428DB)
_SH30 = np.uint64(30)
_SH27 = np.uint64(27)
_SH31 = np.uint64(31)
_SH11 = np.uint64(11)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0

# triad integrator
TRIAD_TOL = 1e-12
TRIAD_MAX_STEPS = 10_000_000


@njit(cache=True)
def mix64(z):
    z = (z ^ (z >> _SH30)) * _MIX1
    z = (z ^ (z >> _SH27)) * _MIX2
    return z ^ (z >> _SH31)


@njit(cache=True)
def stream_key(seed, stream):
    """Key of substream ``stream`` under root ``seed`` (both uint64)."""
    return mix64(mix64(seed ^ _SALT_SEED) + (stream + _ONE) * _GOLDEN)


@njit(cache=True)
def perm_key(key):
    return mix64(key ^ _SALT_PERM)


@njit(cache=True)
def unit(key, counter):
    """Uniform draw in [0, 1)."""
    z = mix64(key + (np.uint64(counter) + _ONE) * _GOLDEN)
    return float(z >> _SH11) * _INV53


@njit(cache=True)
def _gamma_unit_scale(sub, shape):
    # Marsaglia-Tsang, consuming uniforms sub-counter 0, 1, 2, ...
    j = 0
    boost = 1.0
    a = shape
    if a < 1.0:
        boost = (1.0 - unit(sub, j)) ** (1.0 / a)
        j += 1
        a += 1.0
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        u1 = 1.0 - unit(sub, j)
        u2 = unit(sub, j + 1)
        j += 2
        z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        v = 1.0 + c * z
        if v <= 0.0:
            continue
        v = v * v * v
        u = 1.0 - unit(sub, j)
        j += 1
        if math.log(u) < 0.5 * z * z + d - d * v + d * math.log(v):
            return d * v * boost


@njit(cache=True)
def draw_time(key, counter, law, mean, shape):
    """One flow duration with the requested mean."""
    if law == LAW_EXPONENTIAL:
        return -math.log(1.0 - unit(key, counter)) * mean
    if law == LAW_UNIFORM:
        return 2.0 * mean * unit(key, counter)
    sub = mix64((key ^ _SALT_SUB) + (np.uint64(counter) + _ONE) * _GOLDEN)
    return _gamma_unit_scale(sub, shape) * mean / shape


@njit(cache=True)
def fill_times(out, key, start, law, mean, shape):
    for i in range(out.size):
        out[i] = draw_time(key, start + i, law, mean, shape)


@njit(cache=True)
def fill_permutation(order, pkey, cycle):
    n = order.size
    for i in range(n):
        order[i] = i
    base = cycle * n
    for i in range(n - 1, 0, -1):
        j = int(unit(pkey, base + i) * (i + 1))
        if j > i:
            j = i
        tmp = order[i]
        order[i] = order[j]
        order[j] = tmp


# ---------------------------------------------------------------------------
# three-mode quadratic system


@njit(cache=True, inline="always")
def _rhs3(y0, y1, y2, c0, c1, c2):
    return c0 * y1 * y2, c1 * y0 * y2, c2 * y0 * y1


@njit(cache=True)
def _project(y0, y1, y2, s0, p0, w0, w1, w2):
    """Rescale coordinatewise onto sum(y^2) = s0, sum(y^2/w) = p0.

    The correction is multiplicative, so zero coordinates stay exactly zero.
    """
    iw0 = 1.0 / w0
    iw1 = 1.0 / w1
    iw2 = 1.0 / w2
    lam1 = 0.0
    lam2 = 0.0
    q0 = y0 * y0
    q1 = y1 * y1
    q2 = y2 * y2
    for _ in range(3):
        f0 = 1.0 + lam1 + lam2 * iw0
        f1 = 1.0 + lam1 + lam2 * iw1
        f2 = 1.0 + lam1 + lam2 * iw2
        g1 = q0 * f0 * f0 + q1 * f1 * f1 + q2 * f2 * f2 - s0
        g2 = q0 * f0 * f0 * iw0 + q1 * f1 * f1 * iw1 + q2 * f2 * f2 * iw2 - p0
        j11 = 2.0 * (q0 * f0 + q1 * f1 + q2 * f2)
        j12 = 2.0 * (q0 * f0 * iw0 + q1 * f1 * iw1 + q2 * f2 * iw2)
        j22 = 2.0 * (q0 * f0 * iw0 * iw0 + q1 * f1 * iw1 * iw1 + q2 * f2 * iw2 * iw2)
        det = j11 * j22 - j12 * j12
        if det <= 1e-14 * j11 * j22:
            # active coordinates share one weight: the constraints coincide
            if j11 > 0.0:
                lam1 -= g1 / j11
        else:
            lam1 -= (j22 * g1 - j12 * g2) / det
            lam2 -= (j11 * g2 - j12 * g1) / det
    return (y0 * (1.0 + lam1 + lam2 * iw0), y1 * (1.0 + lam1 + lam2 * iw1),
            y2 * (1.0 + lam1 + lam2 * iw2))


@njit(cache=True)
def triad3(y0, y1, y2, c0, c1, c2, w0, w1, w2, t):
    """Advance ``y' = (c0 y1 y2, c1 y0 y2, c2 y0 y1)`` by ``t`` (any sign).

    Adaptive Dormand-Prince 5(4); both quadratic invariants
    ``sum y^2`` and ``sum y^2 / w`` are restored after every accepted step
    and a step is rejected if the restoration leaves a drift above 1e-12.
    Returns ``(y0, y1, y2, status)``.
    """
    if t == 0.0:
        return y0, y1, y2, STATUS_OK
    nz = (y0 != 0.0) + (y1 != 0.0) + (y2 != 0.0)
    if nz < 2:
        return y0, y1, y2, STATUS_OK
    sign = 1.0
    if t < 0.0:
        # quadratic field: phi_{-t}(y) = -phi_t(-y)
        sign = -1.0
        t = -t
        y0, y1, y2 = -y0, -y1, -y2
    s0 = y0 * y0 + y1 * y1 + y2 * y2
    p0 = y0 * y0 / w0 + y1 * y1 / w1 + y2 * y2 / w2
    atol = TRIAD_TOL * math.sqrt(s0)
    rate = max(abs(c0), max(abs(c1), abs(c2))) * math.sqrt(s0)
    if rate == 0.0:
        return sign * y0, sign * y1, sign * y2, STATUS_OK
    h = min(t, 0.2 / rate)
    tcur = 0.0
    k1a, k1b, k1c = _rhs3(y0, y1, y2, c0, c1, c2)
    steps = 0
    while tcur < t:
        steps += 1
        if steps > TRIAD_MAX_STEPS:
            return sign * y0, sign * y1, sign * y2, STATUS_INTEGRATOR
        last = False
        if tcur + h >= t:
            h = t - tcur
            last = True
        k2a, k2b, k2c = _rhs3(y0 + h * (k1a / 5.0), y1 + h * (k1b / 5.0),
                              y2 + h * (k1c / 5.0), c0, c1, c2)
        k3a, k3b, k3c = _rhs3(
            y0 + h * (3.0 / 40.0 * k1a + 9.0 / 40.0 * k2a),
            y1 + h * (3.0 / 40.0 * k1b + 9.0 / 40.0 * k2b),
            y2 + h * (3.0 / 40.0 * k1c + 9.0 / 40.0 * k2c), c0, c1, c2)
        k4a, k4b, k4c = _rhs3(
            y0 + h * (44.0 / 45.0 * k1a - 56.0 / 15.0 * k2a + 32.0 / 9.0 * k3a),
            y1 + h * (44.0 / 45.0 * k1b - 56.0 / 15.0 * k2b + 32.0 / 9.0 * k3b),
            y2 + h * (44.0 / 45.0 * k1c - 56.0 / 15.0 * k2c + 32.0 / 9.0 * k3c), c0, c1, c2)
        k5a, k5b, k5c = _rhs3(
            y0 + h * (19372.0 / 6561.0 * k1a - 25360.0 / 2187.0 * k2a
                      + 64448.0 / 6561.0 * k3a - 212.0 / 729.0 * k4a),
            y1 + h * (19372.0 / 6561.0 * k1b - 25360.0 / 2187.0 * k2b
                      + 64448.0 / 6561.0 * k3b - 212.0 / 729.0 * k4b),
            y2 + h * (19372.0 / 6561.0 * k1c - 25360.0 / 2187.0 * k2c
                      + 64448.0 / 6561.0 * k3c - 212.0 / 729.0 * k4c), c0, c1, c2)
        k6a, k6b, k6c = _rhs3(
            y0 + h * (9017.0 / 3168.0 * k1a - 355.0 / 33.0 * k2a + 46732.0 / 5247.0 * k3a
                      + 49.0 / 176.0 * k4a - 5103.0 / 18656.0 * k5a),
            y1 + h * (9017.0 / 3168.0 * k1b - 355.0 / 33.0 * k2b + 46732.0 / 5247.0 * k3b
                      + 49.0 / 176.0 * k4b - 5103.0 / 18656.0 * k5b),
            y2 + h * (9017.0 / 3168.0 * k1c - 355.0 / 33.0 * k2c + 46732.0 / 5247.0 * k3c
                      + 49.0 / 176.0 * k4c - 5103.0 / 18656.0 * k5c), c0, c1, c2)
        n0 = y0 + h * (35.0 / 384.0 * k1a + 500.0 / 1113.0 * k3a + 125.0 / 192.0 * k4a
                       - 2187.0 / 6784.0 * k5a + 11.0 / 84.0 * k6a)
        n1 = y1 + h * (35.0 / 384.0 * k1b + 500.0 / 1113.0 * k3b + 125.0 / 192.0 * k4b
                       - 2187.0 / 6784.0 * k5b + 11.0 / 84.0 * k6b)
        n2 = y2 + h * (35.0 / 384.0 * k1c + 500.0 / 1113.0 * k3c + 125.0 / 192.0 * k4c
                       - 2187.0 / 6784.0 * k5c + 11.0 / 84.0 * k6c)
        k7a, k7b, k7c = _rhs3(n0, n1, n2, c0, c1, c2)
        ea = h * (71.0 / 57600.0 * k1a - 71.0 / 16695.0 * k3a + 71.0 / 1920.0 * k4a
                  - 17253.0 / 339200.0 * k5a + 22.0 / 525.0 * k6a - 1.0 / 40.0 * k7a)
        eb = h * (71.0 / 57600.0 * k1b - 71.0 / 16695.0 * k3b + 71.0 / 1920.0 * k4b
                  - 17253.0 / 339200.0 * k5b + 22.0 / 525.0 * k6b - 1.0 / 40.0 * k7b)
        ec = h * (71.0 / 57600.0 * k1c - 71.0 / 16695.0 * k3c + 71.0 / 1920.0 * k4c
                  - 17253.0 / 339200.0 * k5c + 22.0 / 525.0 * k6c - 1.0 / 40.0 * k7c)
        err = max(abs(ea), max(abs(eb), abs(ec))) / atol
        if not math.isfinite(err):
            return sign * y0, sign * y1, sign * y2, STATUS_NONFINITE
        if err > 1.0:
            h *= max(0.2, 0.9 * err ** -0.2)
            continue
        n0, n1, n2 = _project(n0, n1, n2, s0, p0, w0, w1, w2)
        ds = abs(n0 * n0 + n1 * n1 + n2 * n2 - s0)
        dp = abs(n0 * n0 / w0 + n1 * n1 / w1 + n2 * n2 / w2 - p0)
        if ds > 1e-12 * s0 or dp > 1e-12 * p0:
            h *= 0.5
            continue
        tcur = t if last else tcur + h
        y0, y1, y2 = n0, n1, n2
        k1a, k1b, k1c = _rhs3(y0, y1, y2, c0, c1, c2)
        h *= 5.0 if err == 0.0 else min(5.0, 0.9 * err ** -0.2)
    return sign * y0, sign * y1, sign * y2, STATUS_OK


@njit(cache=True)
def triad3_flow(y, c0, c1, c2, w0, w1, w2, t):
    """Array wrapper of :func:`triad3` (in place); returns the status code."""
    a, b, c, st = triad3(y[0], y[1], y[2], c0, c1, c2, w0, w1, w2, t)
    y[0] = a
    y[1] = b
    y[2] = c
    return st


# ---------------------------------------------------------------------------
# fields and cycles


@njit(cache=True)
def apply_field(x, k, t, fi, ff, rate, force):
    """Flow field ``k`` for duration ``t``, in place; returns a status code."""
    if t == 0.0:
        return STATUS_OK
    kind = fi[k, 0]
    if kind == ROTATION:
        om = ff[k, 0] * x[fi[k, 3]]
        if om != 0.0:
            p = fi[k, 1]
            r = fi[k, 2]
            ang = om * t
            s = math.sin(ang)
            c = math.cos(ang)
            xp = x[p]
            xr = x[r]
            x[p] = xp * c + xr * s
            x[r] = -xp * s + xr * c
        return STATUS_OK
    if kind == TRIAD:
        i0 = fi[k, 1]
        i1 = fi[k, 2]
        i2 = fi[k, 3]
        a, b, c, st = triad3(x[i0], x[i1], x[i2], ff[k, 0], ff[k, 1], ff[k, 2],
                             ff[k, 3], ff[k, 4], ff[k, 5], t)
        x[i0] = a
        x[i1] = b
        x[i2] = c
        return st
    for i in range(x.size):
        r_ = rate[i]
        if r_ > 0.0:
            target = force[i] / r_
            x[i] = target + (x[i] - target) * math.exp(-r_ * t)
        else:
            x[i] = x[i] + force[i] * t
    return STATUS_OK


@njit(cache=True)
def _finite(x):
    for i in range(x.size):
        if not math.isfinite(x[i]):
            return False
    return True


@njit(cache=True)
def apply_cycle(x, times, order, fi, ff, rate, force):
    """One cycle in place; ``times[k]`` is the duration of field ``k``."""
    for i in range(order.size):
        k = order[i]
        t = times[k]
        if fi[k, 0] == ROTATION:
            # hot path written out here: a call per rotation costs more than the rotation
            om = ff[k, 0] * x[fi[k, 3]]
            if om != 0.0 and t != 0.0:
                p = fi[k, 1]
                r = fi[k, 2]
                s = math.sin(om * t)
                cs = math.cos(om * t)
                xp = x[p]
                xr = x[r]
                x[p] = xp * cs + xr * s
                x[r] = -xp * s + xr * cs
            continue
        st = apply_field(x, k, t, fi, ff, rate, force)
        if st != STATUS_OK:
            return st
    if not _finite(x):
        return STATUS_NONFINITE
    return STATUS_OK


@njit(cache=True)
def draw_cycle(x, key, pkey, c, law, mean, shape, permute, order, fi, ff, rate, force,
               times, record):
    """Draw the durations of cycle ``c`` and apply it in place.

    Field ``k`` always takes counter ``c * n_fields + k``, whatever the
    composition order. ``times`` receives the durations when ``record``.
    """
    nf = fi.shape[0]
    if permute:
        fill_permutation(order, pkey, c)
    base = c * nf
    for i in range(nf):
        k = order[i] if permute else i
        t = draw_time(key, base + k, law, mean, shape)
        if record:
            times[k] = t
        if fi[k, 0] == ROTATION:
            om = ff[k, 0] * x[fi[k, 3]]
            if om != 0.0 and t != 0.0:
                p = fi[k, 1]
                r = fi[k, 2]
                s = math.sin(om * t)
                cs = math.cos(om * t)
                xp = x[p]
                xr = x[r]
                x[p] = xp * cs + xr * s
                x[r] = -xp * s + xr * cs
            continue
        st = apply_field(x, k, t, fi, ff, rate, force)
        if st != STATUS_OK:
            return st
    if not _finite(x):
        return STATUS_NONFINITE
    return STATUS_OK


@njit(cache=True)
def run_chain(x0, key, first_cycle, cycles, record_every, law, mean, shape, permute,
              fi, ff, rate, force, out, out_times, record_times):
    """Sequential chain; returns (status, failing cycle number)."""
    nf = fi.shape[0]
    x = x0.copy()
    times = np.empty(nf)
    order = np.arange(nf)
    pkey = perm_key(key)
    out[0, :] = x
    r = 1
    for c in range(cycles):
        cc = first_cycle + c
        st = draw_cycle(x, key, pkey, cc, law, mean, shape, permute, order,
                        fi, ff, rate, force, times, record_times)
        if st != STATUS_OK:
            return st, cc + 1
        if record_times:
            out_times[c, :] = times
        if (c + 1) % record_every == 0:
            out[r, :] = x
            r += 1
    return STATUS_OK, 0


@njit(cache=True, parallel=True)
def mc_final_states(x0, seed, first_stream, cycles, law, mean, shape, permute,
                    fi, ff, rate, force, out, status):
    """``out[s] = Phi^cycles(x0)`` driven by substream ``first_stream + s``.

    ``status[s]`` is 0, or ``code * 10**9 + cycle`` for a failed sample.
    """
    nf = fi.shape[0]
    for s in prange(out.shape[0]):
        key = stream_key(seed, np.uint64(first_stream + s))
        pkey = perm_key(key)
        x = x0.copy()
        times = np.empty(nf)
        order = np.arange(nf)
        st = STATUS_OK
        for c in range(cycles):
            st = draw_cycle(x, key, pkey, c, law, mean, shape, permute, order,
                            fi, ff, rate, force, times, False)
            if st != STATUS_OK:
                st = st * 1_000_000_000 + c + 1
                break
        status[s] = st
        out[s, :] = x


@njit(cache=True)
def run_with_times(x0, times, fi, ff, rate, force):
    """Fixed-order cycles with explicit durations ``times[cycle, field]``."""
    x = x0.copy()
    order = np.arange(fi.shape[0])
    for c in range(times.shape[0]):
        st = apply_cycle(x, times[c], order, fi, ff, rate, force)
        if st != STATUS_OK:
            return x, st, c + 1
    return x, STATUS_OK, 0


@njit(cache=True)
def chain_moments(x0, key, burn_in, cycles, n_batches, law, mean, shape, permute,
                  fi, ff, rate, force, sums2, sums4):
    """Run ``burn_in + cycles`` cycles, accumulating per-batch sums of x^2 and x^4.

    ``cycles`` must be a multiple of ``n_batches``. Returns (status, cycle, x).
    """
    nf = fi.shape[0]
    x = x0.copy()
    times = np.empty(nf)
    order = np.arange(nf)
    pkey = perm_key(key)
    per = cycles // n_batches
    for c in range(burn_in + cycles):
        st = draw_cycle(x, key, pkey, c, law, mean, shape, permute, order,
                        fi, ff, rate, force, times, False)
        if st != STATUS_OK:
            return st, c + 1, x
        if c >= burn_in:
            b = (c - burn_in) // per
            for i in range(x.size):
                x2 = x[i] * x[i]
                sums2[b, i] += x2
                sums4[b, i] += x2 * x2
    return STATUS_OK, 0, x


def key_for(seed, stream) -> np.uint64:
    """Python-side stream key (compiled calls hand back plain ints)."""
    return np.uint64(stream_key(np.uint64(seed), np.uint64(stream)))


def perm_key_for(key) -> np.uint64:
    return np.uint64(perm_key(np.uint64(key)))
