"""Root-finding primitives on single-triad orbits.

A triad field moves three coordinates on the intersection of the sphere
``sum y^2 = E_i`` with the ellipsoid ``sum y^2 / |.|^2 = En_i``. With the modes
ordered by norm (``lo < mid < hi``) that curve has two closed components
which circle the ``lo`` axis when ``|lo|^2 En_i < E_i < |mid|^2 En_i`` and the
``hi`` axis when ``|mid|^2 En_i < E_i < |hi|^2 En_i``. ``E_i = |mid|^2 En_i``
is the degenerate level whose orbit runs into a fixed point.

The helpers below locate the times at which a chosen coordinate vanishes,
all three become active, or an equal-norm pair reaches a prescribed phase.
Signs follow the convention ``sign(0) = +1``.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from . import _kernels as K
from .euler2d import Triad, _level, model
from .errors import (DegenerateOrbitError, InsufficientActivityError, IntegrationError,
                     PreconditionError, UsageError, ZeroRateError)

ZERO_TOL = 1e-9          # zeroing postcondition, relative to sqrt(E_i)
ACTIVE_TOL = 1e-6        # activation postcondition, relative to sqrt(E_i)
TIME_TOL = 1e-12         # root-finding tolerance in time
DEGENERACY_TOL = 1e-12   # relative distance to the degenerate level
MAX_MARCH = 2_000_000    # step cap when following an orbit
_MAX_TURN = 0.25         # largest accepted winding increment per marching step


def _sign(v):
    return 1.0 if v >= 0.0 else -1.0


@dataclass(frozen=True)
class TriadOrbitQuery:
    """Designated coordinates of one triad field with norm-ordering metadata.

    ``y``, ``rates`` and ``weights`` follow the triad roles ``(j, k, l)``;
    ``order`` lists role positions sorted by mode norm.
    """

    triad: Triad
    variant: str
    coords: tuple
    y: np.ndarray
    rates: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_state(cls, q, triad: Triad, variant: str) -> "TriadOrbitQuery":
        q = np.asarray(q, dtype=float)
        m = model(_level(q.size))
        idx = m.coords(triad, variant)
        return cls(triad, variant, idx, q[list(idx)].copy(), triad.rates(variant), triad.weights)

    @property
    def E(self) -> float:
        return float(np.sum(self.y ** 2))

    @property
    def En(self) -> float:
        return float(np.sum(self.y ** 2 / self.weights))

    @property
    def scale(self) -> float:
        return math.sqrt(self.E)

    @property
    def distinct_norms(self) -> bool:
        return len(set(self.weights.tolist())) == 3

    @property
    def order(self):
        if not self.distinct_norms:
            raise UsageError("norm ordering needs three distinct mode norms")
        return tuple(int(i) for i in np.argsort(self.weights, kind="stable"))

    @property
    def is_degenerate(self) -> bool:
        """True when the state sits on the degenerate level ``E_i = |mid|^2 En_i``."""
        mid = self.order[1]
        return abs(self.E - self.weights[mid] * self.En) <= DEGENERACY_TOL * max(self.E, 1e-300)

    @property
    def regime(self) -> str:
        """``'lo'`` or ``'hi'``: the axis that the orbit circles."""
        if self.is_degenerate:
            raise DegenerateOrbitError("orbit passes through a fixed point (degenerate level)")
        return "lo" if self.E < self.weights[self.order[1]] * self.En else "hi"

    def flow(self, t: float) -> np.ndarray:
        return _flow3(self.y, self.rates, self.weights, t)


def _flow3(y, A, w, t):
    zero = np.flatnonzero(A == 0.0)
    if zero.size == 1:
        f = int(zero[0])
        p, r = [i for i in range(3) if i != f]
        out = np.array(y, dtype=float)
        om = A[p] * y[f]
        if om != 0.0 and t != 0.0:
            s, c = math.sin(om * t), math.cos(om * t)
            out[p] = y[p] * c + y[r] * s
            out[r] = -y[p] * s + y[r] * c
        return out
    a, b, c, st = K.triad3(float(y[0]), float(y[1]), float(y[2]), float(A[0]), float(A[1]),
                           float(A[2]), float(w[0]), float(w[1]), float(w[2]), float(t))
    if st != K.STATUS_OK:
        raise IntegrationError("triad flow failed")
    return np.array([a, b, c])


def _query(q, triad, variant):
    if isinstance(q, TriadOrbitQuery):
        return q
    if triad is None or variant is None:
        raise UsageError("triad and variant are required with a raw state")
    return TriadOrbitQuery.from_state(q, triad, variant)


def partial_invariants(q, triad: Optional[Triad] = None, variant: Optional[str] = None):
    """``(E_i, En_i)``: unweighted and ``1/|.|^2``-weighted sums of squares over the triad."""
    Q = _query(q, triad, variant)
    return Q.E, Q.En


def _time_step(Q):
    rate = float(np.max(np.abs(Q.rates))) * Q.scale
    if rate == 0.0:
        raise ZeroRateError("triad coefficients vanish")
    return 0.05 / rate


def _march(Q, accept, event):
    """Follow the orbit from ``Q.y`` in steps; return the bracket where ``event`` fires.

    ``event(y_prev, y_next)`` returns True when a root of interest lies in the
    step; ``accept(y_prev, y_next)`` returns False to request a smaller step.
    """
    dt = _time_step(Q)
    t = 0.0
    y = Q.y.copy()
    for _ in range(MAX_MARCH):
        yn = Q.flow(t + dt)
        if not accept(y, yn):
            dt *= 0.5
            continue
        if event(y, yn):
            return t, t + dt, y, yn
        t += dt
        y = yn
        dt *= 1.25
        dt = min(dt, 4.0 * _time_step(Q))
    raise DegenerateOrbitError("no crossing found within the marching budget; "
                               "the orbit is at or too close to the degenerate level")


def zeroing_time(q, triad: Optional[Triad] = None, variant: Optional[str] = None,
                 target: str = "middle") -> float:
    """Time at which the middle-norm (or largest-norm) designated coordinate vanishes.

    Surviving coordinates keep their initial signs. ``target='largest'`` needs
    the orbit to circle the smallest-norm axis.
    """
    Q = _query(q, triad, variant)
    lo, mid, hi = Q.order
    if target == "middle":
        z = mid
    elif target == "largest":
        z = hi
    else:
        raise UsageError(f"target must be 'middle' or 'largest', got {target!r}")
    if Q.y[z] == 0.0:
        return 0.0
    if np.count_nonzero(Q.y) < 2:
        raise DegenerateOrbitError("state is a fixed point of the triad field")
    regime = Q.regime
    if target == "largest" and regime != "lo":
        raise DegenerateOrbitError(
            "the largest-norm coordinate never vanishes on this orbit (it circles that axis)")
    survivors = [i for i in range(3) if i != z]
    want = {i: _sign(Q.y[i]) for i in survivors}

    def fits(y):
        return all(_sign(y[i]) == want[i] for i in survivors)

    def accept(y, yn):
        return abs(yn[z] - y[z]) <= 0.5 * Q.scale

    def event(y, yn):
        return (y[z] == 0.0 or y[z] * yn[z] <= 0.0) and fits(yn) and fits(y)

    t0, t1, y0, y1 = _march(Q, accept, event)
    if y0[z] == 0.0:
        return t0
    if y1[z] == 0.0:
        return t1
    tau = brentq(lambda s: Q.flow(s)[z], t0, t1, xtol=TIME_TOL, rtol=4 * np.finfo(float).eps)
    yt = Q.flow(tau)
    if abs(yt[z]) >= ZERO_TOL * Q.scale or not fits(yt):
        raise DegenerateOrbitError("root refinement did not reach the zeroing tolerance")
    return float(tau)


def activation_time(q, triad: Optional[Triad] = None, variant: Optional[str] = None) -> float:
    """Small time after which all three designated coordinates are clearly nonzero."""
    Q = _query(q, triad, variant)
    nz = np.flatnonzero(Q.y != 0.0)
    if nz.size < 2:
        raise InsufficientActivityError("fewer than two designated coordinates are nonzero")
    floor = ACTIVE_TOL * Q.scale

    def ok(y):
        return np.all(np.abs(y) > floor) and all(_sign(y[i]) == _sign(Q.y[i]) for i in nz)

    if ok(Q.y):
        return 0.0
    zeros = np.flatnonzero(Q.y == 0.0)
    if zeros.size == 1:
        z = int(zeros[0])
        a, b = [i for i in range(3) if i != z]
        speed = abs(Q.rates[z] * Q.y[a] * Q.y[b])
        if speed == 0.0:
            raise InsufficientActivityError("the inactive coordinate has zero coupling to the others")
        tau = 100.0 * floor / speed
    else:
        tau = 0.01 * _time_step(Q)
    cap = 1e3 * _time_step(Q)
    lo_tau = tau
    while tau <= cap:
        if ok(Q.flow(tau)):
            return float(tau)
        tau *= 2.0
    tau = lo_tau / 2.0
    while tau > 1e-12 * lo_tau:
        if ok(Q.flow(tau)):
            return float(tau)
        tau /= 2.0
    raise PreconditionError("no activation time found; coordinates too close to zero")


def pair_rotation_time(q, triad: Optional[Triad] = None, variant: Optional[str] = None,
                       theta: float = 0.0) -> float:
    """Time taking the equal-norm pair to ``radius * (cos theta, sin theta)``.

    The pair is ``(q_j, q_k)`` when ``|j| = |k|`` and in general the two
    modes of equal norm in role order; the third coordinate is unchanged.
    """
    Q = _query(q, triad, variant)
    zero = np.flatnonzero(Q.rates == 0.0)
    if zero.size != 1:
        raise UsageError("pair rotation needs a triad with exactly two equal mode norms")
    f = int(zero[0])
    p, r = [i for i in range(3) if i != f]
    om = Q.rates[p] * Q.y[f]
    if om == 0.0:
        raise ZeroRateError("the fixed coordinate is zero, so the pair does not rotate")
    if Q.y[p] == 0.0 and Q.y[r] == 0.0:
        return 0.0
    phase = math.atan2(Q.y[r], Q.y[p])
    # the flow decreases the phase at rate om
    delta = (phase - theta) if om > 0 else (theta - phase)
    return float(math.fmod(math.fmod(delta, 2 * math.pi) + 2 * math.pi, 2 * math.pi) / abs(om))


def _winding_pair(Q):
    lo, mid, hi = Q.order
    return (mid, hi) if Q.regime == "lo" else (lo, mid)


def _turn(y, yn, a, b):
    return math.atan2(y[a] * yn[b] - y[b] * yn[a], y[a] * yn[a] + y[b] * yn[b])


def orbit_period(q, triad: Optional[Triad] = None, variant: Optional[str] = None) -> float:
    """Period of the closed triad orbit through the state."""
    Q = _query(q, triad, variant)
    zero = np.flatnonzero(Q.rates == 0.0)
    if zero.size == 1:
        f = int(zero[0])
        p = [i for i in range(3) if i != f][0]
        om = Q.rates[p] * Q.y[f]
        if om == 0.0:
            raise ZeroRateError("the fixed coordinate is zero; every state is fixed")
        return 2 * math.pi / abs(om)
    if np.count_nonzero(Q.y) < 2:
        raise DegenerateOrbitError("state is a fixed point of the triad field")
    a, b = _winding_pair(Q)
    acc = [0.0]

    def accept(y, yn):
        return abs(_turn(y, yn, a, b)) <= _MAX_TURN

    def event(y, yn):
        d = _turn(y, yn, a, b)
        if abs(acc[0] + d) >= 2 * math.pi:
            return True
        acc[0] += d
        return False

    t0, t1, y0, _ = _march(Q, accept, event)
    base = acc[0]
    return float(brentq(lambda s: abs(base + _turn(y0, Q.flow(s), a, b)) - 2 * math.pi,
                        t0, t1, xtol=TIME_TOL, rtol=4 * np.finfo(float).eps))


def apply_triad_time(q, triad: Triad, variant: str, t: float) -> np.ndarray:
    """Full state after flowing one triad field for ``t`` (thin wrapper for callers)."""
    Q = TriadOrbitQuery.from_state(q, triad, variant)
    out = np.array(q, dtype=float, copy=True)
    out[list(Q.coords)] = Q.flow(t)
    return out
