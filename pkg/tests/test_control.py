import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from randsplit import control as C, euler2d as E
from randsplit.errors import (DegenerateOrbitError, InsufficientActivityError, UsageError,
                              ZeroRateError)

TRIADS = E.enumerate_triads(2)
DISTINCT = [t for t in TRIADS if len(set(t.weights.tolist())) == 3]
EQUAL = [t for t in TRIADS if len(set(t.weights.tolist())) < 3]


def random_case(rng, pool=DISTINCT):
    tr = pool[rng.integers(len(pool))]
    v = E.VARIANTS[rng.integers(4)]
    return tr, v, rng.standard_normal(24)


def oracle_first_crossing(Q, z, t_max):
    """First time the z-th coordinate vanishes with survivors on their initial signs (dense RK)."""
    A = Q.rates
    rhs = lambda t, y: A * np.array([y[1] * y[2], y[0] * y[2], y[0] * y[1]])
    ev = lambda t, y: y[z]
    sol = solve_ivp(rhs, (0, t_max), Q.y, method="DOP853", rtol=1e-12, atol=1e-14,
                    events=ev, dense_output=True)
    surv = [i for i in range(3) if i != z]
    for t in sol.t_events[0]:
        y = sol.sol(t)
        if all(np.sign(y[i]) == np.sign(Q.y[i]) for i in surv):
            return t
    return None


def test_partial_invariant_examples():
    tr = DISTINCT[0]
    q = np.zeros(24)
    assert C.partial_invariants(q, tr, "aaa") == (0.0, 0.0)
    i = E.model(2).coords(tr, "aaa")[0]
    q[i] = 1.7
    E_, En = C.partial_invariants(q, tr, "aaa")
    assert E_ == pytest.approx(1.7 ** 2) and En == pytest.approx(1.7 ** 2 / tr.weights[0])


def test_partial_invariants_conserved_along_triad_flow(rng):
    for _ in range(20):
        tr, v, q = random_case(rng, TRIADS)
        a = np.array(C.partial_invariants(q, tr, v))
        b = np.array(C.partial_invariants(E.triad_flow(q, tr, v, rng.uniform(-20, 20)), tr, v))
        np.testing.assert_allclose(a, b, rtol=1e-10)


def test_zeroing_time_middle_mode_against_dense_oracle(rng):
    for _ in range(40):
        tr, v, q = random_case(rng)
        Q = C.TriadOrbitQuery.from_state(q, tr, v)
        tau = C.zeroing_time(q, tr, v)
        y = Q.flow(tau)
        lo, mid, hi = Q.order
        assert abs(y[mid]) < 1e-9 * Q.scale
        for i in (lo, hi):
            assert np.sign(y[i]) == np.sign(Q.y[i]) and y[i] != 0
        ref = oracle_first_crossing(Q, mid, tau + 1.0)
        assert ref is not None and abs(ref - tau) < 1e-6 * max(1.0, tau)


def test_zeroing_time_largest_mode_when_circling_the_small_axis(rng):
    done = 0
    while done < 10:
        tr, v, q = random_case(rng)
        Q = C.TriadOrbitQuery.from_state(q, tr, v)
        if Q.regime != "lo":
            with pytest.raises(DegenerateOrbitError):
                C.zeroing_time(q, tr, v, target="largest")
            continue
        tau = C.zeroing_time(q, tr, v, target="largest")
        y = Q.flow(tau)
        lo, mid, hi = Q.order
        assert abs(y[hi]) < 1e-9 * Q.scale
        assert np.sign(y[lo]) == np.sign(Q.y[lo]) and np.sign(y[mid]) == np.sign(Q.y[mid])
        done += 1


def test_zeroing_target_already_zero():
    tr = DISTINCT[1]
    Q0 = C.TriadOrbitQuery.from_state(np.ones(24), tr, "aaa")
    q = np.ones(24)
    q[Q0.coords[Q0.order[1]]] = 0.0
    assert C.zeroing_time(q, tr, "aaa") == 0.0


def degenerate_state(tr, v, rng):
    Q = C.TriadOrbitQuery.from_state(np.zeros(24), tr, v)
    lo, mid, hi = Q.order
    w = Q.weights
    y = np.zeros(3)
    y[lo] = rng.uniform(0.5, 2)
    y[mid] = rng.uniform(0.5, 2)
    y[hi] = y[lo] * math.sqrt((w[mid] / w[lo] - 1) / (1 - w[mid] / w[hi]))
    q = rng.standard_normal(24)
    q[list(Q.coords)] = y
    return q


def test_degenerate_level_raises(rng):
    for tr in DISTINCT[:6]:
        q = degenerate_state(tr, "abb", rng)
        assert C.TriadOrbitQuery.from_state(q, tr, "abb").is_degenerate
        with pytest.raises(DegenerateOrbitError):
            C.zeroing_time(q, tr, "abb")


def test_activation_time(rng):
    tr, v, q = random_case(rng)
    assert C.activation_time(q, tr, v) == 0.0
    for _ in range(20):
        tr, v, q = random_case(rng, TRIADS)
        Q0 = C.TriadOrbitQuery.from_state(q, tr, v)
        z = int(rng.integers(3))
        if Q0.rates[z] == 0.0:
            continue
        q[Q0.coords[z]] = 0.0
        Q = C.TriadOrbitQuery.from_state(q, tr, v)
        tau = C.activation_time(q, tr, v)
        y = Q.flow(tau)
        assert tau > 0 and np.all(np.abs(y) > 1e-6 * Q.scale)
        for i in range(3):
            if i != z:
                assert np.sign(y[i]) == np.sign(Q.y[i])
        # dense sampling of the orbit: the first sample past the floor is not after tau
        ts = np.linspace(0, tau, 200)[1:]
        ok = [np.all(np.abs(Q.flow(t)) > 1e-6 * Q.scale) for t in ts]
        assert ok[-1]
    q = np.zeros(24)
    q[C.TriadOrbitQuery.from_state(q, DISTINCT[0], "aaa").coords[0]] = 1.0
    with pytest.raises(InsufficientActivityError):
        C.activation_time(q, DISTINCT[0], "aaa")


def _pair(Q):
    f = int(np.flatnonzero(Q.rates == 0.0)[0])
    p, r = [i for i in range(3) if i != f]
    return p, r, f


def test_pair_rotation(rng):
    for _ in range(30):
        tr, v, q = random_case(rng, EQUAL)
        Q = C.TriadOrbitQuery.from_state(q, tr, v)
        p, r, f = _pair(Q)
        theta = rng.uniform(-math.pi, math.pi)
        t = C.pair_rotation_time(q, tr, v, theta)
        assert t >= 0
        y = E.triad_flow(q, tr, v, t)[list(Q.coords)]
        radius = math.hypot(Q.y[p], Q.y[r])
        ang = math.atan2(y[r], y[p])
        assert abs((ang - theta + math.pi) % (2 * math.pi) - math.pi) < 1e-10
        assert math.hypot(y[p], y[r]) == pytest.approx(radius, rel=1e-12)
        assert y[f] == Q.y[f]
        phase = math.atan2(Q.y[r], Q.y[p])
        assert C.pair_rotation_time(q, tr, v, phase) == 0.0


def test_pair_rotation_quarter_turn_and_zero_rate(rng):
    tr = EQUAL[0]
    Q0 = C.TriadOrbitQuery.from_state(np.zeros(24), tr, "aaa")
    p, r, f = _pair(Q0)
    q = np.zeros(24)
    q[Q0.coords[p]], q[Q0.coords[f]] = 2.0, 0.8
    t = C.pair_rotation_time(q, tr, "aaa", math.pi / 2)
    y = E.triad_flow(q, tr, "aaa", t)
    assert abs(y[Q0.coords[p]]) < 1e-12 and abs(abs(y[Q0.coords[r]]) - 2.0) < 1e-12
    q[Q0.coords[f]] = 0.0
    with pytest.raises(ZeroRateError):
        C.pair_rotation_time(q, tr, "aaa", 1.0)
    with pytest.raises(UsageError):
        C.pair_rotation_time(q, DISTINCT[0], "aaa", 1.0)


def test_periodicity_and_reversibility(rng):
    for _ in range(15):
        tr, v, q = random_case(rng, TRIADS)
        Q = C.TriadOrbitQuery.from_state(q, tr, v)
        T = C.orbit_period(q, tr, v)
        np.testing.assert_allclose(Q.flow(T), Q.y, atol=1e-8 * Q.scale)
        s = rng.uniform(0, T)
        back = C.TriadOrbitQuery(tr, v, Q.coords, Q.flow(s), Q.rates, Q.weights).flow(T - s)
        np.testing.assert_allclose(back, Q.y, atol=1e-8 * Q.scale)
        # no earlier recurrence on a coarse sample of the orbit
        early = [np.linalg.norm(Q.flow(t) - Q.y) for t in np.linspace(0.05 * T, 0.95 * T, 40)]
        assert min(early) > 1e-6 * Q.scale


def test_apply_triad_time_touches_only_the_triad(rng):
    tr, v, q = random_case(rng)
    y = C.apply_triad_time(q, tr, v, 0.7)
    np.testing.assert_allclose(y, E.triad_flow(q, tr, v, 0.7), atol=1e-12)
