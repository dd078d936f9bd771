import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from randsplit import core, euler2d as E
from randsplit.errors import ConfigurationError, DomainError, UsageError
from randsplit.reference import IntegratorConfig, integrate
from randsplit.timelaw import TimeLaw

from conftest import rel_err


def c_oracle(k, l):
    """Interaction coefficient written out from its definition."""
    lperp = (l[1], -l[0])
    return (k[0] * lperp[0] + k[1] * lperp[1]) / (4 * math.pi) * (
        1 / (k[0] ** 2 + k[1] ** 2) - 1 / (l[0] ** 2 + l[1] ** 2))


def complex_galerkin_rhs(N, q):
    """``-sum_{k+l=j} C_kl q_k q_l`` over the full truncated box with ``q_{-j} = conj(q_j)``."""
    m = E.model(N)
    Z = {}
    for i, j in enumerate(m.modes):
        z = q[2 * i] + 1j * q[2 * i + 1]
        Z[j], Z[(-j[0], -j[1])] = z, np.conj(z)
    out = np.zeros(m.dim)
    for i, j in enumerate(m.modes):
        s = sum(c_oracle(k, (j[0] - k[0], j[1] - k[1])) * Z[k] * Z[(j[0] - k[0], j[1] - k[1])]
                for k in Z if (j[0] - k[0], j[1] - k[1]) in Z)
        out[2 * i], out[2 * i + 1] = (-s).real, (-s).imag
    return out


@pytest.mark.parametrize("N,size", [(2, 12), (3, 24), (4, 40)])
def test_lattice_size_and_membership(N, size):
    lat = E.lattice(N)
    assert len(lat) == size == 2 * N * (N + 1)
    assert len(set(lat)) == size
    for j1, j2 in lat:
        assert max(abs(j1), abs(j2)) <= N and (j2 > 0 or (j2 == 0 and j1 > 0))
    assert E.lattice(N) == lat


def test_lattice_rejects_small_N():
    with pytest.raises(ConfigurationError):
        E.lattice(1)


def test_coefficient_examples():
    assert E.coeff((1, 0), (0, 1)) == 0.0
    assert E.coeff((1, 0), (1, 1)) == pytest.approx(1 / (8 * math.pi), rel=1e-15)
    assert 1 / (8 * math.pi) == pytest.approx(0.039788735, abs=1e-9)
    with pytest.raises(DomainError):
        E.coeff((0, 0), (1, 1))


@given(k=st.tuples(st.integers(-5, 5), st.integers(-5, 5)),
       l=st.tuples(st.integers(-5, 5), st.integers(-5, 5)))
def test_coefficient_formula_and_antisymmetries(k, l):
    if k == (0, 0) or l == (0, 0):
        return
    c = E.coeff(k, l)
    assert c == pytest.approx(c_oracle(k, l), abs=1e-15)
    mk, ml = (-k[0], -k[1]), (-l[0], -l[1])
    assert E.coeff(mk, ml) == pytest.approx(c, abs=1e-15)
    assert E.coeff(mk, l) == pytest.approx(-c, abs=1e-15)


@pytest.mark.parametrize("N", [2, 3, 4])
def test_triad_identities(N):
    for t in E.enumerate_triads(N):
        assert (t.j[0] + t.k[0], t.j[1] + t.k[1]) == t.l
        wj, wk, wl = t.weights
        assert abs(t.c_kl + t.c_jl - t.c_jk) < 1e-14
        assert abs(t.c_kl / wj + t.c_jl / wk - t.c_jk / wl) < 1e-14
        assert not t.is_degenerate


def test_triad_counts():
    ts = E.enumerate_triads(2)
    assert len(ts) == 22
    assert sum(len(set(t.weights.tolist())) < 3 for t in ts) == 10
    assert len(E.enumerate_triads(3)) == 96
    assert len({frozenset((t.j, t.k)) for t in ts}) == len(ts)


@pytest.mark.parametrize("N", [2, 3])
def test_field_sum_equals_direct_rhs(N, rng):
    spec = E.EulerSpec(N)
    for _ in range(100):
        q = rng.standard_normal(spec.dim) * rng.uniform(0.1, 10)
        assert rel_err(E.splitting_fields(spec, q).sum(axis=0), E.full_rhs(spec, q)) < 1e-12


@pytest.mark.parametrize("N", [2, 3])
def test_mode_equations_are_half_the_complex_galerkin_nonlinearity(N, rng):
    """The real mode equations advance the complex Galerkin system at half speed."""
    spec = E.EulerSpec(N)
    for _ in range(10):
        q = rng.standard_normal(spec.dim)
        np.testing.assert_allclose(E.full_rhs(spec, q), 0.5 * complex_galerkin_rhs(N, q),
                                   rtol=1e-12, atol=1e-13)


def test_rhs_examples_and_conservation(rng):
    spec = E.EulerSpec(2)
    np.testing.assert_array_equal(E.full_rhs(spec, np.zeros(24)), np.zeros(24))
    single = E.mode_vector(2, {((1, 1), "a"): 1.3, ((1, 1), "b"): -0.4})
    np.testing.assert_array_equal(E.full_rhs(spec, single), np.zeros(24))
    w = spec.model.coord_norm2
    for _ in range(100):
        q = rng.standard_normal(24)
        v = E.full_rhs(spec, q)
        scale = np.abs(v).max() * np.abs(q).max()
        assert abs(v @ (2 * q / w)) <= 1e-12 * scale * 24
        assert abs(v @ (2 * q)) <= 1e-12 * scale * 24


def test_energy_enstrophy_examples():
    assert (E.energy(np.zeros(24)), E.enstrophy(np.zeros(24))) == (0.0, 0.0)
    q = E.mode_vector(2, {((1, 0), "a"): 3.0})
    assert (E.energy(q), E.enstrophy(q)) == (9.0, 9.0)
    q = E.mode_vector(2, {((2, 0), "a"): 3.0})
    assert (E.energy(q), E.enstrophy(q)) == (9.0 / 4, 9.0)


def _triad_rhs(tr, v, N):
    m = E.model(N)
    idx = m.coords(tr, v)
    A = tr.rates(v)

    def rhs(q):
        out = np.zeros_like(q)
        y = q[list(idx)]
        out[list(idx)] = A * np.array([y[1] * y[2], y[0] * y[2], y[0] * y[1]])
        return out
    return rhs


def test_triad_flow_identity_and_locality(rng):
    tr = E.enumerate_triads(2)[0]
    q = rng.standard_normal(24)
    idx = list(E.model(2).coords(tr, "abb"))
    z = q.copy()
    z[idx] = 0.0
    np.testing.assert_array_equal(E.triad_flow(z, tr, "abb", 3.0), z)
    y = E.triad_flow(q, tr, "abb", 3.0)
    rest = np.setdiff1d(np.arange(24), idx)
    np.testing.assert_array_equal(y[rest], q[rest])


def test_equal_norm_triad_is_a_closed_form_rotation(rng):
    tr = next(t for t in E.enumerate_triads(2) if t.weights[0] == t.weights[1])
    for v in E.VARIANTS:
        q = rng.standard_normal(24)
        j, k, l = E.model(2).coords(tr, v)
        om = tr.rates(v)[0] * q[l]
        t = 2.7
        y = E.triad_flow(q, tr, v, t)
        c, s = math.cos(om * t), math.sin(om * t)
        np.testing.assert_allclose([y[j], y[k]], [q[j] * c + q[k] * s, -q[j] * s + q[k] * c],
                                   atol=1e-12)
        assert y[l] == q[l]


def test_generic_triad_matches_reference_over_long_times(rng):
    cfg = IntegratorConfig(1e-12, 1e-14)
    tr = next(t for t in E.enumerate_triads(2) if len(set(t.weights.tolist())) == 3)
    for v in E.VARIANTS:
        q = rng.standard_normal(24)
        for t in (-3.0, 40.0):
            y = E.triad_flow(q, tr, v, t)
            f = _triad_rhs(tr, v, 2)
            if t > 0:
                ref = integrate(f, q, t, cfg)
            else:
                ref = integrate(lambda x: -f(x), q, -t, cfg)
            np.testing.assert_allclose(y, ref, atol=1e-9)
            assert abs(E.energy(y) / E.energy(q) - 1) < 1e-10
            assert abs(E.enstrophy(y) / E.enstrophy(q) - 1) < 1e-10


@pytest.mark.parametrize("kind", ["laplacian", "ekman"])
def test_dissipative_flow(kind, rng):
    F = rng.uniform(0, 1, 24)
    spec = E.EulerSpec(2, False, 0.3, kind, F)
    q = rng.standard_normal(24)
    np.testing.assert_array_equal(E.dissipative_flow(q, 0.0, spec), q)
    eq = F / (0.3 * spec.damping)
    np.testing.assert_allclose(E.dissipative_flow(eq, 5.0, spec), eq, rtol=1e-15)
    ref = integrate(lambda x: -0.3 * spec.damping * x + F, q, 0.8)
    np.testing.assert_allclose(E.dissipative_flow(q, 0.8, spec), ref, atol=1e-10)
    assert spec.alpha == 1.0


def test_active_sets_and_nondegeneracy(rng):
    q = E.mode_vector(2, {((1, 0), "a"): 1.0})
    assert E.oplus_closure(E.active_set(q), 2) == {((1, 0), "+")}
    assert not E.is_nondegenerate(q)
    real = rng.standard_normal(24)
    real[1::2] = 0.0
    assert all(t == "+" for _, t in E.oplus_closure(E.active_set(real), 2))
    assert not E.is_nondegenerate(real)
    for _ in range(20):
        g = rng.uniform(0.5, 2, 24) * rng.choice([-1, 1], 24)
        assert E.is_generic(g) and E.is_nondegenerate(g)


@given(mask=arrays(bool, 24), N=st.just(2))
def test_closure_is_extensive_and_idempotent(mask, N):
    q = np.where(mask, 1.0, 0.0)
    A = E.active_set(q)
    C = E.oplus_closure(A, N)
    assert A <= C
    assert E.oplus_closure(C, N) == C


def test_purely_real_states_stay_real_exactly(rng):
    q = rng.standard_normal(24)
    q[1::2] = 0.0
    tr = core.run_chain(E.build_scheme(E.EulerSpec(2), TimeLaw("exponential", 0.5)), q,
                        core.ChainRunConfig(1000, seed=6, record_every=10))
    assert np.all(tr.states[:, 1::2] == 0.0)
    assert np.any(tr.states[-1, 0::2] != q[0::2])


def test_scheme_shapes():
    s = E.build_scheme(E.EulerSpec(2))
    assert s.n_fields == 4 * len(E.enumerate_triads(2))
    f = E.build_scheme(E.EulerSpec(2, False, 0.1, forcing=1.0))
    assert f.n_fields == s.n_fields + 1 and f.fields[0].id == "V0"


def test_invalid_specs():
    with pytest.raises(ConfigurationError):
        E.EulerSpec(2, dissipation_kind="hyper")
    with pytest.raises(ConfigurationError):
        E.EulerSpec(2, False, 0.0, forcing=1.0)
    with pytest.raises(ConfigurationError):
        E.EulerSpec(2, False, 0.1, forcing=np.ones(5))
    with pytest.raises(UsageError):
        E.full_rhs(E.EulerSpec(2), np.ones(23))


def test_conservative_chain_drift(rng):
    q = rng.standard_normal(24)
    tr = core.run_chain(E.build_scheme(E.EulerSpec(2), TimeLaw("exponential", 0.2)), q,
                        core.ChainRunConfig(10_000, seed=2, record_every=100))
    for f in (E.energy, E.enstrophy):
        vals = np.array([f(x) for x in tr.states])
        assert np.max(np.abs(vals / f(q) - 1)) < 1e-8
