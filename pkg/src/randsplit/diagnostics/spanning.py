"""Spanning-rank and Lie-bracket checks built from the analytic field formulas."""

from typing import Optional

import numpy as np

from .. import euler2d, lorenz96
from ..errors import UsageError
from .reports import RankReport

RANK_RTOL = 1e-10


def numeric_rank(A, rtol: float = RANK_RTOL):
    """``(rank, singular values, gap, threshold)`` with the threshold ``rtol * sigma_max``.

    The gap is ``sigma_r / sigma_{r+1}``; for full rank the threshold stands
    in for the missing next singular value.
    """
    s = np.linalg.svd(np.asarray(A, dtype=float), compute_uv=False)
    thr = rtol * (s[0] if s.size else 0.0)
    r = int(np.sum(s > thr))
    if r == 0:
        gap = 0.0
    elif r < s.size:
        gap = float(s[r - 1] / s[r]) if s[r] > 0 else np.inf
    else:
        gap = float(s[r - 1] / thr) if thr > 0 else np.inf
    return r, s, gap, thr


def rank_report(name, A, point, expected=None) -> RankReport:
    r, s, gap, thr = numeric_rank(A)
    return RankReport(name, np.asarray(point, dtype=float), s, r, expected, gap, thr)


# --- Lorenz-96 ---------------------------------------------------------------

def lorenz_matrix(x) -> np.ndarray:
    """Columns ``V_1(x), ..., V_{n-1}(x)``."""
    x = np.asarray(x, dtype=float)
    F = lorenz96.splitting_fields(lorenz96.LorenzSpec(x.size), x)
    return F[:-1].T


def forced_lorenz_matrix(spec: lorenz96.LorenzSpec, x) -> np.ndarray:
    """Columns ``V_0(x), V_1(x), ..., V_{n-1}(x)``."""
    F = lorenz96.splitting_fields(spec, x)
    return F[:-1].T


def forced_lorenz_determinant(spec: lorenz96.LorenzSpec, x) -> float:
    """Closed form ``x_1 x_{n-1} x_n prod_{k=2}^{n-2} x_k^2 (nu |x|^2 - <F, x>)``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    return float(x[0] * x[n - 2] * x[n - 1] * np.prod(x[1:n - 2] ** 2)
                 * (spec.nu * (x @ x) - spec.F @ x))


# --- Euler -------------------------------------------------------------------

def triad_rows(N: int, triad: euler2d.Triad):
    """State indices of ``(a_j, b_j, a_k, b_k, a_l, b_l)``."""
    m = euler2d.model(N)
    return [2 * m.index[mode] + p for mode in triad.modes for p in (0, 1)]


def _variant_field(N, triad, variant, q):
    m = euler2d.model(N)
    idx = m.coords(triad, variant)
    A = triad.rates(variant)
    y = q[list(idx)]
    v = np.zeros(q.size)
    v[idx[0]] = A[0] * y[1] * y[2]
    v[idx[1]] = A[1] * y[0] * y[2]
    v[idx[2]] = A[2] * y[0] * y[1]
    return v


def euler_triad_matrix(N: int, triad: euler2d.Triad, q) -> np.ndarray:
    """6x4 matrix of the four variant fields restricted to the triad coordinates."""
    q = np.asarray(q, dtype=float)
    rows = triad_rows(N, triad)
    return np.stack([_variant_field(N, triad, v, q)[rows] for v in euler2d.VARIANTS], axis=1)


def bracket_formula(spec: euler2d.EulerSpec, triad: euler2d.Triad, variant: str, q) -> np.ndarray:
    """``[V_0, W]`` from its closed form, for ``W`` the ``variant`` field of ``triad``.

    For designated coordinates ``(y_j, y_k, y_l)`` with rates ``A`` the
    ``p``-th component is ``A_p (F_r y_s + F_s y_r + nu (lam_p - lam_r - lam_s) y_r y_s)``,
    ``{r, s}`` being the other two roles and ``lam`` the damping weights.
    """
    return _bracket_formula(spec.N, spec.nu, spec.F, spec.damping, triad, variant, q)


def _bracket_formula(N, nu, F, lam, triad, variant, q):
    q = np.asarray(q, dtype=float)
    m = euler2d.model(N)
    idx = list(m.coords(triad, variant))
    A = triad.rates(variant)
    y, Fy, ly = q[idx], np.asarray(F, dtype=float)[idx], np.asarray(lam, dtype=float)[idx]
    out = np.zeros(q.size)
    for p in range(3):
        r, s = [i for i in range(3) if i != p]
        out[idx[p]] = A[p] * (Fy[r] * y[s] + Fy[s] * y[r] + nu * (ly[p] - ly[r] - ly[s]) * y[r] * y[s])
    return out


def _field_jacobian(N, triad, variant, q):
    m = euler2d.model(N)
    idx = list(m.coords(triad, variant))
    A = triad.rates(variant)
    y = q[idx]
    J = np.zeros((q.size, q.size))
    for p in range(3):
        r, s = [i for i in range(3) if i != p]
        J[idx[p], idx[r]] = A[p] * y[s]
        J[idx[p], idx[s]] = A[p] * y[r]
    return J


def bracket_commutator(N, nu, F, lam, triad, variant, q) -> np.ndarray:
    """``DW(q) V_0(q) - DV_0(q) W(q)`` from the analytic Jacobians."""
    q = np.asarray(q, dtype=float)
    lam = np.asarray(lam, dtype=float)
    V0 = -nu * lam * q + np.asarray(F, dtype=float)
    W = _variant_field(N, triad, variant, q)
    return _field_jacobian(N, triad, variant, q) @ V0 - (-nu * lam) * W


def bracket_residual(N: int, nu: float, F, dissipation_kind: str, triad, variant, q) -> float:
    """Largest componentwise gap between the closed form and the commutator."""
    m = euler2d.model(N)
    lam = m.coord_norm2 if dissipation_kind == "laplacian" else np.ones(m.dim)
    F = np.broadcast_to(np.asarray(F, dtype=float), (m.dim,))
    a = _bracket_formula(N, nu, F, lam, triad, variant, q)
    b = bracket_commutator(N, nu, F, lam, triad, variant, q)
    return float(np.max(np.abs(a - b)))


def bracket_check(spec: euler2d.EulerSpec, triad, variant, q) -> float:
    if spec.conservative:
        raise UsageError("the bracket check needs a forced spec")
    return bracket_residual(spec.N, spec.nu, spec.F, spec.dissipation_kind, triad, variant, q)


def forced_euler_matrix(spec: euler2d.EulerSpec, triad, q, w_variant: str = "aaa") -> np.ndarray:
    """6x6 matrix ``[V_0, four variant fields, [V_0, W]]`` on the triad coordinates."""
    q = np.asarray(q, dtype=float)
    rows = triad_rows(spec.N, triad)
    V0 = (-spec.nu * spec.damping * q + spec.F)[rows]
    br = bracket_formula(spec, triad, w_variant, q)[rows]
    return np.column_stack([V0, euler_triad_matrix(spec.N, triad, q), br])


def full_coefficient_triads(N: int) -> list:
    """Triads whose three coefficients are all nonzero (distinct mode norms)."""
    return [t for t in euler2d.enumerate_triads(N)
            if t.c_kl != 0.0 and t.c_jl != 0.0 and t.c_jk != 0.0]


def rank_tests(spec, point, triad: Optional[euler2d.Triad] = None,
               w_variant: str = "aaa") -> list:
    """Rank reports of every matrix the model supports at ``point``.

    Lorenz-96: ``[V_1..V_{n-1}]`` (expected ``n-1``) and, when forced,
    ``[V_0..V_{n-1}]`` (expected ``n``). Euler: ``M``, ``M'``, ``M''`` of
    ``triad`` (expected 4, 3, 2) and, when forced, the 6x6 matrix with
    ``V_0`` and ``[V_0, W]`` (expected 6).
    """
    point = np.asarray(point, dtype=float)
    out = []
    if isinstance(spec, lorenz96.LorenzSpec):
        out.append(rank_report("lorenz_V1..Vn-1", lorenz_matrix(point), point, spec.n - 1))
        if not spec.conservative:
            out.append(rank_report("lorenz_V0..Vn-1", forced_lorenz_matrix(spec, point), point,
                                   spec.n))
        return out
    if not isinstance(spec, euler2d.EulerSpec):
        raise UsageError("rank tests support Lorenz-96 and Euler specs")
    if triad is None:
        triad = full_coefficient_triads(spec.N)[0]
    M = euler_triad_matrix(spec.N, triad, point)
    out.append(rank_report("M", M, point, 4))
    out.append(rank_report("M'", M[2:], point, 3))
    out.append(rank_report("M''", M[4:], point, 2))
    if not spec.conservative:
        out.append(rank_report("forced_6x6", forced_euler_matrix(spec, triad, point, w_variant),
                               point, 6))
    return out


def generic_point(dim: int, rng) -> np.ndarray:
    """Coordinates with magnitudes in [0.5, 2] and random signs."""
    return rng.uniform(0.5, 2.0, dim) * rng.choice([-1.0, 1.0], dim)
