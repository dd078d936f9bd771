"""Galerkin-truncated 2D Euler / Navier-Stokes in vorticity Fourier coordinates.

States hold the real and imaginary parts of every mode of the half-lattice
``Z2_N`` interleaved: ``q[2m] = a_j`` and ``q[2m+1] = b_j`` for the ``m``-th
mode in :func:`lattice` order.

Each triad ``j + k = l`` contributes four three-mode quadratic fields. Writing
the designated coordinates as ``(y_j, y_k, y_l)``, each field reads
``y_j' = A_j y_k y_l``, ``y_k' = A_k y_j y_l``, ``y_l' = A_l y_j y_k`` with

=======  ==========================  =================================
variant  coordinates                 ``(A_j, A_k, A_l)``
=======  ==========================  =================================
aaa      ``(a_j, a_k, a_l)``         ``( C_kl,  C_jl, -C_jk)``
abb      ``(a_j, b_k, b_l)``         ``( C_kl,  C_jl, -C_jk)``
bab      ``(b_j, a_k, b_l)``         ``( C_kl,  C_jl, -C_jk)``
bba      ``(b_j, b_k, a_l)``         ``(-C_kl, -C_jl,  C_jk)``
=======  ==========================  =================================

Every field conserves energy ``sum |q_j|^2 / |j|^2`` and enstrophy
``sum |q_j|^2``. When two of the three norms coincide the corresponding
coefficient vanishes and the field is an exact rotation.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import FrozenSet, Optional, Tuple

import numpy as np

from . import _kernels as K
from .core import FieldTables, FlowPrimitive, SplittingScheme, evaluate_fields, table_flow
from .errors import ConfigurationError, DomainError, UsageError
from .timelaw import TimeLaw

VARIANTS = ("aaa", "abb", "bab", "bba")
# which part (0 = a, 1 = b) each variant uses for (j, k, l), and its sign pattern
_PARTS = {"aaa": (0, 0, 0), "abb": (0, 1, 1), "bab": (1, 0, 1), "bba": (1, 1, 0)}
_SIGNS = {"aaa": (1, 1, -1), "abb": (1, 1, -1), "bab": (1, 1, -1), "bba": (-1, -1, 1)}

DISSIPATION_KINDS = ("laplacian", "ekman")

Mode = Tuple[int, int]


def in_half_lattice(j, N: int) -> bool:
    j1, j2 = int(j[0]), int(j[1])
    return max(abs(j1), abs(j2)) <= N and (j2 > 0 or (j2 == 0 and j1 > 0))


@lru_cache(maxsize=None)
def _lattice(N: int) -> Tuple[Mode, ...]:
    return tuple((j1, j2) for j2 in range(N + 1) for j1 in range(-N, N + 1)
                 if in_half_lattice((j1, j2), N))


def lattice(N: int) -> list:
    """Modes of ``Z2_N`` in deterministic order (rows ``j2 = 0..N``, then ``j1`` ascending)."""
    if int(N) != N or N < 2:
        raise ConfigurationError(f"Galerkin truncation needs N >= 2, got {N!r}")
    return list(_lattice(int(N)))


def norm2(j) -> int:
    return int(j[0]) ** 2 + int(j[1]) ** 2


def coeff(k, l) -> float:
    """``C_kl = <k, l_perp> / (4 pi) * (1/|k|^2 - 1/|l|^2)`` with ``l_perp = (l2, -l1)``."""
    nk, nl = norm2(k), norm2(l)
    if nk == 0 or nl == 0:
        raise DomainError("interaction coefficient undefined for the zero mode")
    cross = k[0] * l[1] - k[1] * l[0]
    if cross == 0 or nk == nl:
        return 0.0
    return cross / (4.0 * np.pi) * (1.0 / nk - 1.0 / nl)


@dataclass(frozen=True)
class Triad:
    """Interacting modes ``j + k = l`` and their coefficients."""

    j: Mode
    k: Mode
    l: Mode
    c_kl: float
    c_jl: float
    c_jk: float

    @classmethod
    def from_modes(cls, j, k) -> "Triad":
        j, k = (int(j[0]), int(j[1])), (int(k[0]), int(k[1]))
        l = (j[0] + k[0], j[1] + k[1])
        return cls(j, k, l, coeff(k, l), coeff(j, l), coeff(j, k))

    @property
    def modes(self) -> Tuple[Mode, Mode, Mode]:
        return (self.j, self.k, self.l)

    @property
    def weights(self) -> np.ndarray:
        """Squared norms ``(|j|^2, |k|^2, |l|^2)``."""
        return np.array([norm2(self.j), norm2(self.k), norm2(self.l)], dtype=float)

    def rates(self, variant: str) -> np.ndarray:
        """``(A_j, A_k, A_l)`` of ``variant``."""
        s = _SIGNS[_check_variant(variant)]
        return np.array([s[0] * self.c_kl, s[1] * self.c_jl, s[2] * self.c_jk])

    @property
    def is_degenerate(self) -> bool:
        return self.c_kl == 0.0 and self.c_jl == 0.0 and self.c_jk == 0.0


def _check_variant(variant):
    if variant not in _PARTS:
        raise UsageError(f"variant must be one of {VARIANTS}, got {variant!r}")
    return variant


class EulerModel:
    """Lattice bookkeeping and triad tables for one truncation level (cached)."""

    def __init__(self, N: int):
        self.N = int(N)
        self.modes = lattice(N)
        self.index = {j: m for m, j in enumerate(self.modes)}
        self.dim = 4 * self.N * (self.N + 1)
        self.mode_norm2 = np.array([norm2(j) for j in self.modes], dtype=float)
        # |j|^2 per coordinate
        self.coord_norm2 = np.repeat(self.mode_norm2, 2)
        self.triads = self._enumerate()
        self._rhs_terms = self._direct_terms()

    def _enumerate(self):
        out = []
        for a, j in enumerate(self.modes):
            for k in self.modes[a:]:
                l = (j[0] + k[0], j[1] + k[1])
                if l in self.index:
                    tr = Triad.from_modes(j, k)
                    if not tr.is_degenerate:
                        out.append(tr)
        return out

    def coords(self, triad: Triad, variant: str) -> Tuple[int, int, int]:
        """State indices of the designated coordinates of ``variant``."""
        parts = _PARTS[_check_variant(variant)]
        try:
            return tuple(2 * self.index[m] + p for m, p in zip(triad.modes, parts))
        except KeyError:
            raise UsageError(f"triad {triad.modes} is not contained in Z2_{self.N}") from None

    def _direct_terms(self):
        # term lists for the two convolution sums of the mode equations;
        # the second runs over ordered pairs k + l = j with weight 1/2
        s1, s2 = [], []
        for j in self.modes:
            for k in self.modes:
                l = (j[0] + k[0], j[1] + k[1])
                if l in self.index:
                    s1.append((self.index[j], self.index[k], self.index[l], coeff(k, l)))
                l = (j[0] - k[0], j[1] - k[1])
                if l in self.index:
                    s2.append((self.index[j], self.index[k], self.index[l], 0.5 * coeff(k, l)))
        conv = lambda s: (np.array([t[:3] for t in s], dtype=np.int64).reshape(-1, 3),
                          np.array([t[3] for t in s], dtype=float))
        return conv(s1), conv(s2)

    def conservative_rhs(self, q: np.ndarray) -> np.ndarray:
        a, b = q[0::2], q[1::2]
        (i1, c1), (i2, c2) = self._rhs_terms
        nm = len(self.modes)
        j, k, l = i1.T
        da = np.bincount(j, c1 * (a[k] * a[l] + b[k] * b[l]), minlength=nm)
        db = np.bincount(j, c1 * (a[k] * b[l] - b[k] * a[l]), minlength=nm)
        j, k, l = i2.T
        da += np.bincount(j, c2 * (b[k] * b[l] - a[k] * a[l]), minlength=nm)
        db -= np.bincount(j, c2 * (a[k] * b[l] + b[k] * a[l]), minlength=nm)
        out = np.empty_like(q)
        out[0::2], out[1::2] = da, db
        return out


@lru_cache(maxsize=8)
def model(N: int) -> EulerModel:
    lattice(N)
    return EulerModel(int(N))


@dataclass(frozen=True)
class EulerSpec:
    N: int
    conservative: bool = True
    nu: float = 0.0
    dissipation_kind: str = "laplacian"
    forcing: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        lattice(self.N)
        if self.dissipation_kind not in DISSIPATION_KINDS:
            raise ConfigurationError(
                f"dissipation_kind must be one of {DISSIPATION_KINDS}, got {self.dissipation_kind!r}")
        if self.conservative:
            return
        if not np.isfinite(self.nu) or self.nu <= 0:
            raise ConfigurationError(f"forced Euler needs nu > 0, got {self.nu!r}")
        F = self.F
        if F.shape != (self.dim,):
            raise ConfigurationError(f"forcing must have length {self.dim}")
        if np.any(F < 0) or not np.any(F != 0) or not np.all(np.isfinite(F)):
            raise ConfigurationError("forcing entries must be finite, nonnegative and not all zero")

    @property
    def dim(self) -> int:
        return 4 * self.N * (self.N + 1)

    @property
    def model(self) -> EulerModel:
        return model(self.N)

    @property
    def F(self) -> np.ndarray:
        if self.forcing is None:
            return np.zeros(self.dim)
        F = np.asarray(self.forcing, dtype=float)
        if F.ndim == 0:
            return np.full(self.dim, float(F))
        if F.shape != (self.dim,):
            raise ConfigurationError(f"forcing must be a scalar or have length {self.dim}")
        return F.copy()

    @property
    def damping(self) -> np.ndarray:
        """Diagonal of ``Lambda`` per coordinate."""
        if self.dissipation_kind == "ekman":
            return np.ones(self.dim)
        return self.model.coord_norm2.copy()

    @property
    def alpha(self) -> float:
        """Coercivity constant of ``Lambda`` (smallest diagonal entry)."""
        return float(self.damping.min())


def _vec(q, dim):
    q = np.asarray(q, dtype=float)
    if q.shape != (dim,):
        raise UsageError(f"expected a state of length {dim}, got shape {q.shape}")
    return q


def enumerate_triads(N: int) -> list:
    """Unordered interacting pairs ``{j, k}`` with ``j + k`` in ``Z2_N``, all-zero triads omitted."""
    return list(model(N).triads)


def full_rhs(spec: EulerSpec, q) -> np.ndarray:
    """Direct evaluation of the truncated mode equations (plus ``-nu Lambda q + F`` when forced)."""
    q = _vec(q, spec.dim)
    v = spec.model.conservative_rhs(q)
    if not spec.conservative:
        v = v - spec.nu * spec.damping * q + spec.F
    return v


def energy(q) -> float:
    """``sum (a_j^2 + b_j^2) / |j|^2`` over the lattice implied by ``len(q)``."""
    q = np.asarray(q, dtype=float)
    return float(np.sum(q * q / model(_level(q.size)).coord_norm2))


def enstrophy(q) -> float:
    """``sum a_j^2 + b_j^2``."""
    q = np.asarray(q, dtype=float)
    return float(np.dot(q, q))


def _level(dim: int) -> int:
    N = int(round((np.sqrt(1 + dim) - 1) / 2))
    if 4 * N * (N + 1) != dim or N < 2:
        raise UsageError(f"{dim} is not the dimension of a truncation Z2_N with N >= 2")
    return N


def _triad_row(m: EulerModel, triad: Triad, variant: str):
    """Table row ``(fi, ff)`` of one triad field; equal-norm triads become rotations."""
    idx = m.coords(triad, variant)
    A = triad.rates(variant)
    w = triad.weights
    zero = np.flatnonzero(A == 0.0)
    if zero.size == 1:
        f = int(zero[0])
        p, r = [i for i in range(3) if i != f]
        return (K.ROTATION, idx[p], idx[r], idx[f]), (A[p], 0.0, 0.0, 0.0, 0.0, 0.0)
    return (K.TRIAD,) + idx, tuple(A) + tuple(w)


def triad_flow(q, triad: Triad, variant: str, t: float, N: Optional[int] = None) -> np.ndarray:
    """Flow one triad field for (signed) time ``t``; other coordinates are untouched."""
    q = np.asarray(q, dtype=float)
    m = model(N if N is not None else _level(q.size))
    q = _vec(q, m.dim).copy()
    fi, ff = _triad_row(m, triad, variant)
    st = K.apply_field(q, 0, float(t), np.array([fi], dtype=np.int64), np.array([ff]),
                       np.zeros(1), np.zeros(1))
    if st != K.STATUS_OK:
        from .errors import IntegrationError
        raise IntegrationError("triad flow failed", f"triad {triad.modes}, variant {variant}")
    return q


def dissipative_flow(q, t: float, spec: EulerSpec) -> np.ndarray:
    """Exact flow of ``-nu Lambda q + F``."""
    q = _vec(q, spec.dim)
    if spec.conservative:
        raise ConfigurationError("dissipative flow needs a forced spec")
    if t == 0:
        return q.copy()
    rate = spec.nu * spec.damping
    target = spec.F / rate
    return target + (q - target) * np.exp(-rate * t)


def field_tables(spec: EulerSpec) -> FieldTables:
    m = spec.model
    fis, ffs = [], []
    if not spec.conservative:
        fis.append((K.AFFINE, 0, 0, 0))
        ffs.append((0.0,) * 6)
    for tr in m.triads:
        for v in VARIANTS:
            fi, ff = _triad_row(m, tr, v)
            fis.append(fi)
            ffs.append(ff)
    if spec.conservative:
        rate, force = np.zeros(m.dim), np.zeros(m.dim)
    else:
        rate, force = spec.nu * spec.damping, spec.F
    return FieldTables(np.array(fis, dtype=np.int64), np.array(ffs, dtype=float), rate, force)


def field_ids(spec: EulerSpec) -> list:
    ids = [] if spec.conservative else ["V0"]
    for tr in spec.model.triads:
        ids += [(tr.j, tr.k, v) for v in VARIANTS]
    return ids


def splitting_fields(spec: EulerSpec, q) -> np.ndarray:
    """Field values at ``q``, one row per scheme field (``V_0`` first when forced)."""
    return evaluate_fields(field_tables(spec), _vec(q, spec.dim))


def build_scheme(spec: EulerSpec, time_law: Optional[TimeLaw] = None,
                 order_policy: str = "fixed") -> SplittingScheme:
    tables = field_tables(spec)
    fields = [FlowPrimitive(i, table_flow(tables, r)) for r, i in enumerate(field_ids(spec))]
    return SplittingScheme(fields, time_law or TimeLaw(), order_policy, tables, spec.dim, spec)


# ---------------------------------------------------------------------------
# active sets and nondegeneracy

ExtIndex = Tuple[Mode, str]


def active_tolerance(q) -> float:
    return 1e-12 * max(1.0, float(np.linalg.norm(q)))


def active_set(q, tol: Optional[float] = None) -> FrozenSet[ExtIndex]:
    """Extended indices ``(j, '+')`` for active ``a_j`` and ``(j, '-')`` for active ``b_j``."""
    q = np.asarray(q, dtype=float)
    m = model(_level(q.size))
    tol = active_tolerance(q) if tol is None else tol
    if tol < 0:
        raise UsageError("tolerance must be nonnegative")
    out = set()
    for i, j in enumerate(m.modes):
        if abs(q[2 * i]) > tol:
            out.add((j, "+"))
        if abs(q[2 * i + 1]) > tol:
            out.add((j, "-"))
    return frozenset(out)


def _type_product(s, t):
    return "+" if s == t else "-"


def oplus_closure(A, N: int) -> FrozenSet[ExtIndex]:
    """Smallest superset of ``A`` closed under the triad expansion rule."""
    lat = set(lattice(N))
    closed = set(A)
    frontier = True
    while frontier:
        frontier = False
        items = sorted(closed)
        for (j, s) in items:
            for (k, t) in items:
                if coeff(j, k) == 0.0:
                    continue
                typ = _type_product(s, t)
                for l in ((j[0] + k[0], j[1] + k[1]), (j[0] - k[0], j[1] - k[1])):
                    if l in lat and (l, typ) not in closed:
                        closed.add((l, typ))
                        frontier = True
    return frozenset(closed)


def is_nondegenerate(q, tol: Optional[float] = None) -> bool:
    q = np.asarray(q, dtype=float)
    N = _level(q.size)
    C = oplus_closure(active_set(q, tol), N)
    return ((1, 0), "+") in C and ((0, 1), "+") in C and any(
        t == "-" and norm2(j) > 1 for j, t in C)


def is_generic(q, tol: Optional[float] = None) -> bool:
    q = np.asarray(q, dtype=float)
    tol = active_tolerance(q) if tol is None else tol
    return bool(np.all(np.abs(q) > tol))


def mode_vector(N: int, entries: dict) -> np.ndarray:
    """State with ``entries[(j, 'a' | 'b')] = value`` and zeros elsewhere."""
    m = model(N)
    q = np.zeros(m.dim)
    for (j, part), val in entries.items():
        q[2 * m.index[tuple(j)] + (0 if part == "a" else 1)] = val
    return q
