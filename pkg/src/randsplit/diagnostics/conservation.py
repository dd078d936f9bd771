"""Conservation drift along conservative chains."""

import numpy as np

from .. import core, euler2d, lorenz96
from ..errors import UsageError
from ..timelaw import TimeLaw


def invariants(spec, X) -> np.ndarray:
    """Conserved quantities per state (rows of ``X``)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if isinstance(spec, lorenz96.LorenzSpec):
        return np.sqrt(np.einsum("ij,ij->i", X, X))[:, None]
    if isinstance(spec, euler2d.EulerSpec):
        w = spec.model.coord_norm2
        return np.column_stack([np.sum(X * X / w, axis=1), np.einsum("ij,ij->i", X, X)])
    raise UsageError("unsupported model specification")


def conservation_drift(spec, x0, cycles: int, h: float, seed: int, record_every: int = 1,
                       law_kind: str = "exponential") -> np.ndarray:
    """Largest relative drift of each invariant over the recorded states.

    Lorenz-96: the Euclidean norm. Euler: energy then enstrophy.
    """
    if not spec.conservative:
        raise UsageError("conservation drift needs the conservative model")
    scheme = (lorenz96 if isinstance(spec, lorenz96.LorenzSpec) else euler2d).build_scheme(
        spec, TimeLaw(law_kind, h))
    tr = core.run_chain(scheme, x0, core.ChainRunConfig(cycles, seed, record_every))
    inv = invariants(spec, tr.states)
    return np.max(np.abs(inv / inv[0] - 1.0), axis=0)
