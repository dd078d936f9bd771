"""Structured results returned by the diagnostic procedures."""

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


class _Report:
    def to_dict(self) -> dict:
        return _plain(asdict(self))


@dataclass
class ConvergenceReport(_Report):
    """Errors against the exact flow on a grid of step sizes (or ``m`` values).

    ``errors`` and ``standard_errors`` have one row per grid point and one
    column per observable. ``used`` marks points kept in the slope fit.
    """

    kind: str
    grid: np.ndarray
    errors: np.ndarray
    standard_errors: np.ndarray
    observables: list
    slopes: np.ndarray
    used: np.ndarray
    inconclusive: np.ndarray
    reference_error: float = 0.0
    reference_dominant: bool = True
    notes: list = field(default_factory=list)

    def monotone(self, col: int = 0) -> bool:
        """Errors strictly decrease along the grid on the points kept for fitting."""
        e = self.errors[self.used[:, col], col]
        return bool(np.all(np.diff(e) < 0))


@dataclass
class RankReport(_Report):
    matrix: str
    point: np.ndarray
    singular_values: np.ndarray
    rank: int
    expected_rank: Optional[int] = None
    gap: float = np.inf
    threshold: float = 0.0

    @property
    def passed(self) -> bool:
        return self.expected_rank is None or self.rank == self.expected_rank


@dataclass
class ErgodicReport(_Report):
    """Per-coordinate moments with batch-means standard errors.

    For a reference comparison ``reference2``/``reference4`` hold the target
    values; for a two-run comparison ``other2``/``other_se2`` hold the
    second run. ``z2``/``z4`` are standardized deviations.
    """

    kind: str
    cycles: int
    burn_in: int
    n_batches: int
    moment2: np.ndarray
    se2: np.ndarray
    moment4: np.ndarray
    se4: np.ndarray
    z2: np.ndarray
    z4: Optional[np.ndarray] = None
    reference2: Optional[np.ndarray] = None
    reference4: Optional[np.ndarray] = None
    other2: Optional[np.ndarray] = None
    other_se2: Optional[np.ndarray] = None
    threshold: float = 4.0

    @property
    def passed(self) -> bool:
        ok = bool(np.all(np.abs(self.z2) <= self.threshold))
        if self.z4 is not None:
            ok = ok and bool(np.all(np.abs(self.z4) <= self.threshold))
        return ok


@dataclass
class LyapunovReport(_Report):
    """Pathwise bound check along one trajectory."""

    cycles: int
    min_slack: float
    min_relative_slack: float
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0


@dataclass
class DriftReport(_Report):
    """Monte Carlo check of ``E|Phi(x)| <= gamma |x| + K`` at one radius."""

    radius: float
    mean_norm: float
    standard_error: float
    bound: float
    gamma: float
    K: float
    threshold: float = 3.0

    @property
    def passed(self) -> bool:
        return self.mean_norm <= self.bound + self.threshold * self.standard_error
