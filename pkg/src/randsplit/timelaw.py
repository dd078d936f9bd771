"""Distributions of the random flow durations and seeded draw streams."""

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import ConfigurationError

LAW_CODES = {
    "exponential": K.LAW_EXPONENTIAL,
    "gamma": K.LAW_GAMMA,
    "uniform-positive": K.LAW_UNIFORM,
}

_U64 = 2**64


def as_seed(seed) -> np.uint64:
    """Validate a 64-bit root seed."""
    try:
        s = int(seed)
    except (TypeError, ValueError):
        raise ConfigurationError(f"seed must be an integer, got {seed!r}") from None
    if s != seed or not 0 <= s < _U64:
        raise ConfigurationError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    return np.uint64(s)


@dataclass(frozen=True)
class TimeLaw:
    """Law of one flow duration.

    ``kind`` is ``exponential`` (the default), ``gamma`` with the given
    ``shape`` and scale ``mean / shape``, or ``uniform-positive`` on
    ``[0, 2 * mean]``. Every kind has mean ``mean``.
    """

    kind: str = "exponential"
    mean: float = 0.1
    shape: float = 2.0

    def __post_init__(self):
        if self.kind not in LAW_CODES:
            raise ConfigurationError(
                f"unknown time law {self.kind!r}; expected one of {sorted(LAW_CODES)}")
        if not np.isfinite(self.mean) or self.mean <= 0:
            raise ConfigurationError(f"time-law mean must be positive, got {self.mean!r}")
        if self.kind == "gamma" and (not np.isfinite(self.shape) or self.shape <= 0):
            raise ConfigurationError(f"gamma shape must be positive, got {self.shape!r}")

    @property
    def code(self) -> int:
        return LAW_CODES[self.kind]

    def with_mean(self, mean: float) -> "TimeLaw":
        return TimeLaw(self.kind, mean, self.shape)

    def laplace(self, s: float) -> float:
        """``E exp(-s T)`` for a duration ``T`` of this law and ``s >= 0``."""
        if s == 0:
            return 1.0
        if self.kind == "exponential":
            return 1.0 / (1.0 + s * self.mean)
        if self.kind == "gamma":
            return (1.0 + s * self.mean / self.shape) ** (-self.shape)
        a = 2.0 * s * self.mean
        return float(-np.expm1(-a) / a)


@dataclass
class Stream:
    """Position in the counter-based draw sequence of ``(seed, stream)``.

    Drawing advances ``position``; resetting it to an earlier value replays
    exactly the same durations.
    """

    seed: int
    stream: int = 0
    position: int = 0

    @property
    def key(self) -> np.uint64:
        return K.key_for(as_seed(self.seed), self.stream)


def sample_cycle_times(law: TimeLaw, count: int, rng: Stream) -> np.ndarray:
    """Draw ``count`` independent durations and advance the stream."""
    if not isinstance(law, TimeLaw):
        raise ConfigurationError("law must be a TimeLaw")
    if int(count) != count or count < 1:
        raise ConfigurationError(f"count must be a positive integer, got {count!r}")
    out = np.empty(int(count))
    K.fill_times(out, rng.key, rng.position, law.code, float(law.mean), float(law.shape))
    rng.position += int(count)
    return out
