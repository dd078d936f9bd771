"""Uniform access to the two models (and ad hoc ones) for the diagnostics."""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import euler2d, lorenz96
from ..errors import UsageError
from ..timelaw import TimeLaw


@dataclass(frozen=True)
class CustomModel:
    """Any model given by a scheme factory and its exact right-hand side."""

    build: Callable[[TimeLaw], object]
    rhs: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"


def build_scheme(spec, law: TimeLaw, order_policy: str = "fixed"):
    if isinstance(spec, lorenz96.LorenzSpec):
        return lorenz96.build_scheme(spec, law, order_policy)
    if isinstance(spec, euler2d.EulerSpec):
        return euler2d.build_scheme(spec, law, order_policy)
    if isinstance(spec, CustomModel):
        return spec.build(law)
    raise UsageError(f"unsupported model specification {type(spec).__name__}")


def rhs(spec) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(spec, lorenz96.LorenzSpec):
        return lambda x: lorenz96.full_rhs(spec, x)
    if isinstance(spec, euler2d.EulerSpec):
        return lambda x: euler2d.full_rhs(spec, x)
    if isinstance(spec, CustomModel):
        return spec.rhs
    raise UsageError(f"unsupported model specification {type(spec).__name__}")


def name(spec) -> str:
    if isinstance(spec, lorenz96.LorenzSpec):
        return "lorenz96"
    if isinstance(spec, euler2d.EulerSpec):
        return "euler2d"
    return getattr(spec, "name", "custom")
