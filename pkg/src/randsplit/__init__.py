"""Random-splitting Markov chains for Lorenz-96 and truncated 2D Euler."""

__version__ = "0.1.0"

from .core import (ChainRunConfig, FieldTables, FlowPrimitive, SplittingScheme, Trajectory,
                   apply_cycle, estimate_kernel_average, estimate_kernel_averages,
                   pathwise_rescaled_run, run_chain)
from .timelaw import Stream, TimeLaw, sample_cycle_times
