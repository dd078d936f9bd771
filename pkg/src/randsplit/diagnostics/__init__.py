"""Experiment procedures turning the model properties into measurable checks."""

from .conservation import conservation_drift, invariants
from . import models
from .convergence import fit_slope, grid_seeds, pathwise_study, weak_error_study
from .ergodic import (chain_batch_moments, ergodic_moment_test, euler_two_run_test,
                      matched_state, sphere_fourth_moment, uniform_sphere_moments)
from .lyapunov import drift_constants, lyapunov_check, lyapunov_drift, pathwise_bound
from .models import CustomModel
from .reports import (ConvergenceReport, DriftReport, ErgodicReport, LyapunovReport,
                      RankReport)
from .spanning import (bracket_check, bracket_residual, euler_triad_matrix,
                       forced_euler_matrix, forced_lorenz_determinant, forced_lorenz_matrix,
                       full_coefficient_triads, generic_point, lorenz_matrix, numeric_rank,
                       rank_report, rank_tests)
