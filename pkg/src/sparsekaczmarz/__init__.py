"""Sparse Kaczmarz, block sparse Kaczmarz and linearized Bregman solvers
for sparse and minimal-TV solutions of linear systems."""

from .control import Control, is_admissible_window
from .errors import *  # noqa: F401,F403
from .operators import (BlockPartition, RowSystem, append_rows, fourier_rows, grad2d,
                        grad2d_adjoint, residual_norm_rel, row_project, stacked_adjoint,
                        stacked_apply)
from .shrinkage import (conjugate_value, group_shrink2, nonneg_shrink, objective,
                        soft_shrink)
from .solvers import (MeasurementQueue, SolverState, StopMonitor, Trace, TVState,
                      block_step, kkt_residual, online_run, run, sparse_kaczmarz_step,
                      tv_kaczmarz_run)
from .stepsize import StepsizeRule, constant_step, dynamic_step, exact_step

__version__ = "0.1.0"
