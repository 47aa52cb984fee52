"""Distributed joint PZF precoding and per-AP power control for user-centric
cell-free massive MIMO downlink."""

from .errors import ConfigError, DegenerateUserError, NumericalError
from .netmodel import NetworkConfig, draw_realization, trial_rng
from .topology import ClusterPlan, build_plan
from .precoding import PrecodingSolution, null_spaces, pinv_epa
from .dualopt import (DualConfig, DualProblem, account_messages,
                      run_centralized_reference, run_dual_decomposition)
from .metrics import overhead, se_report, sinr_all, sum_se

__version__ = "0.1.0"
