"""Simulation, estimation and diagnostics for generalized multivariate Hawkes processes."""

__version__ = "0.1.0"

from ._backend import BACKEND, available_backends
from .analyze import (AssumptionReport, build_omega, check_assumptions, first_order_deviation_bound,
                      mean_intensity_linear, neumann_intensity, second_order_deviation_bound, spectral_radius,
                      tail_matrix)
from .errors import (AssumptionError, ConfigError, DominationError, GHawkesError, InstabilityError,
                     ModelError, NumericError, UnsupportedConfigurationError)
from .estimate import (BoundedFunctionSpec, CovEstimate, SmoothingKernel, bandwidth_rule, block_sequence,
                       default_grid, estimate_cross_cov, l2_band_distance, mean_intensity_hat, second_order_stat)
from .experiments import ExperimentConfig, event_A_indicator, fig1b_curve, reference_cov, soloist_scores
from .keys import Phase, RandomKey
from .model import EventStream, GammaKernel, HawkesModel, LinkSpec, build_block_model, intensity_at
from .simulate import CoupledPair, couple, deviation_profile, simulate, simulate_burned
from .wienerhopf import GridCurveSet, wh_forward, wh_recover
