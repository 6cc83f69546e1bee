"""Change point segmentation of panel data with a short, fixed time horizon."""

from .cusum import CusumProfile, cusum_statistic, estimate_change, partial_sums
from .errors import (
    AmbiguousMaximum, EstimatorFailure, InvalidInput, PanelSegError, SolverFailure,
    TargetCountUnreachable,
)
from .estimation import (
    banded_covariance, convex_regression, estimated_exact_weights, natural_covariance,
    quadratic_form_f, quadratic_forms,
)
from .gflasso import GroupFusedLasso, design_matrix, kkt_residual, segment, single_change_solution, solve
from .model import (
    ChangeLocationNoise, CommonFactorSpec, NoiseKind, NoiseModel, PanelMatrix, SignalSpec,
    delta_average, generate_panel, mean_matrix,
)
from .theory import (
    boundary, bound_limit, check_perfect_estimation, consistency_bound, critical_argmax,
    critical_function, critical_profile, h_function, noise_change_ratio, spurious_argmax,
)
from .weights import WeightScheme, exact_weights_from_v, v_squared, v_squared_vector, weight, weight_vector

__version__ = "0.1.0"
