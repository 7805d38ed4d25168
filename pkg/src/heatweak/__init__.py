"""Weak-error experiments for the implicit Euler discretization of the stochastic heat equation.

dX = 1/2 X'' dt + dW on (0, 1) with Dirichlet conditions, expanded in the
sine basis into independent Ornstein-Uhlenbeck modes.  The package evaluates
the weak error of the squared H^{-p} norm semi-analytically, rebuilds it from
its time-step decomposition, and checks the closed forms by Monte Carlo.
"""

from .bounds import check_a1, check_ad, lem_at_check, lem_at_sum, series_a1, series_ad
from .config import ConfigError, ExperimentConfig, parse_config
from .montecarlo import MCEstimate, SeedSpec, coupled_strong_error, mc_field_norm_sq, mc_interp_moments
from .ou import OUParams, exact_field_second_moment, kolmogorov_residual, u_derivs, u_value
from .scheme import GridSpec, euler_step, interp_moments, scheme_second_moment, scheme_weights
from .series import SeriesControl, SeriesResult, TruncationError
from .spectral import SobolevOrder, eigenfunction_eval, eigenvalue, eigenvalues, hneg_norm_sq
from .weak_error import (
    decompose,
    last_step_delta,
    per_mode_weak_error,
    rate_fit,
    strong_error,
    weak_error,
    weak_error_rate,
)

__version__ = "0.1.0"
