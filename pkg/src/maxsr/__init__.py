"""Inference on the asset with the best sample Sharpe ratio.

The package answers one question honestly: after picking the asset that
looked best over a backtest, what can still be said about its true
signal-to-noise ratio? It provides the exact conditional (post-selection)
test and confidence bound, the classical alternatives it competes with,
and a reproducible Monte Carlo lab for calibrating both.
"""

__version__ = "0.1.0"

from .errors import DataError, MaxsrError, NumericalError
from .moments import (
    MomentEstimates,
    ReturnsPanel,
    SharpeCovariance,
    delta_derivative,
    estimate_kurtosis_factor,
    estimate_moments,
    rank_one_correlation,
    rank_one_inverse_sqrt,
    sharpe_covariance_elliptical,
    sharpe_covariance_gaussian,
)
from .outcomes import TestOutcome
from .selection import (
    SelectionEvent,
    TruncationInterval,
    build_abs_max_constraint,
    build_max_constraint,
    build_threshold_constraint,
    build_top_m_constraint,
    conditional_lower_bound,
    conditional_pvalue,
    select_max,
    truncated_normal_cdf,
    truncation_bounds,
    with_test_vector,
)
from .classical import (
    RhoEstimate,
    bonferroni_naive,
    bonferroni_rho_fixed,
    bonferroni_slepian,
    chi_bar_square_test,
    chi_bar_weights,
    estimate_rho,
    follman_test,
    hansen_chi_bar_square,
    hansen_effective_count,
    hansen_spa,
    invert_to_lower_bound,
    noncentral_t_cdf,
    noncentral_t_quantile,
    xi_transform,
)
from .montecarlo import (
    KsCell,
    MethodSummary,
    ReturnsLaw,
    SimConfig,
    SimSummary,
    SnrConfig,
    SweepCell,
    ks_statistic,
    run_ks_sweep,
    run_null_calibration,
    run_power_study,
    run_rho_sweep,
    sample_returns,
)
from .panels import PanelFile, load_panel, save_panel

__all__ = [
    "__version__",
    "DataError", "MaxsrError", "NumericalError",
    "ReturnsPanel", "MomentEstimates", "SharpeCovariance",
    "estimate_moments", "estimate_kurtosis_factor",
    "sharpe_covariance_gaussian", "sharpe_covariance_elliptical",
    "delta_derivative", "rank_one_correlation", "rank_one_inverse_sqrt",
    "TestOutcome",
    "SelectionEvent", "TruncationInterval",
    "build_max_constraint", "select_max", "build_abs_max_constraint",
    "build_top_m_constraint", "build_threshold_constraint",
    "with_test_vector", "truncation_bounds", "truncated_normal_cdf",
    "conditional_pvalue", "conditional_lower_bound",
    "RhoEstimate", "estimate_rho",
    "noncentral_t_cdf", "noncentral_t_quantile",
    "chi_bar_weights", "xi_transform",
    "bonferroni_naive", "bonferroni_rho_fixed", "bonferroni_slepian",
    "chi_bar_square_test", "follman_test",
    "hansen_effective_count", "hansen_chi_bar_square", "hansen_spa",
    "invert_to_lower_bound",
    "SnrConfig", "ReturnsLaw", "SimConfig", "SimSummary", "MethodSummary",
    "KsCell", "SweepCell",
    "ks_statistic", "sample_returns",
    "run_null_calibration", "run_power_study", "run_rho_sweep", "run_ks_sweep",
    "PanelFile", "load_panel", "save_panel",
]
