"""shockld: rare-event simulation for one-dimensional stochastic viscous
conservation laws.

Pipeline: viscous shock profiles on uniform grids (grid), Godunov/Euler time
stepping (fluxes), correlated noise models (noise), the discrete
large-deviation rate function (rate), most-probable path optimization
(optimize), probability estimation by basic and importance-sampling Monte
Carlo (montecarlo), and displacement-law diagnostics (diagnostics).  The CLI
entry point lives in shockld.cli.
"""

__version__ = "0.1.0"

from .diagnostics import (CenterSeries, analytic_center_law,
                          analytic_exit_log_probability,
                          analytic_exit_probability, center_series,
                          fit_scaling, wave_center)
from .fluxes import (FixedStates, TimeInterpolated, cfl_number, drift,
                     euler_step, godunov_flux)
from .grid import (SpaceTimeGrid, WaveSpec, profile, rankine_hugoniot_speed,
                   sample_profile)
from .montecarlo import (EstimatorReport, epsilon_sweep, event_indicator,
                         likelihood_ratio, run_basic_mc,
                         run_importance_sampling)
from .noise import (NoiseModel, build_noise_model, sample_increments,
                    total_covariance_mass, whiten)
from .optimize import (OptimalPath, RareEventSpec, linear_interpolation_path,
                       linear_shift_path, midpoint_convexity_test,
                       minimize_ball, minimize_pinned)
from .rate import (PathMatrix, discrete_lower_bound, forcing_from_path, rate,
                   rate_gradient, residual)

__all__ = [
    "SpaceTimeGrid", "WaveSpec", "profile", "rankine_hugoniot_speed",
    "sample_profile",
    "FixedStates", "TimeInterpolated", "godunov_flux", "drift", "euler_step",
    "cfl_number",
    "NoiseModel", "build_noise_model", "sample_increments", "whiten",
    "total_covariance_mass",
    "PathMatrix", "residual", "rate", "rate_gradient", "forcing_from_path",
    "discrete_lower_bound",
    "RareEventSpec", "OptimalPath", "minimize_pinned", "minimize_ball",
    "linear_shift_path", "linear_interpolation_path",
    "midpoint_convexity_test",
    "EstimatorReport", "event_indicator", "run_basic_mc", "likelihood_ratio",
    "run_importance_sampling", "epsilon_sweep",
    "CenterSeries", "wave_center", "center_series", "analytic_center_law",
    "analytic_exit_probability", "analytic_exit_log_probability",
    "fit_scaling",
]
