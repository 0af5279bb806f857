"""Estimation of time-varying parameters in uncertain differential equations.

The workflow is two-staged: :func:`sliding_estimates` turns an observed
series into a sequence of per-window ``(mu, sigma)`` estimates, and the
regression helpers fit a parametric function of time to each component.
:func:`run_estimation` chains both for a :class:`PipelineConfig`.
"""

from .errors import (
    ConfigError,
    DataError,
    DegenerateWindowError,
    DivergenceError,
    DomainError,
    FitError,
    NumericalError,
    RankError,
    SimulationError,
    SingularWindowError,
    TvudeError,
)
from .model import Family, ModelSpec, ParamTrajectory, diffusion_shape, drift_basis, drift_eval
from .pipeline import (
    Dataset,
    FitAssignment,
    PipelineConfig,
    RunReport,
    bundled_dataset,
    emit_report,
    ingest_csv,
    run_estimation,
    simulate_command,
)
from .regression import (
    GaussNewtonConfig,
    Kind,
    RegressionFamily,
    RegressionFit,
    eval_family,
    finite_difference_jacobian,
    fit_linear_ols,
    gauss_newton_fit,
    r_squared,
)
from .uncertainty import (
    NormalUncertain,
    TimeGrid,
    TimeSeries,
    alpha_path,
    euler_simulate,
    liu_increment,
    normal_cdf,
    std_normal_inverse_cdf,
    uncertain_moment,
)
from .windows import (
    WindowConfig,
    WindowEstimate,
    drift_objective,
    estimate_diffusion_window,
    estimate_drift_window,
    sliding_estimates,
)

__version__ = "0.1.0"
