"""Horizon-resolved Granger-Geweke causality for VAR processes.

The package computes four flavours of conditional Granger causality:
one-step, multi-step (horizon ``h``), full-future (horizons ``1..h`` jointly)
and single-lag (one source lag ``tau``), either analytically from model
parameters or from data via OLS, with chi-squared inference.
"""

from .errors import (
    ConditioningError,
    CovarianceError,
    DimensionError,
    GrangerError,
    NumericalError,
    SingularityError,
    StabilityError,
)
from .var_model import (
    AutocovSequence,
    MACoefficients,
    MultiStepAR,
    VARModel,
    autocovariance,
    check_stability,
    companion_matrix,
    ma_coefficients,
    multistep_ar,
)
from .simulation import TimeSeries, default_burnin, model_hash, simulate
from .estimation import (
    FitResult,
    ReducedSpec,
    fit_reduced_ols,
    fit_var_ols,
    order_criteria,
    reduced_model_yw,
    reduced_sigma_single_lag,
    select_order,
)
from .inference import (
    SignificanceSpec,
    chi2_cdf,
    chi2_quantile,
    chi2_sf,
    critical_level,
    gc_pvalue,
    noncentral_chi2_sf,
)
from .gc import (
    FullFutureTrace,
    GCGraph,
    GCResult,
    Partition,
    gc_fullfuture,
    gc_graph,
    gc_graph_analytic,
    gc_multistep_analytic,
    gc_multistep_sample,
    gc_onestep_analytic,
    gc_onestep_sample,
    gc_singlelag_analytic,
    gc_singlelag_sample,
    multistep_curve,
)
from .demo import demo_model

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
