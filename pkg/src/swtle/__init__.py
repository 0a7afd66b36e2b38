"""Source-function weighted transfer-learning estimators for kernel regression."""

from swtle.adjust import (
    AdjustedEstimate,
    BandwidthPair,
    BasisSpec,
    GuardPolicy,
    SourceSpec,
    Variant,
    alpha_hat_semiparam,
    basis_adjust_fixed,
    basis_adjust_random,
    eta_hat_random,
    sw_tle_fixed,
    sw_tle_multi,
    sw_tle_random,
    sw_tle_semiparam,
    xi_hat_fixed,
)
from swtle.bandwidth import BandwidthGrid, FitRecipe, cv_score, select_bandwidths
from swtle.baselines import SimplexWeights, f_nw, q_nw, sa_estimate, wa_estimate
from swtle.errors import (
    ConvergenceError,
    DegenerateBasisError,
    OrthogonalAtXError,
    ParameterError,
    SelectionError,
)
from swtle.kernel_core import (
    EPANECHNIKOV,
    GAUSSIAN,
    CurveEstimate,
    FixedDesignSample,
    Kernel,
    KernelFamily,
    RandomDesignSample,
    gm_estimate,
    nw_estimate,
    segment_integral,
)
from swtle.nls import FitResult, ParametricModel, fit_ls

__version__ = "0.1.0"

__all__ = [
    "AdjustedEstimate",
    "alpha_hat_semiparam",
    "BandwidthGrid",
    "BandwidthPair",
    "basis_adjust_fixed",
    "basis_adjust_random",
    "BasisSpec",
    "ConvergenceError",
    "CurveEstimate",
    "cv_score",
    "DegenerateBasisError",
    "EPANECHNIKOV",
    "eta_hat_random",
    "f_nw",
    "fit_ls",
    "FitRecipe",
    "FitResult",
    "FixedDesignSample",
    "GAUSSIAN",
    "gm_estimate",
    "GuardPolicy",
    "Kernel",
    "KernelFamily",
    "nw_estimate",
    "OrthogonalAtXError",
    "ParameterError",
    "ParametricModel",
    "q_nw",
    "RandomDesignSample",
    "sa_estimate",
    "segment_integral",
    "select_bandwidths",
    "SelectionError",
    "SimplexWeights",
    "SourceSpec",
    "sw_tle_fixed",
    "sw_tle_multi",
    "sw_tle_random",
    "sw_tle_semiparam",
    "Variant",
    "wa_estimate",
    "xi_hat_fixed",
]
