"""Gaussian mixture-inspired nonlinear modules with a numpy autodiff engine."""
from .estimators import GMNMRegressor, MLPBaselineRegressor
from .mixture import (
    GmnmConfig,
    GmnmParams,
    agp_forward,
    collapse_ridge,
    count_params,
    gmnm_forward,
    gmnm_init,
    gmnm_input_gradient,
    gmnm_input_laplacian,
    mahalanobis_embed,
)

__version__ = "0.1.0"

__all__ = [
    "GMNMRegressor", "GmnmConfig", "GmnmParams", "MLPBaselineRegressor", "agp_forward",
    "collapse_ridge", "count_params", "gmnm_forward", "gmnm_init", "gmnm_input_gradient",
    "gmnm_input_laplacian", "mahalanobis_embed",
]
