"""Calibration assessment for exponential-family prediction models.

Estimates generalized calibration curves (GLM, loess and binned), the
calibration slope and the calibration-in-the-large for any outcome in
the exponential family, and ships the Poisson simulation study that
exercises them end to end.
"""

__version__ = "0.1.0"

from gencal._kernels import KERNEL_FLAVOR, USING_COMPILED
from gencal.calibration import (AssessOptions, CalibrationAssessment,
                                PredictionSet, assess, calibration_binned,
                                calibration_flexible, calibration_glm,
                                calibration_intercept, make_prediction_set)
from gencal.families import get_family, get_link
from gencal.glm import DesignMatrix, GlmFit, fit_glm, fit_glm_offset_only, predict_glm
from gencal.loess import loess_confidence_band, loess_fit
from gencal.simdata import SimConfig, generate

__all__ = [
    "KERNEL_FLAVOR", "USING_COMPILED",
    "AssessOptions", "CalibrationAssessment", "PredictionSet",
    "assess", "calibration_binned", "calibration_flexible",
    "calibration_glm", "calibration_intercept", "make_prediction_set",
    "get_family", "get_link",
    "DesignMatrix", "GlmFit", "fit_glm", "fit_glm_offset_only", "predict_glm",
    "loess_confidence_band", "loess_fit",
    "SimConfig", "generate",
]
