"""Inverse problems: spectrum fits, calibrations, BAE conversion, parametric drive."""
from .bae import (BackgroundSubtraction, InsufficientBackgroundPoints, NegativePower,
                  bae_sideband_spectrum, bae_sideband_to_variance, subtract_background_quadratic,
                  variance_to_bae_sideband)
from .calibration import (CalibrationConstants, DegenerateDesign, fit_linear_calibration,
                          normalized_sideband_power, thermal_calibration, thermal_occupation_axis)
from .lorentzian import DegenerateSpectrum, fit_lorentzian, lorentzian
from .optimize import FitResult, NonConvergence, ParamSpec, gauss_newton, run_fit
from .parametric import HYPOTHESES, compare_hypotheses, fit_parametric_drive, predict_linewidths
from .spectrum_fit import (FREE_PARAMETERS, UnstableFitRegion, fit_output_spectrum,
                           output_spectrum_model)

__all__ = [
    "BackgroundSubtraction", "CalibrationConstants", "DegenerateDesign", "DegenerateSpectrum",
    "FREE_PARAMETERS", "FitResult", "HYPOTHESES", "InsufficientBackgroundPoints",
    "NegativePower", "NonConvergence", "ParamSpec", "UnstableFitRegion",
    "bae_sideband_spectrum", "bae_sideband_to_variance", "compare_hypotheses",
    "fit_linear_calibration", "fit_lorentzian", "fit_output_spectrum", "fit_parametric_drive",
    "gauss_newton", "lorentzian", "normalized_sideband_power", "output_spectrum_model",
    "predict_linewidths", "run_fit", "subtract_background_quadratic", "thermal_calibration",
    "thermal_occupation_axis", "variance_to_bae_sideband",
]
