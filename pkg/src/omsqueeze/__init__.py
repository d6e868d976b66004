"""
Two-tone driven cavity optomechanics: linear response, mechanical squeezing,
and the fits used to calibrate and interpret the measured spectra.
"""
from .params import (DEVICE, BathOccupations, Bundle, DerivedCouplings, DriveConfig,
                     InconsistentZeroPoint, NegativeRate, OccupationNegative, PortSumMismatch,
                     SystemParams, UnstableParameters, ValidationError, derive_couplings, hz,
                     normalize_units, validate_params)
from .quadrature import (ClosedFormVariances, HeatingModel, PreconditionViolated,
                         QuadratureResult, UnstableAtPhase, closed_form_variances, phase_scan,
                         quadrature_spectrum, quadrature_variance, ratio_scan, solve_occupations)
from .response import (ChiMatrix, NoiseSpectra, SingularMatrix, StabilityReport,
                       assess_stability, chi, drift_matrix, output_noise_spectrum, transmission)
from .spectrum import Spectrum

__version__ = "0.1.0"
