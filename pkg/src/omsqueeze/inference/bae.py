"""
Backaction-evading sideband: background removal and conversion to variance.

The BAE sideband sits a detuning Delta away from the cavity resonance, so
residual cavity noise shows up as a smooth background under it. That
background is modelled as a quadratic in frequency and removed before the
sideband is integrated.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..params import Bundle
from ..quadrature import quadrature_density
from ..response import require_stable
from ..spectrum import Spectrum

MIN_BACKGROUND_POINTS = 10


class InsufficientBackgroundPoints(ValueError):
    pass


class NegativePower(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BackgroundSubtraction:
    """Background-free spectrum plus the fitted quadratic (highest power first)."""

    spectrum: Spectrum
    background: Spectrum
    coefficients: np.ndarray


def subtract_background_quadratic(spectrum: Spectrum, exclude_band) -> BackgroundSubtraction:
    """Fit a quadratic to the points outside ``exclude_band`` and subtract it.

    ``exclude_band`` is an (lo, hi) interval in the spectrum's omega units
    and must lie strictly inside the grid. The polynomial is fitted in a
    centred, scaled variable to keep the design matrix well conditioned.
    """
    lo, hi = sorted(exclude_band)
    w = spectrum.omega
    if not (w.min() < lo and hi < w.max()):
        raise ValueError("exclude_band must lie strictly inside the frequency grid")
    y = np.real(spectrum.values)
    outside = (w < lo) | (w > hi)
    if np.count_nonzero(outside) < MIN_BACKGROUND_POINTS:
        raise InsufficientBackgroundPoints(
            f"{np.count_nonzero(outside)} points outside the excluded band, "
            f"need {MIN_BACKGROUND_POINTS}")
    c, s = 0.5 * (w.min() + w.max()), 0.5 * np.ptp(w)
    u = (w - c) / s
    poly = np.polynomial.Polynomial.fit(u[outside], y[outside], 2, domain=[-1, 1], window=[-1, 1])
    bg = poly(u)
    # coefficients in the original variable, highest power first
    coef = np.polynomial.Polynomial(poly.coef, domain=[c - s, c + s]).convert().coef[::-1]
    return BackgroundSubtraction(Spectrum(w, y - bg, spectrum.sigma), Spectrum(w, bg), coef)


def _check_ratio(ratio):
    r = np.asarray(ratio, dtype=float)
    if np.any(r < 0) or not np.all(np.isfinite(r)):
        raise NegativePower("sideband power ratio must be finite and >= 0")
    return r


def _b(cal):
    return float(getattr(cal, "b_minus", cal))


def bae_sideband_to_variance(sideband_power_ratio, b_minus: float, Delta: float, kappa: float):
    """<X_phi^2> / x_zp^2 from the normalized BAE sideband power P_m / P_-.

    ``b_minus`` is the thermal calibration taken in the BAE pump
    configuration, in (rad/s)^2, or a :class:`CalibrationConstants` holding
    it; ``Delta`` and ``kappa`` in rad/s.
    """
    r = _check_ratio(sideband_power_ratio)
    b_minus = _b(b_minus)
    out = (4.0 * Delta**2 + kappa**2) / 4.0 / b_minus * r
    return float(out) if out.ndim == 0 else out


def variance_to_bae_sideband(variance, b_minus: float, Delta: float, kappa: float):
    """Inverse of :func:`bae_sideband_to_variance`."""
    v = np.asarray(variance, dtype=float)
    if np.any(v < 0):
        raise NegativePower("variance must be >= 0")
    b_minus = _b(b_minus)
    out = 4.0 * b_minus / (4.0 * Delta**2 + kappa**2) * v
    return float(out) if out.ndim == 0 else out


def bae_sideband_spectrum(bundle: Bundle, gain_product: float, np_probe: float, phi: float,
                          omega, Delta: float) -> Spectrum:
    """Forward model of the measured BAE sideband.

    gain_product * 4 g0^2 n_p / (kappa^2 + 4 Delta^2) * S_X(w), with S_X the
    X_phi density in x_zp^2 per Hz. ``Delta`` is the sideband detuning from
    the cavity, independent of the bundle's rotating-frame detuning.
    """
    require_stable(bundle)
    p = bundle.params
    w = np.asarray(omega, dtype=float)
    pref = gain_product * 4.0 * p.g0**2 * np_probe / (p.kappa**2 + 4.0 * Delta**2)
    return Spectrum(w, pref * quadrature_density(bundle, phi, w))
