from __future__ import annotations

import math
from typing import Optional

import numpy as np

from ..spectrum import Spectrum
from .optimize import FitResult, ParamSpec, run_fit


class DegenerateSpectrum(ValueError):
    pass


def lorentzian(omega, center, fwhm, area, offset=0.0):
    """offset + area/pi * (fwhm/2) / ((w - center)^2 + (fwhm/2)^2)."""
    hw = 0.5 * fwhm
    return offset + area / math.pi * hw / ((np.asarray(omega) - center) ** 2 + hw * hw)


def _lorentzian_jac(omega, center, fwhm, area, fit_offset):
    hw = 0.5 * fwhm
    x = omega - center
    den = x * x + hw * hw
    d_center = area / math.pi * hw * 2.0 * x / den**2
    d_fwhm = area / math.pi * 0.5 * (x * x - hw * hw) / den**2
    d_area = hw / (math.pi * den)
    cols = [d_center, d_fwhm, d_area]
    if fit_offset:
        cols.append(np.ones_like(omega))
    return np.column_stack(cols)


def initial_guess(spectrum: Spectrum) -> dict:
    """Peak position, half-maximum crossings and trapezoid area."""
    w, y = spectrum.omega, np.real(spectrum.values)
    offset = float(min(y[0], y[-1]))
    h = y - offset
    k = int(np.argmax(h))
    peak = h[k]
    if not peak > 0:
        raise DegenerateSpectrum("no peak above the baseline")
    half = 0.5 * peak
    left = np.nonzero(h[:k] < half)[0]
    right = np.nonzero(h[k:] < half)[0]
    lo = w[left[-1]] if left.size else w[0]
    hi = w[k + right[0]] if right.size else w[-1]
    fwhm = max(hi - lo, 2.0 * np.min(np.diff(w)))
    area = float(np.trapezoid(h, w))
    if not area > 0:
        area = 0.5 * math.pi * peak * fwhm
    return {"center": float(w[k]), "fwhm": float(fwhm), "area": area, "offset": offset}


def fit_lorentzian(spectrum: Spectrum, initial: Optional[dict] = None, fit_offset: bool = True,
                   **kwargs) -> FitResult:
    """Least-squares single-Lorentzian fit returning center, fwhm, area, offset.

    Residuals are divided by ``spectrum.sigma`` when present, otherwise by the
    peak magnitude (uniform weights). Raises ``NonConvergence`` after the
    iteration limit and :class:`DegenerateSpectrum` for flat input.
    """
    w = spectrum.omega
    y = np.real(spectrum.values)
    if len(w) < 16:
        raise ValueError("need at least 16 points for a Lorentzian fit")
    if np.ptp(y) <= 1e-14 * max(np.max(np.abs(y)), 1e-300):
        raise DegenerateSpectrum("spectrum is flat")
    guess = initial_guess(spectrum)
    if initial:
        guess.update(initial)
    if np.ptp(w) < 3.0 * guess["fwhm"]:
        raise ValueError("spectrum spans fewer than three linewidths")
    if not fit_offset:
        guess["offset"] = 0.0

    if spectrum.sigma is not None:
        weight = 1.0 / spectrum.sigma
    else:
        weight = np.full_like(w, 1.0 / np.max(np.abs(y)))
    height = guess["area"] / (0.5 * math.pi * guess["fwhm"])
    specs = [ParamSpec("center", "linear", guess["fwhm"]),
             ParamSpec("fwhm", "log", guess["fwhm"]),
             ParamSpec("area", "linear", abs(guess["area"]))]
    if fit_offset:
        specs.append(ParamSpec("offset", "linear", abs(height)))

    def residual(p):
        off = p.get("offset", 0.0)
        return (lorentzian(w, p["center"], p["fwhm"], p["area"], off) - y) * weight

    def jac(p):
        return _lorentzian_jac(w, p["center"], p["fwhm"], p["area"], fit_offset) * weight[:, None]

    res = run_fit(specs, residual, guess, jac_natural=jac, **kwargs)
    if not fit_offset:
        res.values["offset"] = 0.0
        res.stderr["offset"] = 0.0
    return res
