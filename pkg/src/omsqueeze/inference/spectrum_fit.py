"""
Fit of the measured (pumped minus unpumped) output noise spectrum.

The measured spectrum is modelled as gain_product * S[w], with S the
gain-free device noise of :func:`omsqueeze.response.device_noise` and
gain_product = b_- / a_- from the calibrations. The couplings G-+ are held
at their calibrated values; any subset of Delta, delta, kappa, gamma_m,
n_c_th and n_m_th is fitted. Rates and occupations are fitted in log space.
"""
from __future__ import annotations

import math
from dataclasses import replace
from typing import Dict, Optional, Sequence

import numpy as np

from ..params import BathOccupations, Bundle
from ..response import assess_stability, chi_inverse, noise_scaling
from ..spectrum import Spectrum
from .optimize import FitResult, ParamSpec, run_fit

FREE_PARAMETERS = ("Delta", "delta", "kappa", "gamma_m", "n_c_th", "n_m_th")
_LOG = {"kappa", "gamma_m", "n_c_th", "n_m_th"}
_OCC_FLOOR = 1e-3


class UnstableFitRegion(RuntimeError):
    pass


def device_noise_row(bundle: Bundle, omega) -> np.ndarray:
    """The three pieces of S[w] = s0 + n_c s_c + n_m s_m, shape (3, N).

    Only the first row of chi is needed, so one transposed solve per
    frequency replaces the full inverse.
    """
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    A = chi_inverse(bundle, w)
    e1 = np.zeros(w.shape + (4, 1), dtype=complex)
    e1[..., 0, 0] = 1.0
    row = np.linalg.solve(np.swapaxes(A, -1, -2), e1)[..., 0]
    v = np.abs(row * noise_scaling(bundle)) ** 2
    return np.stack([v[:, 1] + v[:, 3], v[:, 0] + v[:, 1], v[:, 2] + v[:, 3]])


def output_spectrum_model(bundle: Bundle, gain_product: float, omega) -> np.ndarray:
    """gain_product * S[w] for the bundle's own occupations."""
    s0, sc, sm = device_noise_row(bundle, omega)
    b = bundle.baths
    return gain_product * (s0 + b.n_c_th * sc + b.n_m_th * sm)


def bundle_with(template: Bundle, values: Dict[str, float]) -> Bundle:
    """Copy of ``template`` with fitted values substituted.

    A new kappa rescales all three port rates by the same factor so that
    they keep summing to kappa.
    """
    p, d, b = template.params, template.drive, template.baths
    k = values.get("kappa", p.kappa)
    s = k / p.kappa
    params = replace(p, kappa=k, kappa_L=p.kappa_L * s, kappa_R=p.kappa_R * s,
                     kappa_I=p.kappa_I * s, gamma_m=values.get("gamma_m", p.gamma_m))
    drive = replace(d, Delta=values.get("Delta", d.Delta), delta=values.get("delta", d.delta))
    baths = BathOccupations(n_c_th=values.get("n_c_th", b.n_c_th),
                            n_m_th=values.get("n_m_th", b.n_m_th))
    return Bundle(params, drive, baths)


def _weights(measured: Spectrum, y):
    if measured.sigma is not None:
        if np.any(measured.sigma <= 0):
            raise ValueError("sigma must be positive")
        return 1.0 / measured.sigma
    return np.full_like(y, 1.0 / np.max(np.abs(y)))


def occupations_least_squares(bundle: Bundle, gain_product: float, measured: Spectrum):
    """Weighted linear least-squares (n_c_th, n_m_th) at fixed rates and detunings."""
    y = np.real(measured.values)
    wt = _weights(measured, y)
    s0, sc, sm = gain_product * device_noise_row(bundle, measured.omega)
    X = np.column_stack([sc, sm]) * wt[:, None]
    coef, *_ = np.linalg.lstsq(X, (y - s0) * wt, rcond=None)
    return float(coef[0]), float(coef[1])


def initial_guess(measured: Spectrum, template: Bundle, gain_product: float,
                  overrides: Optional[dict] = None) -> dict:
    """Starting point for :func:`fit_output_spectrum`.

    Rates and detunings start from the template (nominal device values) or
    ``overrides``; the occupations then follow from the linear
    least-squares problem, which is exact for the affine occupation
    dependence of the model.
    """
    p, d = template.params, template.drive
    guess = {"Delta": d.Delta, "delta": d.delta, "kappa": p.kappa, "gamma_m": p.gamma_m}
    guess.update(overrides or {})
    nc, nm = occupations_least_squares(bundle_with(template, guess), gain_product, measured)
    guess.setdefault("n_c_th", max(nc, _OCC_FLOOR))
    guess.setdefault("n_m_th", max(nm, _OCC_FLOOR))
    if overrides:
        guess.update(overrides)
    return guess


def fit_output_spectrum(measured: Spectrum, template: Bundle, gain_product: float,
                        free: Sequence[str] = FREE_PARAMETERS, initial: Optional[dict] = None,
                        **kwargs) -> FitResult:
    """Weighted least-squares fit of a background-subtracted output spectrum.

    Parameters
    ----------
    measured : Spectrum
        pumped minus unpumped noise, omega in the cavity rotating frame;
        ``sigma`` gives per-bin weights, otherwise weights are uniform
    template : Bundle
        supplies the fixed quantities (g0, pump photon numbers hence G-+,
        port split) and nominal starting values
    gain_product : float
        b_- / a_- (see :class:`CalibrationConstants`)
    free : sequence of str
        names out of ``FREE_PARAMETERS``

    Returns
    -------
    FitResult
        ``extra`` holds the fitted ``bundle`` and ``Gamma_eff`` with its
        propagated standard error.

    Raises
    ------
    UnstableFitRegion
        if the starting point has no stationary state
    NonConvergence
    """
    free = list(free)
    bad = set(free) - set(FREE_PARAMETERS)
    if bad:
        raise ValueError(f"cannot fit {sorted(bad)}")
    y = np.real(measured.values)
    wt = _weights(measured, y)
    w = measured.omega
    guess = initial_guess(measured, template, gain_product, initial)
    if not assess_stability(bundle_with(template, guess)).stable:
        raise UnstableFitRegion("initial parameters have no stationary state")

    kappa0 = guess["kappa"]
    specs = [ParamSpec(n, "log" if n in _LOG else "linear",
                       guess[n] if n in _LOG else kappa0 if n == "Delta"
                       else template.couplings.Gamma_eff or kappa0)
             for n in free]

    def residual(vals):
        b = bundle_with(template, {**guess, **vals})
        if not assess_stability(b).stable:
            return np.full_like(y, np.inf)
        return (output_spectrum_model(b, gain_product, w) - y) * wt

    res = run_fit(specs, residual, guess, **kwargs)
    fitted = bundle_with(template, {**guess, **res.values})
    res.extra["bundle"] = fitted
    res.extra["fixed"] = {k: v for k, v in guess.items() if k not in free}

    # Gamma_eff = gamma_m + 4 curlyG^2 / kappa, curlyG^2 fixed by the pumps
    c = fitted.couplings
    G2 = c.G_minus**2 - c.G_plus**2
    grad = np.array([1.0 if n == "gamma_m" else -4.0 * G2 / fitted.params.kappa**2
                     if n == "kappa" else 0.0 for n in free])
    res.extra["Gamma_eff"] = c.Gamma_eff
    res.extra["Gamma_eff_stderr"] = float(math.sqrt(max(grad @ res.covariance @ grad, 0.0)))
    return res
