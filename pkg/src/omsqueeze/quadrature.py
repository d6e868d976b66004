"""
Mechanical quadrature spectra and variances.

The quadrature is X_phi = x_zp (b e^{i phi} + b^dag e^{-i phi}), so
X_0 = X_1 and X_{pi/2} = -X_2. Spectra are symmetrized and two-sided in
units of x_zp^2 per Hz: the variance is int S(w) dw / 2pi, i.e. the
integral of the same numbers over ordinary frequency.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .integrate import integrate_real_line
from .params import Bundle, BathOccupations, DriveConfig, SystemParams, validate_params, wrap_angle
from .response import chi_inverse, noise_scaling, require_stable
from .spectrum import Spectrum

VARIANCE_RTOL = 1e-9


class PreconditionViolated(ValueError):
    pass


class UnstableAtPhase(RuntimeError):
    def __init__(self, phi):
        super().__init__(f"no stationary state at phi = {math.degrees(phi):.6g} deg")
        self.phi = phi


@dataclass(frozen=True, eq=False)
class QuadratureResult:
    phi: float
    spectrum: Spectrum
    variance: float
    linewidth: Optional[float] = None
    fit: Optional[object] = None


@dataclass(frozen=True)
class ClosedFormVariances:
    """(X1, X2) variances: exact two-pole result and the kappa >> G, gamma_m reduction."""

    exact: tuple
    reduced: tuple


def quadrature_density(bundle: Bundle, phi: float, omega) -> np.ndarray:
    """Symmetrized X_phi spectral density on ``omega`` (no stability check)."""
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    A = chi_inverse(bundle, w)
    c = np.array([0.0, 0.0, np.exp(1j * phi), np.exp(-1j * phi)])
    # y_j = sum_i c_i chi_ij, i.e. the phi-weighted combination of rows 3 and 4
    y = np.linalg.solve(np.swapaxes(A, -1, -2), np.broadcast_to(c, w.shape + (4,))[..., None])[..., 0]
    v2 = np.abs(y * noise_scaling(bundle)) ** 2
    b = bundle.baths
    return (b.n_c_th + 0.5) * (v2[:, 0] + v2[:, 1]) + (b.n_m_th + 0.5) * (v2[:, 2] + v2[:, 3])


def _phi(bundle, phi):
    return bundle.drive.phi if phi is None else phi


def quadrature_spectrum(bundle: Bundle, phi: Optional[float] = None, omega=None) -> Spectrum:
    require_stable(bundle)
    if omega is None:
        omega = linewidth_grid(bundle)
    omega = np.asarray(omega, dtype=float)
    return Spectrum(omega, quadrature_density(bundle, _phi(bundle, phi), omega))


def _features(bundle):
    d = bundle.drive
    return sorted({0.0, d.delta, -d.delta, d.Delta, -d.Delta})


def _scale(bundle):
    return max(bundle.params.kappa, 10.0 * abs(bundle.couplings.Gamma_eff))


def quadrature_variance(bundle: Bundle, phi: Optional[float] = None, rtol: float = VARIANCE_RTOL) -> float:
    """<X_phi^2> / x_zp^2 by adaptive quadrature over the whole line.

    Raises ``IntegrationFailure`` when the tolerance cannot be met, which in
    practice means the parameters sit close to an instability.
    """
    require_stable(bundle)
    phi = _phi(bundle, phi)
    total = integrate_real_line(lambda w: quadrature_density(bundle, phi, w),
                                _scale(bundle), rtol=rtol, features=_features(bundle))
    return total / (2.0 * math.pi)


def _require_resonant(bundle):
    d = bundle.drive
    bad = [n for n in ("Delta", "delta", "lambda_par") if getattr(d, n) != 0.0]
    if bad:
        raise PreconditionViolated(f"closed form needs {', '.join(bad)} = 0")


def closed_form_variances(bundle: Bundle) -> ClosedFormVariances:
    """Stationary X1, X2 variances for Delta = delta = 0, no parametric drive."""
    _require_resonant(bundle)
    p, c, b = bundle.params, bundle.couplings, bundle.baths
    if c.G_plus >= c.G_minus and c.G_plus > 0:
        raise PreconditionViolated("closed form needs G+ < G-")
    k, g, G2 = p.kappa, p.gamma_m, c.G_squared
    nc, nm = 2.0 * b.n_c_th + 1.0, 2.0 * b.n_m_th + 1.0
    exact, reduced = [], []
    for Gopt, Gdiff in ((c.Gamma_opt_minus, c.G_minus - c.G_plus),
                        (c.Gamma_opt_plus, c.G_minus + c.G_plus)):
        exact.append((4.0 * Gdiff**2 * k * nc + (4.0 * G2 + k * (k + g)) * g * nm)
                     / ((k + g) * (4.0 * G2 + k * g)))
        reduced.append((g * nm + Gopt * nc) / c.Gamma_eff)
    return ClosedFormVariances(tuple(exact), tuple(reduced))


def quadrature_density_closed_form(bundle: Bundle, which: int, omega) -> np.ndarray:
    """X1 (which=1) or X2 (which=2) spectral density for Delta = delta = 0, lambda = 0.

    Normalised so that its integral over dw/2pi equals the exact variance of
    :func:`closed_form_variances`.
    """
    _require_resonant(bundle)
    p, c, b = bundle.params, bundle.couplings, bundle.baths
    k, g, G2 = p.kappa, p.gamma_m, c.G_squared
    Gdiff = c.G_minus - c.G_plus if which == 1 else c.G_minus + c.G_plus
    w2 = np.asarray(omega, dtype=float) ** 2
    num = 4.0 * k * Gdiff**2 * (b.n_c_th + 0.5) + g * (k**2 + 4.0 * w2) * (b.n_m_th + 0.5)
    den = (4.0 * G2 + g * k) ** 2 + 4.0 * (g**2 + k**2 - 8.0 * G2) * w2 + 16.0 * w2**2
    return 8.0 * num / den


def solve_occupations(bundle: Bundle, var_x1: float, var_x2: float, exact: bool = False):
    """Invert the two variance equations for (n_m_th, n_c_th).

    Both variances are affine in (2 n_m + 1, 2 n_c + 1); the 2x2 system is
    solved directly. Uses the reduced (kappa >> G) form unless ``exact``.
    """
    def pick(n_c, n_m):
        cf = closed_form_variances(bundle.with_baths(n_c_th=n_c, n_m_th=n_m))
        return np.array(cf.exact if exact else cf.reduced)

    # var = a (2 n_m + 1) + b (2 n_c + 1); raising n by 1/2 adds one coefficient
    base = pick(0.0, 0.0)
    A = np.column_stack([pick(0.0, 0.5) - base, pick(0.5, 0.0) - base])
    two_n_plus_1 = np.linalg.solve(A, [var_x1, var_x2])
    n_m, n_c = (two_n_plus_1 - 1.0) / 2.0
    return float(n_m), float(n_c)


def linewidth_grid(bundle: Bundle, points: int = 801, width: float = 6.0) -> np.ndarray:
    """Grid for Lorentzian linewidth fits: +-width times the widest mechanical rate."""
    c, d = bundle.couplings, bundle.drive
    half = width * (abs(c.Gamma_eff) + 4.0 * d.lambda_par) + abs(d.delta)
    return np.linspace(-half, half, points)


def _at_phase(bundle, phi, psi_offset):
    if psi_offset is None:
        return bundle.with_drive(phi=phi)
    return bundle.with_drive(phi=phi, psi=wrap_angle(phi + psi_offset))


def phase_scan(bundle: Bundle, phis: Sequence[float], psi_offset: Optional[float] = None,
               linewidth: bool = True, variance: bool = True, omega=None) -> list:
    """Spectrum, variance and Lorentzian linewidth of X_phi for each phase.

    With ``psi_offset`` set, the parametric phase follows the probe,
    psi = phi + psi_offset; otherwise the drive's psi is held fixed.
    """
    from .inference.lorentzian import fit_lorentzian
    from .params import UnstableParameters

    out = []
    for phi in phis:
        b = _at_phase(bundle, phi, psi_offset)
        try:
            require_stable(b)
        except UnstableParameters:
            raise UnstableAtPhase(phi) from None
        grid = linewidth_grid(b) if omega is None else np.asarray(omega, dtype=float)
        spec = Spectrum(grid, quadrature_density(b, phi, grid))
        var = quadrature_variance(b, phi) if variance else float("nan")
        fit = fwhm = None
        if linewidth:
            fit = fit_lorentzian(spec)
            fwhm = fit.values["fwhm"]
        out.append(QuadratureResult(phi=phi, spectrum=spec, variance=var, linewidth=fwhm, fit=fit))
    return out


@dataclass(frozen=True)
class HeatingModel:
    """Cavity occupation growing linearly with the pump ratio n_p+/n_p-."""

    n_c0: float
    slope: float

    def __call__(self, ratio):
        return self.n_c0 + self.slope * np.asarray(ratio)


@dataclass(frozen=True, eq=False)
class RatioScan:
    ratio: np.ndarray
    n_c_th: np.ndarray
    var_x1: np.ndarray
    var_x2: np.ndarray

    def argmin(self) -> int:
        return int(np.argmin(self.var_x1))


def ratio_scan(params: SystemParams, np_total: float, ratios, n_m_th: float,
               heating, exact: bool = True) -> RatioScan:
    """X1/X2 variances versus pump ratio at fixed total pump photon number.

    ``heating`` is a :class:`HeatingModel` or a constant n_c_th.
    """
    ratios = np.asarray(ratios, dtype=float)
    n_c = heating(ratios) if callable(heating) else np.full_like(ratios, float(heating))
    x1, x2 = np.empty_like(ratios), np.empty_like(ratios)
    for i, (rho, nc) in enumerate(zip(ratios, n_c)):
        b = validate_params(params, DriveConfig.from_total(np_total, rho),
                            BathOccupations(n_c_th=float(nc), n_m_th=n_m_th))
        cf = closed_form_variances(b)
        x1[i], x2[i] = cf.exact if exact else cf.reduced
    return RatioScan(ratios, n_c, x1, x2)
