"""
Frequency-domain linear response of the linearized two-tone model.

Operator ordering is (d, d^dag, b, b^dag) throughout. With the Fourier
convention x(t) = int x[w] exp(-i w t) dw / 2pi the Langevin equations read
(M - i w) D[w] = L D_in[w], so chi[w] = (M - i w)^-1 where M is the drift
matrix returned by :func:`drift_matrix`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .params import Bundle, UnstableParameters
from .spectrum import Spectrum

#: stationary spectra are refused below this margin, in units of gamma_m
STABILITY_MARGIN = 1e-6
DEFAULT_GRID_POINTS = 32768

_SWAP = np.array([1, 0, 3, 2])


class SingularMatrix(ArithmeticError):
    pass


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    eigenvalues: np.ndarray
    margin: float


@dataclass(frozen=True, eq=False)
class ChiMatrix:
    omega: float
    entries: np.ndarray


@dataclass(frozen=True, eq=False)
class NoiseSpectra:
    """Output noise at the R port.

    ``device`` is S[w] (gain-free, no vacuum term); ``symmetrized`` is
    S_R[w] = 1/2 + kappa_R S[w] in quanta.
    """

    device: Spectrum
    symmetrized: Spectrum


def drift_matrix(bundle: Bundle, psi: Optional[float] = None) -> np.ndarray:
    """Return M with chi[w]^-1 = M - i w I.

    ``psi`` overrides the parametric phase stored in the drive. The
    parametric terms follow from H_par = -hbar lambda (e^{i psi} b^2 +
    e^{-i psi} b^dag^2), giving db/dt = ... + 2 i lambda e^{-i psi} b^dag.
    """
    p, d, c = bundle.params, bundle.drive, bundle.couplings
    Gm, Gp = c.G_minus, c.G_plus
    lam = d.lambda_par
    psi = d.psi if psi is None else psi
    k2, g2 = 0.5 * p.kappa, 0.5 * p.gamma_m
    return np.array([
        [k2 - 1j * d.Delta, 0.0, -1j * Gm, -1j * Gp],
        [0.0, k2 + 1j * d.Delta, 1j * Gp, 1j * Gm],
        [-1j * Gm, -1j * Gp, g2 - 1j * d.delta, -2j * lam * np.exp(-1j * psi)],
        [1j * Gp, 1j * Gm, 2j * lam * np.exp(1j * psi), g2 + 1j * d.delta],
    ], dtype=complex)


def noise_scaling(bundle: Bundle) -> np.ndarray:
    """Diagonal of L = diag(sqrt kappa, sqrt kappa, sqrt gamma_m, sqrt gamma_m)."""
    p = bundle.params
    return np.sqrt(np.array([p.kappa, p.kappa, p.gamma_m, p.gamma_m]))


def assess_stability(bundle: Bundle) -> StabilityReport:
    """Eigenvalues of the drift matrix; stable iff all real parts exceed the margin."""
    eig = np.linalg.eigvals(drift_matrix(bundle))
    eig = eig[np.lexsort((eig.imag, eig.real))]
    margin = float(eig.real.min())
    stable = margin > STABILITY_MARGIN * bundle.params.gamma_m
    return StabilityReport(stable=stable, eigenvalues=eig, margin=margin)


def require_stable(bundle: Bundle) -> StabilityReport:
    rep = assess_stability(bundle)
    if not rep.stable:
        raise UnstableParameters(
            f"no stationary state: min Re(eig) = {rep.margin:.6g} rad/s")
    return rep


def chi_inverse(bundle: Bundle, omega) -> np.ndarray:
    """chi^-1 assembled entry by entry, shape (..., 4, 4)."""
    omega = np.asarray(omega, dtype=float)
    M = drift_matrix(bundle)
    return M - 1j * omega[..., None, None] * np.eye(4)


def chi_grid(bundle: Bundle, omega) -> np.ndarray:
    """chi[w] for every w in ``omega``, shape (len(omega), 4, 4).

    Each 4x4 system is solved independently by LU with partial pivoting,
    so values do not depend on the grid they were computed on.
    """
    A = chi_inverse(bundle, np.atleast_1d(omega))
    rhs = np.broadcast_to(np.eye(4, dtype=complex), A.shape)
    try:
        return np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(str(exc)) from None


def chi(bundle: Bundle, omega: float) -> ChiMatrix:
    return ChiMatrix(float(omega), chi_grid(bundle, [omega])[0])


def default_grid(bundle: Bundle, points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Symmetric grid wide enough for both the cavity and the mechanical feature."""
    p, d = bundle.params, bundle.drive
    g_eff = abs(bundle.couplings.Gamma_eff)
    span = 20.0 * max(p.kappa, g_eff, abs(d.Delta) + 5.0 * g_eff)
    return np.linspace(-span, span, points)


def _grid(bundle, omega):
    return default_grid(bundle) if omega is None else np.asarray(omega, dtype=float)


def transmission(bundle: Bundle, omega=None) -> Spectrum:
    """T[w] = -sqrt(kappa_L kappa_R) chi_11[w]."""
    require_stable(bundle)
    omega = _grid(bundle, omega)
    p = bundle.params
    chi11 = chi_grid(bundle, omega)[:, 0, 0]
    return Spectrum(omega, -math.sqrt(p.kappa_L * p.kappa_R) * chi11)


def device_noise(bundle: Bundle, chis: np.ndarray) -> np.ndarray:
    """S[w] from precomputed chi[w] (shape (N, 4, 4))."""
    p, b = bundle.params, bundle.baths
    row = np.abs(chis[:, 0, :]) ** 2
    return (p.kappa * row[:, 0] * b.n_c_th
            + p.kappa * row[:, 1] * (b.n_c_th + 1.0)
            + p.gamma_m * row[:, 2] * b.n_m_th
            + p.gamma_m * row[:, 3] * (b.n_m_th + 1.0))


def output_noise_spectrum(bundle: Bundle, omega=None) -> NoiseSpectra:
    """Symmetrized output noise at the R port, with and without vacuum."""
    require_stable(bundle)
    omega = _grid(bundle, omega)
    S = device_noise(bundle, chi_grid(bundle, omega))
    S_R = 0.5 + bundle.params.kappa_R * S
    return NoiseSpectra(Spectrum(omega, S), Spectrum(omega, S_R))


# Closed forms valid for delta = 0 and no parametric drive.

def _check_closed_form(bundle, need_Delta_zero=False):
    d = bundle.drive
    if d.delta != 0.0 or d.lambda_par != 0.0 or (need_Delta_zero and d.Delta != 0.0):
        raise ValueError("closed form requires delta = 0, lambda = 0"
                         + (", Delta = 0" if need_Delta_zero else ""))


def transmission_closed_form(bundle: Bundle, omega) -> np.ndarray:
    _check_closed_form(bundle)
    p, d, c = bundle.params, bundle.drive, bundle.couplings
    w = np.asarray(omega, dtype=float)
    mech = p.gamma_m - 2j * w
    return (-2.0 * math.sqrt(p.kappa_L * p.kappa_R) * mech
            / (4.0 * c.G_squared + (p.kappa - 2j * (w + d.Delta)) * mech))


def device_noise_closed_form(bundle: Bundle, omega) -> np.ndarray:
    """S[w] for delta = 0, lambda = 0.

    The detuning Delta enters the cavity factor of the denominator, as it
    does in chi_11 and in the transmission.
    """
    _check_closed_form(bundle)
    p, d, c, b = bundle.params, bundle.drive, bundle.couplings, bundle.baths
    w = np.asarray(omega, dtype=float)
    k, g = p.kappa, p.gamma_m
    num = (4.0 * g * (g * k * b.n_c_th + 4.0 * c.G_minus**2 * b.n_m_th
                      + 4.0 * c.G_plus**2 * (b.n_m_th + 1.0))
           + 16.0 * k * b.n_c_th * w**2)
    den = np.abs(4.0 * c.G_squared + (k + 2j * (w + d.Delta)) * (g + 2j * w)) ** 2
    return num / den
