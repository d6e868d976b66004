"""
Linear calibrations: pump power to coupling, and thermal sideband power.

Pump calibration uses G^2 = a * P through the origin. The thermal
calibration plots the normalized motional sideband power
((4 Delta^2 + kappa^2) / kbar^2) * P_m / P_- against k_B T / (hbar omega_m);
the slope is b_- * (2 / kbar)^2, with kbar the mean cavity linewidth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
import scipy.constants as const

from .optimize import FitResult


class DegenerateDesign(ValueError):
    pass


@dataclass(frozen=True)
class CalibrationConstants:
    """Pump and thermal calibration constants.

    Parameters
    ----------
    a_minus, a_plus : float
        G^2 / P slopes [rad^2 s^-1 W^-1]
    b_minus : float
        thermal calibration [(rad/s)^2]
    parasitic_correction : mapping, optional
        dimensionless correction factor per pump frequency label; carried for
        bookkeeping only (its values are absorbed into the slopes above)
    """

    a_minus: float
    a_plus: float
    b_minus: float
    parasitic_correction: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("a_minus", "a_plus", "b_minus"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")

    @property
    def gain_product(self) -> float:
        """G[omega_c] kappa_R hbar omega_c = b_- / a_- [W s]."""
        return self.b_minus / self.a_minus

    def couplings_squared(self, P_minus: float, P_plus: float):
        """(G_-^2, G_+^2) from transmitted pump powers."""
        return self.a_minus * P_minus, self.a_plus * P_plus


def fit_linear_calibration(points: Sequence, intercept: bool = False) -> FitResult:
    """Ordinary least-squares line through ``points``.

    ``points`` holds (x, y) or (x, y, sigma) tuples; with sigma given the fit
    is weighted by 1/sigma^2. Without ``intercept`` the line passes through
    the origin. Standard errors are scaled by the reduced chi-square.

    Raises
    ------
    DegenerateDesign
        if all x are equal (or all zero when fitting through the origin)
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] not in (2, 3):
        raise ValueError("points must be a sequence of (x, y) or (x, y, sigma)")
    x, y = arr[:, 0], arr[:, 1]
    w = 1.0 / arr[:, 2] if arr.shape[1] == 3 else np.ones_like(x)
    n_par = 2 if intercept else 1
    if len(x) < n_par + 1:
        raise ValueError(f"need at least {n_par + 1} points")
    if np.ptp(x) == 0.0 and (intercept or x[0] == 0.0):
        raise DegenerateDesign("all x values are equal")

    X = np.column_stack([x, np.ones_like(x)] if intercept else [x])
    Xw, yw = X * w[:, None], y * w
    coef, *_ = np.linalg.lstsq(Xw, yw, rcond=None)
    r = Xw @ coef - yw
    rss = float(r @ r)
    dof = len(x) - n_par
    cov = np.linalg.inv(Xw.T @ Xw) * (rss / dof)
    names = ["slope", "intercept"] if intercept else ["slope"]
    values = dict(zip(names, coef.tolist()))
    stderr = dict(zip(names, np.sqrt(np.diag(cov)).tolist()))
    if not intercept:
        values["intercept"], stderr["intercept"] = 0.0, 0.0
    return FitResult(names=names, values=values, stderr=stderr, rss=rss, iterations=1,
                     converged=True, message="closed-form least squares", gradient_norm=0.0,
                     covariance=cov)


def thermal_occupation_axis(temperature, omega_m: float) -> np.ndarray:
    """k_B T / (hbar omega_m) for bath temperatures in kelvin."""
    return const.k * np.asarray(temperature, dtype=float) / (const.hbar * omega_m)


def normalized_sideband_power(sideband_ratio, kappa, Delta, kappa_bar: Optional[float] = None):
    """((4 Delta^2 + kappa^2) / kbar^2) * P_m / P_-, the thermal-calibration ordinate.

    ``kappa`` may vary point by point; ``kappa_bar`` defaults to its mean.
    """
    kappa = np.asarray(kappa, dtype=float)
    kbar = float(np.mean(kappa)) if kappa_bar is None else kappa_bar
    return (4.0 * Delta**2 + kappa**2) / kbar**2 * np.asarray(sideband_ratio, dtype=float)


def thermal_calibration(temperature, sideband_ratio, kappa, omega_m: float, Delta: float = 0.0,
                        intercept: bool = True, sigma=None):
    """Fit b_- from a cryostat temperature series.

    Returns ``(b_minus, b_minus_stderr, fit)`` where ``fit`` is the raw line
    fit of normalized sideband power against k_B T / (hbar omega_m).
    """
    kappa = np.broadcast_to(np.asarray(kappa, dtype=float), np.shape(temperature))
    kbar = float(np.mean(kappa))
    x = thermal_occupation_axis(temperature, omega_m)
    y = normalized_sideband_power(sideband_ratio, kappa, Delta, kbar)
    pts = np.column_stack([x, y] if sigma is None else [x, y, sigma])
    fit = fit_linear_calibration(pts, intercept=intercept)
    factor = kbar**2 / 4.0
    return fit["slope"] * factor, fit.stderr["slope"] * factor, fit
