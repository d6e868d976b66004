"""
Parametric-drive amplitude and phase from quadrature linewidth vs probe phase.

Two hypotheses for the phase of the drive are compared:

``"follow"``
    psi = phi + psi0, the drive is locked to the BAE probe
``"constant"``
    psi = psi0, the drive is locked to the squeezing pumps

For each candidate (lambda, psi0) the linewidth at every probe phase is the
FWHM of a single-Lorentzian fit to the predicted quadrature spectrum.
"""
from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from ..params import Bundle, wrap_angle
from ..quadrature import UnstableAtPhase, phase_scan
from .optimize import NonConvergence, ParamSpec, run_fit

HYPOTHESES = ("follow", "constant")
MIN_PHASES = 6


def _normalize(lam, psi0):
    """Fold a signed amplitude into lambda >= 0 (lambda -> -lambda, psi0 -> psi0 + pi)."""
    if lam < 0:
        return -lam, wrap_angle(psi0 + math.pi)
    return lam, wrap_angle(psi0)


def predict_linewidths(bundle: Bundle, phis, lambda_par: float, psi0: float,
                       hypothesis: str = "follow") -> np.ndarray:
    """Lorentzian FWHM of the X_phi spectrum at each probe phase [rad/s]."""
    if hypothesis not in HYPOTHESES:
        raise ValueError(f"hypothesis must be one of {HYPOTHESES}")
    lam, psi0 = _normalize(lambda_par, psi0)
    b = bundle.with_drive(lambda_par=lam, psi=psi0)
    offset = psi0 if hypothesis == "follow" else None
    scan = phase_scan(b, phis, psi_offset=offset, variance=False)
    return np.array([r.linewidth for r in scan])


def _as_arrays(data):
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError("linewidth data must be (phi, gamma, sigma) rows")
    if len(arr) < MIN_PHASES:
        raise ValueError(f"need at least {MIN_PHASES} phase points")
    if np.any(arr[:, 2] <= 0):
        raise ValueError("sigma must be positive")
    return arr[:, 0], arr[:, 1], arr[:, 2]


def fit_parametric_drive(data: Sequence, bundle: Bundle, hypothesis: str = "follow",
                         initial: Optional[dict] = None, psi_grid: int = 12, **kwargs):
    """Fit (lambda_par, psi0) to measured linewidths.

    Parameters
    ----------
    data : sequence of (phi, gamma, sigma)
        probe phase [rad], Lorentzian linewidth and its uncertainty [rad/s]
    bundle : Bundle
        pumps and occupations from a prior output-spectrum fit; its own
        lambda_par and psi are ignored
    hypothesis : {"follow", "constant"}
    initial : dict, optional
        starting ``lambda_par`` and ``psi0``; by default lambda starts from
        the peak-to-peak linewidth swing and psi0 from a coarse grid

    Returns
    -------
    FitResult
        values ``lambda_par`` (>= 0) and ``psi0`` in (-pi, pi]; ``rss`` is
        the chi-square used to rank hypotheses.
    """
    phis, gamma, sigma = _as_arrays(data)
    if hypothesis not in HYPOTHESES:
        raise ValueError(f"hypothesis must be one of {HYPOTHESES}")

    def residual(p):
        try:
            pred = predict_linewidths(bundle, phis, p["lambda_par"], p["psi0"], hypothesis)
        except UnstableAtPhase:
            return np.full_like(gamma, np.inf)
        return (pred - gamma) / sigma

    # a parametric drive splits the mechanical damping into Gamma/2 -+ 2 lambda,
    # so the linewidth swing is of order 8 lambda
    lam_scale = max(np.ptp(gamma) / 8.0, 1e-3 * float(np.mean(gamma)))
    if initial is None:
        best = None
        for psi0 in np.linspace(-math.pi, math.pi, psi_grid, endpoint=False):
            r = residual({"lambda_par": lam_scale, "psi0": psi0})
            cost = float(r @ r)
            if np.isfinite(cost) and (best is None or cost < best[0]):
                best = (cost, lam_scale, psi0)
        if best is None:
            raise NonConvergence("no stable starting point on the (lambda, psi0) grid")
        initial = {"lambda_par": best[1], "psi0": best[2]}
    else:
        # an unstable explicit start is a caller error and propagates
        predict_linewidths(bundle, phis, initial["lambda_par"], initial["psi0"], hypothesis)

    specs = [ParamSpec("lambda_par", "linear", lam_scale), ParamSpec("psi0", "angle", 1.0)]
    kwargs.setdefault("fd_step", 1e-5)
    res = run_fit(specs, residual, initial, **kwargs)
    lam, psi0 = _normalize(res.values["lambda_par"], res.values["psi0"])
    res.values.update(lambda_par=lam, psi0=psi0)
    res.extra["hypothesis"] = hypothesis
    res.extra["dof"] = len(gamma) - 2
    return res


def compare_hypotheses(data: Sequence, bundle: Bundle, **kwargs) -> dict:
    """Fit both hypotheses; returns {hypothesis: FitResult}, best first."""
    fits = {h: fit_parametric_drive(data, bundle, h, **kwargs) for h in HYPOTHESES}
    return dict(sorted(fits.items(), key=lambda kv: kv[1].rss))
