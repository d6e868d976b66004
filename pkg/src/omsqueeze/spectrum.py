from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .params import TWO_PI


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Values on an angular-frequency grid.

    ``omega`` is in rad/s in the rotating frame of the quantity. ``values``
    may be real (noise, quadrature spectra) or complex (transmission).
    ``sigma`` is an optional per-bin standard uncertainty.
    """

    omega: np.ndarray
    values: np.ndarray
    sigma: Optional[np.ndarray] = None

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        values = np.asarray(self.values)
        if omega.ndim != 1 or values.shape != omega.shape:
            raise ValueError("omega and values must be 1-d arrays of equal length")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "values", values)
        if self.sigma is not None:
            sigma = np.asarray(self.sigma, dtype=float)
            if sigma.shape != omega.shape:
                raise ValueError("sigma must match omega")
            object.__setattr__(self, "sigma", sigma)

    def __len__(self):
        return len(self.omega)

    @property
    def freq_hz(self) -> np.ndarray:
        return self.omega / TWO_PI

    def integral(self) -> float:
        """Trapezoidal integral over omega (value * rad/s)."""
        return float(np.trapezoid(self.values, self.omega))

    def window(self, lo: float, hi: float) -> "Spectrum":
        m = (self.omega >= lo) & (self.omega <= hi)
        return Spectrum(self.omega[m], self.values[m], None if self.sigma is None else self.sigma[m])
