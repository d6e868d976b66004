"""
Two-tone squeezing from the linear response of the cavity-mechanics pair.

Walks through the device constants, the stability check, the quadrature
spectra and variances, and the large-cooperativity limit where the
mechanical state approaches an ideal squeezed vacuum.

Run with ``python notebooks/01_squeezing_basics.py``.
"""
import math

import numpy as np

from omsqueeze import (DEVICE, BathOccupations, DriveConfig, assess_stability,
                       closed_form_variances, quadrature_variance, validate_params)

TWO_PI = 2 * math.pi

# %% Device and a weak pump point
print(f"omega_m / 2pi = {DEVICE.omega_m / TWO_PI / 1e6:.2f} MHz, "
      f"kappa / 2pi = {DEVICE.kappa / TWO_PI / 1e3:.0f} kHz, "
      f"gamma_m / 2pi = {DEVICE.gamma_m / TWO_PI:.0f} Hz")

weak = validate_params(DEVICE, DriveConfig.from_total(1.35e4, 0.5),
                       BathOccupations(n_c_th=0.594, n_m_th=67.37))
c = weak.couplings
print(f"G-/2pi = {c.G_minus / TWO_PI:.0f} Hz, G+/2pi = {c.G_plus / TWO_PI:.0f} Hz, "
      f"r = {c.r:.3f}, Gamma_eff / 2pi = {c.Gamma_eff / TWO_PI:.1f} Hz")

# %% Stability: every drift eigenvalue must have a positive real part
rep = assess_stability(weak)
print("stable:", rep.stable, " slowest decay / 2pi:",
      f"{min(rep.eigenvalues.real) / TWO_PI:.1f} Hz")

# %% Quadrature variances: integrated spectrum vs two-pole closed form
for name, phi, cf in (("X1", 0.0, 0), ("X2", math.pi / 2, 1)):
    v = quadrature_variance(weak, phi)
    print(f"var {name} = {v:.4f} x_zp^2 (closed form {closed_form_variances(weak).exact[cf]:.4f})")

# %% Heading to the Bogoliubov limit with vacuum baths
print("\ncooperativity   var X1    e^-2r")
for coop in (1e2, 1e3, 1e4, 1e5, 1e6):
    n_minus = coop * DEVICE.kappa * DEVICE.gamma_m / (4 * DEVICE.g0**2)
    b = validate_params(DEVICE, DriveConfig(np_minus=n_minus, np_plus=0.5 * n_minus))
    print(f"{coop:12.0e}   {quadrature_variance(b, 0.0):.4f}   {math.exp(-2 * b.couplings.r):.4f}")
print("values below 0.5 are squeezed beyond 3 dB")

# %% Variance versus probe phase follows a + b cos(2 phi)
phis = np.radians([0, 30, 60, 90])
print("\nphi [deg]  var")
for p in phis:
    print(f"{math.degrees(p):8.0f}  {quadrature_variance(weak, p):.4f}")
