"""
Fitting a noisy output spectrum to recover occupations and linewidths.

A synthetic pumped-minus-unpumped spectrum is generated from known
parameters, 1 % multiplicative noise is added, and the full model is fitted
starting from a deliberately wrong template.

Run with ``python notebooks/03_output_spectrum_fit.py``.
"""
import math

import numpy as np

from omsqueeze import DEVICE, BathOccupations, DriveConfig, validate_params
from omsqueeze.inference import CalibrationConstants, fit_output_spectrum, output_spectrum_model
from omsqueeze.spectrum import Spectrum

TWO_PI = 2 * math.pi
cal = CalibrationConstants(a_minus=7.49e17, a_plus=3.23e18, b_minus=2.53e5)
gain = cal.gain_product

truth = validate_params(DEVICE, DriveConfig.from_total(1000, 0.5),
                        BathOccupations(n_c_th=0.5, n_m_th=50.0))
k, ge = truth.params.kappa, truth.couplings.Gamma_eff
# dense near the mechanical feature, coarse across the cavity line
w = np.union1d(np.linspace(-3 * k, 3 * k, 600), np.linspace(-15 * ge, 15 * ge, 1400))

rng = np.random.default_rng(1)
y0 = output_spectrum_model(truth, gain, w)
y = y0 * (1 + 0.01 * rng.standard_normal(w.size))
measured = Spectrum(w, y, 0.01 * np.abs(y))

p = truth.params
template = truth.with_params(gamma_m=1.3 * p.gamma_m, kappa=1.05 * p.kappa,
                             kappa_I=p.kappa_I + 0.05 * p.kappa).with_baths(n_c_th=1, n_m_th=1)
fit = fit_output_spectrum(measured, template, gain)

print(f"converged: {fit.converged} after {fit.iterations} iterations")
for name, true in (("n_m_th", 50.0), ("n_c_th", 0.5), ("kappa", k), ("gamma_m", p.gamma_m)):
    scale = TWO_PI if name in ("kappa", "gamma_m") else 1.0
    print(f"{name:8s} {fit[name] / scale:12.5g} +- {fit.stderr[name] / scale:.2g}"
          f"   (true {true / scale:.5g})")
print(f"Gamma_eff / 2pi = {fit.extra['Gamma_eff'] / TWO_PI:.2f} "
      f"+- {fit.extra['Gamma_eff_stderr'] / TWO_PI:.2f} Hz (true {ge / TWO_PI:.2f})")
chi2 = fit.rss / (w.size - len(fit.names))
print(f"reduced chi^2 = {chi2:.3f}")
