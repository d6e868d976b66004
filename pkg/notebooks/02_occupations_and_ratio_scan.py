"""
From measured quadrature variances back to bath occupations, and the
trade-off between squeezing strength and pump heating.

Run with ``python notebooks/02_occupations_and_ratio_scan.py``.
"""
import numpy as np

from omsqueeze import (DEVICE, DriveConfig, HeatingModel, closed_form_variances, ratio_scan,
                       solve_occupations, validate_params)

# %% Solve the 2x2 linear system for (n_m, n_c) at the weak pump point
b = validate_params(DEVICE, DriveConfig.from_total(1.35e4, 0.5))
n_m, n_c = solve_occupations(b, 1.54, 13.81)
print(f"reduced form: n_m_th = {n_m:.3f}, n_c_th = {n_c:.5f}")
n_m_e, n_c_e = solve_occupations(b, 1.54, 13.81, exact=True)
print(f"exact form:   n_m_th = {n_m_e:.3f}, n_c_th = {n_c_e:.5f}")

fwd = closed_form_variances(b.with_baths(n_m_th=n_m, n_c_th=n_c)).reduced
print("forward check:", fwd)

# %% Ratio scan at fixed total pump photon number
# the cavity occupation rises with the blue pump; the best ratio is interior
heating = HeatingModel(n_c0=0.05, slope=0.5)
ratios = np.round(np.arange(0.0, 0.91, 0.05), 2)
rs = ratio_scan(DEVICE, 1.85e5, ratios, 242.5, heating)
print("\nratio  n_c_th  var X1   var X2")
for r, nc, x1, x2 in zip(rs.ratio, rs.n_c_th, rs.var_x1, rs.var_x2):
    print(f"{r:5.2f}  {nc:6.3f}  {x1:7.4f}  {x2:7.3f}")
k = rs.argmin()
print(f"minimum var X1 = {rs.var_x1[k]:.4f} at ratio {rs.ratio[k]:.2f}")

# even a fixed cavity occupation gives an interior optimum here: the
# thermal mechanical bath leaks in faster as Gamma_eff shrinks with the ratio
flat = ratio_scan(DEVICE, 1.85e5, ratios, 242.5, 0.05)
print(f"constant n_c_th = 0.05: minimum var X1 = {flat.var_x1.min():.4f} "
      f"at ratio {flat.ratio[flat.argmin()]:.2f}")

# with a cold mechanical bath the variance keeps falling over moderate ratios
cold = ratio_scan(DEVICE, 1.85e5, np.linspace(0, 0.6, 7), 10.0, 0.0)
print("n_m_th = 10, vacuum cavity, var X1:", np.round(cold.var_x1, 4))
