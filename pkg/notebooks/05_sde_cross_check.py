"""
Independent check of the frequency-domain variances with stochastic
trajectories of the linearized Langevin equations.

Uses the exact Ornstein-Uhlenbeck step, so the only errors are
statistical. Takes about 15 s.

Run with ``python notebooks/05_sde_cross_check.py``.
"""
import math
import time

import numpy as np

from omsqueeze import DEVICE, BathOccupations, DriveConfig, quadrature_variance, validate_params
from omsqueeze.sde import (estimate_variance_from_trajectories, max_time_step,
                           simulate_trajectories, steady_state_covariance)

b = validate_params(DEVICE, DriveConfig.from_total(1.85e5, 0.43),
                    BathOccupations(n_c_th=0.2, n_m_th=242.5))
dt = max_time_step(b)
t0 = time.perf_counter()
ens = simulate_trajectories(b, seed=2024, dt=dt, n_steps=150_000, n_traj=256)
print(f"256 trajectories x 150000 steps of {dt * 1e9:.1f} ns in {time.perf_counter() - t0:.1f} s")

V = steady_state_covariance(b)
print("phi [deg]   SDE                 Lyapunov   integral")
for deg in (0, 45, 90, 135):
    phi = math.radians(deg)
    est = estimate_variance_from_trajectories(ens, phi)
    u = np.array([math.cos(phi), -math.sin(phi)])
    print(f"{deg:8d}   {est.variance:.4f} +- {est.sigma:.4f}   {u @ V[2:, 2:] @ u:.4f}     "
          f"{quadrature_variance(b, phi):.4f}")
