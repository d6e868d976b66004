import math

import numpy as np
import pytest
from scipy.linalg import expm

from omsqueeze import BathOccupations, DriveConfig, UnstableParameters, quadrature_variance, validate_params
from omsqueeze.sde import (NonStationarySegment, StepTooLarge, diffusion, estimate_variance_from_trajectories,
                           exact_step, max_time_step, real_drift, simulate_trajectories,
                           steady_state_covariance)

from conftest import make_params

# small cavity linewidth keeps the step limit 0.05 / kappa practical
TOY = make_params(kappa_hz=20e3, gamma_hz=50.0, g0_hz=100.0)
# uncoupled checks: a narrower cavity allows a longer step
FREE = make_params(kappa_hz=1e3, gamma_hz=100.0, g0_hz=100.0)


def toy(n_minus=0.0, ratio=0.0, n_c=0.0, n_m=0.0, params=TOY, **kw):
    return validate_params(params, DriveConfig(np_minus=n_minus, np_plus=ratio * n_minus, **kw),
                           BathOccupations(n_c_th=n_c, n_m_th=n_m))


@pytest.fixture(scope="module")
def squeezed_ensemble():
    # Gamma_eff ~ 2 pi x 1.05 kHz, ratio 0.5
    b = toy(n_minus=1060.0, ratio=0.5, n_c=0.3, n_m=5.0)
    ens = simulate_trajectories(b, seed=42, dt=max_time_step(b), n_steps=120_000, n_traj=32)
    return b, ens


def test_exact_step_discrete_covariance():
    b = toy(n_minus=1000.0, ratio=0.4, n_c=0.5, n_m=3.0, Delta=2e3, delta=300.0)
    A, Q = real_drift(b), diffusion(b)
    dt = max_time_step(b)
    Phi, Qd = exact_step(A, Q, dt)
    assert Phi == pytest.approx(expm(-A * dt), abs=1e-14)
    V = steady_state_covariance(b)
    assert np.max(np.abs(Qd - (V - Phi @ V @ Phi.T))) < 1e-12 * np.max(np.abs(V))


def test_lyapunov_matches_frequency_domain():
    b = toy(n_minus=1000.0, ratio=0.4, n_c=0.5, n_m=3.0, delta=30.0, lambda_par=5.0, psi=1.0)
    V = steady_state_covariance(b)
    assert V[2, 2] == pytest.approx(quadrature_variance(b, 0.0), rel=1e-8)
    assert V[3, 3] == pytest.approx(quadrature_variance(b, math.pi / 2), rel=1e-8)
    assert np.allclose(V, V.T) and np.all(np.linalg.eigvalsh(V) > 0)


def test_deterministic_decay():
    # Gamma_eff ~ 2 pi x 250 Hz << kappa, so the decay is Gamma_eff / 2 up to O(Gamma_eff / kappa)
    b = toy(n_minus=100.0, delta=2 * math.pi * 150.0)
    dt = max_time_step(b)
    ge = b.couplings.Gamma_eff
    n = 4 * math.ceil(6.0 / (ge * dt) / 4)
    ens = simulate_trajectories(b, seed=0, dt=dt, n_steps=n, n_traj=1, z0=[0, 0, 2.0, 0],
                                noise=False, burn_in=0.0, batch_steps=n // 4, decimate=1)
    t = ens.times
    z = ens.samples[0]
    late = t > 1.0 / ge
    amp = 0.5 * np.hypot(z[:, 2], z[:, 3])
    rate = -np.polyfit(t[late], np.log(amp[late]), 1)[0]
    assert rate == pytest.approx(ge / 2, rel=0.02)
    slow = min(np.linalg.eigvals(real_drift(b)), key=lambda e: e.real)
    assert rate == pytest.approx(slow.real, rel=1e-3)
    # b = (X + iY)/2 rotates at the mechanical detuning
    phase = np.unwrap(np.angle(z[:, 2] + 1j * z[:, 3]))
    freq = np.polyfit(t[late], phase[late], 1)[0]
    assert abs(freq) == pytest.approx(2 * math.pi * 150.0, rel=0.02)


def test_thermal_oscillator():
    b = toy(n_m=10.0, params=FREE)
    dt = max_time_step(b)
    ens = simulate_trajectories(b, seed=7, dt=dt, n_steps=200_000, n_traj=32)
    est = estimate_variance_from_trajectories(ens, 0.0)
    assert abs(est.variance - 21.0) < 3 * est.sigma
    est = estimate_variance_from_trajectories(ens, math.pi / 2)
    assert abs(est.variance - 21.0) < 3 * est.sigma


def test_squeezed_bundle_matches_frequency_domain(squeezed_ensemble):
    b, ens = squeezed_ensemble
    for phi in (0.0, math.pi / 2):
        v, s = estimate_variance_from_trajectories(ens, phi)
        ref = quadrature_variance(b, phi)
        assert abs(v - ref) < 3 * s
        assert v == pytest.approx(ref, rel=0.05)


def test_covariance_matches_lyapunov(squeezed_ensemble):
    b, ens = squeezed_ensemble
    V = steady_state_covariance(b)
    C, S = ens.covariance, ens.covariance_sigma
    assert np.array_equal(C, C.T)
    assert np.all(np.linalg.eigvalsh(C) > 0)
    assert np.all(np.abs(C - V) < 3.5 * S + 1e-12)


def test_phase_flip_identical(squeezed_ensemble):
    _, ens = squeezed_ensemble
    a = estimate_variance_from_trajectories(ens, 0.7)
    c = estimate_variance_from_trajectories(ens, 0.7 + math.pi)
    assert a.variance == pytest.approx(c.variance, rel=1e-13)
    assert a.sigma == pytest.approx(c.sigma, rel=1e-12)


def test_batch_doubling(squeezed_ensemble):
    _, ens = squeezed_ensemble
    one = estimate_variance_from_trajectories(ens, 0.0)
    two = estimate_variance_from_trajectories(ens, 0.0, batch_size=2)
    assert one.batch_sigma / two.batch_sigma == pytest.approx(math.sqrt(2), rel=0.2)
    # the standard error of the grand mean does not depend on the batching
    assert two.sigma == pytest.approx(one.sigma, rel=0.25)


def test_cos2phi_form_within_errors(squeezed_ensemble):
    _, ens = squeezed_ensemble
    phis = np.linspace(0, math.pi, 9)
    est = [estimate_variance_from_trajectories(ens, p) for p in phis]
    v = np.array([e.variance for e in est])
    s = np.array([e.sigma for e in est])
    X = np.column_stack([np.ones_like(phis), np.cos(2 * phis)])
    coef, *_ = np.linalg.lstsq(X / s[:, None], v / s, rcond=None)
    assert np.all(np.abs(X @ coef - v) < 3 * s)


def test_reproducible_and_stream_split():
    b = toy(n_minus=1060.0, ratio=0.5, n_c=0.3, n_m=5.0)
    dt = max_time_step(b)
    a = simulate_trajectories(b, seed=9, dt=dt, n_steps=20_000, n_traj=3)
    c = simulate_trajectories(b, seed=9, dt=dt, n_steps=20_000, n_traj=3)
    d = simulate_trajectories(b, seed=9, dt=dt, n_steps=20_000, n_traj=5)
    assert np.array_equal(a.samples, c.samples)
    assert np.array_equal(a.moment_sums, c.moment_sums)
    assert np.array_equal(a.samples, d.samples[:3])
    e = simulate_trajectories(b, seed=10, dt=dt, n_steps=20_000, n_traj=3)
    assert not np.array_equal(a.samples, e.samples)


def test_sigma_halves_with_four_times_data():
    b = toy(n_m=2.0, params=FREE)
    dt = max_time_step(b)
    small = simulate_trajectories(b, seed=3, dt=dt, n_steps=60_000, n_traj=16)
    big = simulate_trajectories(b, seed=4, dt=dt, n_steps=60_000, n_traj=64)
    s1 = estimate_variance_from_trajectories(small, 0.0).sigma
    s4 = estimate_variance_from_trajectories(big, 0.0).sigma
    assert s4 / s1 == pytest.approx(0.5, rel=0.25)


def test_euler_close_to_exact():
    b = toy(n_m=4.0, params=FREE)
    dt = max_time_step(b)
    ens = simulate_trajectories(b, seed=5, dt=dt, n_steps=100_000, n_traj=16, method="euler")
    v, s = estimate_variance_from_trajectories(ens, 0.0)
    assert abs(v - 9.0) < 3 * s + 9.0 * 0.02


def test_step_too_large():
    b = toy(n_minus=1000.0)
    with pytest.raises(StepTooLarge):
        simulate_trajectories(b, seed=0, dt=1.01 * max_time_step(b), n_steps=1000, n_traj=1)


def test_unstable_parameters():
    b = toy(n_minus=1000.0, ratio=1.3)
    with pytest.raises(UnstableParameters):
        simulate_trajectories(b, seed=0, dt=1e-9, n_steps=1000, n_traj=1)
    with pytest.raises(UnstableParameters):
        steady_state_covariance(b)


def test_short_burn_in_flagged():
    b = toy(n_m=1.0, params=FREE)
    dt = max_time_step(b)
    ens = simulate_trajectories(b, seed=0, dt=dt, n_steps=20_000, n_traj=2, burn_in=2e-3)
    assert ens.burn_in_time * b.params.gamma_m < 10
    with pytest.raises(NonStationarySegment):
        estimate_variance_from_trajectories(ens, 0.0)


def test_burn_in_default_covers_ten_linewidths():
    b = toy(n_minus=1060.0, ratio=0.5)
    dt = max_time_step(b)
    ens = simulate_trajectories(b, seed=0, dt=dt, n_steps=30_000, n_traj=1)
    assert ens.burn_in_time >= 10.0 / b.couplings.Gamma_eff
