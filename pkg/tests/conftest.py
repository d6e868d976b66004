import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, settings, strategies as st

from omsqueeze import (DEVICE, BathOccupations, DriveConfig, SystemParams, assess_stability, hz,
                       validate_params)

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion number -> (passed, detail), filled by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {k:2d}: {detail}")


def make_params(kappa_hz=330e3, gamma_hz=8.0, g0_hz=130.0, omega_m_hz=5.8e6,
                split=(0.25, 0.25)):
    k = hz(kappa_hz)
    kL, kR = split[0] * k, split[1] * k
    return SystemParams(omega_m=hz(omega_m_hz), kappa=k, kappa_L=kL, kappa_R=kR,
                        kappa_I=k - kL - kR, gamma_m=hz(gamma_hz), g0=hz(g0_hz))


def bundle(params=DEVICE, n_c=0.0, n_m=0.0, **drive):
    return validate_params(params, DriveConfig(**drive), BathOccupations(n_c_th=n_c, n_m_th=n_m))


def random_resonant_bundle(rng, max_coop=3e3, max_ratio=0.9):
    """A stable bundle with Delta = delta = 0 and no parametric drive."""
    kappa = hz(10 ** rng.uniform(4.5, 6.0))
    gamma = hz(10 ** rng.uniform(0.0, 2.0))
    params = make_params(kappa / hz(1), gamma / hz(1), split=(rng.uniform(0.05, 0.5),
                                                              rng.uniform(0.05, 0.5)))
    coop = 10 ** rng.uniform(-1, math.log10(max_coop))
    ratio = rng.uniform(0.0, max_ratio)
    # C_- = 4 g0^2 n_- / (kappa gamma)
    n_minus = coop * kappa * gamma / (4 * params.g0**2)
    return bundle(params, n_c=rng.uniform(0, 3), n_m=10 ** rng.uniform(-1, 3),
                  np_minus=n_minus, np_plus=ratio * n_minus)


@st.composite
def general_bundles(draw):
    """Stable bundles with detunings and a parametric drive."""
    kappa_hz = draw(st.floats(3e4, 1e6))
    gamma_hz = draw(st.floats(1.0, 100.0))
    p = make_params(kappa_hz, gamma_hz, split=(draw(st.floats(0.05, 0.5)), draw(st.floats(0.05, 0.5))))
    n_minus = draw(st.floats(0.0, 1e5))
    b = bundle(p, n_c=draw(st.floats(0, 5)), n_m=draw(st.floats(0, 500)),
               np_minus=n_minus, np_plus=draw(st.floats(0, 0.95)) * n_minus,
               Delta=hz(draw(st.floats(-2e5, 2e5))), delta=hz(draw(st.floats(-1e3, 1e3))),
               lambda_par=draw(st.floats(0, 0.2)) * p.gamma_m, psi=draw(st.floats(-3.1, 3.1)))
    assume(assess_stability(b).stable)
    return b


@pytest.fixture
def device():
    return bundle()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def strong_bundle():
    """Strong squeezing operating point: 1.85e5 total pump photons at ratio 0.43."""
    return validate_params(DEVICE, DriveConfig.from_total(1.85e5, 0.43),
                           BathOccupations(n_c_th=0.2, n_m_th=242.5))
