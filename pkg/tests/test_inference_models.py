"""Background subtraction, BAE conversion, output-spectrum and parametric-drive fits."""
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from omsqueeze import (DEVICE, BathOccupations, DriveConfig, UnstableAtPhase, hz,
                      output_noise_spectrum, quadrature_variance, validate_params)
from omsqueeze.inference import (CalibrationConstants, InsufficientBackgroundPoints,
                                 NegativePower, UnstableFitRegion, bae_sideband_spectrum,
                                 bae_sideband_to_variance, compare_hypotheses,
                                 fit_output_spectrum, fit_parametric_drive, lorentzian,
                                 output_spectrum_model, predict_linewidths,
                                 subtract_background_quadratic, variance_to_bae_sideband)
from omsqueeze.inference.spectrum_fit import device_noise_row, initial_guess
from omsqueeze.spectrum import Spectrum

GAIN = 2.53e5 / 7.49e17
B_BAE, DELTA_BAE, KAPPA = 2.77e5, hz(160e3), hz(330e3)


# background subtraction

def test_pure_quadratic_removed():
    w = np.linspace(-hz(5e4), hz(5e4), 501)
    u = w / hz(5e4)
    y = 3.0 - 0.7 * u + 1.9 * u**2
    out = subtract_background_quadratic(Spectrum(w, y), (-hz(1e4), hz(1e4)))
    assert np.max(np.abs(out.spectrum.values)) < 1e-12
    c = out.coefficients
    assert np.polyval(c, w) == pytest.approx(y, rel=1e-12)


def test_injected_lorentzian_recovered():
    w = np.linspace(-500.0, 500.0, 4001)
    bg = 5.0 + 0.002 * w - 1e-5 * w**2
    line = lorentzian(w, 3.0, 2.0, 40.0)
    out = subtract_background_quadratic(Spectrum(w, bg + line), (-150.0, 150.0))
    band = (w >= -150) & (w <= 150)
    area = np.trapezoid(out.spectrum.values[band], w[band])
    assert area == pytest.approx(40.0, rel=0.01)


def test_band_too_wide():
    w = np.linspace(0, 1, 100)
    with pytest.raises(InsufficientBackgroundPoints):
        subtract_background_quadratic(Spectrum(w, w**2), (0.025, 0.975))


def test_band_must_be_inside_grid():
    w = np.linspace(0, 1, 200)
    with pytest.raises(ValueError):
        subtract_background_quadratic(Spectrum(w, w), (-0.1, 0.5))


# BAE conversion

def test_zero_power_zero_variance():
    assert bae_sideband_to_variance(0.0, B_BAE, DELTA_BAE, KAPPA) == 0.0


def test_reported_variance_round_trip():
    ratio = variance_to_bae_sideband(0.34, B_BAE, DELTA_BAE, KAPPA)
    assert ratio > 0
    assert bae_sideband_to_variance(ratio, B_BAE, DELTA_BAE, KAPPA) == pytest.approx(0.34, rel=1e-12)
    back = variance_to_bae_sideband(bae_sideband_to_variance(ratio, B_BAE, DELTA_BAE, KAPPA),
                                    B_BAE, DELTA_BAE, KAPPA)
    assert back == pytest.approx(ratio, rel=1e-12)


def test_doubling_ratio_doubles_variance():
    v = bae_sideband_to_variance(3e-4, B_BAE, DELTA_BAE, KAPPA)
    assert bae_sideband_to_variance(6e-4, B_BAE, DELTA_BAE, KAPPA) == pytest.approx(2 * v, rel=1e-15)


def test_negative_power_rejected():
    with pytest.raises(NegativePower):
        bae_sideband_to_variance(-1e-6, B_BAE, DELTA_BAE, KAPPA)


def test_calibration_object_accepted():
    cal = CalibrationConstants(7.49e17, 3.23e18, B_BAE)
    assert bae_sideband_to_variance(1e-3, cal, DELTA_BAE, KAPPA) == \
        bae_sideband_to_variance(1e-3, B_BAE, DELTA_BAE, KAPPA)


@given(st.floats(1e-12, 1e3))
def test_bae_inverse_identity(x):
    v = bae_sideband_to_variance(x, B_BAE, DELTA_BAE, KAPPA)
    assert variance_to_bae_sideband(v, B_BAE, DELTA_BAE, KAPPA) == pytest.approx(x, rel=1e-12)


def test_array_input():
    r = np.array([0.0, 1e-4, 2e-4])
    v = bae_sideband_to_variance(r, B_BAE, DELTA_BAE, KAPPA)
    assert v.shape == (3,) and v[2] == pytest.approx(2 * v[1])


def test_bae_forward_model_integrates_to_variance():
    b = validate_params(DEVICE, DriveConfig.from_total(1.35e4, 0.5),
                        BathOccupations(n_c_th=0.6, n_m_th=67.0))
    ge = b.couplings.Gamma_eff
    w = np.linspace(-400 * ge, 400 * ge, 400001)
    spec = bae_sideband_spectrum(b, GAIN, 1e4, 0.0, w, DELTA_BAE)
    pref = GAIN * 4 * DEVICE.g0**2 * 1e4 / (DEVICE.kappa**2 + 4 * DELTA_BAE**2)
    area = np.trapezoid(spec.values, w) / (2 * math.pi)
    assert area / pref == pytest.approx(quadrature_variance(b, 0.0), rel=2e-3)


# output-spectrum fit

def _grid(b, n_cav=600, n_mech=1400, span=15):
    k, ge = b.params.kappa, b.couplings.Gamma_eff
    return np.unique(np.concatenate([np.linspace(-3 * k, 3 * k, n_cav),
                                     np.linspace(-span * ge, span * ge, n_mech)]))


def _template(truth):
    p = truth.params
    return truth.with_params(gamma_m=1.3 * p.gamma_m, kappa=1.05 * p.kappa,
                             kappa_I=p.kappa_I + 0.05 * p.kappa).with_baths(n_c_th=1.0, n_m_th=1.0)


@pytest.fixture
def weak_truth():
    return validate_params(DEVICE, DriveConfig.from_total(1000, 0.5),
                           BathOccupations(n_c_th=0.5, n_m_th=50.0))


def test_noise_row_matches_full_inverse(weak_truth):
    b = weak_truth.with_drive(Delta=hz(3e3), delta=hz(20), lambda_par=1.0, psi=0.4)
    w = _grid(b, 50, 50)
    s0, sc, sm = device_noise_row(b, w)
    ref = output_noise_spectrum(b, w).device.values
    nb = b.baths
    assert s0 + nb.n_c_th * sc + nb.n_m_th * sm == pytest.approx(ref, rel=1e-12)
    assert output_spectrum_model(b, GAIN, w) == pytest.approx(GAIN * ref, rel=1e-12)


def test_initial_guess_exact_occupations(weak_truth):
    w = _grid(weak_truth)
    y = output_spectrum_model(weak_truth, GAIN, w)
    g = initial_guess(Spectrum(w, y), weak_truth.with_baths(n_c_th=3, n_m_th=3), GAIN)
    assert g["n_m_th"] == pytest.approx(50.0, rel=1e-10)
    assert g["n_c_th"] == pytest.approx(0.5, rel=1e-10)


def test_noiseless_fit_exact(weak_truth):
    w = _grid(weak_truth)
    y = output_spectrum_model(weak_truth, GAIN, w)
    fit = fit_output_spectrum(Spectrum(w, y), _template(weak_truth), GAIN)
    p = weak_truth.params
    assert fit.converged
    assert fit["kappa"] == pytest.approx(p.kappa, rel=1e-8)
    assert fit["gamma_m"] == pytest.approx(p.gamma_m, rel=1e-8)
    assert fit["n_m_th"] == pytest.approx(50.0, rel=1e-8)
    assert fit["n_c_th"] == pytest.approx(0.5, rel=1e-8)
    assert abs(fit["Delta"]) < 1e-8 * p.kappa
    assert abs(fit["delta"]) < 1e-8 * weak_truth.couplings.Gamma_eff


def test_noisy_fit_with_detunings():
    truth = validate_params(DEVICE, DriveConfig.from_total(1000, 0.5, Delta=hz(2e3),
                                                           delta=hz(200.0)),
                            BathOccupations(n_c_th=0.5, n_m_th=50.0))
    w = _grid(truth, span=25)
    rng = np.random.default_rng(4)
    y0 = output_spectrum_model(truth, GAIN, w)
    y = y0 * (1 + 0.01 * rng.standard_normal(w.size))
    fit = fit_output_spectrum(Spectrum(w, y, 0.01 * np.abs(y)), _template(truth), GAIN,
                              initial={"delta": hz(150.0), "Delta": hz(1e3)})
    assert fit["delta"] == pytest.approx(hz(200.0), rel=0.02)
    assert fit["n_m_th"] == pytest.approx(50.0, rel=0.05)
    assert fit["n_c_th"] == pytest.approx(0.5, rel=0.1)
    model = output_spectrum_model(fit.extra["bundle"], GAIN, w)
    z = (y - model) / (0.01 * np.abs(y))
    assert stats.normaltest(z).pvalue > 0.01
    assert fit.extra["Gamma_eff_stderr"] > 0


def test_fixed_parameters_held(weak_truth):
    w = _grid(weak_truth)
    y = output_spectrum_model(weak_truth, GAIN, w)
    fit = fit_output_spectrum(Spectrum(w, y), weak_truth.with_baths(n_c_th=2, n_m_th=2), GAIN,
                              free=("n_c_th", "n_m_th"))
    assert fit.names == ["n_c_th", "n_m_th"]
    assert fit["n_m_th"] == pytest.approx(50.0, rel=1e-9)
    assert fit.extra["fixed"]["kappa"] == weak_truth.params.kappa


def test_unstable_template_rejected(weak_truth):
    w = _grid(weak_truth)
    y = output_spectrum_model(weak_truth, GAIN, w)
    bad = validate_params(DEVICE, DriveConfig(np_minus=1e4, np_plus=1.5e4))
    with pytest.raises(UnstableFitRegion):
        fit_output_spectrum(Spectrum(w, y), bad, GAIN)


def test_unknown_free_parameter(weak_truth):
    w = _grid(weak_truth, 20, 20)
    with pytest.raises(ValueError):
        fit_output_spectrum(Spectrum(w, np.ones_like(w)), weak_truth, GAIN, free=("g0",))


# parametric-drive fit

PSI0 = math.radians(-129.0)
PHIS = np.radians(np.arange(0, 181, 15))


@pytest.fixture(scope="module")
def strong():
    return validate_params(DEVICE, DriveConfig.from_total(1.85e5, 0.43),
                           BathOccupations(n_c_th=0.3, n_m_th=100.0))


def _data(b, lam, psi0, hyp="follow", noise=0.0, seed=0):
    g = predict_linewidths(b, PHIS, lam, psi0, hyp)
    rng = np.random.default_rng(seed)
    return np.column_stack([PHIS, g * (1 + noise * rng.standard_normal(g.size)),
                            np.full_like(g, 0.03) * g])


def test_predicted_linewidth_flat_without_drive(strong):
    g = predict_linewidths(strong, PHIS, 0.0, 0.0)
    assert np.ptp(g) / g.mean() < 1e-3


def test_follow_and_constant_differ(strong):
    a = predict_linewidths(strong, PHIS, hz(1.3e3), PSI0, "follow")
    b = predict_linewidths(strong, PHIS, hz(1.3e3), PSI0, "constant")
    assert np.ptp(a) > 0.05 * a.mean()
    assert not np.allclose(a, b, rtol=1e-2)


def test_sign_folding(strong):
    a = predict_linewidths(strong, PHIS, -hz(1e3), 0.3)
    b = predict_linewidths(strong, PHIS, hz(1e3), 0.3 + math.pi)
    assert a == pytest.approx(b, rel=1e-12)


def test_noiseless_parametric_recovery(strong):
    fit = fit_parametric_drive(_data(strong, hz(1.3e3), PSI0), strong)
    assert fit.converged
    assert fit["lambda_par"] == pytest.approx(hz(1.3e3), rel=1e-6)
    assert fit["psi0"] == pytest.approx(PSI0, abs=1e-6)


def test_hypotheses_ranked(strong):
    fits = compare_hypotheses(_data(strong, hz(1.3e3), PSI0, noise=0.03, seed=1), strong)
    assert list(fits) == ["follow", "constant"]
    assert fits["follow"].rss < fits["constant"].rss
    f = fits["follow"]
    assert f["lambda_par"] == pytest.approx(hz(1.3e3), rel=0.15)
    assert abs(math.degrees(f["psi0"] - PSI0)) < 10


def test_null_drive_consistent_with_zero(strong):
    fit = fit_parametric_drive(_data(strong, 0.0, 0.0, noise=0.03, seed=2), strong)
    assert fit["lambda_par"] <= 2 * fit.stderr["lambda_par"]


def test_parametric_input_validation(strong):
    with pytest.raises(ValueError):
        fit_parametric_drive(_data(strong, 0.0, 0.0)[:4], strong)
    with pytest.raises(ValueError):
        fit_parametric_drive(_data(strong, 0.0, 0.0), strong, hypothesis="other")


def test_unstable_explicit_start_propagates(strong):
    with pytest.raises(UnstableAtPhase):
        fit_parametric_drive(_data(strong, 0.0, 0.0), strong,
                             initial={"lambda_par": 10 * strong.couplings.Gamma_eff, "psi0": 0.0})
