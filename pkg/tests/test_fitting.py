import math

import numpy as np
import pytest

from kerrsqueeze.calibration import reference_device
from kerrsqueeze.errors import DomainError, ModelError
from kerrsqueeze.fitting import (
    FitResult,
    KerrPriors,
    device_with_kerr_rate,
    fit_excess_noise,
    fit_kerr_model,
    model_squeezing_dB,
)
from kerrsqueeze.synthetic import excess_noise_spectrum, squeezing_spectra
from kerrsqueeze.traces import NormalizedSpectrum

DEVICE = reference_device()
HALF = DEVICE.kappa / 2.0
TRUTH = {"detuning_rad_per_s": -0.61 * HALF, "kerr_rate_rad_per_s": DEVICE.g, "measurement_efficiency": 0.478}
POWERS = (0.026, 0.039, 0.052)
F = np.linspace(5e8, 2e9, 120)
PRIORS = KerrPriors(detuning_half_linewidths=-0.3, kerr_rate=0.7 * DEVICE.g, measurement_efficiency=0.6)


def synth(noise_dB=0.0, seed=0):
    return squeezing_spectra(DEVICE, POWERS, F, TRUTH["detuning_rad_per_s"], TRUTH["kerr_rate_rad_per_s"],
                             TRUTH["measurement_efficiency"], noise_dB, np.random.default_rng(seed))


def test_excess_fit_noiseless_is_exact():
    f = np.geomspace(1e6, 3e8, 60)
    fit = fit_excess_noise(excess_noise_spectrum(f, 250.0, 0.8))
    assert fit.amplitude_at_1MHz == pytest.approx(250.0, rel=1e-10)
    assert fit.floor == pytest.approx(0.8, rel=1e-10)


def test_excess_fit_with_noise_within_five_percent():
    f = np.geomspace(1e6, 3e8, 200)
    rng = np.random.default_rng(11)
    fit = fit_excess_noise(excess_noise_spectrum(f, 250.0, 0.8, noise_dB=0.05, rng=rng))
    assert fit.amplitude_at_1MHz == pytest.approx(250.0, rel=0.05)
    assert fit.floor == pytest.approx(0.8, rel=0.05)
    # weighted fit: the reported uncertainty is absolute and of the right size
    assert abs(fit.floor - 0.8) < 4 * fit.sigma[1]


def test_excess_fit_needs_points_and_spread():
    f = np.geomspace(1e6, 3e8, 3)
    with pytest.raises(DomainError, match="at least 4"):
        fit_excess_noise(excess_noise_spectrum(f, 1.0, 1.0))
    flat = NormalizedSpectrum(np.full(5, 1e7) + np.arange(5) * 1e-3, np.zeros(5))
    with pytest.raises(ModelError, match="singular"):
        fit_excess_noise(flat)


def test_model_reduces_to_loss_map_without_kerr_effect():
    dev = device_with_kerr_rate(DEVICE, 0.0)
    y = model_squeezing_dB(dev, 0.05, F, 0.0, 0.5)
    assert np.allclose(y, 0.0, atol=1e-12)


def test_device_with_kerr_rate():
    assert device_with_kerr_rate(DEVICE, 3.0).g == pytest.approx(3.0, rel=1e-12)


def test_noiseless_kerr_fit_recovers_truth():
    res = fit_kerr_model(synth(), DEVICE, PRIORS)
    assert res.converged
    for k, v in TRUTH.items():
        assert res.parameters[k] == pytest.approx(v, rel=1e-6)
    assert res.residual_rms_dB < 1e-8


def test_noisy_kerr_fit_within_ten_percent():
    res = fit_kerr_model(synth(0.02, seed=5), DEVICE, PRIORS)
    for k, v in TRUTH.items():
        assert res.parameters[k] == pytest.approx(v, rel=0.10)
        assert abs(res.parameters[k] - v) < 5 * res.sigma(k)
    assert res.residual_rms_dB == pytest.approx(0.02, rel=0.25)


def test_more_powers_tighten_the_kerr_rate():
    data = synth(0.02, seed=2)
    multi = fit_kerr_model(data, DEVICE, PRIORS)
    single = fit_kerr_model(data[-1:], DEVICE, PRIORS)
    assert multi.sigma("kerr_rate_rad_per_s") < single.sigma("kerr_rate_rad_per_s")


def test_fixed_parameters_are_reported():
    pri = KerrPriors(detuning_half_linewidths=-0.61, kerr_rate=DEVICE.g, measurement_efficiency=0.478,
                     free=("measurement_efficiency",))
    res = fit_kerr_model(synth(), DEVICE, pri)
    assert res.names == ("measurement_efficiency",)
    assert res.fixed["kerr_rate_rad_per_s"] == DEVICE.g
    doc = res.to_dict()
    assert set(doc) >= {"parameters", "covariance", "free", "fixed"}
    assert len(doc["covariance"]) == 1


def test_fit_input_validation():
    with pytest.raises(DomainError):
        fit_kerr_model([], DEVICE)
    with pytest.raises(DomainError):
        fit_kerr_model(synth(), DEVICE, KerrPriors(free=("temperature",)))
    with pytest.raises(DomainError, match="fit band"):
        fit_kerr_model(synth(), DEVICE, PRIORS, fit_band_Hz=(1e6, 2e6))


def test_fit_is_deterministic():
    data = synth(0.02, seed=9)
    a = fit_kerr_model(data, DEVICE, PRIORS)
    b = fit_kerr_model(data, DEVICE, PRIORS)
    assert a.to_dict() == b.to_dict()
