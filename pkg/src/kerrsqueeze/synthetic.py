"""Synthetic spectra and analyzer traces with known parameters, used to
exercise the fitting and normalization paths. All randomness comes from
the ``numpy.random.Generator`` passed in."""

from __future__ import annotations

import math

import numpy as np

from kerrsqueeze.device import DeviceSpec
from kerrsqueeze.fitting import device_with_kerr_rate, model_squeezing_dB
from kerrsqueeze.noise import REFERENCE_FREQUENCY_HZ
from kerrsqueeze.traces import EsaTrace, NormalizedSpectrum


def excess_noise_spectrum(frequencies_Hz, amplitude, floor, noise_dB=0.0, rng=None) -> NormalizedSpectrum:
    """y = a (1 MHz / f)^2 + b with multiplicative Gaussian scatter in dB."""
    f = np.asarray(frequencies_Hz, dtype=float)
    y = amplitude * (REFERENCE_FREQUENCY_HZ / f) ** 2 + floor
    y_dB = 10.0 * np.log10(y)
    sigma = None
    if noise_dB > 0:
        y_dB = y_dB + noise_dB * rng.standard_normal(f.size)
        sigma = np.full_like(f, noise_dB)
    return NormalizedSpectrum(f, y_dB, sigma_dB=sigma)


def squeezing_spectra(
    device: DeviceSpec,
    powers_W,
    frequencies_Hz,
    detuning: float,
    kerr_rate: float,
    efficiency: float,
    noise_dB: float = 0.0,
    rng=None,
    thermo=None,
) -> list[tuple[float, NormalizedSpectrum]]:
    dev = device_with_kerr_rate(device, kerr_rate)
    f = np.asarray(frequencies_Hz, dtype=float)
    out = []
    for P in powers_W:
        y = model_squeezing_dB(dev, float(P), f, detuning, efficiency, thermo=thermo)
        sigma = None
        if noise_dB > 0:
            y = y + noise_dB * rng.standard_normal(f.size)
            sigma = np.full_like(f, noise_dB)
        out.append((float(P), NormalizedSpectrum(f, y, sigma_dB=sigma)))
    return out


def analyzer_traces(
    frequencies_Hz,
    rel_shot_dB,
    n_traces: int = 5,
    noise_dB: float = 0.0,
    shot_level_dBm: float = -70.0,
    clearance_dB: float = 15.0,
    detector_bandwidth_Hz: float = math.inf,
    rng=None,
    rbw_Hz: float = 1e5,
    vbw_Hz: float = 20.0,
    sweep_time_s: float = 10.0,
) -> dict[str, list[EsaTrace]]:
    """Signal, shot and dark traces whose dark-corrected ratio is
    ``rel_shot_dB``. The detector roll-off scales signal and shot alike."""
    f = np.asarray(frequencies_Hz, dtype=float)
    ratio = 10.0 ** (np.asarray(rel_shot_dB, float) / 10.0)
    shot_mW = 10.0 ** (shot_level_dBm / 10.0)
    h = np.ones_like(f) if not math.isfinite(detector_bandwidth_Hz) else 1.0 / (1.0 + (f / detector_bandwidth_Hz) ** 2)
    dark = np.full_like(f, shot_mW * 10.0 ** (-clearance_dB / 10.0))
    levels = {"signal": dark + shot_mW * h * ratio, "shot": dark + shot_mW * h, "dark": dark}
    out = {}
    for label, lin in levels.items():
        traces = []
        for _ in range(n_traces):
            scatter = noise_dB * rng.standard_normal(f.size) if noise_dB > 0 else 0.0
            traces.append(EsaTrace(f, 10.0 * np.log10(lin) + scatter, rbw_Hz, vbw_Hz, sweep_time_s, label))
        out[label] = traces
    return out
