"""Reference configuration for the 30 um ring in a Sagnac loop, and the
observables used to check a spectrum against the measured record.

The stored parameters were obtained with :func:`calibrate_to_anchors` and
rounded; the waveguide area, detuning, excess-noise amplitude and dark
clearance are fitted quantities, not measured ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from kerrsqueeze.cavity import PumpSpec, fit_quadrature_sinusoid, optimal_quadrature
from kerrsqueeze.device import DeviceSpec, RingSpec, SagnacSpec, WaveguideSpec
from kerrsqueeze.noise import (
    DetectionSpec,
    NoiseChain,
    NoiseSetup,
    ThermoNoiseModel,
    cryogenic_prediction,
    measured_spectrum,
    to_db,
)

MEASURED_SQUEEZING_DB = -0.45
INFERRED_SQUEEZING_DB = -1.0
GOLDEN_FREQUENCIES_HZ = (10e6, 100e6, 300e6, 500e6, 650e6, 800e6, 1.2e9, 1.6e9, 2e9)
SQUEEZING_BAND_HZ = (500e6, 800e6)
ANGLE_REFERENCE_HZ = 650e6
COLD_TEMPERATURE_K = 3.0
COLD_DNDT_RATIO = 0.316


def measurement_efficiency_from_anchors(measured_dB=MEASURED_SQUEEZING_DB, inferred_dB=INFERRED_SQUEEZING_DB):
    """Efficiency that maps the inferred on-chip level onto the measured one."""
    m = 10.0 ** (measured_dB / 10.0)
    s = 10.0 ** (inferred_dB / 10.0)
    return (1.0 - m) / (1.0 - s)


@dataclass(frozen=True)
class Calibration:
    device: DeviceSpec
    pump: PumpSpec
    noise: NoiseSetup
    angle_reference_Hz: float = ANGLE_REFERENCE_HZ


def reference_device(effective_area_um2=0.95) -> DeviceSpec:
    return DeviceSpec(
        WaveguideSpec(1550.0, 1.88, 2.4e-19, effective_area_um2),
        RingSpec(radius_um=30.0, escape_efficiency=0.77, loaded_q=238000.0),
        SagnacSpec(splitter_transmission=0.5, contrast_dB=23.0),
    )


def reference_calibration(
    effective_area_um2=0.95,
    detuning_half_linewidths=-0.61,
    thermo_amplitude=1.0e5,
    clearance_dB=15.0,
    power_W=0.052,
) -> Calibration:
    device = reference_device(effective_area_um2)
    pump = PumpSpec(power_W, detuning_half_linewidths * device.kappa / 2.0, 1550.0)
    noise = NoiseSetup(
        ThermoNoiseModel(thermo_amplitude),
        NoiseChain((("measurement", 0.478),)),
        DetectionSpec(detector_bandwidth_Hz=800e6, dark_noise_clearance_dB=clearance_dB),
        calibrated=True,
    )
    return Calibration(device, pump, noise)


def measurement_angle(cal: Calibration, n_angles=180) -> float:
    """Local-oscillator angle that minimizes the recorded noise at the
    reference frequency; held fixed across the trace."""
    angles = np.linspace(0.0, math.pi, n_angles, endpoint=False)
    f = np.array([cal.angle_reference_Hz])
    m, _ = measured_spectrum(cal.device, cal.pump, cal.noise, f, angles)
    return optimal_quadrature(m, cal.angle_reference_Hz)[0]


def fixed_angle_trace(cal: Calibration, frequencies_Hz, theta=None):
    """Recorded noise (dB relative to detected shot) at one quadrature angle."""
    theta = measurement_angle(cal) if theta is None else theta
    angles = np.array([0.0, math.pi / 3.0, 2.0 * math.pi / 3.0])
    m, _ = measured_spectrum(cal.device, cal.pump, cal.noise, np.asarray(frequencies_Hz, float), angles)
    c, p, q = fit_quadrature_sinusoid(angles, m.values_rel_shot)
    return to_db(c + p * np.cos(2 * theta) + q * np.sin(2 * theta)), theta


def spectrum_structure(frequencies_Hz, trace_dB) -> dict:
    """Shape descriptors of a recorded squeezing trace."""
    f = np.asarray(frequencies_Hz, dtype=float)
    y = np.asarray(trace_dB, dtype=float)
    band = (f >= SQUEEZING_BAND_HZ[0]) & (f <= SQUEEZING_BAND_HZ[1])
    low = f < 450e6
    above = f >= 1.6e9
    crossing = float("nan")
    neg = np.flatnonzero(y < 0)
    if neg.size:
        i = int(neg[0])
        if i > 0:
            f0, f1, y0, y1 = f[i - 1], f[i], y[i - 1], y[i]
            crossing = float(f0 + (f1 - f0) * y0 / (y0 - y1))
        else:
            crossing = float(f[0])
    return {
        "band_max_squeezing_dB": float(-y[band].min()) if band.any() else float("nan"),
        "band_peak_frequency_Hz": float(f[band][np.argmin(y[band])]) if band.any() else float("nan"),
        "low_frequency_min_excess_dB": float(y[low].min()) if low.any() else float("nan"),
        "squeezing_above_1p6GHz_dB": float(-y[above].min()) if above.any() else float("nan"),
        "shot_noise_crossing_Hz": crossing,
    }


def golden_record(cal: Calibration | None = None) -> dict:
    cal = cal or reference_calibration()
    f = np.array(GOLDEN_FREQUENCIES_HZ)
    trace, theta = fixed_angle_trace(cal, f)
    dense = np.geomspace(1e6, 5e9, 400)
    dense_trace, _ = fixed_angle_trace(cal, dense, theta)
    cold = cryogenic_prediction(
        cal.device, cal.pump, cal.noise.thermo.at_temperature(COLD_TEMPERATURE_K, COLD_DNDT_RATIO), cal.noise
    )
    return {
        "device": cal.device.to_dict(),
        "pump": {
            "power_on_chip_W": cal.pump.power_on_chip_W,
            "detuning_rad_per_s": cal.pump.detuning_rad_per_s,
            "wavelength_nm": cal.pump.wavelength_nm,
        },
        "noise": {
            "amplitude_rel_shot_at_1MHz": cal.noise.thermo.amplitude_rel_shot_at_1MHz,
            "measurement_efficiency": cal.noise.chain.total_efficiency,
            "detector_bandwidth_Hz": cal.noise.detection.detector_bandwidth_Hz,
            "dark_noise_clearance_dB": cal.noise.detection.dark_noise_clearance_dB,
        },
        "measurement_angle_rad": theta,
        "frequencies_Hz": list(map(float, f)),
        "detected_dB": list(map(float, trace)),
        "structure": spectrum_structure(dense, dense_trace),
        "cryogenic_s_min_dB": cold["s_min_dB"],
    }


def calibrate_to_anchors(
    crossing_Hz=500e6,
    band_squeezing_dB=0.45,
    cold_squeezing_dB=1.4,
    clearance_dB=15.0,
    x0=(3.0, -0.2, 4.3),
):
    """Solve for (effective area, detuning, log10 thermo amplitude) so that the
    recorded trace crosses shot noise at ``crossing_Hz``, peaks at
    ``band_squeezing_dB`` inside the squeezing band, and the 3 K prediction
    at 10 MHz equals ``cold_squeezing_dB``."""
    band = np.linspace(*SQUEEZING_BAND_HZ, 31)

    def build(x):
        return reference_calibration(x[0], x[1], 10.0 ** x[2], clearance_dB)

    def res(x):
        cal = build(x)
        trace, _ = fixed_angle_trace(cal, band)
        cold = cryogenic_prediction(
            cal.device, cal.pump, cal.noise.thermo.at_temperature(COLD_TEMPERATURE_K, COLD_DNDT_RATIO), cal.noise
        )
        return [trace[0] / 0.05, (trace.min() + band_squeezing_dB) / 0.05, (cold["s_min_dB"] + cold_squeezing_dB) / 0.05]

    sol = least_squares(res, x0, bounds=([0.3, -1.5, 2.0], [10.0, 1.0, 7.0]))
    return {"effective_area_um2": sol.x[0], "detuning_half_linewidths": sol.x[1],
            "thermo_amplitude": 10.0 ** sol.x[2], "residual": sol.fun.tolist()}
