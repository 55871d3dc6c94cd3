"""From the ring output to the analyzer: Sagnac recombination, loss chain,
thermorefractive phase noise and detector response.

Everything here works on linear noise power relative to shot noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from kerrsqueeze.cavity import (
    QuadratureSpectrum,
    fluctuation_spectrum,
    optimal_quadrature,
    select_branch,
    steady_state,
)
from kerrsqueeze.device import DeviceSpec, SagnacSpec
from kerrsqueeze.errors import DomainError, ModelError

REFERENCE_FREQUENCY_HZ = 1e6


def to_db(x):
    return 10.0 * np.log10(x)


def from_db(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def _check_efficiency(eta, name="efficiency"):
    if not (isinstance(eta, (int, float)) and 0.0 < eta <= 1.0):
        raise DomainError(f"{name} must lie in (0, 1], got {eta!r}", [(name, f"must lie in (0, 1], got {eta!r}")])


@dataclass(frozen=True)
class NoiseChain:
    stages: tuple = (("measurement", 0.478),)

    def __post_init__(self):
        stages = tuple((str(label), float(eta)) for label, eta in self.stages)
        problems = []
        for i, (label, eta) in enumerate(stages):
            if not 0.0 < eta <= 1.0:
                problems.append((f"stages[{i}]", f"efficiency of {label!r} must lie in (0, 1], got {eta}"))
        if problems:
            raise DomainError("; ".join(m for _, m in problems), problems)
        object.__setattr__(self, "stages", stages)

    @property
    def total_efficiency(self) -> float:
        return math.prod(eta for _, eta in self.stages)


@dataclass(frozen=True)
class ThermoNoiseModel:
    """Thermorefractive phase noise, power relative to shot noise.

    N(f) = a (T/T_ref)^2 r^2 (f_ref / f)^2 with f_ref = 1 MHz; with a corner
    frequency f_c the law becomes a (...) f_ref^2 / (f^2 + f_c^2).
    ``surviving_fraction`` is the share of this noise that is not rejected
    as common mode by the Sagnac loop.
    """

    amplitude_rel_shot_at_1MHz: float = 0.0
    corner_frequency_Hz: float | None = None
    temperature_K: float = 295.0
    reference_temperature_K: float = 295.0
    dndT_ratio_vs_reference: float = 1.0
    surviving_fraction: float = 1.0

    def __post_init__(self):
        problems = []
        if not (math.isfinite(self.amplitude_rel_shot_at_1MHz) and self.amplitude_rel_shot_at_1MHz >= 0):
            problems.append(("amplitude_rel_shot_at_1MHz", "must be >= 0"))
        if self.corner_frequency_Hz is not None and not self.corner_frequency_Hz > 0:
            problems.append(("corner_frequency_Hz", "must be positive"))
        for name in ("temperature_K", "reference_temperature_K", "dndT_ratio_vs_reference"):
            if not getattr(self, name) > 0:
                problems.append((name, "must be positive"))
        if not 0.0 <= self.surviving_fraction <= 1.0:
            problems.append(("surviving_fraction", "must lie in [0, 1]"))
        if problems:
            raise DomainError("; ".join(f"{n} {m}" for n, m in problems), problems)

    @property
    def scale_factor(self) -> float:
        """Temperature and dn/dT suppression relative to the reference."""
        return (self.temperature_K / self.reference_temperature_K) ** 2 * self.dndT_ratio_vs_reference**2

    def at_temperature(self, temperature_K, dndT_ratio_vs_reference) -> "ThermoNoiseModel":
        return ThermoNoiseModel(
            self.amplitude_rel_shot_at_1MHz,
            self.corner_frequency_Hz,
            temperature_K,
            self.reference_temperature_K,
            dndT_ratio_vs_reference,
            self.surviving_fraction,
        )


@dataclass(frozen=True)
class DetectionSpec:
    detector_bandwidth_Hz: float = math.inf
    dark_noise_clearance_dB: float = math.inf
    homodyne_visibility: float = 1.0
    detector_quantum_efficiency: float = 1.0

    def __post_init__(self):
        problems = []
        if not self.detector_bandwidth_Hz > 0:
            problems.append(("detector_bandwidth_Hz", "must be positive"))
        if math.isnan(self.dark_noise_clearance_dB):
            problems.append(("dark_noise_clearance_dB", "must be a number"))
        for name in ("homodyne_visibility", "detector_quantum_efficiency"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                problems.append((name, f"must lie in (0, 1], got {v}"))
        if problems:
            raise DomainError("; ".join(f"{n} {m}" for n, m in problems), problems)

    @property
    def efficiency(self) -> float:
        return self.homodyne_visibility**2 * self.detector_quantum_efficiency

    @property
    def dark_floor(self) -> float:
        """Dark noise relative to the low-frequency shot-noise level."""
        return 10.0 ** (-self.dark_noise_clearance_dB / 10.0)

    def response(self, frequencies_Hz) -> np.ndarray:
        """Single-pole power response |H|^2."""
        f = np.asarray(frequencies_Hz, dtype=float)
        return 1.0 / (1.0 + (f / self.detector_bandwidth_Hz) ** 2)


# -- Sagnac loop --------------------------------------------------------------


def sagnac_loop_transmission(splitter_transmission: float) -> float:
    """Fraction of the pump leaving the output port of a lossless loop mirror."""
    t = splitter_transmission
    if not 0.0 < t < 1.0:
        raise DomainError(f"splitter_transmission must lie in (0, 1), got {t}")
    return (1.0 - 2.0 * t) ** 2


def imbalance_from_contrast(contrast_dB: float) -> float:
    """|1 - 2t| of a loop mirror whose dark port is ``contrast_dB`` below the input."""
    if contrast_dB < 0:
        raise DomainError("contrast_dB must be >= 0")
    return 10.0 ** (-contrast_dB / 20.0)


def common_mode_suppression(contrast_dB: float) -> float:
    if contrast_dB < 0:
        raise DomainError("contrast_dB must be >= 0")
    return 10.0 ** (-contrast_dB / 10.0)


def sagnac_output_spectrum(
    s_cw: QuadratureSpectrum, s_ccw: QuadratureSpectrum, sagnac: SagnacSpec
) -> QuadratureSpectrum:
    """Recombine the two counter-propagating outputs on the loop splitter.

    The quantum parts are mixed with weights t and 1 - t. Classical noise
    common to both directions is attenuated by the loop contrast and added
    to every quadrature.
    """
    if not s_cw.same_grid(s_ccw):
        raise DomainError("cw and ccw spectra are on different frequency/angle grids")
    t = sagnac.splitter_transmission
    values = t * s_cw.values_rel_shot + (1.0 - t) * s_ccw.values_rel_shot
    noise = sagnac.common_mode_noise(s_cw.frequencies_Hz)
    if np.any(noise):
        values = values + (noise * common_mode_suppression(sagnac.contrast_dB))[:, None]
    return s_cw.replace(values, sagnac_contrast_dB=sagnac.contrast_dB)


# -- loss ---------------------------------------------------------------------


def apply_loss(spectrum, efficiency: float):
    """Beam-splitter loss: S -> eta S + (1 - eta).

    Accepts a :class:`QuadratureSpectrum` or anything array-like.
    """
    _check_efficiency(efficiency)
    if isinstance(spectrum, QuadratureSpectrum):
        return spectrum.replace(efficiency * spectrum.values_rel_shot + (1.0 - efficiency))
    s = np.asarray(spectrum, dtype=float)
    out = efficiency * s + (1.0 - efficiency)
    return float(out) if out.ndim == 0 else out


def apply_chain(spectrum, chain: NoiseChain):
    for _, eta in chain.stages:
        spectrum = apply_loss(spectrum, eta)
    return spectrum


def infer_loss_corrected(measured_rel_shot, efficiency: float):
    """Undo :func:`apply_loss`: recover the value before a loss ``efficiency``."""
    _check_efficiency(efficiency)
    m = np.asarray(measured_rel_shot, dtype=float)
    floor = 1.0 - efficiency
    if np.any(m <= floor):
        raise DomainError(
            f"measurement below loss floor: unphysical (floor {floor:.6g} for efficiency {efficiency})"
        )
    out = (m - floor) / efficiency
    return float(out) if out.ndim == 0 else out


# -- thermorefractive noise ---------------------------------------------------


def thermo_psd(model: ThermoNoiseModel, frequencies_Hz) -> np.ndarray:
    """Excess phase noise N(f) relative to shot noise."""
    f = np.asarray(frequencies_Hz, dtype=float)
    if np.any(f < 0):
        raise DomainError("frequencies must be non-negative")
    base = model.amplitude_rel_shot_at_1MHz * model.scale_factor * REFERENCE_FREQUENCY_HZ**2
    if model.corner_frequency_Hz is None:
        if np.any(f == 0):
            raise DomainError("thermorefractive noise is singular at 0 Hz without a corner frequency")
        return base / f**2
    return base / (f**2 + model.corner_frequency_Hz**2)


def thermo_reduction_dB(model: ThermoNoiseModel) -> float:
    """How far the model sits below its room-temperature reference, in dB."""
    return -10.0 * math.log10(model.scale_factor)


# -- detection ----------------------------------------------------------------


def detected_spectrum(
    spectrum: QuadratureSpectrum,
    thermo: ThermoNoiseModel | None,
    detection: DetectionSpec,
    carrier_angle_rad: float = 0.0,
) -> QuadratureSpectrum:
    """Trace the analyzer records, in units of the low-frequency shot level.

    Order: homodyne/detector efficiency as a loss, thermorefractive noise
    projected onto the quadrature as sin^2(theta - carrier), detector roll-off
    on the optical noise, then the dark-noise floor.
    """
    values = apply_loss(spectrum.values_rel_shot, detection.efficiency)
    if thermo is not None and thermo.amplitude_rel_shot_at_1MHz > 0:
        n = thermo_psd(thermo, spectrum.frequencies_Hz) * thermo.surviving_fraction
        proj = np.sin(spectrum.angles_rad - carrier_angle_rad) ** 2
        values = values + n[:, None] * proj[None, :]
    if math.isfinite(detection.detector_bandwidth_Hz):
        values = values * detection.response(spectrum.frequencies_Hz)[:, None]
    if math.isfinite(detection.dark_noise_clearance_dB):
        values = values + detection.dark_floor
    return spectrum.replace(values, carrier_angle_rad=carrier_angle_rad, stage="detected")


def detected_shot_level(frequencies_Hz, detection: DetectionSpec) -> np.ndarray:
    """What a pure shot-noise input produces through :func:`detected_spectrum`."""
    f = np.asarray(frequencies_Hz, dtype=float)
    level = np.ones_like(f)
    if math.isfinite(detection.detector_bandwidth_Hz):
        level = level * detection.response(f)
    if math.isfinite(detection.dark_noise_clearance_dB):
        level = level + detection.dark_floor
    return level


def relative_to_detected_shot(detected: QuadratureSpectrum, detection: DetectionSpec) -> QuadratureSpectrum:
    """Detected trace divided by the detected shot trace (no dark subtraction)."""
    shot = detected_shot_level(detected.frequencies_Hz, detection)
    return detected.replace(detected.values_rel_shot / shot[:, None], stage="relative_to_shot")


# -- full chain ---------------------------------------------------------------


@dataclass(frozen=True)
class NoiseSetup:
    thermo: ThermoNoiseModel = field(default_factory=ThermoNoiseModel)
    chain: NoiseChain = field(default_factory=NoiseChain)
    detection: DetectionSpec = field(default_factory=DetectionSpec)
    calibrated: bool = False


def on_chip_output(device, pump, frequencies_Hz, angles_rad, branch="lower"):
    """Single-direction ring output and the Sagnac recombination of both
    directions (each pumped with its share of the on-chip power)."""
    t = device.sagnac.splitter_transmission
    specs = []
    carrier = 0.0
    for frac in (t, 1.0 - t):
        sol = select_branch(steady_state(device, pump, frac), branch)
        spec = fluctuation_spectrum(device, pump, sol, frequencies_Hz, angles_rad)
        carrier = spec.metadata["carrier_angle_rad"] if not specs else carrier
        specs.append(spec)
    return sagnac_output_spectrum(specs[0], specs[1], device.sagnac), carrier


def measured_spectrum(device, pump, noise: NoiseSetup, frequencies_Hz, angles_rad, branch="lower"):
    """Full model of the analyzer trace relative to the detected shot noise."""
    chip, carrier = on_chip_output(device, pump, frequencies_Hz, angles_rad, branch)
    lossy = apply_chain(chip, noise.chain)
    det = detected_spectrum(lossy, noise.thermo, noise.detection, carrier)
    return relative_to_detected_shot(det, noise.detection), chip


def cryogenic_prediction(
    device: DeviceSpec,
    pump,
    thermo_cold: ThermoNoiseModel,
    noise: NoiseSetup,
    frequency_Hz: float = 10e6,
    n_angles: int = 181,
    branch: str = "lower",
) -> dict:
    """Measurable squeezing at a low sideband frequency once the chip is cold.

    ``noise`` must carry ``calibrated=True`` (parameters obtained from a fit
    or the stored calibration fixture); only the thermal model is replaced.
    """
    if not noise.calibrated:
        raise ModelError("cryogenic prediction needs a calibrated noise model")
    cold = NoiseSetup(thermo_cold, noise.chain, noise.detection, True)
    freqs = np.array([frequency_Hz])
    angles = np.linspace(0.0, math.pi, n_angles, endpoint=False)
    measured, _ = measured_spectrum(device, pump, cold, freqs, angles, branch)
    theta_min, s_min, _, s_max = optimal_quadrature(measured, frequency_Hz)
    return {
        "frequency_Hz": frequency_Hz,
        "temperature_K": thermo_cold.temperature_K,
        "thermo_reduction_dB": thermo_reduction_dB(thermo_cold) - thermo_reduction_dB(noise.thermo),
        "s_min_rel_shot": s_min,
        "s_min_dB": float(to_db(s_min)),
        "s_max_dB": float(to_db(s_max)),
        "theta_min_rad": theta_min,
        "measurement_efficiency": noise.chain.total_efficiency,
    }
