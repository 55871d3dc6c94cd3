"""Least-squares extraction of noise and cavity parameters from normalized
squeezing spectra."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from kerrsqueeze.cavity import (
    PumpSpec,
    _transfer,
    coefficients_from_transfer,
    output_carrier_angle,
    select_branch,
    steady_state,
)
from kerrsqueeze.device import DeviceSpec, WaveguideSpec, kerr_rate
from kerrsqueeze.errors import DomainError, ModelError
from kerrsqueeze.noise import REFERENCE_FREQUENCY_HZ, ThermoNoiseModel, thermo_psd
from kerrsqueeze.traces import NormalizedSpectrum

DB = 10.0 / math.log(10.0)


# -- excess (thermorefractive) noise -----------------------------------------


@dataclass(frozen=True, eq=False)
class ExcessNoiseFit:
    amplitude_at_1MHz: float
    floor: float | None
    covariance: np.ndarray
    residual_rms: float
    n_points: int

    @property
    def sigma(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))

    def as_thermo_model(self, **kwargs) -> ThermoNoiseModel:
        return ThermoNoiseModel(max(self.amplitude_at_1MHz, 0.0), **kwargs)


def fit_excess_noise(normalized: NormalizedSpectrum, fit_band_Hz=(1e6, 300e6), with_floor=True) -> ExcessNoiseFit:
    """Weighted linear least squares of y = a (1 MHz / f)^2 + b on the
    linear noise power relative to shot.

    Per-bin uncertainties from the normalized spectrum set the weights and
    the covariance is then absolute; without them the covariance is scaled
    by the reduced chi-square.
    """
    band = normalized.band(*fit_band_Hz)
    n = band.frequencies_Hz.size
    n_par = 2 if with_floor else 1
    if n < 4:
        raise DomainError(f"need at least 4 points in the fit band, got {n}")
    f = band.frequencies_Hz
    y = band.rel_shot
    cols = [(REFERENCE_FREQUENCY_HZ / f) ** 2]
    if with_floor:
        cols.append(np.ones_like(f))
    X = np.stack(cols, axis=1)
    if band.sigma_dB is not None:
        sigma_y = y * band.sigma_dB / DB
        absolute = True
    else:
        sigma_y = np.ones_like(y)
        absolute = False
    w = 1.0 / sigma_y
    Xw, yw = X * w[:, None], y * w
    # column scaling keeps the normal equations well conditioned
    scale = np.linalg.norm(Xw, axis=0)
    if np.any(scale == 0):
        raise ModelError("singular normal equations in excess-noise fit")
    A = Xw / scale
    normal = A.T @ A
    if np.linalg.cond(normal) > 1e12:
        raise ModelError("singular normal equations in excess-noise fit")
    coef_s = np.linalg.solve(normal, A.T @ yw)
    coef = coef_s / scale
    resid = yw - Xw @ coef
    cov = np.linalg.inv(normal) / np.outer(scale, scale)
    dof = max(n - n_par, 1)
    if not absolute:
        cov = cov * float(resid @ resid) / dof
    rms = float(np.sqrt(np.mean((y - X @ coef) ** 2)))
    return ExcessNoiseFit(
        float(coef[0]), float(coef[1]) if with_floor else None, cov, rms, n
    )


# -- Kerr model ---------------------------------------------------------------

PARAMETERS = ("detuning_rad_per_s", "kerr_rate_rad_per_s", "measurement_efficiency", "detector_bandwidth_Hz")
DEFAULT_FREE = ("detuning_rad_per_s", "kerr_rate_rad_per_s", "measurement_efficiency")


@dataclass(frozen=True)
class KerrPriors:
    """Starting point and bounds for :func:`fit_kerr_model`.

    Detuning bounds are in units of the half linewidth; the Kerr-rate bounds
    are multiples of ``kerr_rate``.
    """

    detuning_half_linewidths: float = 0.0
    kerr_rate: float | None = None  # defaults to the device value
    measurement_efficiency: float = 0.5
    detector_bandwidth_Hz: float = math.inf
    dark_noise_clearance_dB: float = math.inf
    detuning_bounds: tuple = (-1.5, 1.5)
    kerr_rate_bounds: tuple = (0.05, 20.0)
    efficiency_bounds: tuple = (0.01, 1.0)
    bandwidth_bounds_Hz: tuple = (50e6, 20e9)
    free: tuple = DEFAULT_FREE
    thermo: ThermoNoiseModel | None = None


@dataclass(frozen=True, eq=False)
class FitResult:
    parameters: dict
    covariance: np.ndarray
    names: tuple
    residual_rms_dB: float
    iterations: int
    converged: bool
    message: str = ""
    at_bounds: tuple = ()
    fixed: dict = field(default_factory=dict)

    def sigma(self, name) -> float:
        i = self.names.index(name)
        return float(math.sqrt(max(self.covariance[i, i], 0.0)))

    def to_dict(self) -> dict:
        return {
            "parameters": {k: float(v) for k, v in self.parameters.items()},
            "free": list(self.names),
            "covariance": [[float(x) for x in row] for row in self.covariance],
            "fixed": {k: float(v) for k, v in self.fixed.items()},
            "residual_rms_dB": float(self.residual_rms_dB),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "message": self.message,
            "at_bounds": list(self.at_bounds),
        }


class FitDivergence(ModelError):
    def __init__(self, message, best: FitResult):
        super().__init__(message)
        self.best = best


def device_with_kerr_rate(device: DeviceSpec, g: float) -> DeviceSpec:
    """Copy of ``device`` whose n2 is rescaled to give Kerr rate ``g``."""
    wg = device.waveguide
    unit = kerr_rate(replace(wg, nonlinear_index_m2_per_W=1.0), device.ring)
    return DeviceSpec(replace(wg, nonlinear_index_m2_per_W=g / unit), device.ring, device.sagnac)


def model_squeezing_dB(
    device: DeviceSpec,
    power_W: float,
    frequencies_Hz,
    detuning: float,
    efficiency: float,
    detector_bandwidth_Hz: float = math.inf,
    dark_noise_clearance_dB: float = math.inf,
    thermo: ThermoNoiseModel | None = None,
    branch: str = "lower",
) -> np.ndarray:
    """Squeezed-quadrature spectrum as the normalization pipeline reports it.

    Both loop directions are mixed at the splitter, the lumped efficiency is
    applied, optional thermorefractive phase noise is added, and the detector
    response and dark floor enter through the detected-shot ratio.
    """
    f = np.asarray(frequencies_Hz, dtype=float)
    pump = PumpSpec(power_W, detuning, device.waveguide.wavelength_nm)
    t = device.sagnac.splitter_transmission
    c = np.zeros_like(f)
    d = np.zeros_like(f, dtype=complex)
    carrier = 0.0
    for k, frac in enumerate((t, 1.0 - t)):
        sol = select_branch(steady_state(device, pump, frac), branch)
        if not sol.stable:
            raise ModelError("linearization invalid on unstable branch")
        ck, dk = coefficients_from_transfer(_transfer(device, sol, f))
        if k == 0:
            carrier = output_carrier_angle(device, sol)
        w = t if k == 0 else 1.0 - t
        c, d = c + w * ck, d + w * dk
    c = efficiency * c + (1.0 - efficiency)
    d = efficiency * d
    if thermo is not None and thermo.amplitude_rel_shot_at_1MHz > 0:
        n = thermo_psd(thermo, f) * thermo.surviving_fraction
        c = c + n / 2.0
        d = d - (n / 2.0) * np.exp(2j * carrier)
    s = c - np.abs(d)
    h = np.ones_like(f) if not math.isfinite(detector_bandwidth_Hz) else 1.0 / (1.0 + (f / detector_bandwidth_Hz) ** 2)
    dark = 0.0 if not math.isfinite(dark_noise_clearance_dB) else 10.0 ** (-dark_noise_clearance_dB / 10.0)
    return 10.0 * np.log10((h * s + dark) / (h + dark))


def fit_kerr_model(
    spectra: Sequence[tuple[float, NormalizedSpectrum]],
    device: DeviceSpec,
    priors: KerrPriors | None = None,
    fit_band_Hz=(500e6, 2e9),
    max_nfev: int = 400,
) -> FitResult:
    """Damped least squares (trust-region reflective) of the Kerr model to
    one or more (power, spectrum) pairs, residuals in dB.

    Free parameters are optimized in scaled units: detuning in half
    linewidths, Kerr rate relative to the prior, efficiency as is and the
    detector bandwidth in GHz. The fit is deterministic for a given start.
    """
    if not spectra:
        raise DomainError("need at least one spectrum to fit")
    priors = priors or KerrPriors()
    unknown = [p for p in priors.free if p not in PARAMETERS]
    if unknown:
        raise DomainError(f"unknown fit parameter(s): {unknown}")
    half = device.kappa / 2.0
    g0 = device.g if priors.kerr_rate is None else priors.kerr_rate
    free = tuple(p for p in PARAMETERS if p in priors.free)
    if g0 == 0.0 and "kerr_rate_rad_per_s" in free:
        free = tuple(p for p in free if p != "kerr_rate_rad_per_s")
    g_ref = g0 if g0 > 0 else 1.0

    start = {
        "detuning_rad_per_s": priors.detuning_half_linewidths,
        "kerr_rate_rad_per_s": g0 / g_ref,
        "measurement_efficiency": priors.measurement_efficiency,
        "detector_bandwidth_Hz": priors.detector_bandwidth_Hz / 1e9,
    }
    bounds = {
        "detuning_rad_per_s": priors.detuning_bounds,
        "kerr_rate_rad_per_s": priors.kerr_rate_bounds,
        "measurement_efficiency": priors.efficiency_bounds,
        "detector_bandwidth_Hz": tuple(b / 1e9 for b in priors.bandwidth_bounds_Hz),
    }
    unit = {
        "detuning_rad_per_s": half,
        "kerr_rate_rad_per_s": g_ref,
        "measurement_efficiency": 1.0,
        "detector_bandwidth_Hz": 1e9,
    }

    data = []
    for power, spec in spectra:
        band = spec.band(*fit_band_Hz)
        if band.frequencies_Hz.size == 0:
            raise DomainError(f"no data in fit band for power {power} W")
        sigma = band.sigma_dB if band.sigma_dB is not None else np.ones_like(band.rel_shot_dB)
        data.append((float(power), band.frequencies_Hz, band.rel_shot_dB, sigma))

    def unpack(x):
        vals = dict(start)
        vals.update(zip(free, x))
        return {k: vals[k] * unit[k] for k in PARAMETERS}

    def residuals(x):
        p = unpack(x)
        dev = device_with_kerr_rate(device, p["kerr_rate_rad_per_s"])
        out = []
        for power, f, y, sig in data:
            try:
                m = model_squeezing_dB(
                    dev, power, f, p["detuning_rad_per_s"], p["measurement_efficiency"],
                    p["detector_bandwidth_Hz"], priors.dark_noise_clearance_dB, priors.thermo,
                )
            except ModelError:
                m = np.full_like(y, 50.0)
            out.append((m - y) / sig)
        return np.concatenate(out)

    if not free:
        r = residuals(np.array([]))
        p = unpack(np.array([]))
        return FitResult(p, np.zeros((0, 0)), (), _rms_dB(r, data), 0, True, "no free parameters",
                         (), {k: p[k] for k in PARAMETERS})

    x0 = np.array([start[k] for k in free])
    lo = np.array([bounds[k][0] for k in free])
    hi = np.array([bounds[k][1] for k in free])
    x0 = np.clip(x0, lo, hi)
    res = least_squares(
        residuals, x0, bounds=(lo, hi), method="trf", jac="3-point",
        xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=max_nfev, x_scale=1.0,
    )
    J = res.jac
    n_data = res.fun.size
    dof = max(n_data - len(free), 1)
    absolute = all(spec.band(*fit_band_Hz).sigma_dB is not None for _, spec in spectra)
    cov_s = np.linalg.pinv(J.T @ J)
    if not absolute:
        cov_s = cov_s * float(res.fun @ res.fun) / dof
    scale = np.array([unit[k] for k in free])
    cov = cov_s * np.outer(scale, scale)
    params = unpack(res.x)
    span = hi - lo
    flagged = tuple(
        k for k, x, a, b, s in zip(free, res.x, lo, hi, span) if min(x - a, b - x) <= 1e-9 * max(s, 1.0)
    )
    result = FitResult(
        parameters={k: params[k] for k in free},
        covariance=cov,
        names=free,
        residual_rms_dB=_rms_dB(res.fun, data),
        iterations=int(res.nfev),
        converged=res.status > 0,
        message=str(res.message),
        at_bounds=flagged,
        fixed={k: params[k] for k in PARAMETERS if k not in free},
    )
    if res.status == 0:
        raise FitDivergence(f"fit did not converge in {max_nfev} evaluations", result)
    return result


def _rms_dB(weighted, data):
    sig = np.concatenate([d[3] for d in data])
    return float(np.sqrt(np.mean((weighted * sig) ** 2)))
