"""Kerr-ring quadrature squeezing: device algebra, cavity spectra, noise chain,
ESA trace reduction and design sweeps."""

from kerrsqueeze.device import (
    DeviceSpec,
    RingSpec,
    SagnacSpec,
    WaveguideSpec,
    free_spectral_range,
    intrinsic_q_and_loss,
    kerr_rate,
    linewidth_from_q,
    split_decay_rates,
)
from kerrsqueeze.cavity import (
    CavitySolution,
    PumpSpec,
    QuadratureSpectrum,
    bistability_threshold,
    fluctuation_spectrum,
    optimal_quadrature,
    steady_state,
    sweep,
)

__version__ = "0.1.0"

__all__ = [
    "CavitySolution",
    "DeviceSpec",
    "PumpSpec",
    "QuadratureSpectrum",
    "RingSpec",
    "SagnacSpec",
    "WaveguideSpec",
    "bistability_threshold",
    "fluctuation_spectrum",
    "free_spectral_range",
    "intrinsic_q_and_loss",
    "kerr_rate",
    "linewidth_from_q",
    "optimal_quadrature",
    "split_decay_rates",
    "steady_state",
    "sweep",
]
