"""Design-space exploration: best achievable on-chip squeezing versus pump
power for candidate rings, and the minimum power for a target level."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from kerrsqueeze.cavity import output_transfer, coefficients_from_transfer
from kerrsqueeze.device import HBAR, DeviceSpec, RingSpec, SagnacSpec, WaveguideSpec
from kerrsqueeze.errors import DomainError, ModelError
from kerrsqueeze.noise import apply_loss

DEFAULT_EVAL_FREQUENCY_HZ = 100e6
DEFAULT_ESCAPE_EFFICIENCY = 0.95

# Ring geometry and waveguide optics of the two reference platforms are not
# known here; these are placeholders to be replaced by measured values.
_PLACEHOLDER_WAVEGUIDE = WaveguideSpec(
    wavelength_nm=1550.0, group_index=2.0, nonlinear_index_m2_per_W=2.4e-19, effective_area_um2=2.0
)

TEMPLATES = {
    "lpcvd-13M": DeviceSpec(
        _PLACEHOLDER_WAVEGUIDE,
        RingSpec(radius_um=100.0, escape_efficiency=DEFAULT_ESCAPE_EFFICIENCY, intrinsic_q=13e6),
        SagnacSpec(),
    ),
    "high-q-37M": DeviceSpec(
        _PLACEHOLDER_WAVEGUIDE,
        RingSpec(radius_um=115.0, escape_efficiency=DEFAULT_ESCAPE_EFFICIENCY, intrinsic_q=37e6),
        SagnacSpec(),
    ),
}


def escape_limit_dB(escape_efficiency: float) -> float:
    return 10.0 * math.log10(1.0 - escape_efficiency)


@dataclass(frozen=True)
class OperatingPoint:
    power_W: float
    s_min: float
    detuning_rad_per_s: float
    photon_number: float
    converged: bool = True

    @property
    def s_min_dB(self) -> float:
        return 10.0 * math.log10(self.s_min)


def _s_min_at(device, n, detuning, frequency_Hz):
    """Vectorized S_min for steady states given by (photon number, detuning)."""
    g = device.g
    t = output_transfer(
        device.kappa, device.kappa_ext, device.kappa_int,
        detuning + 4.0 * g * n, 2.0 * g * n, 2.0 * math.pi * frequency_Hz,
    )
    c, d = coefficients_from_transfer(t)
    return c - np.abs(d)


def optimal_squeezing(
    device: DeviceSpec,
    power_W: float,
    frequency_Hz: float = DEFAULT_EVAL_FREQUENCY_HZ,
    direction_power_fraction: float = 0.5,
    n_grid: int = 1500,
) -> OperatingPoint:
    """Deepest on-chip squeezing at one sideband frequency, over all stable
    steady states reachable at ``power_W`` by tuning the pump.

    States are parametrized by the Kerr shift (in half linewidths) instead
    of the detuning. At fixed drive each shift between zero and the drive
    load fixes the magnitude of the effective detuning through the
    steady-state relation shift (1 + eff_detuning^2) = load. The best points
    sit next to the bistable turning points, where a detuning scan would
    need an extremely fine grid.
    """
    if power_W < 0:
        raise DomainError("power must be >= 0")
    g = device.g
    if power_W == 0 or g == 0:
        return OperatingPoint(power_W, 1.0, 0.0, 0.0)
    half = device.kappa / 2.0
    drive = device.kappa_ext * direction_power_fraction * power_W / (HBAR * device.omega0)
    p = 2.0 * g * drive / half**3

    def states(log_u, sign):
        u = p * np.exp(log_u)
        d_eff = sign * np.sqrt(np.maximum(p / u - 1.0, 0.0))
        n = u * half / (2.0 * g)
        return n, (d_eff - u) * half, 1.0 + d_eff**2 + 2.0 * d_eff * u

    def objective(log_u, sign):
        n, det, stab = states(np.atleast_1d(log_u), sign)
        s = _s_min_at(device, n, det, frequency_Hz)
        # finite penalty keeps the bounded scalar search well defined
        return np.where(stab > 1e-12, s, 1e3)

    lo = math.log(1e-9)
    grid = np.linspace(lo, 0.0, n_grid)
    best = (1.0, 0.0, 0.0, True)
    for sign in (1.0, -1.0):
        vals = objective(grid, sign)
        i = int(np.argmin(vals))
        if vals[i] >= 1e3:
            continue
        a, b = grid[max(i - 1, 0)], grid[min(i + 1, n_grid - 1)]
        res = minimize_scalar(lambda x: float(objective(x, sign)[0]),
                              bounds=(a, b), method="bounded", options={"xatol": 1e-12})
        x, val = (res.x, float(res.fun)) if res.fun <= vals[i] else (grid[i], float(vals[i]))
        if val < best[0]:
            n, det, _ = states(np.atleast_1d(x), sign)
            best = (val, float(det[0]), float(n[0]), bool(res.success))
    s, det, n, ok = best
    return OperatingPoint(float(power_W), s, det, n, ok)


@dataclass(frozen=True, eq=False)
class SweepResult:
    power_W: np.ndarray
    templates: dict  # name -> {"on_chip_dB": array, "detected_dB": array, "detuning": array, ...}
    metadata: dict = field(default_factory=dict)


def sweep_power_q(
    templates: dict | None = None,
    powers_W=None,
    frequency_Hz: float = DEFAULT_EVAL_FREQUENCY_HZ,
    measurement_efficiency: float = 1.0,
    direction_power_fraction: float = 0.5,
) -> SweepResult:
    """Best on-chip squeezing versus power for each device template.

    ``detected_dB`` applies a lumped ``measurement_efficiency`` to the on-chip
    curve. Per template the metadata reports the escape-efficiency asymptote,
    the bistability threshold and the power that gets within 1 dB of the
    asymptote.
    """
    from kerrsqueeze.cavity import bistability_threshold

    templates = TEMPLATES if templates is None else templates
    powers = np.sort(np.geomspace(1e-3, 1.0, 61) if powers_W is None else np.asarray(powers_W, float))
    out = {}
    for name, dev in templates.items():
        pts = [optimal_squeezing(dev, float(P), frequency_Hz, direction_power_fraction) for P in powers]
        s = np.array([pt.s_min for pt in pts])
        limit = escape_limit_dB(dev.ring.escape_efficiency)
        try:
            p_1db = design_search(dev, limit + 1.0, frequency_Hz, direction_power_fraction)
        except ModelError:
            p_1db = float("nan")
        out[name] = {
            "on_chip_dB": 10.0 * np.log10(s),
            "detected_dB": 10.0 * np.log10(apply_loss(s, measurement_efficiency)),
            "detuning_rad_per_s": np.array([pt.detuning_rad_per_s for pt in pts]),
            "converged": np.array([pt.converged for pt in pts]),
            "escape_efficiency": dev.ring.escape_efficiency,
            "intrinsic_q": dev.ring.intrinsic_q,
            "asymptote_dB": limit,
            "bistability_threshold_W": bistability_threshold(dev, None, direction_power_fraction)[0]
            if dev.g > 0 else float("nan"),
            "power_within_1dB_W": p_1db,
        }
    meta = {"frequency_Hz": frequency_Hz, "measurement_efficiency": measurement_efficiency,
            "direction_power_fraction": direction_power_fraction}
    return SweepResult(powers, out, meta)


def design_search(
    device: DeviceSpec,
    target_squeezing_dB: float,
    frequency_Hz: float = DEFAULT_EVAL_FREQUENCY_HZ,
    direction_power_fraction: float = 0.5,
    rtol: float = 0.01,
    max_power_W: float = 1e3,
) -> float:
    """Smallest on-chip pump power whose best squeezing reaches the target.

    Bisection on a log scale; the returned power satisfies
    model(P) <= target < model((1 - rtol) P) when the curve is monotone.
    """
    limit = escape_limit_dB(device.ring.escape_efficiency)
    if target_squeezing_dB <= limit:
        raise DomainError(
            f"target exceeds escape-efficiency limit 10*log10(1-eta_esc) = {limit:.3f} dB"
        )
    if target_squeezing_dB >= 0:
        return 0.0

    def model(P):
        return optimal_squeezing(device, P, frequency_Hz, direction_power_fraction).s_min_dB

    hi = 1e-4
    while model(hi) > target_squeezing_dB:
        hi *= 2.0
        if hi > max_power_W:
            raise ModelError(f"target {target_squeezing_dB} dB not reached below {max_power_W} W")
    lo = hi / 2.0 if hi > 1e-4 else 0.0
    while (hi - lo) > rtol * hi * 0.5:
        mid = math.sqrt(lo * hi) if lo > 0 else hi / 2.0
        if model(mid) <= target_squeezing_dB:
            hi = mid
        else:
            lo = mid
    return hi
