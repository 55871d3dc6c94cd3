"""Pumped Kerr ring: classical steady state and linearized output noise.

In the frame rotating at the pump the intracavity amplitude ``a`` obeys

    da/dt = -(i detuning + kappa/2) a - 2i kerr |a|^2 a
            + sqrt(kappa_ext) a_in + sqrt(kappa_int) b_in

where ``detuning`` is pump minus cavity frequency and ``kerr`` is the
frequency shift per photon, so the mean-field shift 2 kerr |a|^2 adds to
the detuning. Fluctuations around the mean field ``alpha`` follow

    d(da)/dt = -(i (detuning + 4 kerr n) + kappa/2) da - 2i kerr alpha^2 da^+ + inputs

and leave through a_out = sqrt(kappa_ext) a - a_in. Quadratures are
X(theta) = a exp(-i theta) + a^+ exp(i theta), so vacuum has unit variance
and every spectrum here is normalized to shot noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from kerrsqueeze.device import HBAR, DeviceSpec, optical_angular_frequency
from kerrsqueeze.errors import DomainError, ModelError

BRANCHES = ("lower", "middle", "upper")


@dataclass(frozen=True)
class PumpSpec:
    power_on_chip_W: float
    detuning_rad_per_s: float = 0.0
    wavelength_nm: float = 1550.0

    def __post_init__(self):
        p = self.power_on_chip_W
        if not (isinstance(p, (int, float)) and math.isfinite(p)):
            raise DomainError(
                f"power_on_chip_W must be a finite number, got {p!r}",
                [("power_on_chip_W", f"must be a finite number, got {p!r}")],
            )
        if p < 0:
            raise DomainError(
                f"power_on_chip_W must be >= 0, got {p}",
                [("power_on_chip_W", f"must be >= 0, got {p}")],
            )
        if not math.isfinite(self.detuning_rad_per_s):
            raise DomainError(
                "detuning_rad_per_s must be finite",
                [("detuning_rad_per_s", "must be finite")],
            )
        if not self.wavelength_nm > 0:
            raise DomainError(
                "wavelength_nm must be positive", [("wavelength_nm", "must be positive")]
            )

    @property
    def omega(self) -> float:
        return optical_angular_frequency(self.wavelength_nm)

    def with_power(self, power_W: float) -> "PumpSpec":
        return PumpSpec(power_W, self.detuning_rad_per_s, self.wavelength_nm)

    def with_detuning(self, detuning: float) -> "PumpSpec":
        return PumpSpec(self.power_on_chip_W, detuning, self.wavelength_nm)


@dataclass(frozen=True)
class CavitySolution:
    photon_number: float
    field_phase_rad: float
    effective_detuning_rad_per_s: float
    branch: str
    stable: bool
    detuning_rad_per_s: float = 0.0
    input_amplitude: float = 0.0  # sqrt(photon flux) in the bus, 1/sqrt(s)

    @property
    def alpha(self) -> complex:
        return math.sqrt(self.photon_number) * complex(
            math.cos(self.field_phase_rad), math.sin(self.field_phase_rad)
        )


@dataclass(frozen=True, eq=False)
class QuadratureSpectrum:
    """Output noise power S(freq, theta) relative to shot noise.

    ``values_rel_shot`` has shape ``(len(frequencies_Hz), len(angles_rad))``.
    """

    frequencies_Hz: np.ndarray
    angles_rad: np.ndarray
    values_rel_shot: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        f = np.asarray(self.frequencies_Hz, dtype=float)
        a = np.asarray(self.angles_rad, dtype=float)
        v = np.asarray(self.values_rel_shot, dtype=float)
        if v.shape != (f.size, a.size):
            raise DomainError(
                f"values shape {v.shape} does not match grid ({f.size}, {a.size})"
            )
        object.__setattr__(self, "frequencies_Hz", f)
        object.__setattr__(self, "angles_rad", a)
        object.__setattr__(self, "values_rel_shot", v)

    def replace(self, values, **metadata) -> "QuadratureSpectrum":
        meta = dict(self.metadata)
        meta.update(metadata)
        return QuadratureSpectrum(self.frequencies_Hz, self.angles_rad, values, meta)

    def same_grid(self, other: "QuadratureSpectrum") -> bool:
        return (
            self.frequencies_Hz.shape == other.frequencies_Hz.shape
            and self.angles_rad.shape == other.angles_rad.shape
            and np.array_equal(self.frequencies_Hz, other.frequencies_Hz)
            and np.array_equal(self.angles_rad, other.angles_rad)
        )


def default_frequency_grid(f_min_Hz=1e6, f_max_Hz=5e9, n=400) -> np.ndarray:
    return np.geomspace(f_min_Hz, f_max_Hz, n)


def default_angle_grid(n=181) -> np.ndarray:
    return np.linspace(0.0, math.pi, n, endpoint=False)


# -- steady state -------------------------------------------------------------


def _cubic_real_roots(b, c, d):
    """Real roots of u^3 + b u^2 + c u + d, ascending (Cardano / Viete)."""
    shift = b / 3.0
    p = c - b * b / 3.0
    q = 2.0 * b**3 / 27.0 - b * c / 3.0 + d
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if disc > 0 or p == 0:
        s = math.sqrt(max(disc, 0.0))
        big = -q / 2.0 + (s if q <= 0 else -s)
        a_ = math.copysign(abs(big) ** (1.0 / 3.0), big)
        t = a_ - p / (3.0 * a_) if a_ != 0.0 else 0.0
        return [t - shift]
    r = 2.0 * math.sqrt(-p / 3.0)
    arg = (3.0 * q / (p * r)) if r else 0.0
    phi = math.acos(max(-1.0, min(1.0, arg)))
    roots = [r * math.cos((phi - 2.0 * math.pi * k) / 3.0) - shift for k in range(3)]
    return sorted(roots)


def _polish(u, b, c, d, steps=2):
    for _ in range(steps):
        f = ((u + b) * u + c) * u + d
        df = (3.0 * u + 2.0 * b) * u + c
        if df == 0.0:
            break
        u -= f / df
    return u


def _stability_det(kappa, detuning, g, n):
    """Determinant of the fluctuation drift matrix; the state is stable iff > 0
    (the trace is always -kappa)."""
    d_fluct = detuning + 4.0 * g * n
    return (kappa / 2.0) ** 2 + d_fluct**2 - (2.0 * g * n) ** 2


def input_photon_flux(pump: PumpSpec, direction_power_fraction: float = 1.0) -> float:
    return direction_power_fraction * pump.power_on_chip_W / (HBAR * pump.omega)


def steady_state(
    device: DeviceSpec, pump: PumpSpec, direction_power_fraction: float = 0.5
) -> list[CavitySolution]:
    """All real steady states of the pumped ring, ordered by photon number.

    Parameters
    ----------
    direction_power_fraction
        Share of ``pump.power_on_chip_W`` launched into the ring in one
        direction (0.5 for each arm of a balanced Sagnac loop).
    """
    if pump.power_on_chip_W < 0:
        raise DomainError("pump power must be >= 0")
    if not 0.0 <= direction_power_fraction <= 1.0:
        raise DomainError(
            f"direction_power_fraction must lie in [0, 1], got {direction_power_fraction}"
        )
    kappa, kappa_ext, g = device.kappa, device.kappa_ext, device.g
    flux = input_photon_flux(pump, direction_power_fraction)
    drive = kappa_ext * flux
    delta = pump.detuning_rad_per_s
    half = kappa / 2.0

    if drive == 0.0:
        numbers = [0.0]
    elif g == 0.0:
        numbers = [drive / (half**2 + delta**2)]
    else:
        # in units of the half linewidth: shift (1 + (detuning + shift)^2) = load
        dn = delta / half
        load = 2.0 * g * drive / half**3
        b, c, d = 2.0 * dn, 1.0 + dn * dn, -load
        us = [_polish(u, b, c, d) for u in _cubic_real_roots(b, c, d)]
        numbers = sorted(max(u, 0.0) * half / (2.0 * g) for u in us)
        numbers = [_newton_n(n, half, delta, g, drive) for n in numbers]

    for n in numbers:
        resid = n * (half**2 + (delta + 2.0 * g * n) ** 2) - drive
        scale = drive if drive else 1.0
        if not (n >= 0 and abs(resid) <= 1e-10 * scale) and drive:
            raise ModelError(f"steady-state root failed residual check ({resid / scale:.2e})")

    labels = ["lower"] if len(numbers) == 1 else list(BRANCHES)
    amp_in = math.sqrt(flux)
    out = []
    for n, label in zip(numbers, labels):
        d_eff = delta + 2.0 * g * n
        stable = label != "middle" and _stability_det(kappa, delta, g, n) > 0
        out.append(
            CavitySolution(
                photon_number=n,
                field_phase_rad=-math.atan2(d_eff, half),
                effective_detuning_rad_per_s=d_eff,
                branch=label,
                stable=stable,
                detuning_rad_per_s=delta,
                input_amplitude=amp_in,
            )
        )
    return out


def _newton_n(n, half, delta, g, drive, steps=2):
    for _ in range(steps):
        f = n * (half**2 + (delta + 2.0 * g * n) ** 2) - drive
        df = half**2 + (delta + 2.0 * g * n) * (delta + 6.0 * g * n)
        if df == 0.0:
            break
        step = f / df
        if not math.isfinite(step):
            break
        n = max(n - step, 0.0)
    return n


def select_branch(solutions: Sequence[CavitySolution], branch: str = "lower") -> CavitySolution:
    """Pick the requested stable branch; falls back to the only root when the
    cavity is monostable."""
    if branch not in ("lower", "upper"):
        raise DomainError(f"branch must be 'lower' or 'upper', got {branch!r}")
    if len(solutions) == 1:
        return solutions[0]
    pick = solutions[0] if branch == "lower" else solutions[-1]
    return pick


def bistability_threshold(device: DeviceSpec, wavelength_nm: float | None = None,
                          direction_power_fraction: float = 1.0) -> tuple[float, float]:
    """Critical pump power (on chip, W) and detuning (rad/s) at which the
    steady-state cubic first develops three real roots.

    The critical point sits at detuning -sqrt(3) kappa/2 with
    n = kappa / (2 sqrt(3) kerr) photons, which needs a per-direction power
    hbar omega kappa^3 / (6 sqrt(3) kerr kappa_ext).
    """
    g = device.g
    if g == 0.0:
        raise ModelError("no bistability in linear cavity")
    if direction_power_fraction <= 0:
        raise DomainError("direction_power_fraction must be positive")
    wl = device.waveguide.wavelength_nm if wavelength_nm is None else wavelength_nm
    omega = optical_angular_frequency(wl)
    kappa = device.kappa
    p_dir = HBAR * omega * kappa**3 / (6.0 * math.sqrt(3.0) * g * device.kappa_ext)
    return p_dir / direction_power_fraction, -math.sqrt(3.0) * kappa / 2.0


# -- fluctuations -------------------------------------------------------------


def output_transfer(kappa, kappa_ext, kappa_int, fluct_detuning, coupling, omega):
    """Output transfer matrices for the (a_in, a_in^+) and (b_in, b_in^+) ports.

    All arguments broadcast against each other; the result has the broadcast
    shape followed by (2, 2).
    """
    d_fl, G, w = np.broadcast_arrays(
        np.asarray(fluct_detuning, dtype=float),
        np.asarray(coupling, dtype=complex),
        np.asarray(omega, dtype=float),
    )
    # (-i omega - M), M = [[-(i fluct_detuning + kappa/2), -i coupling], [i coupling*, i fluct_detuning - kappa/2]]
    m11 = -1j * w + 1j * d_fl + kappa / 2.0
    m22 = -1j * w - 1j * d_fl + kappa / 2.0
    m12 = 1j * G
    m21 = -1j * np.conj(G)
    det = m11 * m22 - m12 * m21
    inv = np.empty(w.shape + (2, 2), dtype=complex)
    inv[..., 0, 0] = m22 / det
    inv[..., 0, 1] = -m12 / det
    inv[..., 1, 0] = -m21 / det
    inv[..., 1, 1] = m11 / det
    return kappa_ext * inv - np.eye(2), math.sqrt(kappa_ext * kappa_int) * inv


def _transfer(device: DeviceSpec, solution: CavitySolution, frequencies_Hz):
    g, n = device.g, solution.photon_number
    return output_transfer(
        device.kappa,
        device.kappa_ext,
        device.kappa_int,
        solution.detuning_rad_per_s + 4.0 * g * n,
        2.0 * g * solution.alpha**2,
        2.0 * math.pi * np.asarray(frequencies_Hz, dtype=float),
    )


def coefficients_from_transfer(transfers):
    """(c, d) of S(theta) = c + Re(d exp(-2 i theta)) from port transfer matrices."""
    c = 0.0
    d = 0.0
    for t in transfers:
        c = c + 0.5 * np.sum(np.abs(t[..., 0, :]) ** 2 + np.abs(t[..., 1, :]) ** 2, axis=-1)
        d = d + np.sum(t[..., 0, :] * np.conj(t[..., 1, :]), axis=-1)
    return c, d


def _require_stable(solution):
    if not solution.stable:
        raise ModelError("linearization invalid on unstable branch")


def quadrature_coefficients(device, solution, frequencies_Hz):
    """Coefficients of S(theta) = c + Re(d exp(-2 i theta)) at each frequency.

    Input noise is symmetrized over the two sidebands, which makes S even in
    frequency.
    """
    _require_stable(solution)
    return coefficients_from_transfer(_transfer(device, solution, frequencies_Hz))


def squeezing_extremes(device, solution, frequencies_Hz):
    """Exact (S_min, S_max, theta_min) per frequency without an angle grid."""
    c, d = quadrature_coefficients(device, solution, frequencies_Hz)
    mag = np.abs(d)
    theta_min = np.mod((np.angle(d) + math.pi) / 2.0, math.pi)
    return c - mag, c + mag, theta_min


def fluctuation_spectrum(
    device: DeviceSpec,
    pump: PumpSpec,
    solution: CavitySolution,
    frequencies_Hz=None,
    angles_rad=None,
) -> QuadratureSpectrum:
    """Output quadrature noise of one propagation direction on the chip."""
    _require_stable(solution)
    freqs = default_frequency_grid() if frequencies_Hz is None else np.asarray(frequencies_Hz, float)
    angles = default_angle_grid() if angles_rad is None else np.asarray(angles_rad, float)
    phase = np.exp(-1j * angles)
    u = np.stack([phase, np.conj(phase)], axis=-1)  # (n_theta, 2)
    values = np.zeros((freqs.size, angles.size))
    for t in _transfer(device, solution, freqs):
        rows = np.einsum("aj,fjk->fak", u, t)
        values += 0.5 * np.sum(np.abs(rows) ** 2, axis=-1)
    meta = {
        "photon_number": solution.photon_number,
        "branch": solution.branch,
        "detuning_rad_per_s": solution.detuning_rad_per_s,
        "power_on_chip_W": pump.power_on_chip_W,
        "carrier_angle_rad": output_carrier_angle(device, solution),
    }
    return QuadratureSpectrum(freqs, angles, values, meta)


def output_carrier_angle(device: DeviceSpec, solution: CavitySolution) -> float:
    """Phase of the mean output field; X at this angle is the amplitude quadrature."""
    if solution.input_amplitude == 0.0:
        return 0.0
    out = math.sqrt(device.kappa_ext) * solution.alpha - solution.input_amplitude
    return math.atan2(out.imag, out.real) % math.pi


def fit_quadrature_sinusoid(angles_rad, values):
    """Least-squares fit of c + p cos 2t + q sin 2t along the last axis."""
    a = np.asarray(angles_rad, dtype=float)
    basis = np.stack([np.ones_like(a), np.cos(2 * a), np.sin(2 * a)], axis=-1)
    if np.linalg.matrix_rank(basis) < 3:
        raise DomainError("angle grid needs at least three distinct angles modulo pi")
    coef, *_ = np.linalg.lstsq(basis, np.moveaxis(np.asarray(values, float), -1, 0), rcond=None)
    return coef[0], coef[1], coef[2]


def optimal_quadrature(spectrum: QuadratureSpectrum, frequency_Hz: float):
    """Squeezed and anti-squeezed quadratures at one sideband frequency.

    The sample is interpolated linearly along frequency. S(theta) is exactly a
    sinusoid in 2 theta for Gaussian noise, so the extremes are taken from a
    fit to the angle grid rather than from the nearest grid point.

    Returns
    -------
    (theta_min, S_min, theta_max, S_max), angles reduced to [0, pi).
    """
    f = spectrum.frequencies_Hz
    if not (f.size and f.min() <= frequency_Hz <= f.max()):
        raise DomainError(
            f"frequency {frequency_Hz} Hz lies outside the spectrum grid "
            f"[{f.min() if f.size else float('nan')}, {f.max() if f.size else float('nan')}]"
        )
    order = np.argsort(f)
    row = np.array(
        [np.interp(frequency_Hz, f[order], spectrum.values_rel_shot[order, j])
         for j in range(spectrum.angles_rad.size)]
    )
    c, p, q = fit_quadrature_sinusoid(spectrum.angles_rad, row)
    amp = math.hypot(p, q)
    theta_min = ((math.atan2(q, p) + math.pi) / 2.0) % math.pi
    theta_max = (theta_min + math.pi / 2.0) % math.pi
    return theta_min, float(c - amp), theta_max, float(c + amp)


class SweepRow(NamedTuple):
    power_W: float
    frequency_Hz: float
    s_min: float
    s_max: float


def sweep(
    device: DeviceSpec,
    pump_powers_W: Sequence[float],
    frequencies_Hz,
    angles_rad=None,
    detuning_rad_per_s: float = 0.0,
    wavelength_nm: float | None = None,
    direction_power_fraction: float = 0.5,
    branch: str = "lower",
) -> list[SweepRow]:
    """S_min / S_max over a power list, rows ordered by (power, frequency).

    ``angles_rad`` is accepted for interface symmetry; extremes are computed
    exactly from the quadrature coefficients.
    """
    wl = device.waveguide.wavelength_nm if wavelength_nm is None else wavelength_nm
    freqs = np.sort(np.asarray(frequencies_Hz, dtype=float))
    rows = []
    for power in sorted(pump_powers_W):
        try:
            pump = PumpSpec(float(power), detuning_rad_per_s, wl)
            sol = select_branch(steady_state(device, pump, direction_power_fraction), branch)
            s_min, s_max, _ = squeezing_extremes(device, sol, freqs)
        except (DomainError, ModelError) as exc:
            raise type(exc)(f"at pump power {power} W: {exc}") from exc
        rows.extend(SweepRow(float(power), float(fq), float(a), float(b))
                    for fq, a, b in zip(freqs, s_min, s_max))
    return rows
