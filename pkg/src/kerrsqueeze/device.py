"""Resonator parameter algebra.

Relations between Q factors, decay rates, propagation loss, free spectral
range and the single-photon Kerr frequency shift of a ring resonator. All
rates are angular (rad/s) unless the name says Hz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Any, Mapping, Sequence

import numpy as np
from scipy import constants

from kerrsqueeze.errors import ConfigError, DomainError

C = constants.c
HBAR = constants.hbar
DB_PER_NEPER = 10.0 / math.log(10.0)  # power attenuation: dB = 4.343 * alpha[1/m] * length

DEFAULT_GROUP_INDEX = 1.88


def _positive(name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be a positive finite number, got {value!r}")


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _check_positive(problems, name, value):
    if not (_is_number(value) and value > 0):
        problems.append((name, f"must be a positive finite number, got {value!r}"))


def _raise(problems):
    if problems:
        raise DomainError("; ".join(f"{n} {m}" for n, m in problems), problems)


def optical_angular_frequency(wavelength_nm: float) -> float:
    _positive("wavelength_nm", wavelength_nm)
    return 2.0 * math.pi * C / (wavelength_nm * 1e-9)


@dataclass(frozen=True)
class WaveguideSpec:
    wavelength_nm: float = 1550.0
    group_index: float = DEFAULT_GROUP_INDEX
    nonlinear_index_m2_per_W: float = 2.4e-19
    effective_area_um2: float = 1.0
    propagation_loss_dB_per_cm: float | None = None

    def __post_init__(self):
        problems = []
        for name in ("wavelength_nm", "group_index", "effective_area_um2"):
            _check_positive(problems, name, getattr(self, name))
        n2 = self.nonlinear_index_m2_per_W
        # n2 = 0 is accepted so the linear-medium limit can be simulated
        if not (_is_number(n2) and n2 >= 0):
            problems.append(("nonlinear_index_m2_per_W", f"must be >= 0, got {n2!r}"))
        if self.propagation_loss_dB_per_cm is not None:
            _check_positive(problems, "propagation_loss_dB_per_cm", self.propagation_loss_dB_per_cm)
        if _is_number(self.group_index) and not 1.0 <= self.group_index <= 10.0:
            problems.append(("group_index", f"must lie in [1, 10], got {self.group_index}"))
        if _is_number(self.wavelength_nm) and not 400.0 <= self.wavelength_nm <= 4000.0:
            problems.append(("wavelength_nm", f"must lie in [400, 4000], got {self.wavelength_nm}"))
        _raise(problems)


@dataclass(frozen=True)
class RingSpec:
    """Ring geometry and coupling. Give exactly one of ``loaded_q`` and
    ``intrinsic_q``; the other is derived through the escape efficiency."""

    radius_um: float
    escape_efficiency: float
    loaded_q: float | None = None
    intrinsic_q: float | None = None

    def __post_init__(self):
        problems = []
        _check_positive(problems, "radius_um", self.radius_um)
        eta = self.escape_efficiency
        if not (_is_number(eta) and 0.0 < eta <= 1.0):
            problems.append(("escape_efficiency", f"must lie in (0, 1], got {eta!r}"))
        if (self.loaded_q is None) == (self.intrinsic_q is None):
            problems.append(("loaded_q", "give exactly one of loaded_q and intrinsic_q"))
        elif self.loaded_q is not None and not (_is_number(self.loaded_q) and self.loaded_q > 1):
            problems.append(("loaded_q", f"must exceed 1, got {self.loaded_q!r}"))
        elif self.intrinsic_q is not None:
            _check_positive(problems, "intrinsic_q", self.intrinsic_q)
        _raise(problems)
        if self.loaded_q is not None:
            # eta = 1 is the lossless ring
            q_int = self.loaded_q / (1.0 - eta) if eta < 1.0 else math.inf
            object.__setattr__(self, "intrinsic_q", q_int)
        else:
            object.__setattr__(self, "loaded_q", self.intrinsic_q * (1.0 - eta))
            if not self.loaded_q > 1:
                _raise([("intrinsic_q", f"implies loaded_q = {self.loaded_q} <= 1")])

    @property
    def length_m(self) -> float:
        return 2.0 * math.pi * self.radius_um * 1e-6


@dataclass(frozen=True)
class SagnacSpec:
    """Loop-mirror coupler and the lumped classical noise common to both
    propagation directions.

    ``common_mode_noise_rel_shot`` is either a constant (power relative to
    shot noise) or a table ``{"freq_Hz": [...], "rel_shot": [...]}``
    interpolated log-log and held constant outside its range.
    """

    splitter_transmission: float = 0.5
    contrast_dB: float = 23.0
    common_mode_noise_rel_shot: Any = 0.0

    def __post_init__(self):
        problems = []
        t = self.splitter_transmission
        if not (_is_number(t) and 0.0 < t < 1.0):
            problems.append(("splitter_transmission", f"must lie in (0, 1), got {t!r}"))
        if not (_is_number(self.contrast_dB) and self.contrast_dB >= 0):
            problems.append(("contrast_dB", f"must be >= 0, got {self.contrast_dB!r}"))
        noise = self.common_mode_noise_rel_shot
        if isinstance(noise, Mapping):
            try:
                f = np.asarray(noise.get("freq_Hz", []), dtype=float)
                v = np.asarray(noise.get("rel_shot", []), dtype=float)
                ok = f.ndim == 1 and f.size >= 2 and f.shape == v.shape
                ok = ok and not (np.any(np.diff(f) <= 0) or np.any(f <= 0) or np.any(v < 0))
            except (TypeError, ValueError):
                ok = False
            if not ok:
                problems.append(("common_mode_noise_rel_shot",
                                 "table needs increasing positive freq_Hz and matching non-negative rel_shot"))
        elif not (_is_number(noise) and noise >= 0):
            problems.append(("common_mode_noise_rel_shot", f"must be >= 0, got {noise!r}"))
        _raise(problems)

    def common_mode_noise(self, frequencies_Hz) -> np.ndarray:
        f = np.asarray(frequencies_Hz, dtype=float)
        noise = self.common_mode_noise_rel_shot
        if not isinstance(noise, Mapping):
            return np.full(f.shape, float(noise))
        tf = np.log(np.asarray(noise["freq_Hz"], dtype=float))
        tv = np.asarray(noise["rel_shot"], dtype=float)
        return np.interp(np.log(np.clip(f, 1e-300, None)), tf, tv)


@dataclass(frozen=True)
class DeviceSpec:
    waveguide: WaveguideSpec
    ring: RingSpec
    sagnac: SagnacSpec = field(default_factory=SagnacSpec)

    @property
    def omega0(self) -> float:
        return optical_angular_frequency(self.waveguide.wavelength_nm)

    @property
    def kappa(self) -> float:
        return linewidth_from_q(self.waveguide.wavelength_nm, self.ring.loaded_q)[0]

    @property
    def kappa_ext(self) -> float:
        return split_decay_rates(self.kappa, self.ring.escape_efficiency)[0]

    @property
    def kappa_int(self) -> float:
        return split_decay_rates(self.kappa, self.ring.escape_efficiency)[1]

    @property
    def g(self) -> float:
        return kerr_rate(self.waveguide, self.ring)

    def with_ring(self, **changes) -> "DeviceSpec":
        ring = {f.name: getattr(self.ring, f.name) for f in fields(RingSpec)}
        if "intrinsic_q" in changes:
            ring["loaded_q"] = None
        if "loaded_q" in changes:
            ring["intrinsic_q"] = None
        ring.update(changes)
        return DeviceSpec(self.waveguide, RingSpec(**ring), self.sagnac)

    def to_dict(self) -> dict:
        ring = {"radius_um": self.ring.radius_um, "escape_efficiency": self.ring.escape_efficiency,
                "loaded_q": self.ring.loaded_q}
        wg = {f.name: getattr(self.waveguide, f.name) for f in fields(WaveguideSpec)}
        if wg["propagation_loss_dB_per_cm"] is None:
            del wg["propagation_loss_dB_per_cm"]
        noise = self.sagnac.common_mode_noise_rel_shot
        if isinstance(noise, Mapping):
            noise = {k: list(map(float, v)) for k, v in noise.items()}
        sagnac = {"splitter_transmission": self.sagnac.splitter_transmission,
                  "contrast_dB": self.sagnac.contrast_dB,
                  "common_mode_noise_rel_shot": noise}
        return {"waveguide": wg, "ring": ring, "sagnac": sagnac}

    @classmethod
    def from_dict(cls, doc: Mapping, path: str = "device") -> "DeviceSpec":
        issues: list = []
        parts = {}
        known = {"waveguide": WaveguideSpec, "ring": RingSpec, "sagnac": SagnacSpec}
        if not isinstance(doc, Mapping):
            raise ConfigError([(path, "expected an object")])
        for key in doc:
            if key not in known:
                issues.append((f"{path}.{key}", "unknown key"))
        for key, kind in known.items():
            if key not in doc:
                if key == "sagnac":
                    parts[key] = SagnacSpec()
                else:
                    issues.append((f"{path}.{key}", "missing section"))
                continue
            try:
                parts[key] = build_dataclass(kind, doc[key], f"{path}.{key}")
            except ConfigError as exc:
                issues.extend(exc.issues)
        if issues:
            raise ConfigError(issues)
        return cls(**parts)


def build_dataclass(kind, doc, path):
    """Instantiate ``kind`` from a JSON object, rejecting unknown keys.

    Unknown keys, type errors and range violations are all gathered before
    raising one :class:`ConfigError`.
    """
    if not isinstance(doc, Mapping):
        raise ConfigError([(path, "expected an object")])
    names = {f.name for f in fields(kind)}
    issues = [(f"{path}.{k}", "unknown key") for k in doc if k not in names]
    kwargs = {}
    typed = True
    for k, v in doc.items():
        if k not in names:
            continue
        if isinstance(v, bool) or not isinstance(v, (int, float, Mapping, type(None))):
            issues.append((f"{path}.{k}", f"expected a number, got {type(v).__name__}"))
            typed = False
            continue
        kwargs[k] = float(v) if isinstance(v, int) else v
    if typed:
        try:
            obj = kind(**kwargs)
        except DomainError as exc:
            issues.extend((f"{path}.{name}", msg) for name, msg in exc.problems)
        except TypeError as exc:
            issues.append((path, str(exc)))
        else:
            if not issues:
                return obj
    raise ConfigError(issues)


def linewidth_from_q(wavelength_nm: float, loaded_q: float) -> tuple[float, float]:
    """Total energy decay rate of a resonance.

    Returns
    -------
    (kappa, linewidth_Hz) with ``kappa`` in rad/s and ``linewidth_Hz = kappa / 2 pi``.
    """
    _positive("wavelength_nm", wavelength_nm)
    _positive("loaded_q", loaded_q)
    kappa = optical_angular_frequency(wavelength_nm) / loaded_q
    return kappa, kappa / (2.0 * math.pi)


def split_decay_rates(kappa: float, escape_efficiency: float) -> tuple[float, float]:
    """Split ``kappa`` into (external, intrinsic) parts.

    The intrinsic part is computed as ``kappa - kappa_ext`` so the two sum
    back to ``kappa`` to within one rounding.
    """
    _positive("kappa", kappa)
    if not 0.0 <= escape_efficiency <= 1.0:
        raise DomainError(f"escape_efficiency must lie in [0, 1], got {escape_efficiency}")
    kappa_ext = escape_efficiency * kappa
    return kappa_ext, kappa - kappa_ext


def intrinsic_q_and_loss(loaded_q, escape_efficiency, wavelength_nm, group_index=DEFAULT_GROUP_INDEX):
    """Intrinsic Q and the propagation loss it implies.

    Loss follows from the intrinsic photon lifetime: alpha = 2 pi n_g / (lambda Q_int)
    in 1/m, reported in dB/cm.
    """
    _positive("loaded_q", loaded_q)
    _positive("wavelength_nm", wavelength_nm)
    _positive("group_index", group_index)
    if escape_efficiency == 1.0:
        raise DomainError("escape_efficiency = 1 leaves no intrinsic loss (division by zero)")
    if not 0.0 <= escape_efficiency < 1.0:
        raise DomainError(f"escape_efficiency must lie in [0, 1), got {escape_efficiency}")
    q_int = loaded_q / (1.0 - escape_efficiency)
    alpha = 2.0 * math.pi * group_index / (wavelength_nm * 1e-9 * q_int)
    return q_int, alpha * DB_PER_NEPER / 100.0


def intrinsic_q_from_loss(loss_dB_per_cm, wavelength_nm, group_index=DEFAULT_GROUP_INDEX) -> float:
    """Inverse of the loss relation in :func:`intrinsic_q_and_loss`."""
    _positive("loss_dB_per_cm", loss_dB_per_cm)
    _positive("wavelength_nm", wavelength_nm)
    _positive("group_index", group_index)
    alpha = loss_dB_per_cm * 100.0 / DB_PER_NEPER
    return 2.0 * math.pi * group_index / (wavelength_nm * 1e-9 * alpha)


def loaded_q_from_intrinsic(intrinsic_q, escape_efficiency) -> float:
    _positive("intrinsic_q", intrinsic_q)
    if not 0.0 <= escape_efficiency < 1.0:
        raise DomainError(f"escape_efficiency must lie in [0, 1), got {escape_efficiency}")
    return intrinsic_q * (1.0 - escape_efficiency)


def kerr_rate(waveguide: WaveguideSpec, ring: RingSpec) -> float:
    """Cavity frequency shift per intracavity photon, in rad/s.

    hbar w0^2 c n2 / (n_g^2 A_eff L), with L the ring circumference.
    """
    w0 = optical_angular_frequency(waveguide.wavelength_nm)
    area = waveguide.effective_area_um2 * 1e-12
    return (
        HBAR * w0**2 * C * waveguide.nonlinear_index_m2_per_W
        / (waveguide.group_index**2 * area * ring.length_m)
    )


def kerr_rate_from_gamma(waveguide: WaveguideSpec, ring: RingSpec) -> float:
    """Same quantity via the waveguide nonlinear parameter gamma = w0 n2 / (c A_eff)
    and the group velocity: hbar w0 v_g^2 gamma / L."""
    w0 = optical_angular_frequency(waveguide.wavelength_nm)
    gamma = w0 * waveguide.nonlinear_index_m2_per_W / (C * waveguide.effective_area_um2 * 1e-12)
    v_g = C / waveguide.group_index
    return HBAR * w0 * v_g**2 * gamma / ring.length_m


def free_spectral_range(ring: RingSpec, waveguide: WaveguideSpec) -> float:
    """FSR in Hz."""
    return C / (waveguide.group_index * ring.length_m)
