"""Electronic spectrum analyzer traces: file format, averaging and
shot-noise normalization.

Trace files are plain text::

    #rbw_hz=100000
    #vbw_hz=20
    #sweep_time_s=10
    #label=signal
    freq_hz,power_dbm
    1000000.0,-71.25
    ...

The ``freq_hz,power_dbm`` header row is optional on input and always
written on output. Additional ``#key=value`` lines are kept as metadata.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from kerrsqueeze.errors import DomainError, ModelError

LABELS = ("signal", "shot", "dark")
REQUIRED_KEYS = ("rbw_hz", "vbw_hz", "sweep_time_s", "label")
COLUMNS = "freq_hz,power_dbm"


class TraceFormatError(DomainError):
    pass


@dataclass(frozen=True, eq=False)
class EsaTrace:
    frequencies_Hz: np.ndarray
    power_dBm: np.ndarray
    rbw_Hz: float
    vbw_Hz: float
    sweep_time_s: float
    label: str
    n_averaged: int = 1
    variance_mW2: np.ndarray | None = None  # variance of the mean, per bin
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        f = np.asarray(self.frequencies_Hz, dtype=float)
        p = np.asarray(self.power_dBm, dtype=float)
        if f.ndim != 1 or f.shape != p.shape:
            raise DomainError("frequency and power arrays must be 1-D and equally long")
        if f.size > 1 and np.any(np.diff(f) <= 0):
            i = int(np.argmax(np.diff(f) <= 0)) + 1
            raise DomainError(f"non-monotone grid at index {i}")
        for name in ("rbw_Hz", "vbw_Hz", "sweep_time_s"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.label not in LABELS:
            raise DomainError(f"label must be one of {LABELS}, got {self.label!r}")
        if self.n_averaged < 1:
            raise DomainError("n_averaged must be >= 1")
        object.__setattr__(self, "frequencies_Hz", f)
        object.__setattr__(self, "power_dBm", p)
        if self.variance_mW2 is not None:
            object.__setattr__(self, "variance_mW2", np.asarray(self.variance_mW2, dtype=float))

    @property
    def power_mW(self) -> np.ndarray:
        return 10.0 ** (self.power_dBm / 10.0)

    def __eq__(self, other):
        if not isinstance(other, EsaTrace):
            return NotImplemented
        same_var = (self.variance_mW2 is None and other.variance_mW2 is None) or (
            self.variance_mW2 is not None and other.variance_mW2 is not None
            and np.array_equal(self.variance_mW2, other.variance_mW2)
        )
        return (
            np.array_equal(self.frequencies_Hz, other.frequencies_Hz)
            and np.array_equal(self.power_dBm, other.power_dBm)
            and (self.rbw_Hz, self.vbw_Hz, self.sweep_time_s, self.label, self.n_averaged)
            == (other.rbw_Hz, other.vbw_Hz, other.sweep_time_s, other.label, other.n_averaged)
            and same_var
            and self.extra == other.extra
        )


@dataclass(frozen=True, eq=False)
class NormalizedSpectrum:
    frequencies_Hz: np.ndarray
    rel_shot_dB: np.ndarray
    n_averaged: int = 1
    sigma_dB: np.ndarray | None = None

    def __post_init__(self):
        f = np.asarray(self.frequencies_Hz, dtype=float)
        v = np.asarray(self.rel_shot_dB, dtype=float)
        if f.shape != v.shape:
            raise DomainError("frequency and value arrays differ in length")
        if not np.all(np.isfinite(v)):
            raise DomainError("normalized spectrum contains non-finite values")
        if self.n_averaged < 1:
            raise DomainError("n_averaged must be >= 1")
        object.__setattr__(self, "frequencies_Hz", f)
        object.__setattr__(self, "rel_shot_dB", v)
        if self.sigma_dB is not None:
            object.__setattr__(self, "sigma_dB", np.asarray(self.sigma_dB, dtype=float))

    @property
    def rel_shot(self) -> np.ndarray:
        return 10.0 ** (self.rel_shot_dB / 10.0)

    def band(self, f_lo, f_hi) -> "NormalizedSpectrum":
        m = (self.frequencies_Hz >= f_lo) & (self.frequencies_Hz <= f_hi)
        sig = None if self.sigma_dB is None else self.sigma_dB[m]
        return NormalizedSpectrum(self.frequencies_Hz[m], self.rel_shot_dB[m], self.n_averaged, sig)


# -- file format --------------------------------------------------------------


def _number(text, what, lineno, source):
    try:
        value = float(text)
    except ValueError:
        raise TraceFormatError(f"{source}: non-numeric {what} {text!r} at line {lineno}") from None
    if not math.isfinite(value):
        raise TraceFormatError(f"{source}: non-finite {what} at line {lineno}")
    return value


def parse_trace_text(text: str, source: str = "<trace>") -> EsaTrace:
    meta: dict[str, str] = {}
    freqs, powers = [], []
    header_seen = False
    last_f = -math.inf
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if freqs:
                raise TraceFormatError(f"{source}: metadata after data at line {lineno}")
            key, sep, value = line[1:].partition("=")
            if not sep:
                raise TraceFormatError(f"{source}: metadata line {lineno} is not '#key=value'")
            meta[key.strip()] = value.strip()
            continue
        if line.replace(" ", "") == COLUMNS and not freqs and not header_seen:
            header_seen = True
            continue
        cells = line.split(",")
        if len(cells) != 2:
            raise TraceFormatError(f"{source}: expected 2 columns at line {lineno}, got {len(cells)}")
        f = _number(cells[0], "frequency", lineno, source)
        p = _number(cells[1], "power", lineno, source)
        if f <= last_f:
            raise TraceFormatError(f"{source}: non-monotone grid at line {lineno}")
        last_f = f
        freqs.append(f)
        powers.append(p)

    missing = [k for k in REQUIRED_KEYS if k not in meta]
    if missing:
        raise TraceFormatError(f"{source}: missing metadata key(s): {', '.join(missing)}")
    label = meta.pop("label")
    if label not in LABELS:
        raise TraceFormatError(f"{source}: label must be one of {LABELS}, got {label!r}")
    values = {}
    for key in ("rbw_hz", "vbw_hz", "sweep_time_s"):
        values[key] = _number(meta.pop(key), f"metadata value for {key}", 0, source)
        if values[key] <= 0:
            raise TraceFormatError(f"{source}: metadata {key} must be positive")
    n_avg = int(meta.pop("n_averaged", "1"))
    return EsaTrace(
        np.array(freqs, dtype=float),
        np.array(powers, dtype=float),
        rbw_Hz=values["rbw_hz"],
        vbw_Hz=values["vbw_hz"],
        sweep_time_s=values["sweep_time_s"],
        label=label,
        n_averaged=n_avg,
        extra=meta,
    )


def parse_trace(path) -> EsaTrace:
    path = Path(path)
    return parse_trace_text(path.read_text(), str(path))


def serialize_trace(trace: EsaTrace) -> str:
    """Text form that :func:`parse_trace_text` reads back bit-exactly.

    Per-bin variances are not part of the file format and are dropped.
    """
    lines = [
        f"#rbw_hz={trace.rbw_Hz!r}",
        f"#vbw_hz={trace.vbw_Hz!r}",
        f"#sweep_time_s={trace.sweep_time_s!r}",
        f"#label={trace.label}",
    ]
    if trace.n_averaged != 1:
        lines.append(f"#n_averaged={trace.n_averaged}")
    lines.extend(f"#{k}={v}" for k, v in trace.extra.items())
    lines.append(COLUMNS)
    lines.extend(f"{float(f)!r},{float(p)!r}" for f, p in zip(trace.frequencies_Hz, trace.power_dBm))
    return "\n".join(lines) + "\n"


# -- reduction ----------------------------------------------------------------


def average_traces(traces) -> EsaTrace:
    """Per-bin mean in linear power (mW), returned in dBm.

    With three or more traces the variance of the mean is estimated from
    the sample variance and carried along for fit weighting.
    """
    traces = list(traces)
    if not traces:
        raise DomainError("need at least one trace to average")
    first = traces[0]
    for i, tr in enumerate(traces[1:], start=1):
        if not np.array_equal(tr.frequencies_Hz, first.frequencies_Hz):
            raise DomainError(f"trace {i} is on a different frequency grid")
        if tr.label != first.label:
            raise DomainError(f"trace {i} has label {tr.label!r}, expected {first.label!r}")
        if (tr.rbw_Hz, tr.vbw_Hz, tr.sweep_time_s) != (first.rbw_Hz, first.vbw_Hz, first.sweep_time_s):
            raise DomainError(f"trace {i} has different analyzer settings")
    if len(traces) == 1:
        return first
    lin = np.stack([tr.power_mW for tr in traces])
    mean = lin.mean(axis=0)
    var = lin.var(axis=0, ddof=1) / len(traces) if len(traces) >= 3 else None
    return EsaTrace(
        first.frequencies_Hz,
        10.0 * np.log10(mean),
        first.rbw_Hz,
        first.vbw_Hz,
        first.sweep_time_s,
        first.label,
        n_averaged=sum(tr.n_averaged for tr in traces),
        variance_mW2=var,
        extra=dict(first.extra),
    )


def normalize(signal: EsaTrace, shot: EsaTrace, dark: EsaTrace) -> NormalizedSpectrum:
    """Dark-corrected signal relative to the dark-corrected shot noise, per bin."""
    for name, tr in (("shot", shot), ("dark", dark)):
        if not np.array_equal(tr.frequencies_Hz, signal.frequencies_Hz):
            raise DomainError(f"{name} trace is on a different frequency grid than the signal")
    p_sig, p_shot, p_dark = signal.power_mW, shot.power_mW, dark.power_mW
    clearance = p_shot - p_dark
    bad = np.flatnonzero(clearance <= 0)
    if bad.size:
        raise ModelError(f"insufficient dark-noise clearance at bin {int(bad[0])}")
    excess = p_sig - p_dark
    bad = np.flatnonzero(excess <= 0)
    if bad.size:
        raise ModelError(f"signal at or below dark noise at bin {int(bad[0])}")
    ratio = excess / clearance
    sigma = None
    if signal.variance_mW2 is not None and shot.variance_mW2 is not None:
        v_dark = dark.variance_mW2 if dark.variance_mW2 is not None else 0.0
        rel_var = (signal.variance_mW2 + v_dark) / excess**2 + (shot.variance_mW2 + v_dark) / clearance**2
        sigma = 10.0 / math.log(10.0) * np.sqrt(rel_var)
    return NormalizedSpectrum(
        signal.frequencies_Hz,
        10.0 * np.log10(ratio),
        n_averaged=min(signal.n_averaged, shot.n_averaged),
        sigma_dB=sigma,
    )
