"""Serialization of results to files.

All writers go through :func:`atomic_write`, so a reader never sees a
partially written artifact. Output is deterministic: JSON keys are sorted
and floats are written with ``repr``, which round-trips exactly.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from kerrsqueeze.cavity import PumpSpec, QuadratureSpectrum
from kerrsqueeze.device import DeviceSpec
from kerrsqueeze.errors import DomainError

SPECTRUM_COLUMNS = ("freq_hz", "theta_rad", "s_rel_shot")


def atomic_write(path, data: str | bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def plain(obj):
    """Recursively convert numpy values and non-finite floats to JSON-safe
    builtins. Infinities become the strings "inf" / "-inf"."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, complex):
        return {"re": plain(obj.real), "im": plain(obj.imag)}
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(plain(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write(path, dumps(obj))


def pump_to_dict(pump: PumpSpec) -> dict:
    return {
        "power_on_chip_W": pump.power_on_chip_W,
        "detuning_rad_per_s": pump.detuning_rad_per_s,
        "wavelength_nm": pump.wavelength_nm,
    }


# -- spectra ------------------------------------------------------------------


def spectrum_csv(spectrum: QuadratureSpectrum) -> str:
    lines = [",".join(SPECTRUM_COLUMNS)]
    for i, f in enumerate(spectrum.frequencies_Hz):
        row = spectrum.values_rel_shot[i]
        lines.extend(f"{float(f)!r},{float(t)!r},{float(v)!r}" for t, v in zip(spectrum.angles_rad, row))
    return "\n".join(lines) + "\n"


def read_spectrum_csv(path) -> QuadratureSpectrum:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != ",".join(SPECTRUM_COLUMNS):
        raise DomainError(f"{path}: expected header {','.join(SPECTRUM_COLUMNS)}")
    rows = np.array([[float(c) for c in line.split(",")] for line in text[1:] if line.strip()])
    if rows.size == 0:
        raise DomainError(f"{path}: no data rows")
    freqs = np.unique(rows[:, 0])
    n_f = freqs.size
    if rows.shape[0] % n_f:
        raise DomainError(f"{path}: rows do not form a full frequency x angle grid")
    n_a = rows.shape[0] // n_f
    angles = rows[:n_a, 1]
    return QuadratureSpectrum(freqs, angles, rows[:, 2].reshape(n_f, n_a))


def spectrum_document(spectrum: QuadratureSpectrum, device: DeviceSpec | None = None,
                      pump: PumpSpec | None = None, **extra) -> dict:
    doc = {
        "columns": list(SPECTRUM_COLUMNS),
        "frequencies_Hz": spectrum.frequencies_Hz,
        "angles_rad": spectrum.angles_rad,
        "values_rel_shot": spectrum.values_rel_shot,
        "metadata": spectrum.metadata,
        "provenance": {
            "device": device.to_dict() if device is not None else None,
            "pump": pump_to_dict(pump) if pump is not None else None,
            **extra,
        },
    }
    return doc


def spectrum_from_document(doc: dict) -> QuadratureSpectrum:
    return QuadratureSpectrum(
        np.asarray(doc["frequencies_Hz"], float),
        np.asarray(doc["angles_rad"], float),
        np.asarray(doc["values_rel_shot"], float),
        dict(doc.get("metadata", {})),
    )


def write_spectrum(out_dir, stem, spectrum, device=None, pump=None, **extra) -> list[Path]:
    out_dir = Path(out_dir)
    return [
        atomic_write(out_dir / f"{stem}.csv", spectrum_csv(spectrum)),
        write_json(out_dir / f"{stem}.json", spectrum_document(spectrum, device, pump, **extra)),
    ]
