"""Whitespace-separated data files for gnuplot.

Each file starts with ``#`` comment lines naming the columns. Multi-curve
results are written as blocks separated by two blank lines, so gnuplot can
address them with ``index``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from kerrsqueeze.artifacts import atomic_write
from kerrsqueeze.cavity import QuadratureSpectrum, fit_quadrature_sinusoid
from kerrsqueeze.design import SweepResult
from kerrsqueeze.errors import DomainError
from kerrsqueeze.traces import NormalizedSpectrum

KINDS = ("spectrum", "sweep", "normalized")


def _fmt(x) -> str:
    return repr(float(x))


def _spectrum_lines(result: QuadratureSpectrum | None):
    head = ["# quadrature noise extremes relative to shot noise",
            "# columns: freq_hz s_min_db s_max_db theta_min_rad"]
    if result is None or np.size(result.frequencies_Hz) == 0:
        return head
    c, p, q = fit_quadrature_sinusoid(result.angles_rad, result.values_rel_shot)
    amp = np.hypot(p, q)
    theta = np.mod((np.arctan2(q, p) + np.pi) / 2.0, np.pi)
    s_min, s_max = c - amp, c + amp
    with np.errstate(invalid="ignore", divide="ignore"):
        lo, hi = 10.0 * np.log10(s_min), 10.0 * np.log10(s_max)
    body = [" ".join(map(_fmt, row)) for row in zip(result.frequencies_Hz, lo, hi, theta)]
    return head + body


def _sweep_lines(result: SweepResult | None):
    head = ["# best on-chip squeezing versus on-chip pump power, one block per template",
            "# columns: power_w on_chip_db detected_db detuning_rad_per_s"]
    if result is None or not result.templates or np.size(result.power_W) == 0:
        return head
    lines = list(head)
    for k, (name, rec) in enumerate(result.templates.items()):
        if k:
            lines += ["", ""]
        lines.append(f"# template {name} escape_efficiency {_fmt(rec['escape_efficiency'])} "
                     f"asymptote_db {_fmt(rec['asymptote_dB'])}")
        lines += [" ".join(map(_fmt, row)) for row in
                  zip(result.power_W, rec["on_chip_dB"], rec["detected_dB"], rec["detuning_rad_per_s"])]
    return lines


def _normalized_lines(result: NormalizedSpectrum | None):
    head = ["# analyzer trace relative to shot noise",
            "# columns: freq_hz rel_shot_db sigma_db"]
    if result is None or result.frequencies_Hz.size == 0:
        return head
    sig = result.sigma_dB if result.sigma_dB is not None else np.full_like(result.rel_shot_dB, np.nan)
    return head + [" ".join(map(_fmt, row)) for row in zip(result.frequencies_Hz, result.rel_shot_dB, sig)]


def plot_data_text(result, kind: str) -> str:
    if kind == "spectrum":
        lines = _spectrum_lines(result)
    elif kind == "sweep":
        lines = _sweep_lines(result)
    elif kind == "normalized":
        lines = _normalized_lines(result)
    else:
        raise DomainError(f"unknown plot-data kind {kind!r}; choose from {KINDS}")
    return "\n".join(lines) + "\n"


def emit_plot_data(result, kind: str, path) -> Path:
    return atomic_write(Path(path), plot_data_text(result, kind))
