"""PNG figures for the report path. Rendering uses the Agg backend with
fixed metadata so repeated runs give identical files."""

from __future__ import annotations

import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from kerrsqueeze.artifacts import atomic_write  # noqa: E402
from kerrsqueeze.cavity import fit_quadrature_sinusoid  # noqa: E402

_PNG_META = {"Software": None}


def _save(fig, path) -> Path:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=110, metadata=_PNG_META)
    plt.close(fig)
    return atomic_write(Path(path), buf.getvalue())


def spectrum_figure(spectrum, path, title="Quadrature noise", detected=None) -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for spec, label, style in ((spectrum, "on chip", "-"), (detected, "detected", "--")):
        if spec is None:
            continue
        c, p, q = fit_quadrature_sinusoid(spec.angles_rad, spec.values_rel_shot)
        amp = np.hypot(p, q)
        f = spec.frequencies_Hz / 1e6
        ax.semilogx(f, 10 * np.log10(c - amp), style, color="C0", label=f"min, {label}")
        ax.semilogx(f, 10 * np.log10(c + amp), style, color="C3", label=f"max, {label}")
    ax.axhline(0.0, color="0.5", lw=0.8)
    ax.set_xlabel("sideband frequency (MHz)")
    ax.set_ylabel("noise relative to shot (dB)")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def trace_figure(frequencies_Hz, trace_dB, path, title="Recorded trace", model_dB=None) -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    f = np.asarray(frequencies_Hz) / 1e6
    ax.plot(f, trace_dB, ".", ms=3, color="C0", label="data")
    if model_dB is not None:
        ax.plot(f, model_dB, "-", color="C1", label="model")
    ax.axhline(0.0, color="0.5", lw=0.8)
    ax.set_xlabel("sideband frequency (MHz)")
    ax.set_ylabel("noise relative to shot (dB)")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def sweep_figure(result, path) -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for k, (name, rec) in enumerate(result.templates.items()):
        ax.semilogx(result.power_W * 1e3, rec["on_chip_dB"], color=f"C{k}", label=name)
        ax.axhline(rec["asymptote_dB"], color=f"C{k}", ls=":", lw=0.8)
    ax.set_xlabel("on-chip pump power (mW)")
    ax.set_ylabel("best squeezing on chip (dB)")
    ax.set_title(f"Squeezing at {result.metadata['frequency_Hz'] / 1e6:g} MHz")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)
