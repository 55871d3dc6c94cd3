"""Acceptance checks, one test per criterion.

Each test records a PASS/FAIL line with the measured value; the lines are
printed as a block at the end of the pytest run.
"""

import filecmp
import math
import time
from pathlib import Path

import numpy as np
import pytest

from kerrsqueeze.calibration import golden_record, reference_calibration
from kerrsqueeze.cavity import (
    PumpSpec,
    default_angle_grid,
    default_frequency_grid,
    fluctuation_spectrum,
    select_branch,
    squeezing_extremes,
    steady_state,
)
from kerrsqueeze.cli import main
from kerrsqueeze.design import TEMPLATES, sweep_power_q
from kerrsqueeze.device import DeviceSpec, RingSpec, SagnacSpec, WaveguideSpec, intrinsic_q_and_loss, linewidth_from_q
from kerrsqueeze.fitting import KerrPriors, fit_excess_noise, fit_kerr_model
from kerrsqueeze.noise import (
    ThermoNoiseModel,
    apply_loss,
    common_mode_suppression,
    from_db,
    infer_loss_corrected,
    sagnac_loop_transmission,
    thermo_psd,
    thermo_reduction_dB,
    to_db,
)
from kerrsqueeze.synthetic import excess_noise_spectrum, squeezing_spectra

REPORT = {}
ROOT = Path(__file__).resolve().parent.parent


def record(number, ok, detail):
    REPORT[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(REPORT[number])
    assert ok, REPORT[number]


def test_criterion_01_escape_efficiency_limit():
    start = time.perf_counter()
    res = sweep_power_q(TEMPLATES)
    elapsed = time.perf_counter() - start
    ends = {name: float(rec["on_chip_dB"][-1]) for name, rec in res.templates.items()}
    ok = all(abs(v + 13.0) <= 0.3 for v in ends.values()) and elapsed < 5.0
    detail = ", ".join(f"{k} -> {v:.3f} dB" for k, v in ends.items())
    record(1, ok, f"{detail} at {res.power_W[-1]:g} W (target -13.0 +/- 0.3 dB); runtime {elapsed:.2f} s (< 5 s)")


def test_criterion_02_loss_correction():
    inferred = float(to_db(infer_loss_corrected(from_db(-0.45), 0.478)))
    rng = np.random.default_rng(2)
    s = 10 ** rng.uniform(-2, 2, 10_000)
    eta = rng.uniform(1e-3, 1.0, 10_000)
    worst = 0.0
    for si, ei in zip(s, eta):
        back = infer_loss_corrected(apply_loss(si, ei), ei)
        # absolute below shot noise, relative above it
        worst = max(worst, abs(back - si) / max(si, 1.0))
    ok = abs(inferred + 1.00) <= 0.02 and worst <= 1e-12
    record(2, ok, f"-0.45 dB at eta 0.478 -> {inferred:.4f} dB (target -1.00 +/- 0.02); "
                  f"round trip max err {worst:.1e} on 1e4 cases (<= 1e-12)")


def _device(loaded_q, eta, area, radius, n2=2.4e-19):
    return DeviceSpec(WaveguideSpec(1550.0, 1.88, n2, area), RingSpec(radius, eta, loaded_q=loaded_q), SagnacSpec())


def test_criterion_03_shot_noise_limit():
    worst = 0.0
    f, a = default_frequency_grid(), default_angle_grid()
    for q, eta, power, det in ((238000.0, 0.77, 0.052, 0.0), (1e6, 0.95, 0.3, -1.2), (5e4, 0.2, 0.01, 2.0)):
        dev = _device(q, eta, 1.0, 30.0, n2=0.0)
        pump = PumpSpec(power, det * dev.kappa / 2)
        sol = steady_state(dev, pump, 0.5)[0]
        spec = fluctuation_spectrum(dev, pump, sol, f, a)
        worst = max(worst, float(np.max(np.abs(spec.values_rel_shot - 1.0))))
    record(3, worst <= 1e-12, f"linear cavity max |S - 1| = {worst:.1e} over {f.size}x{a.size} grid (<= 1e-12)")


def test_criterion_04_uncertainty_product():
    rng = np.random.default_rng(4)
    f = default_frequency_grid(1e6, 5e9, 25)
    lowest, lossless_dev, draws, lossless_draws = np.inf, 0.0, 0, 0
    while draws < 1000 or lossless_draws < 200:
        lossless = draws >= 1000
        eta = 1.0 if lossless else rng.uniform(0.05, 0.99)
        dev = _device(10 ** rng.uniform(4.5, 6.5), eta, rng.uniform(0.5, 3.0), rng.uniform(10, 200))
        pump = PumpSpec(10 ** rng.uniform(-4, -0.5), rng.uniform(-2, 2) * dev.kappa / 2)
        sol = select_branch(steady_state(dev, pump, 0.5), "lower")
        if not sol.stable:
            continue
        s_min, s_max, _ = squeezing_extremes(dev, sol, f)
        prod = s_min * s_max
        if lossless:
            lossless_dev = max(lossless_dev, float(np.max(np.abs(prod - 1.0))))
            lossless_draws += 1
        else:
            lowest = min(lowest, float(prod.min()))
            draws += 1
    ok = lowest >= 1 - 1e-9 and lossless_dev <= 1e-6
    record(4, ok, f"min S_min*S_max = {lowest:.12f} on {draws} draws (>= 1 - 1e-9); "
                  f"lossless ring max |product - 1| = {lossless_dev:.1e} on {lossless_draws} draws (<= 1e-6)")


def test_criterion_05_thermorefractive_law():
    model = ThermoNoiseModel(1e5)
    f = np.geomspace(1e6, 1e10, 200)
    slope = float(np.polyfit(np.log10(f), np.log10(thermo_psd(model, f)), 1)[0])
    reduction = thermo_reduction_dB(model.at_temperature(3.0, 0.316))
    ok = abs(slope + 2.0) <= 0.005 and abs(reduction - 50.0) <= 0.1
    record(5, ok, f"log-log slope {slope:.4f} (target -2.000 +/- 0.005); "
                  f"295 K -> 3 K with r = 0.316 gives {reduction:.3f} dB (target 50.0 +/- 0.1)")


def test_criterion_06_device_algebra():
    _, loss = intrinsic_q_and_loss(238000.0, 0.77, 1550.0, 1.88)
    _, line_hz = linewidth_from_q(1550.0, 238000.0)
    ok = abs(loss - 0.32) <= 0.01 and abs(line_hz / 1e6 - 812.7) <= 0.5
    record(6, ok, f"propagation loss {loss:.4f} dB/cm (0.32 +/- 0.01); "
                  f"linewidth {line_hz / 1e6:.2f} MHz (812.7 +/- 0.5)")


def test_criterion_07_sagnac():
    balanced = sagnac_loop_transmission(0.5)
    skewed = sagnac_loop_transmission(0.59)
    gain = 10 * math.log10(common_mode_suppression(23.0) / common_mode_suppression(60.0))
    ok = balanced <= 1e-12 and abs(skewed - 0.0324) <= 1e-6 and abs(gain - 37.0) <= 1e-12
    record(7, ok, f"t=0.5 -> {balanced:.1e} (<= 1e-12); t=0.59 -> {skewed:.7f} (0.0324 +/- 1e-6); "
                  f"23 -> 60 dB contrast adds {gain:.12f} dB suppression (37)")


def test_criterion_08_fit_recovery():
    start = time.perf_counter()
    f_lo = np.geomspace(1e6, 3e8, 200)
    a, b = 250.0, 0.8
    clean = fit_excess_noise(excess_noise_spectrum(f_lo, a, b))
    noisy = fit_excess_noise(excess_noise_spectrum(f_lo, a, b, 0.05, np.random.default_rng(8)))
    dev = reference_calibration().device
    truth = {"detuning_rad_per_s": -0.61 * dev.kappa / 2, "kerr_rate_rad_per_s": dev.g, "measurement_efficiency": 0.478}
    priors = KerrPriors(detuning_half_linewidths=-0.3, kerr_rate=0.7 * dev.g, measurement_efficiency=0.6)
    f_hi = np.linspace(5e8, 2e9, 120)

    def kerr(noise, seed):
        data = squeezing_spectra(dev, (0.026, 0.039, 0.052), f_hi, *truth.values(), noise, np.random.default_rng(seed))
        res = fit_kerr_model(data, dev, priors)
        return max(abs(res.parameters[k] / v - 1) for k, v in truth.items())

    kerr_clean, kerr_noisy = kerr(0.0, 0), kerr(0.02, 8)
    ab_clean = max(abs(clean.amplitude_at_1MHz / a - 1), abs(clean.floor / b - 1))
    ab_noisy = max(abs(noisy.amplitude_at_1MHz / a - 1), abs(noisy.floor / b - 1))
    elapsed = time.perf_counter() - start
    ok = ab_noisy <= 0.05 and kerr_noisy <= 0.10 and max(ab_clean, kerr_clean) <= 1e-6 and elapsed < 30
    record(8, ok, f"(a, b) rel err {ab_noisy:.3f} at 0.05 dB scatter (<= 0.05); "
                  f"(detuning, g, eta) rel err {kerr_noisy:.3f} at 0.02 dB scatter (<= 0.10); "
                  f"noiseless {max(ab_clean, kerr_clean):.1e} (<= 1e-6); runtime {elapsed:.1f} s (< 30 s)")


def test_criterion_09_calibration_plausibility():
    golden = ROOT / "tests" / "golden" / "reference_calibration.json"
    s = golden_record()["structure"]
    band = s["band_max_squeezing_dB"]
    ok = (abs(band - 0.45) <= 0.15 and s["low_frequency_min_excess_dB"] > 0
          and s["squeezing_above_1p6GHz_dB"] < band and golden.is_file())
    record(9, ok, f"500-800 MHz squeezing {band:.3f} dB (0.45 +/- 0.15); excess below 450 MHz "
                  f">= {s['low_frequency_min_excess_dB']:.3f} dB; crossing {s['shot_noise_crossing_Hz'] / 1e6:.0f} MHz; "
                  f"above 1.6 GHz {s['squeezing_above_1p6GHz_dB']:.3f} dB; golden file stored")


def _identical(a: Path, b: Path):
    names = sorted(p.name for p in a.iterdir())
    if names != sorted(p.name for p in b.iterdir()):
        return False, names
    match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    return not mismatch and not errors, mismatch + errors


def test_criterion_10_determinism(tmp_path, capsys):
    runs = [(p.stem, ["--config", str(p), "run"]) for p in sorted((ROOT / "scenarios").glob("*.json"))]
    runs += [(f"default-{cmd}", [cmd]) for cmd in ("simulate", "sweep", "search", "predict-cryo")]
    bad, n_files = [], 0
    for name, args in runs:
        dirs = [tmp_path / name / k for k in ("a", "b")]
        codes = [main(["--out-dir", str(d), *args]) for d in dirs]
        same, diff = _identical(*dirs)
        n_files += len(list(dirs[0].iterdir()))
        if codes != [0, 0] or not same:
            bad.append(f"{name}: exit {codes} differing {diff}")
    capsys.readouterr()
    record(10, not bad, f"{len(runs)} scenarios, {n_files} artifacts byte-identical across two runs"
                        + (f"; failures: {bad}" if bad else ""))
