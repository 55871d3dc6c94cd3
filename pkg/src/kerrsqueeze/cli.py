"""Command-line front end.

    kerrsqueeze [--config FILE] [--out-dir DIR] [--seed N] COMMAND

Commands: simulate, sweep, search, fit, normalize, predict-cryo, and run
(every output listed in the config). Without ``--config`` the built-in
reference scenario is used. Exit status is 0 on success, 1 for model or
runtime errors and 2 for configuration errors; failures print one JSON
object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from kerrsqueeze import __version__
from kerrsqueeze.artifacts import dumps, pump_to_dict, write_json, write_spectrum
from kerrsqueeze.cavity import fit_quadrature_sinusoid, optimal_quadrature, steady_state
from kerrsqueeze.config import Scenario, load_scenario, parse_scenario, scenario_document
from kerrsqueeze.design import TEMPLATES, design_search, optimal_squeezing, sweep_power_q
from kerrsqueeze.errors import ConfigError, DomainError, ModelError
from kerrsqueeze.fitting import KerrPriors, fit_excess_noise, fit_kerr_model, model_squeezing_dB
from kerrsqueeze.noise import cryogenic_prediction, measured_spectrum, on_chip_output, to_db
from kerrsqueeze.plotdata import emit_plot_data
from kerrsqueeze.traces import average_traces, normalize, parse_trace

COMMANDS = {
    "simulate": "spectrum",
    "sweep": "sweep",
    "search": "search",
    "fit": "fit",
    "normalize": "normalize",
    "predict-cryo": "prediction",
}


def default_scenario() -> Scenario:
    from kerrsqueeze.calibration import reference_calibration

    return parse_scenario(scenario_document(reference_calibration()))


# -- runners ------------------------------------------------------------------


def _fixed_angle(spectrum, f_ref):
    theta = optimal_quadrature(spectrum, f_ref)[0]
    c, p, q = fit_quadrature_sinusoid(spectrum.angles_rad, spectrum.values_rel_shot)
    return to_db(c + p * np.cos(2 * theta) + q * np.sin(2 * theta)), theta


def run_simulate(sc: Scenario, out: Path, branch=None) -> dict:
    from kerrsqueeze import plotting
    from kerrsqueeze.calibration import spectrum_structure

    branch = branch or sc.branch
    f, angles = sc.grid.frequencies(), sc.grid.angles()
    d, pump = sc.device, sc.pump
    chip, carrier = on_chip_output(d, pump, f, angles, branch)
    files = write_spectrum(out, "spectrum", chip, d, pump, branch=branch, stage="on_chip")
    files.append(emit_plot_data(chip, "spectrum", out / "spectrum.dat"))
    detected, _ = measured_spectrum(d, pump, sc.noise, f, angles, branch)
    files += write_spectrum(out, "detected", detected, d, pump, branch=branch, stage="detected",
                            measurement_efficiency=sc.noise.chain.total_efficiency)
    files.append(emit_plot_data(detected, "spectrum", out / "detected.dat"))
    trace, theta = _fixed_angle(detected, sc.angle_reference_Hz)
    files.append(plotting.spectrum_figure(chip, out / "spectrum.png", detected=detected))
    files.append(plotting.trace_figure(f, trace, out / "trace.png",
                                       title=f"Detected noise at fixed angle {theta:.3f} rad"))
    f_ref = sc.angle_reference_Hz
    _, s_min, _, s_max = optimal_quadrature(chip, f_ref)
    dt_min = optimal_quadrature(detected, f_ref)[1]
    states = [dict(photon_number=s.photon_number, branch=s.branch, stable=s.stable,
                   effective_detuning_rad_per_s=s.effective_detuning_rad_per_s)
              for s in steady_state(d, pump, d.sagnac.splitter_transmission)]
    return {
        "device": d.to_dict(),
        "derived": {"kappa_rad_per_s": d.kappa, "kappa_ext_rad_per_s": d.kappa_ext,
                    "kerr_rate_rad_per_s": d.g, "intrinsic_q": d.ring.intrinsic_q},
        "pump": pump_to_dict(pump),
        "branch": branch,
        "steady_states_cw": states,
        "carrier_angle_rad": carrier,
        "reference_frequency_Hz": f_ref,
        "on_chip_s_min_dB": float(to_db(s_min)),
        "on_chip_s_max_dB": float(to_db(s_max)),
        "detected_s_min_dB": float(to_db(dt_min)),
        "measurement_angle_rad": theta,
        "detected_structure": spectrum_structure(f, trace),
        "files": sorted(p.name for p in files),
    }


def run_sweep(sc: Scenario, out: Path, templates=None) -> dict:
    from kerrsqueeze import plotting

    cfg = sc.sweep
    chosen = cfg["templates"]
    if templates:
        unknown = [t for t in templates if t not in TEMPLATES]
        if unknown:
            raise ConfigError([("--template", f"unknown template {u!r}") for u in unknown])
        chosen = {t: TEMPLATES[t] for t in templates}
    res = sweep_power_q(chosen, cfg.get("powers_W"), cfg["frequency_Hz"], cfg["measurement_efficiency"],
                        cfg["direction_power_fraction"])
    doc = {"power_W": res.power_W, "metadata": res.metadata,
           "templates": {name: {**rec, "device": chosen[name].to_dict()} for name, rec in res.templates.items()}}
    files = [write_json(out / "sweep.json", doc), emit_plot_data(res, "sweep", out / "sweep.dat"),
             plotting.sweep_figure(res, out / "sweep.png")]
    return {
        "frequency_Hz": cfg["frequency_Hz"],
        "templates": {name: {k: rec[k] for k in ("asymptote_dB", "bistability_threshold_W", "power_within_1dB_W",
                                                  "intrinsic_q", "escape_efficiency")}
                      | {"deepest_dB": float(np.min(rec["on_chip_dB"]))}
                      for name, rec in res.templates.items()},
        "files": sorted(p.name for p in files),
    }


def run_search(sc: Scenario, out: Path, template=None, target_dB=None) -> dict:
    cfg = dict(sc.search)
    if template is not None:
        if template not in TEMPLATES:
            raise ConfigError([("--template", f"unknown template {template!r}")])
        cfg["template"] = template
    if target_dB is not None:
        cfg["target_dB"] = target_dB
    dev = TEMPLATES[cfg["template"]]
    f, frac = cfg["frequency_Hz"], cfg["direction_power_fraction"]
    power = design_search(dev, cfg["target_dB"], f, frac)
    doc = {**cfg, "power_W": power}
    if power > 0:
        doc["model_at_power_dB"] = optimal_squeezing(dev, power, f, frac).s_min_dB
        doc["model_at_0p99_power_dB"] = optimal_squeezing(dev, 0.99 * power, f, frac).s_min_dB
    files = [write_json(out / "search.json", doc)]
    return {**doc, "files": [p.name for p in files]}


def _normalized_from_files(files: dict):
    avg = {role: average_traces(parse_trace(p) for p in paths) for role, paths in files.items()}
    return normalize(avg["signal"], avg["shot"], avg["dark"])


def run_normalize(sc: Scenario, out: Path) -> dict:
    from kerrsqueeze import plotting

    spec = _normalized_from_files(sc.normalize)
    files = [emit_plot_data(spec, "normalized", out / "normalized.dat"),
             write_json(out / "normalized.json", {"frequencies_Hz": spec.frequencies_Hz,
                                                  "rel_shot_dB": spec.rel_shot_dB,
                                                  "sigma_dB": spec.sigma_dB, "n_averaged": spec.n_averaged}),
             plotting.trace_figure(spec.frequencies_Hz, spec.rel_shot_dB, out / "normalized.png",
                                   title="Normalized trace")]
    return {"n_points": int(spec.frequencies_Hz.size), "n_averaged": spec.n_averaged,
            "min_rel_shot_dB": float(spec.rel_shot_dB.min()), "files": sorted(p.name for p in files)}


def _synthetic_inputs(sc: Scenario, rng):
    from kerrsqueeze.synthetic import analyzer_traces

    syn = sc.synthetic
    d = sc.device
    truth = {
        "detuning_rad_per_s": sc.pump.detuning_rad_per_s if sc.pump else 0.0,
        "kerr_rate_rad_per_s": d.g,
        "measurement_efficiency": sc.noise.chain.total_efficiency,
    }
    f = np.geomspace(syn["freq_min_Hz"], syn["freq_max_Hz"], syn["n_freq"])
    spectra = []
    for P in syn["powers_on_chip_W"]:
        y = model_squeezing_dB(d, float(P), f, truth["detuning_rad_per_s"], truth["measurement_efficiency"],
                               thermo=sc.noise.thermo)
        tr = analyzer_traces(f, y, syn["n_traces"], syn["noise_dB"], syn["shot_level_dBm"], syn["clearance_dB"],
                             sc.noise.detection.detector_bandwidth_Hz, rng)
        avg = {role: average_traces(ts) for role, ts in tr.items()}
        spectra.append((float(P), normalize(avg["signal"], avg["shot"], avg["dark"])))
    return spectra, truth


def run_fit(sc: Scenario, out: Path, seed: int) -> dict:
    from kerrsqueeze import plotting

    cfg = sc.fit or {"band_Hz": (500e6, 2e9), "excess_band_Hz": (1e6, 300e6), "priors": {}, "spectra": []}
    truth = None
    if cfg.get("spectra"):
        spectra = [(P, _normalized_from_files(files)) for P, files in cfg["spectra"]]
    else:
        if not sc.synthetic:
            raise ConfigError([("fit.spectra", "the fit output needs trace files or a synthetic section")])
        spectra, truth = _synthetic_inputs(sc, np.random.default_rng(seed))
    prior_kw = dict(cfg["priors"])
    if "measurement_efficiency" not in prior_kw:
        prior_kw["measurement_efficiency"] = sc.noise.chain.total_efficiency
    priors = KerrPriors(thermo=sc.noise.thermo, **prior_kw)
    res = fit_kerr_model(spectra, sc.device, priors, cfg["band_Hz"])
    excess = []
    for P, spec in spectra:
        try:
            ex = fit_excess_noise(spec, cfg["excess_band_Hz"])
            excess.append({"power_on_chip_W": P, "amplitude_at_1MHz": ex.amplitude_at_1MHz, "floor": ex.floor,
                           "sigma": ex.sigma, "n_points": ex.n_points})
        except (DomainError, ModelError) as exc:
            excess.append({"power_on_chip_W": P, "error": str(exc)})
    p = {**res.fixed, **res.parameters}
    from kerrsqueeze.fitting import device_with_kerr_rate

    dev_fit = device_with_kerr_rate(sc.device, p["kerr_rate_rad_per_s"])
    files = []
    for i, (P, spec) in enumerate(spectra):
        model = model_squeezing_dB(dev_fit, P, spec.frequencies_Hz, p["detuning_rad_per_s"],
                                   p["measurement_efficiency"], p["detector_bandwidth_Hz"],
                                   priors.dark_noise_clearance_dB, priors.thermo)
        files.append(emit_plot_data(spec, "normalized", out / f"fit_data_{i}.dat"))
        files.append(plotting.trace_figure(spec.frequencies_Hz, spec.rel_shot_dB, out / f"fit_{i}.png",
                                           title=f"Fit at {P * 1e3:g} mW", model_dB=model))
    doc = {"kerr_fit": res.to_dict(), "excess_noise": excess, "truth": truth,
           "powers_on_chip_W": [P for P, _ in spectra], "fit_band_Hz": list(cfg["band_Hz"]),
           "seed": seed if truth is not None else None}
    files.append(write_json(out / "fit.json", doc))
    return {"parameters": res.parameters, "converged": res.converged, "truth": truth,
            "residual_rms_dB": res.residual_rms_dB, "files": sorted(p.name for p in files)}


def run_predict(sc: Scenario, out: Path) -> dict:
    cfg = sc.cryo
    cold = sc.noise.thermo.at_temperature(cfg["temperature_K"], cfg["dndT_ratio_vs_reference"])
    pred = cryogenic_prediction(sc.device, sc.pump, cold, sc.noise, cfg["frequency_Hz"], sc.grid.n_angles, sc.branch)
    warm = cryogenic_prediction(sc.device, sc.pump, sc.noise.thermo, sc.noise, cfg["frequency_Hz"],
                                sc.grid.n_angles, sc.branch)
    doc = {**pred, "room_temperature_s_min_dB": warm["s_min_dB"], "dndT_ratio_vs_reference": cfg["dndT_ratio_vs_reference"]}
    files = [write_json(out / "prediction.json", doc)]
    return {**doc, "files": [p.name for p in files]}


def _require(sc: Scenario, command: str):
    issues = []
    if command in ("simulate", "predict-cryo", "fit") and sc.device is None:
        issues.append(("device", f"required by {command}"))
    if command in ("simulate", "predict-cryo") and sc.pump is None:
        issues.append(("pump", f"required by {command}"))
    if command == "normalize" and not sc.normalize:
        issues.append(("normalize", "signal/shot/dark trace files required"))
    if issues:
        raise ConfigError(issues)


def execute(sc: Scenario, command: str, out: Path, seed: int = 0, args=None) -> dict:
    _require(sc, command)
    if command == "simulate":
        return run_simulate(sc, out, getattr(args, "branch", None))
    if command == "sweep":
        return run_sweep(sc, out, getattr(args, "template", None))
    if command == "search":
        return run_search(sc, out, getattr(args, "template", None), getattr(args, "target_dB", None))
    if command == "fit":
        return run_fit(sc, out, seed)
    if command == "normalize":
        return run_normalize(sc, out)
    if command == "predict-cryo":
        return run_predict(sc, out)
    raise DomainError(f"unknown command {command!r}")


def run_scenario(config_path, out_dir, seed: int = 0) -> int:
    """Run every output listed in the config; returns the exit status."""
    argv = ["--config", str(config_path), "--out-dir", str(out_dir), "--seed", str(seed), "run"]
    return main(argv)


# -- argument handling --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=argparse.SUPPRESS, help="scenario JSON file")
    common.add_argument("--out-dir", type=Path, default=argparse.SUPPRESS, help="artifact directory")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed for synthetic data")

    parser = argparse.ArgumentParser(prog="kerrsqueeze", description="Kerr squeezing in a ring-in-Sagnac device.",
                                     parents=[common])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", parents=[common], help="quadrature noise spectrum of the scenario device")
    p.add_argument("--branch", choices=("lower", "upper"), default=None)
    p = sub.add_parser("sweep", parents=[common], help="best squeezing versus pump power per template")
    p.add_argument("--template", action="append", default=None, help="template name (repeatable)")
    p = sub.add_parser("search", parents=[common], help="minimum power for a target squeezing")
    p.add_argument("--template", default=None)
    p.add_argument("--target-dB", dest="target_dB", type=float, default=None)
    sub.add_parser("fit", parents=[common], help="fit the Kerr model to normalized traces")
    sub.add_parser("normalize", parents=[common], help="normalize signal/shot/dark traces")
    sub.add_parser("predict-cryo", parents=[common], help="squeezing expected with the chip cold")
    sub.add_parser("run", parents=[common], help="every output listed in the config")
    return parser


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = getattr(args, "config", None)
    out = getattr(args, "out_dir", Path("out"))
    seed = getattr(args, "seed", 0)
    try:
        sc = load_scenario(config) if config is not None else default_scenario()
        if args.command == "run":
            if not sc.outputs:
                raise ConfigError([("outputs", "at least one output must be requested")])
            inverse = {v: k for k, v in COMMANDS.items()}
            summary = {inverse[o]: execute(sc, inverse[o], out, seed, None) for o in sc.outputs}
        else:
            summary = {args.command: execute(sc, args.command, out, seed, args)}
        write_json(out / "summary.json", summary)
        sys.stdout.write(dumps(summary))
        return 0
    except ConfigError as exc:
        sys.stderr.write(json.dumps(exc.to_dict(), sort_keys=True) + "\n")
        return 2
    except (ModelError, DomainError) as exc:
        return _fail("model", str(exc), 1)
    except OSError as exc:
        return _fail("io", f"{exc.filename}: {exc.strerror}" if exc.filename else str(exc), 1)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
