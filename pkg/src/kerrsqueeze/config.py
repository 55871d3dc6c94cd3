"""Scenario documents.

A scenario is one JSON object. Physical quantities carry their unit in the
key name (``power_on_chip_W``, ``detector_bandwidth_Hz``...). Relative file
paths are resolved against the directory of the config file. Every problem
found is reported, not just the first.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from kerrsqueeze.cavity import PumpSpec
from kerrsqueeze.design import DEFAULT_EVAL_FREQUENCY_HZ, TEMPLATES
from kerrsqueeze.device import DeviceSpec, build_dataclass
from kerrsqueeze.errors import ConfigError, DomainError
from kerrsqueeze.fitting import DEFAULT_FREE, PARAMETERS, KerrPriors
from kerrsqueeze.noise import DetectionSpec, NoiseChain, NoiseSetup, ThermoNoiseModel

OUTPUTS = ("spectrum", "sweep", "search", "prediction", "fit", "normalize")


@dataclass(frozen=True)
class Grid:
    freq_min_Hz: float = 1e6
    freq_max_Hz: float = 5e9
    n_freq: int = 400
    n_angles: int = 181

    def frequencies(self):
        return np.geomspace(self.freq_min_Hz, self.freq_max_Hz, self.n_freq)

    def angles(self):
        return np.linspace(0.0, math.pi, self.n_angles, endpoint=False)


@dataclass
class Scenario:
    device: DeviceSpec | None = None
    pump: PumpSpec | None = None
    powers_W: list = field(default_factory=list)
    branch: str = "lower"
    noise: NoiseSetup = field(default_factory=NoiseSetup)
    grid: Grid = field(default_factory=Grid)
    angle_reference_Hz: float = 650e6
    outputs: list = field(default_factory=list)
    sweep: dict = field(default_factory=dict)
    search: dict = field(default_factory=dict)
    cryo: dict = field(default_factory=dict)
    fit: dict = field(default_factory=dict)
    normalize: dict = field(default_factory=dict)
    synthetic: dict = field(default_factory=dict)
    base_dir: Path = Path(".")
    source: dict = field(default_factory=dict)


TOP_KEYS = {
    "device", "pump", "powers_on_chip_W", "noise", "grid", "angle_reference_Hz", "outputs",
    "sweep", "search", "cryo", "fit", "normalize", "synthetic", "description",
}


def _num(issues, path, value, lo=None, hi=None, lo_open=False, allow_inf=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        issues.append((path, f"expected a number, got {type(value).__name__}"))
        return None
    v = float(value)
    if math.isnan(v) or (math.isinf(v) and not allow_inf):
        issues.append((path, "must be finite"))
        return None
    if lo is not None and (v < lo or (lo_open and v == lo)):
        issues.append((path, f"must be {'>' if lo_open else '>='} {lo}, got {v}"))
        return None
    if hi is not None and v > hi:
        issues.append((path, f"must be <= {hi}, got {v}"))
        return None
    return v


def _unknown(issues, path, doc, allowed):
    for k in doc:
        if k not in allowed:
            issues.append((f"{path}.{k}" if path else k, "unknown key"))


def _obj(issues, path, value):
    if not isinstance(value, Mapping):
        issues.append((path, "expected an object"))
        return {}
    return value


def _paths(issues, path, value, base):
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, list) or not value or not all(isinstance(v, str) for v in value):
        issues.append((path, "expected a file path or a non-empty list of file paths"))
        return []
    out = []
    for v in value:
        p = Path(v)
        p = p if p.is_absolute() else base / p
        if not p.is_file():
            issues.append((path, f"file not found: {v}"))
        out.append(p)
    return out


def _pump(issues, doc, device):
    doc = _obj(issues, "pump", doc)
    _unknown(issues, "pump", doc, {"power_on_chip_W", "detuning_rad_per_s", "detuning_half_linewidths",
                                   "wavelength_nm", "branch"})
    power = _num(issues, "pump.power_on_chip_W", doc.get("power_on_chip_W", 0.0), lo=0.0)
    wl = _num(issues, "pump.wavelength_nm", doc.get(
        "wavelength_nm", device.waveguide.wavelength_nm if device else 1550.0), lo=0.0, lo_open=True)
    branch = doc.get("branch", "lower")
    if branch not in ("lower", "upper"):
        issues.append(("pump.branch", f"must be 'lower' or 'upper', got {branch!r}"))
    if "detuning_rad_per_s" in doc and "detuning_half_linewidths" in doc:
        issues.append(("pump", "give detuning_rad_per_s or detuning_half_linewidths, not both"))
    detuning = 0.0
    if "detuning_rad_per_s" in doc:
        detuning = _num(issues, "pump.detuning_rad_per_s", doc["detuning_rad_per_s"])
    elif "detuning_half_linewidths" in doc:
        d = _num(issues, "pump.detuning_half_linewidths", doc["detuning_half_linewidths"])
        if d is not None and device is not None:
            detuning = d * device.kappa / 2.0
    if None in (power, wl, detuning):
        return None, branch
    return PumpSpec(power, detuning, wl), branch


def _noise(issues, doc):
    doc = _obj(issues, "noise", doc)
    _unknown(issues, "noise", doc, {"thermo", "chain", "detection", "calibrated"})
    thermo, chain, detection = ThermoNoiseModel(), NoiseChain(), DetectionSpec()
    if "thermo" in doc:
        try:
            thermo = build_dataclass(ThermoNoiseModel, doc["thermo"], "noise.thermo")
        except ConfigError as exc:
            issues.extend(exc.issues)
    if "chain" in doc:
        c = _obj(issues, "noise.chain", doc["chain"])
        _unknown(issues, "noise.chain", c, {"stages"})
        stages = c.get("stages", [])
        parsed = []
        if not isinstance(stages, list):
            issues.append(("noise.chain.stages", "expected a list"))
            stages = []
        for i, st in enumerate(stages):
            st = _obj(issues, f"noise.chain.stages[{i}]", st)
            _unknown(issues, f"noise.chain.stages[{i}]", st, {"label", "efficiency"})
            eta = _num(issues, f"noise.chain.stages[{i}].efficiency", st.get("efficiency"), lo=0.0, hi=1.0, lo_open=True)
            if eta is not None:
                parsed.append((str(st.get("label", f"stage{i}")), eta))
        if len(parsed) == len(stages):
            chain = NoiseChain(tuple(parsed))
    if "detection" in doc:
        d = dict(_obj(issues, "noise.detection", doc["detection"]))
        for key in ("detector_bandwidth_Hz", "dark_noise_clearance_dB"):
            if d.get(key) is None and key in d:
                d[key] = math.inf
        try:
            detection = build_dataclass(DetectionSpec, d, "noise.detection")
        except ConfigError as exc:
            issues.extend(exc.issues)
    calibrated = doc.get("calibrated", False)
    if not isinstance(calibrated, bool):
        issues.append(("noise.calibrated", "expected true or false"))
        calibrated = False
    return NoiseSetup(thermo, chain, detection, calibrated)


def _grid(issues, doc):
    doc = _obj(issues, "grid", doc)
    _unknown(issues, "grid", doc, {"freq_min_Hz", "freq_max_Hz", "n_freq", "n_angles"})
    g = Grid()
    lo = _num(issues, "grid.freq_min_Hz", doc.get("freq_min_Hz", g.freq_min_Hz), lo=0.0, lo_open=True)
    hi = _num(issues, "grid.freq_max_Hz", doc.get("freq_max_Hz", g.freq_max_Hz), lo=0.0, lo_open=True)
    nf = doc.get("n_freq", g.n_freq)
    na = doc.get("n_angles", g.n_angles)
    if not isinstance(nf, int) or isinstance(nf, bool) or nf < 1:
        issues.append(("grid.n_freq", "expected a positive integer"))
        nf = None
    if not isinstance(na, int) or isinstance(na, bool) or na < 3:
        issues.append(("grid.n_angles", "expected an integer >= 3"))
        na = None
    if lo is not None and hi is not None and lo >= hi:
        issues.append(("grid.freq_max_Hz", "must exceed freq_min_Hz"))
    if None in (lo, hi, nf, na):
        return g
    return Grid(lo, hi, nf, na)


def _sweep(issues, doc, base):
    doc = dict(_obj(issues, "sweep", doc))
    _unknown(issues, "sweep", doc, {"powers_W", "power_min_W", "power_max_W", "n_powers", "templates",
                                    "frequency_Hz", "measurement_efficiency", "direction_power_fraction"})
    out = {"frequency_Hz": DEFAULT_EVAL_FREQUENCY_HZ, "measurement_efficiency": 1.0,
           "direction_power_fraction": 0.5}
    if "powers_W" in doc:
        pw = doc["powers_W"]
        if not isinstance(pw, list):
            issues.append(("sweep.powers_W", "expected a list"))
        else:
            vals = [_num(issues, f"sweep.powers_W[{i}]", v, lo=0.0) for i, v in enumerate(pw)]
            out["powers_W"] = [v for v in vals if v is not None]
    else:
        lo = _num(issues, "sweep.power_min_W", doc.get("power_min_W", 1e-3), lo=0.0, lo_open=True)
        hi = _num(issues, "sweep.power_max_W", doc.get("power_max_W", 1.0), lo=0.0, lo_open=True)
        n = doc.get("n_powers", 61)
        if not isinstance(n, int) or n < 1:
            issues.append(("sweep.n_powers", "expected a positive integer"))
        elif lo is not None and hi is not None:
            out["powers_W"] = list(np.geomspace(lo, hi, n))
    for key, lo_, hi_ in (("frequency_Hz", 0.0, None), ("measurement_efficiency", 0.0, 1.0),
                          ("direction_power_fraction", 0.0, 1.0)):
        if key in doc:
            v = _num(issues, f"sweep.{key}", doc[key], lo=lo_, hi=hi_, lo_open=True)
            if v is not None:
                out[key] = v
    templates = doc.get("templates", list(TEMPLATES))
    chosen = {}
    if isinstance(templates, list):
        for i, name in enumerate(templates):
            if name not in TEMPLATES:
                issues.append((f"sweep.templates[{i}]", f"unknown template {name!r}; known: {sorted(TEMPLATES)}"))
            else:
                chosen[name] = TEMPLATES[name]
    elif isinstance(templates, Mapping):
        for name, dev in templates.items():
            try:
                chosen[name] = DeviceSpec.from_dict(dev, f"sweep.templates.{name}")
            except ConfigError as exc:
                issues.extend(exc.issues)
    else:
        issues.append(("sweep.templates", "expected a list of template names or an object of devices"))
    out["templates"] = chosen
    return out


def _search(issues, doc):
    doc = _obj(issues, "search", doc)
    _unknown(issues, "search", doc, {"template", "target_dB", "frequency_Hz", "direction_power_fraction"})
    out = {"template": doc.get("template", "high-q-37M")}
    if out["template"] not in TEMPLATES:
        issues.append(("search.template", f"unknown template {out['template']!r}"))
    out["target_dB"] = _num(issues, "search.target_dB", doc.get("target_dB", -10.0))
    out["frequency_Hz"] = _num(issues, "search.frequency_Hz", doc.get("frequency_Hz", DEFAULT_EVAL_FREQUENCY_HZ), lo=0.0, lo_open=True)
    out["direction_power_fraction"] = _num(issues, "search.direction_power_fraction",
                                           doc.get("direction_power_fraction", 0.5), lo=0.0, hi=1.0, lo_open=True)
    return out


def _cryo(issues, doc):
    doc = _obj(issues, "cryo", doc)
    _unknown(issues, "cryo", doc, {"temperature_K", "dndT_ratio_vs_reference", "frequency_Hz"})
    return {
        "temperature_K": _num(issues, "cryo.temperature_K", doc.get("temperature_K", 3.0), lo=0.0, lo_open=True),
        "dndT_ratio_vs_reference": _num(issues, "cryo.dndT_ratio_vs_reference",
                                        doc.get("dndT_ratio_vs_reference", 0.316), lo=0.0, lo_open=True),
        "frequency_Hz": _num(issues, "cryo.frequency_Hz", doc.get("frequency_Hz", 10e6), lo=0.0, lo_open=True),
    }


def _trace_set(issues, path, doc, base):
    doc = _obj(issues, path, doc)
    out = {}
    for role in ("signal", "shot", "dark"):
        if role not in doc:
            issues.append((f"{path}.{role}", "missing"))
        else:
            out[role] = _paths(issues, f"{path}.{role}", doc[role], base)
    return doc, out


def _fit(issues, doc, base, device):
    doc = _obj(issues, "fit", doc)
    _unknown(issues, "fit", doc, {"spectra", "band_Hz", "excess_band_Hz", "priors"})
    out = {"spectra": []}
    spectra = doc.get("spectra", [])
    if not isinstance(spectra, list):
        issues.append(("fit.spectra", "expected a list"))
        spectra = []
    for i, item in enumerate(spectra):
        path = f"fit.spectra[{i}]"
        raw, files = _trace_set(issues, path, item, base)
        _unknown(issues, path, raw, {"power_on_chip_W", "signal", "shot", "dark"})
        p = _num(issues, f"{path}.power_on_chip_W", raw.get("power_on_chip_W"), lo=0.0)
        out["spectra"].append((p, files))
    for key, default in (("band_Hz", (500e6, 2e9)), ("excess_band_Hz", (1e6, 300e6))):
        band = doc.get(key, list(default))
        if (not isinstance(band, list) or len(band) != 2
                or any(isinstance(b, bool) or not isinstance(b, (int, float)) for b in band)
                or band[0] >= band[1]):
            issues.append((f"fit.{key}", "expected [low, high] with low < high"))
            band = list(default)
        out[key] = tuple(float(b) for b in band)
    pri = _obj(issues, "fit.priors", doc.get("priors", {}))
    allowed = {"detuning_half_linewidths", "kerr_rate_rad_per_s", "measurement_efficiency",
               "detector_bandwidth_Hz", "dark_noise_clearance_dB", "free"}
    _unknown(issues, "fit.priors", pri, allowed)
    kw = {}
    for key, target in (("detuning_half_linewidths", "detuning_half_linewidths"),
                        ("kerr_rate_rad_per_s", "kerr_rate"),
                        ("measurement_efficiency", "measurement_efficiency"),
                        ("detector_bandwidth_Hz", "detector_bandwidth_Hz"),
                        ("dark_noise_clearance_dB", "dark_noise_clearance_dB")):
        if key in pri:
            v = _num(issues, f"fit.priors.{key}", pri[key], allow_inf=True)
            if v is not None:
                kw[target] = v
    free = pri.get("free", list(DEFAULT_FREE))
    if not isinstance(free, list) or any(f not in PARAMETERS for f in free):
        issues.append(("fit.priors.free", f"expected a list drawn from {list(PARAMETERS)}"))
        free = list(DEFAULT_FREE)
    kw["free"] = tuple(free)
    out["priors"] = kw
    return out


def _synthetic(issues, doc):
    doc = _obj(issues, "synthetic", doc)
    _unknown(issues, "synthetic", doc, {"powers_on_chip_W", "noise_dB", "n_traces", "freq_min_Hz",
                                        "freq_max_Hz", "n_freq", "shot_level_dBm", "clearance_dB"})
    out = {
        "powers_on_chip_W": doc.get("powers_on_chip_W", [0.026, 0.039, 0.052]),
        "noise_dB": _num(issues, "synthetic.noise_dB", doc.get("noise_dB", 0.02), lo=0.0),
        "n_traces": doc.get("n_traces", 5),
        "freq_min_Hz": _num(issues, "synthetic.freq_min_Hz", doc.get("freq_min_Hz", 10e6), lo=0.0, lo_open=True),
        "freq_max_Hz": _num(issues, "synthetic.freq_max_Hz", doc.get("freq_max_Hz", 2e9), lo=0.0, lo_open=True),
        "n_freq": doc.get("n_freq", 200),
        "shot_level_dBm": _num(issues, "synthetic.shot_level_dBm", doc.get("shot_level_dBm", -70.0)),
        "clearance_dB": _num(issues, "synthetic.clearance_dB", doc.get("clearance_dB", 15.0), lo=0.0, lo_open=True),
    }
    for key in ("n_traces", "n_freq"):
        if not isinstance(out[key], int) or out[key] < 1:
            issues.append((f"synthetic.{key}", "expected a positive integer"))
    pw = out["powers_on_chip_W"]
    if not isinstance(pw, list) or not pw:
        issues.append(("synthetic.powers_on_chip_W", "expected a non-empty list"))
    else:
        for i, v in enumerate(pw):
            _num(issues, f"synthetic.powers_on_chip_W[{i}]", v, lo=0.0)
    return out


def parse_scenario(doc: Mapping, base_dir: Path | str = ".") -> Scenario:
    base = Path(base_dir)
    issues: list = []
    if not isinstance(doc, Mapping):
        raise ConfigError([("", "top level must be a JSON object")])
    _unknown(issues, "", doc, TOP_KEYS)
    sc = Scenario(base_dir=base, source=dict(doc))
    if "device" in doc:
        try:
            sc.device = DeviceSpec.from_dict(doc["device"])
        except ConfigError as exc:
            issues.extend(exc.issues)
    if "pump" in doc:
        sc.pump, sc.branch = _pump(issues, doc["pump"], sc.device)
    if "powers_on_chip_W" in doc:
        pw = doc["powers_on_chip_W"]
        if not isinstance(pw, list):
            issues.append(("powers_on_chip_W", "expected a list"))
        else:
            sc.powers_W = [v for i, v in enumerate(pw)
                           if _num(issues, f"powers_on_chip_W[{i}]", v, lo=0.0) is not None]
    if "noise" in doc:
        sc.noise = _noise(issues, doc["noise"])
    if "grid" in doc:
        sc.grid = _grid(issues, doc["grid"])
    if "angle_reference_Hz" in doc:
        v = _num(issues, "angle_reference_Hz", doc["angle_reference_Hz"], lo=0.0, lo_open=True)
        sc.angle_reference_Hz = v if v is not None else sc.angle_reference_Hz
    outputs = doc.get("outputs", [])
    if not isinstance(outputs, list):
        issues.append(("outputs", "expected a list"))
        outputs = []
    for i, o in enumerate(outputs):
        if o not in OUTPUTS:
            issues.append((f"outputs[{i}]", f"unknown output {o!r}; choose from {list(OUTPUTS)}"))
    sc.outputs = [o for o in outputs if o in OUTPUTS]
    sc.sweep = _sweep(issues, doc.get("sweep", {}), base)
    sc.search = _search(issues, doc.get("search", {}))
    sc.cryo = _cryo(issues, doc.get("cryo", {}))
    if "fit" in doc:
        sc.fit = _fit(issues, doc["fit"], base, sc.device)
    if "normalize" in doc:
        raw, files = _trace_set(issues, "normalize", doc["normalize"], base)
        _unknown(issues, "normalize", raw, {"signal", "shot", "dark"})
        sc.normalize = files
    if "synthetic" in doc:
        sc.synthetic = _synthetic(issues, doc["synthetic"])

    needs_device = {"spectrum", "prediction", "fit"} & set(sc.outputs)
    if needs_device and "device" not in doc:
        issues.append(("device", f"required by outputs {sorted(needs_device)}"))
    if {"spectrum", "prediction"} & set(sc.outputs) and "pump" not in doc:
        issues.append(("pump", "required by the spectrum/prediction outputs"))
    if "fit" in sc.outputs and not sc.fit.get("spectra") and not sc.synthetic:
        issues.append(("fit.spectra", "the fit output needs trace files or a synthetic section"))
    if "normalize" in sc.outputs and not sc.normalize:
        issues.append(("normalize", "the normalize output needs signal/shot/dark trace files"))
    if issues:
        raise ConfigError(issues)
    return sc


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([(str(path), f"cannot read config: {exc.strerror}")]) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([(str(path), f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")]) from None
    return parse_scenario(doc, path.parent)


def scenario_document(cal, outputs=("spectrum", "prediction")) -> dict:
    """JSON scenario equivalent to a :class:`~kerrsqueeze.calibration.Calibration`."""
    n = cal.noise
    thermo = {"amplitude_rel_shot_at_1MHz": n.thermo.amplitude_rel_shot_at_1MHz,
              "temperature_K": n.thermo.temperature_K,
              "reference_temperature_K": n.thermo.reference_temperature_K}
    detection = {"homodyne_visibility": n.detection.homodyne_visibility,
                 "detector_quantum_efficiency": n.detection.detector_quantum_efficiency}
    for key in ("detector_bandwidth_Hz", "dark_noise_clearance_dB"):
        v = getattr(n.detection, key)
        if math.isfinite(v):
            detection[key] = v
    return {
        "device": cal.device.to_dict(),
        "pump": {"power_on_chip_W": cal.pump.power_on_chip_W,
                 "detuning_rad_per_s": cal.pump.detuning_rad_per_s,
                 "wavelength_nm": cal.pump.wavelength_nm},
        "noise": {
            "thermo": thermo,
            "chain": {"stages": [{"label": lab, "efficiency": eta} for lab, eta in n.chain.stages]},
            "detection": detection,
            "calibrated": n.calibrated,
        },
        "angle_reference_Hz": cal.angle_reference_Hz,
        "outputs": list(outputs),
    }
