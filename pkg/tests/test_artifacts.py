import json
import math

import numpy as np
import pytest

from kerrsqueeze.artifacts import (
    atomic_write,
    dumps,
    read_spectrum_csv,
    spectrum_csv,
    spectrum_document,
    spectrum_from_document,
    write_spectrum,
)
from kerrsqueeze.calibration import reference_calibration
from kerrsqueeze.cavity import QuadratureSpectrum, select_branch, squeezing_extremes, steady_state
from kerrsqueeze.design import sweep_power_q, TEMPLATES
from kerrsqueeze.errors import DomainError
from kerrsqueeze.noise import on_chip_output
from kerrsqueeze.plotdata import emit_plot_data, plot_data_text
from kerrsqueeze.traces import NormalizedSpectrum


@pytest.fixture(scope="module")
def chip():
    cal = reference_calibration()
    f = np.geomspace(1e7, 2e9, 9)
    a = np.linspace(0, math.pi, 12, endpoint=False)
    spec, _ = on_chip_output(cal.device, cal.pump, f, a)
    return cal, spec


def test_csv_round_trip(tmp_path, chip):
    cal, spec = chip
    text = spectrum_csv(spec)
    assert text.splitlines()[0] == "freq_hz,theta_rad,s_rel_shot"
    (tmp_path / "s.csv").write_text(text)
    back = read_spectrum_csv(tmp_path / "s.csv")
    assert back.frequencies_Hz.tobytes() == spec.frequencies_Hz.tobytes()
    assert back.values_rel_shot.tobytes() == spec.values_rel_shot.tobytes()


def test_json_carries_provenance(tmp_path, chip):
    cal, spec = chip
    paths = write_spectrum(tmp_path, "x", spec, cal.device, cal.pump, branch="lower")
    doc = json.loads(paths[1].read_text())
    assert doc["provenance"]["device"]["ring"]["loaded_q"] == 238000.0
    assert doc["provenance"]["pump"]["power_on_chip_W"] == cal.pump.power_on_chip_W
    back = spectrum_from_document(doc)
    assert np.array_equal(back.values_rel_shot, spec.values_rel_shot)


def test_json_is_canonical():
    assert dumps({"b": 1, "a": [np.float64(0.1), math.inf, np.arange(2)]}) == dumps(
        {"a": [0.1, math.inf, [0, 1]], "b": 1})
    assert json.loads(dumps({"x": -math.inf}))["x"] == "-inf"


def test_atomic_write_leaves_no_temporaries(tmp_path):
    atomic_write(tmp_path / "d" / "f.txt", "one")
    atomic_write(tmp_path / "d" / "f.txt", b"two")
    assert (tmp_path / "d" / "f.txt").read_bytes() == b"two"
    assert [p.name for p in (tmp_path / "d").iterdir()] == ["f.txt"]


def test_spectrum_plot_data_is_exact(tmp_path, chip):
    cal, spec = chip
    path = emit_plot_data(spec, "spectrum", tmp_path / "s.dat")
    lines = path.read_text().splitlines()
    assert lines[1] == "# columns: freq_hz s_min_db s_max_db theta_min_rad"
    rows = np.loadtxt(path)
    t = cal.device.sagnac.splitter_transmission
    assert t == 0.5
    sol = select_branch(steady_state(cal.device, cal.pump, 0.5))
    s_min, s_max, _ = squeezing_extremes(cal.device, sol, spec.frequencies_Hz)
    assert np.allclose(rows[:, 1], 10 * np.log10(s_min), atol=1e-9)
    assert np.allclose(rows[:, 2], 10 * np.log10(s_max), atol=1e-9)


def test_sweep_plot_data_blocks(tmp_path):
    res = sweep_power_q(powers_W=[0.01, 0.1])
    text = plot_data_text(res, "sweep")
    blocks = text.split("\n\n\n")
    assert len(blocks) == len(TEMPLATES)
    assert all(len([l for l in b.splitlines() if not l.startswith("#")]) == 2 for b in blocks)


def test_empty_results_are_header_only():
    empty = QuadratureSpectrum(np.array([]), np.linspace(0, 3, 3), np.zeros((0, 3)))
    for kind, obj in (("spectrum", empty), ("sweep", None), ("normalized", NormalizedSpectrum([], []))):
        lines = plot_data_text(obj, kind).splitlines()
        assert lines and all(l.startswith("#") for l in lines)


def test_unknown_plot_kind():
    with pytest.raises(DomainError, match="unknown plot-data kind"):
        plot_data_text(None, "histogram")
