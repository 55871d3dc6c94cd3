import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kerrsqueeze.errors import DomainError, ModelError
from kerrsqueeze.synthetic import analyzer_traces
from kerrsqueeze.traces import (
    EsaTrace,
    TraceFormatError,
    average_traces,
    normalize,
    parse_trace,
    parse_trace_text,
    serialize_trace,
)

HEAD = "#rbw_hz=100000\n#vbw_hz=20\n#sweep_time_s=10\n#label=shot\n"


def trace(p_dBm, label="signal", f=None, **kw):
    p = np.asarray(p_dBm, float)
    f = np.arange(1, p.size + 1) * 1e6 if f is None else f
    return EsaTrace(f, p, 1e5, 20.0, 10.0, label, **kw)


finite = st.floats(-150.0, 20.0, allow_nan=False)


@given(st.lists(finite, min_size=1, max_size=40), st.sampled_from(["signal", "shot", "dark"]))
def test_serialize_parse_round_trip_is_bit_exact(powers, label):
    f = np.cumsum(np.full(len(powers), 1.2345e6)) + 0.1
    tr = EsaTrace(f, np.array(powers), 1e5 / 3, 20.0, 10.0, label, extra={"instrument": "esa-1"})
    back = parse_trace_text(serialize_trace(tr))
    assert back == tr
    assert back.power_dBm.tobytes() == tr.power_dBm.tobytes()


def test_header_row_is_optional():
    with_header = parse_trace_text(HEAD + "freq_hz,power_dbm\n1e6,-70\n2e6,-71\n")
    without = parse_trace_text(HEAD + "1e6,-70\n2e6,-71\n")
    assert with_header == without
    assert with_header.label == "shot"


def test_non_monotone_grid_names_line():
    with pytest.raises(TraceFormatError, match="non-monotone grid at line 7"):
        parse_trace_text(HEAD + "freq_hz,power_dbm\n2e6,-70\n1e6,-71\n")


def test_non_numeric_value_names_line():
    with pytest.raises(TraceFormatError, match="line 6"):
        parse_trace_text(HEAD + "1e6,-70\n2e6,abc\n")


def test_decimal_comma_is_rejected():
    with pytest.raises(TraceFormatError):
        parse_trace_text(HEAD + "1e6,-70,5\n")


def test_missing_metadata():
    with pytest.raises(TraceFormatError, match="vbw_hz"):
        parse_trace_text("#rbw_hz=1\n#sweep_time_s=1\n#label=dark\n1,2\n")


def test_bad_label():
    with pytest.raises(TraceFormatError, match="label"):
        parse_trace_text(HEAD.replace("shot", "lo") + "1,2\n")


def test_parse_from_file(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text(HEAD + "1e6,-70\n")
    assert parse_trace(p).power_dBm.tolist() == [-70.0]


def test_averaging_is_linear_not_logarithmic():
    avg = average_traces([trace([0.0]), trace([-10.0])])
    assert avg.power_dBm[0] == pytest.approx(10 * math.log10(0.55), rel=1e-14)
    assert avg.power_dBm[0] != pytest.approx(-5.0)
    assert avg.n_averaged == 2


def test_average_variance_needs_three_traces():
    assert average_traces([trace([0.0]), trace([1.0])]).variance_mW2 is None
    avg = average_traces([trace([0.0]), trace([1.0]), trace([2.0])])
    lin = 10 ** (np.array([0.0, 0.1, 0.2]))
    assert avg.variance_mW2[0] == pytest.approx(lin.var(ddof=1) / 3)


def test_average_rejects_mismatch():
    with pytest.raises(DomainError):
        average_traces([trace([0.0, 1.0]), trace([0.0, 1.0], f=np.array([1e6, 3e6]))])
    with pytest.raises(DomainError):
        average_traces([trace([0.0]), trace([0.0], label="dark")])
    with pytest.raises(DomainError):
        average_traces([])


def test_normalize_subtracts_dark_noise():
    sig = trace([10 * math.log10(0.5 + 0.1)])
    shot = trace([10 * math.log10(1.0 + 0.1)], "shot")
    dark = trace([-10.0], "dark")
    out = normalize(sig, shot, dark)
    assert out.rel_shot[0] == pytest.approx(0.5, rel=1e-12)


def test_normalize_clearance_error():
    with pytest.raises(ModelError, match="insufficient dark-noise clearance at bin 1"):
        normalize(trace([0.0, 0.0]), trace([0.0, -20.0], "shot"), trace([-10.0, -10.0], "dark"))


def test_normalize_recovers_synthetic_ratio_through_roll_off():
    f = np.linspace(1e7, 2e9, 50)
    y = np.linspace(2.0, -0.5, 50)
    tr = analyzer_traces(f, y, n_traces=1, detector_bandwidth_Hz=5e8, clearance_dB=10.0)
    out = normalize(tr["signal"][0], tr["shot"][0], tr["dark"][0])
    assert np.allclose(out.rel_shot_dB, y, atol=1e-10)


def test_normalize_sigma_matches_scatter():
    rng = np.random.default_rng(3)
    f = np.linspace(1e7, 1e9, 2000)
    y = np.full(f.size, -0.5)
    tr = analyzer_traces(f, y, n_traces=8, noise_dB=0.1, rng=rng, clearance_dB=20.0)
    avg = {k: average_traces(v) for k, v in tr.items()}
    out = normalize(avg["signal"], avg["shot"], avg["dark"])
    spread = np.std(out.rel_shot_dB)
    assert np.median(out.sigma_dB) == pytest.approx(spread, rel=0.15)
