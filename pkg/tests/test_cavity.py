import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from kerrsqueeze.cavity import (
    PumpSpec,
    bistability_threshold,
    default_angle_grid,
    default_frequency_grid,
    fluctuation_spectrum,
    input_photon_flux,
    optimal_quadrature,
    output_transfer,
    quadrature_coefficients,
    select_branch,
    squeezing_extremes,
    steady_state,
    sweep,
)
from kerrsqueeze.device import HBAR, DeviceSpec, RingSpec, SagnacSpec, WaveguideSpec
from kerrsqueeze.errors import DomainError, ModelError

from oracles import cubic_photon_numbers, drift_eigenvalues, quadrature_spectrum


def make_device(loaded_q=238000.0, eta=0.77, area=1.0, radius=30.0, n2=2.4e-19):
    return DeviceSpec(
        WaveguideSpec(1550.0, 1.88, n2, area),
        RingSpec(radius_um=radius, escape_efficiency=eta, loaded_q=loaded_q),
        SagnacSpec(),
    )


devices = st.builds(
    make_device,
    loaded_q=st.floats(5e4, 2e6),
    eta=st.floats(0.05, 0.99),
    area=st.floats(0.5, 3.0),
    radius=st.floats(10.0, 200.0),
)
pumps = st.tuples(st.floats(1e-4, 0.2), st.floats(-2.0, 2.0))


def pumped(device, power, detuning_hw):
    pump = PumpSpec(power, detuning_hw * device.kappa / 2.0)
    return pump, select_branch(steady_state(device, pump, 0.5), "lower")


def test_linear_cavity_photon_number():
    dev = make_device(n2=0.0)
    pump = PumpSpec(0.052)
    (sol,) = steady_state(dev, pump, 0.5)
    expected = dev.kappa_ext * 0.026 / (HBAR * dev.omega0) / (dev.kappa / 2.0) ** 2
    assert sol.photon_number == pytest.approx(expected, rel=1e-12)
    assert sol.photon_number == pytest.approx(1.22e8, rel=0.01)


def test_kerr_shift_lowers_photon_number_on_resonance():
    pump = PumpSpec(0.052)
    linear = steady_state(make_device(n2=0.0), pump, 0.5)[0].photon_number
    kerr = steady_state(make_device(), pump, 0.5)
    assert len(kerr) == 1 and kerr[0].photon_number < linear


@given(devices, pumps)
def test_steady_states_match_polynomial_oracle(device, pump):
    power, det_hw = pump
    p = PumpSpec(power, det_hw * device.kappa / 2.0)
    sols = steady_state(device, p, 0.5)
    drive = device.kappa_ext * input_photon_flux(p, 0.5)
    ref = cubic_photon_numbers(device.kappa, p.detuning_rad_per_s, device.g, drive)
    assume(len(ref) == len(sols))
    for s, n in zip(sols, ref):
        assert s.photon_number == pytest.approx(n, rel=1e-6)
        resid = s.photon_number * ((device.kappa / 2) ** 2 + s.effective_detuning_rad_per_s**2) - drive
        assert abs(resid) <= 1e-10 * drive


@given(devices, pumps)
def test_stability_flag_matches_drift_eigenvalues(device, pump):
    power, det_hw = pump
    p = PumpSpec(power, det_hw * device.kappa / 2.0)
    for s in steady_state(device, p, 0.5):
        G = 2.0 * device.g * s.alpha**2
        eig = drift_eigenvalues(device.kappa, p.detuning_rad_per_s + 4 * device.g * s.photon_number, G)
        margin = np.max(eig.real)
        assume(abs(margin) > 1e-6 * device.kappa)
        if s.branch != "middle":
            assert s.stable == bool(margin < 0)
        else:
            assert margin > 0


def test_bistable_region_has_three_roots():
    dev = make_device()
    p_th, d_th = bistability_threshold(dev, direction_power_fraction=0.5)
    below = steady_state(dev, PumpSpec(0.9 * p_th, 1.3 * d_th), 0.5)
    above = steady_state(dev, PumpSpec(1.5 * p_th, 1.3 * d_th), 0.5)
    assert len(below) == 1
    assert [s.branch for s in above] == ["lower", "middle", "upper"]
    assert not above[1].stable and above[0].stable and above[2].stable
    assert select_branch(above, "upper") is above[2]


def test_bistability_critical_point():
    dev = make_device()
    p_th, d_th = bistability_threshold(dev)
    # at the critical point the cubic has a triple root
    drive = dev.kappa_ext * p_th / (HBAR * dev.omega0)
    ref = cubic_photon_numbers(dev.kappa, d_th, dev.g, drive)
    n_c = dev.kappa / (2 * math.sqrt(3) * dev.g)
    assert np.allclose(ref, n_c, rtol=1e-3)


def test_linear_cavity_has_no_threshold():
    with pytest.raises(ModelError, match="no bistability in linear cavity"):
        bistability_threshold(make_device(n2=0.0))


def test_unstable_branch_refuses_linearization():
    dev = make_device()
    p_th, d_th = bistability_threshold(dev, direction_power_fraction=0.5)
    pump = PumpSpec(1.5 * p_th, 1.3 * d_th)
    middle = steady_state(dev, pump, 0.5)[1]
    with pytest.raises(ModelError, match="unstable branch"):
        fluctuation_spectrum(dev, pump, middle, [1e8], [0.0])


@settings(max_examples=60)
@given(devices, pumps, st.floats(1e6, 5e9), st.floats(0.0, math.pi))
def test_spectrum_matches_real_quadrature_oracle(device, pump, f, theta):
    power, det_hw = pump
    p, sol = pumped(device, power, det_hw)
    assume(sol.stable)
    spec = fluctuation_spectrum(device, p, sol, [f], [theta])
    ref = quadrature_spectrum(
        device.kappa, device.kappa_ext, device.kappa_int,
        p.detuning_rad_per_s + 4 * device.g * sol.photon_number,
        2 * device.g * sol.alpha**2, 2 * math.pi * f, theta,
    )
    assert spec.values_rel_shot[0, 0] == pytest.approx(ref, rel=1e-9)


def test_shot_noise_without_kerr_effect():
    dev = make_device(n2=0.0)
    pump = PumpSpec(0.05, 0.3 * dev.kappa)
    sol = steady_state(dev, pump, 0.5)[0]
    spec = fluctuation_spectrum(dev, pump, sol)
    assert spec.values_rel_shot.shape == (400, 181)
    assert np.max(np.abs(spec.values_rel_shot - 1.0)) <= 1e-12


@given(devices, pumps)
def test_uncertainty_product(device, pump):
    p, sol = pumped(device, *pump)
    assume(sol.stable)
    s_min, s_max, _ = squeezing_extremes(device, sol, default_frequency_grid(1e6, 5e9, 40))
    assert np.all(s_min * s_max >= 1 - 1e-9)


@given(pumps, st.floats(5e4, 2e6))
def test_lossless_ring_is_minimum_uncertainty(pump, loaded_q):
    device = make_device(loaded_q=loaded_q, eta=1.0)
    assert device.kappa_int == 0.0
    p, sol = pumped(device, *pump)
    assume(sol.stable)
    s_min, s_max, _ = squeezing_extremes(device, sol, default_frequency_grid(1e6, 5e9, 40))
    assert np.allclose(s_min * s_max, 1.0, atol=1e-6)


@given(devices, pumps)
def test_passivity_bound(device, pump):
    p, sol = pumped(device, *pump)
    assume(sol.stable)
    s_min, _, _ = squeezing_extremes(device, sol, default_frequency_grid(1e6, 5e9, 40))
    assert np.all(s_min >= 1 - device.ring.escape_efficiency - 1e-12)


@given(devices, pumps, st.floats(1e6, 5e9))
def test_spectrum_even_in_sideband_frequency(device, pump, f):
    p, sol = pumped(device, *pump)
    assume(sol.stable)
    G = 2 * device.g * sol.alpha**2
    d = p.detuning_rad_per_s + 4 * device.g * sol.photon_number
    for theta in (0.0, 0.7, 2.0):
        up = quadrature_spectrum(device.kappa, device.kappa_ext, device.kappa_int, d, G, 2 * math.pi * f, theta)
        down = quadrature_spectrum(device.kappa, device.kappa_ext, device.kappa_int, d, G, -2 * math.pi * f, theta)
        assert up == pytest.approx(down, rel=1e-9)


def test_extremes_agree_with_angle_grid():
    dev = make_device()
    pump, sol = pumped(dev, 0.05, -0.5)
    f = np.array([2e8, 7e8])
    spec = fluctuation_spectrum(dev, pump, sol, f, default_angle_grid(720))
    s_min, s_max, theta = squeezing_extremes(dev, sol, f)
    grid_min = spec.values_rel_shot.min(axis=1)
    assert np.all(grid_min >= s_min - 1e-12)
    assert grid_min == pytest.approx(s_min, rel=1e-4)
    for k, fk in enumerate(f):
        t, lo, _, hi = optimal_quadrature(spec, fk)
        assert lo == pytest.approx(s_min[k], rel=1e-10)
        assert hi == pytest.approx(s_max[k], rel=1e-10)
        assert t == pytest.approx(theta[k], abs=1e-9)


def test_optimal_quadrature_outside_grid():
    dev = make_device()
    pump, sol = pumped(dev, 0.05, 0.0)
    spec = fluctuation_spectrum(dev, pump, sol, [1e8, 2e8], default_angle_grid(8))
    with pytest.raises(DomainError):
        optimal_quadrature(spec, 5e8)


def test_output_transfer_broadcasts():
    t_ext, t_int = output_transfer(1e9, 0.7e9, 0.3e9, np.zeros(5), 1e8, np.linspace(0, 1e9, 5))
    assert t_ext.shape == (5, 2, 2) == t_int.shape


def test_sweep_rows_sorted_and_errors_name_power():
    dev = make_device()
    rows = sweep(dev, [0.05, 0.01], [5e8, 1e8])
    assert [(r.power_W, r.frequency_Hz) for r in rows] == sorted((r.power_W, r.frequency_Hz) for r in rows)
    with pytest.raises(DomainError, match="-1"):
        sweep(dev, [-1.0], [1e8])


def test_coefficients_reproduce_spectrum():
    dev = make_device()
    pump, sol = pumped(dev, 0.04, 0.2)
    f = default_frequency_grid(1e6, 5e9, 30)
    angles = default_angle_grid(13)
    c, d = quadrature_coefficients(dev, sol, f)
    direct = fluctuation_spectrum(dev, pump, sol, f, angles).values_rel_shot
    model = c[:, None] + np.real(d[:, None] * np.exp(-2j * angles[None, :]))
    assert np.allclose(direct, model, rtol=1e-12)


def test_determinism():
    dev = make_device()
    pump, sol = pumped(dev, 0.04, 0.2)
    a = fluctuation_spectrum(dev, pump, sol).values_rel_shot
    b = fluctuation_spectrum(dev, pump, sol).values_rel_shot
    assert a.tobytes() == b.tobytes()
