"""Snapshots, motion compensation, steering spectra and 2-D angle estimates."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from radarcube import _accel
from radarcube.angles import AngleGrid, correlate_grid, steering_vector
from radarcube.array_design import AntennaLayout, synthesize_virtual_array
from radarcube.cfar import Detection
from radarcube.doa import (
    ChannelSnapshot,
    angle_spectrum,
    angle_spectrum_2d,
    effective_wavelength,
    estimate_angles_2d,
    estimate_batch,
    estimate_peaks_2d,
    extract_snapshot,
    focus_correction,
    tdm_motion_compensate,
)
from radarcube.errors import DegenerateSnapshot
from radarcube.rd_processing import compute_rd_map
from radarcube.scenarios import reference_ladder_layout
from radarcube.waveform import Scatterer, Scene, WaveformConfig, synthesize_beat_signal


def ula(n, pitch=0.5):
    return np.stack([np.arange(n) * pitch, np.zeros(n)], axis=1)


def small_config(ns=256, nc=32):
    return WaveformConfig(77e9, 3e13, 60e-6, 10e6, ns, nc, 65e-6)


def peak_detection(rd):
    r, d = np.unravel_index(np.argmax(rd.integrated), rd.shape)
    return Detection(int(r), int(d), float(rd.integrated[r, d]), 1.0, 1.0, "CA")


def two_source_snapshot(pos, a, b, phase=0.0):
    return steering_vector(pos, *a) + np.exp(1j * phase) * steering_vector(pos, *b)


# ---------------------------------------------------------------------------
# snapshot extraction


def test_broadside_target_gives_equal_phase_snapshot():
    cfg = small_config(nc=8)
    lay = AntennaLayout([[0.0, 0.0]], ula(4), (4.0, 4.0))
    rd = compute_rd_map(synthesize_beat_signal(cfg, lay, Scene((Scatterer((0, 6.0, 0)),))))
    s = extract_snapshot(rd, peak_detection(rd)).values
    # elements differ by at most a sub-millimetre path length at 6 m
    assert np.max(np.abs(np.angle(s / s[0]))) < 0.05


def test_ula_snapshot_phase_ramp():
    cfg = small_config(nc=8)
    az = 20.0
    lay = AntennaLayout([[0.0, 0.0]], ula(8), (8.0, 8.0))
    p = np.array([20.0 * math.sin(math.radians(az)), 20.0 * math.cos(math.radians(az)), 0.0])
    rd = compute_rd_map(synthesize_beat_signal(cfg, lay, Scene((Scatterer(tuple(p)),))))
    s = extract_snapshot(rd, peak_detection(rd)).values
    # oracle: exact two-way path differences at the wavelength of the window centre
    tx_m, rx_m = lay.positions_3d(cfg.wavelength)
    paths = np.linalg.norm(p - tx_m[0]) + np.linalg.norm(p - rx_m, axis=1)
    expected = 2 * math.pi * np.diff(paths) / effective_wavelength(cfg)
    np.testing.assert_allclose(np.angle(s[1:] / s[:-1]), expected, atol=1e-6)


def test_snapshot_outside_map_rejected():
    cfg = small_config(nc=4)
    rd = compute_rd_map(synthesize_beat_signal(cfg, AntennaLayout([[0, 0]], [[0, 0]]), Scene()))
    with pytest.raises(IndexError):
        extract_snapshot(rd, Detection(rd.shape[0], 0, 0, 0, 0, "CA"))


def test_zero_snapshot_is_degenerate():
    s = ChannelSnapshot(np.zeros(8, complex))
    assert s.degenerate
    with pytest.raises(DegenerateSnapshot):
        estimate_angles_2d(s, ula(8))


# ---------------------------------------------------------------------------
# TDM motion compensation


def test_compensation_at_zero_velocity_is_identity():
    cfg = small_config()
    va = synthesize_virtual_array(reference_ladder_layout())
    s = ChannelSnapshot(np.exp(1j * np.arange(va.positions.shape[0])))
    out = tdm_motion_compensate(s, 0.0, cfg, va.tx_index)
    np.testing.assert_array_equal(out.values, s.values)
    assert out.compensated


def test_compensation_rotation_per_tx_slot():
    cfg = small_config()
    va = synthesize_virtual_array(reference_ladder_layout())
    v = 0.7
    out = tdm_motion_compensate(ChannelSnapshot(np.ones(va.positions.shape[0], complex)), v, cfg, va.tx_index)
    per_slot = 2 * math.pi * 2 * v / cfg.wavelength * cfg.chirp_repetition_interval
    np.testing.assert_allclose(np.angle(out.values * np.exp(-1j * per_slot * va.tx_index)), 0.0, atol=1e-12)


def test_compensation_length_mismatch_rejected():
    with pytest.raises(ValueError):
        tdm_motion_compensate(ChannelSnapshot(np.ones(4, complex)), 1.0, small_config(), [0, 1])


def _moving_target_angles(v, az=10.0, r=9.0):
    cfg = small_config()
    lay = reference_ladder_layout()
    va = synthesize_virtual_array(lay)
    pos = va.positions * cfg.wavelength / effective_wavelength(cfg)
    u = np.array([math.sin(math.radians(az)), math.cos(math.radians(az)), 0.0])
    cube = synthesize_beat_signal(cfg, lay, Scene((Scatterer(tuple(r * u), tuple(-v * u)),)))
    rd = compute_rd_map(cube)
    s = extract_snapshot(rd, peak_detection(rd))
    raw = estimate_angles_2d(s, pos)
    comp = estimate_angles_2d(tdm_motion_compensate(s, v, cfg, va.tx_index), pos)
    return raw, comp


def test_compensated_estimate_independent_of_velocity():
    still, _ = _moving_target_angles(0.0)
    for v in (0.3, 1.0):
        raw, comp = _moving_target_angles(v)
        # residual: the target moves ~25 mm radially during the frame
        assert comp.azimuth == pytest.approx(still.azimuth, abs=0.05)
        assert comp.elevation == pytest.approx(still.elevation, abs=0.05)


def test_uncompensated_bias_grows_with_velocity():
    still, _ = _moving_target_angles(0.0)
    bias = []
    for v in (0.1, 0.3, 0.6, 1.0):
        raw, _ = _moving_target_angles(v)
        bias.append(math.hypot(raw.azimuth - still.azimuth, raw.elevation - still.elevation))
    assert all(b2 > b1 for b1, b2 in zip(bias, bias[1:]))
    # frozen from the reference ladder at 9 m, az 10 deg (about 6 deg at 1 m/s)
    assert bias[-1] == pytest.approx(6.2, abs=0.3)


# ---------------------------------------------------------------------------
# spectra


@pytest.mark.parametrize("theta", [0.0, 30.0, -42.5])
def test_ula16_spectrum_peaks_at_source(theta):
    pos = ula(16)
    s = steering_vector(pos, theta, 0.0)
    (az,), mag = angle_spectrum(s, pos, AngleGrid(60, 0, 0.1, 0.5)).peak
    assert az == pytest.approx(theta, abs=0.05)
    assert mag == pytest.approx(16.0, abs=1e-9)


def test_peak_value_equals_element_count():
    pos = synthesize_virtual_array(reference_ladder_layout()).positions
    s = steering_vector(pos, 12.0, 4.0)
    mag = correlate_grid(pos, s, np.array([12.0]), np.array([4.0]))
    assert mag[0, 0] == pytest.approx(pos.shape[0], abs=1e-9)


def test_fft_spectrum_equals_direct_at_native_angles():
    pos = ula(12)
    s = steering_vector(pos, 17.0, 0.0) + 0.3 * steering_vector(pos, -25.0, 0.0)
    fft = angle_spectrum(s, pos, AngleGrid(60, 0), method="fft", fft_size=256)
    direct = correlate_grid(pos, s, fft.az, np.array([0.0]))[:, 0]
    np.testing.assert_allclose(fft.magnitude, direct, atol=1e-9)


def test_fft_spectrum_needs_uniform_array():
    with pytest.raises(ValueError):
        angle_spectrum(np.ones(3), np.array([0.0, 0.5, 1.7]), method="fft")


def test_antiphase_pair_at_rayleigh_spacing_has_deep_saddle():
    # source phases are referenced to the array centre
    n = 16
    pos = ula(n) - [3.75, 0.0]
    sep = math.degrees(math.asin(2 / n))  # first-null spacing
    s = two_source_snapshot(pos, (-sep / 2, 0.0), (sep / 2, 0.0), phase=math.pi)
    spec = angle_spectrum(s, pos, AngleGrid(30, 0, 0.05, 0.5))
    i = int(np.argmin(np.abs(spec.az)))
    left = spec.magnitude[np.abs(spec.az + sep / 2) < 0.03].max()
    assert 20 * math.log10(left / max(spec.magnitude[i], 1e-300)) >= 3.0


def test_inphase_pair_at_rayleigh_spacing_merges():
    # coherent, equal-phase sources at the null spacing add up at the midpoint
    n = 16
    pos = ula(n) - [3.75, 0.0]
    sep = math.degrees(math.asin(2 / n))
    s = two_source_snapshot(pos, (-sep / 2, 0.0), (sep / 2, 0.0))
    (az,), _ = angle_spectrum(s, pos, AngleGrid(30, 0, 0.05, 0.5)).peak
    assert az == pytest.approx(0.0, abs=0.05)


def test_doubling_aperture_halves_width():
    def width(n):
        spec = angle_spectrum(steering_vector(ula(n), 0.0, 0.0), ula(n), AngleGrid(60, 0, 0.01, 0.5))
        above = spec.az[spec.magnitude >= spec.magnitude.max() / math.sqrt(2)]
        return above.max() - above.min()

    assert width(16) / width(32) == pytest.approx(2.0, rel=0.1)


def test_elevation_spectrum_of_vertical_array():
    pos = np.stack([np.zeros(8), np.arange(8) * 0.5], axis=1)
    spec = angle_spectrum(steering_vector(pos, 0.0, 9.0), pos, AngleGrid(10, 20, 0.1, 0.1), axis="el")
    (el,), _ = spec.peak
    assert el == pytest.approx(9.0, abs=0.06)


def test_2d_spectrum_of_linear_array_collapses_elevation():
    spec = angle_spectrum_2d(steering_vector(ula(8), 5.0, 0.0), ula(8))
    assert spec.el.tolist() == [0.0]


@given(st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_global_phase_does_not_change_spectrum(c):
    pos = ula(8)
    s = steering_vector(pos, 11.0, 0.0) + 0.5 * steering_vector(pos, -30.0, 0.0)
    a = angle_spectrum(s, pos).magnitude
    b = angle_spectrum(c * s, pos).magnitude
    np.testing.assert_allclose(b, abs(c) * a, rtol=1e-9, atol=1e-12)


# ---------------------------------------------------------------------------
# 2-D estimates on the reference ladder


@pytest.fixture(scope="module")
def ladder_positions():
    return synthesize_virtual_array(reference_ladder_layout()).positions


def test_broadside_estimate(ladder_positions):
    est = estimate_angles_2d(steering_vector(ladder_positions, 0.0, 0.0), ladder_positions)
    assert abs(est.azimuth) <= 0.01 and abs(est.elevation) <= 0.05


def test_offaxis_estimate(ladder_positions):
    est = estimate_angles_2d(steering_vector(ladder_positions, 20.0, 5.0), ladder_positions)
    assert est.azimuth == pytest.approx(20.0, abs=0.1)
    assert est.elevation == pytest.approx(5.0, abs=0.5)


@given(az=st.floats(-55, 55), el=st.floats(-18, 18))
def test_estimate_within_one_grid_step(ladder_positions, az, el):
    grid = AngleGrid()
    est = estimate_angles_2d(steering_vector(ladder_positions, az, el), ladder_positions, grid)
    assert abs(est.azimuth - az) <= grid.az_step
    assert abs(est.elevation - el) <= grid.el_step


@pytest.mark.xfail(strict=True, reason="the reference mainlobe (1.67 deg) is wider than a 1 deg separation")
def test_one_degree_pair_resolved_in_azimuth(ladder_positions):
    s = two_source_snapshot(ladder_positions, (-0.5, 0.0), (0.5, 0.0))
    peaks = estimate_peaks_2d(s, ladder_positions, max_peaks=2)
    assert len(peaks) == 2
    assert sorted(round(p.azimuth) for p in peaks) == [-1, 0] or all(abs(abs(p.azimuth) - 0.5) < 0.25 for p in peaks)


def test_close_inphase_pair_merges(ladder_positions):
    s = two_source_snapshot(ladder_positions, (-0.2, 0.0), (0.2, 0.0))
    peaks = estimate_peaks_2d(s, ladder_positions, max_peaks=2)
    assert len(peaks) == 1
    assert abs(peaks[0].azimuth) <= 0.1 and abs(peaks[0].elevation) <= 0.5


def test_batch_equals_individual(ladder_positions):
    snaps = [steering_vector(ladder_positions, a, e) for a, e in [(3, 1), (-25, 8), (40, -12)]]
    batch = estimate_batch(snaps, ladder_positions)
    for s, b in zip(snaps, batch):
        assert b[0] == estimate_angles_2d(s, ladder_positions)


def test_length_mismatch_rejected(ladder_positions):
    with pytest.raises(ValueError):
        estimate_angles_2d(np.ones(5, complex), ladder_positions)


# ---------------------------------------------------------------------------
# near-field focusing


def _spherical_snapshot(tx_m, rx_m, point, lam):
    d = np.linalg.norm(point - tx_m, axis=1)[:, None] + np.linalg.norm(point - rx_m, axis=1)[None, :]
    return np.exp(2j * math.pi * d.ravel() / lam)


def test_focus_turns_spherical_wave_into_plane_wave():
    lay = reference_ladder_layout()
    lam = 299_792_458.0 / 77e9
    tx_m, rx_m = lay.positions_3d(lam)
    az, el, r = 14.0, -3.0, 4.0
    a, e = math.radians(az), math.radians(el)
    point = r * np.array([math.cos(e) * math.sin(a), math.cos(e) * math.cos(a), math.sin(e)])
    s = _spherical_snapshot(tx_m, rx_m, point, lam) * focus_correction(tx_m, rx_m, r, az, el, lam)
    pos = synthesize_virtual_array(lay).positions
    plane = steering_vector(pos, az, el)
    ratio = s / plane
    np.testing.assert_allclose(ratio / ratio[0], 1.0, atol=1e-9)


def test_focus_vanishes_in_far_field():
    lay = reference_ladder_layout()
    lam = 299_792_458.0 / 77e9
    tx_m, rx_m = lay.positions_3d(lam)
    near = focus_correction(tx_m, rx_m, 5.0, 10.0, 2.0, lam)
    far = focus_correction(tx_m, rx_m, 5e5, 10.0, 2.0, lam)
    assert np.max(np.abs(np.angle(near))) > 0.1
    assert np.max(np.abs(np.angle(far))) < 1e-4


def test_effective_wavelength_is_longer_at_window_centre():
    cfg = small_config(ns=512)
    t_w = 256 / cfg.sample_rate
    assert effective_wavelength(cfg) == pytest.approx(299_792_458.0 / (77e9 - 3e13 * t_w), rel=1e-12)
    assert effective_wavelength(cfg) > cfg.wavelength


# ---------------------------------------------------------------------------
# kernel backends


@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")
@given(seed=st.integers(0, 2**31 - 1))
def test_correlate_backends_agree(seed):
    rng = np.random.default_rng(seed)
    pos = synthesize_virtual_array(reference_ladder_layout()).positions
    snaps = rng.normal(size=(pos.shape[0], 3)) + 1j * rng.normal(size=(pos.shape[0], 3))
    az, el = np.linspace(-60, 60, 41), np.linspace(-20, 20, 9)
    with _accel.backend("numpy"):
        a = correlate_grid(pos, snaps, az, el)
    with _accel.backend("numba"):
        b = correlate_grid(pos, snaps, az, el)
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-10)
