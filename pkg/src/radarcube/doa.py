"""Channel snapshots and direction-of-arrival estimation by steering correlation.

The spectrum of a snapshot ``s`` is ``|a(az, el)^H s|`` with
``a_l = exp(-j 2 pi p_l . u(az, el))`` (positions in wavelengths, direction
cosines from :mod:`radarcube.angles`).  Two-dimensional estimates are found
coarse-to-fine: the full field of view is scanned on a grid a few times
coarser than the mainlobe, then the strongest lobes are re-evaluated on
the fine grid and the peak is refined by quadratic interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy import optimize

from .angles import AngleGrid, correlate_grid, direction_cosines
from .array_design import VirtualArray
from .cfar import Detection
from .errors import DegenerateSnapshot
from .peaks import climb_labels
from .waveform import SPEED_OF_LIGHT, WaveformConfig


@dataclass(frozen=True, eq=False)
class ChannelSnapshot:
    values: np.ndarray
    detection: Detection | None = None
    compensated: bool = False

    @property
    def degenerate(self) -> bool:
        return not np.any(self.values)

    def __len__(self):
        return self.values.shape[0]


class AngleEstimate(NamedTuple):
    azimuth: float
    elevation: float
    quality: float  # peak-to-second-lobe ratio, dB


@dataclass(frozen=True, eq=False)
class AngleSpectrum:
    """Spectrum magnitude on a 1-D (``el is None``) or 2-D grid."""

    az: np.ndarray
    el: np.ndarray | None
    magnitude: np.ndarray

    @property
    def peak(self):
        idx = np.unravel_index(int(np.argmax(self.magnitude)), self.magnitude.shape)
        mag = float(self.magnitude[idx])
        if self.el is None:
            return (float(self.az[idx[0]]),), mag
        return (float(self.az[idx[0]]), float(self.el[idx[1]])), mag

    def magnitude_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 20.0 * np.log10(self.magnitude)


def _positions(array) -> np.ndarray:
    if isinstance(array, VirtualArray):
        return array.positions
    p = np.asarray(array, dtype=np.float64)
    if p.ndim == 1:
        p = np.stack([p, np.zeros_like(p)], axis=1)
    return p


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------


def extract_snapshot(rdmap, detection: Detection) -> ChannelSnapshot:
    """Values of every channel's RD map at the detection cell."""
    pc = rdmap.per_channel
    _, n_r, n_d = pc.shape
    r, d = detection.range_bin, detection.doppler_bin
    if not (0 <= r < n_r and 0 <= d < n_d):
        raise IndexError(f"detection bin ({r}, {d}) outside map of {n_r} x {n_d}")
    return ChannelSnapshot(pc[:, r, d].astype(np.complex128), detection, False)


def tdm_motion_compensate(snapshot: ChannelSnapshot, radial_velocity: float, config: WaveformConfig, tx_index_of) -> ChannelSnapshot:
    """Undo the per-TX phase rotation a moving target picks up under TDM.

    TX ``m`` fires ``m`` slots after TX 0, during which a target closing at
    ``v`` shortens the path by ``2 v m T_c``; with the sample model's
    ``exp(+j 2 pi R / lambda)`` carrier phase that is a rotation of
    ``-2 pi (2 v / lambda) m T_c``, removed here.
    """
    m = np.asarray(tx_index_of, dtype=np.float64)
    if m.shape != snapshot.values.shape:
        raise ValueError("tx_index_of must give one TX index per channel")
    f_d = 2.0 * radial_velocity / config.wavelength
    rot = np.exp(2j * math.pi * f_d * m * config.chirp_repetition_interval)
    return replace(snapshot, values=snapshot.values * rot, compensated=True)


def effective_wavelength(config: WaveformConfig, window: str = "hann") -> float:
    """Wavelength that maps path differences to phase at an FFT range bin.

    A range bin carries the beat phase at the window's centroid time
    ``t_w``, i.e. ``2 pi R (f_c - k_r t_w) / c``; using this wavelength in
    the steering model removes a ~B/(2 f_c) angle-scale error.
    """
    from .rd_processing import window_centroid

    t_w = window_centroid(window, config.samples_per_chirp) / config.sample_rate
    return SPEED_OF_LIGHT / (config.carrier_frequency - config.chirp_rate * t_w)


def focus_correction(
    tx_m: np.ndarray,
    rx_m: np.ndarray,
    range_m: float,
    azimuth: float,
    elevation: float,
    wavelength: float,
) -> np.ndarray:
    """Per-channel phasor removing the near-field (non-planar) phase terms.

    For a point at ``range_m`` in direction (az, el) the exact two-way path
    of channel ``(m, n)`` differs from the plane-wave model
    ``2 R - (tx + rx) . u`` by a curvature term; the returned
    ``exp(-j 2 pi excess / wavelength)`` cancels it.  Channel order is
    ``m * N + n``.
    """
    uh, uv = direction_cosines(azimuth, elevation)
    el = math.radians(elevation)
    az = math.radians(azimuth)
    s = range_m * np.array([math.cos(el) * math.sin(az), math.cos(el) * math.cos(az), math.sin(el)])
    d_tx = np.linalg.norm(s[None, :] - tx_m, axis=1)
    d_rx = np.linalg.norm(s[None, :] - rx_m, axis=1)
    u3 = np.array([uh, 0.0, uv])
    plane_tx = range_m - tx_m @ u3
    plane_rx = range_m - rx_m @ u3
    excess = (d_tx - plane_tx)[:, None] + (d_rx - plane_rx)[None, :]
    return np.exp(-2j * math.pi * excess.ravel() / wavelength)


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------


def angle_spectrum(
    snapshot,
    array,
    grid: AngleGrid | None = None,
    *,
    axis: str = "az",
    method: str = "direct",
    fft_size: int | None = None,
) -> AngleSpectrum:
    """One-dimensional spectrum along azimuth (at el = 0) or elevation (at az = 0).

    ``method="fft"`` requires uniformly spaced elements along the chosen
    axis and evaluates the spectrum with a zero-padded FFT; the result is
    returned on the FFT-native angles ``asin(k / (fft_size * d))`` inside
    the grid limits.
    """
    values = snapshot.values if isinstance(snapshot, ChannelSnapshot) else np.asarray(snapshot)
    pos = _positions(array)
    if values.shape[0] != pos.shape[0]:
        raise ValueError(f"snapshot length {values.shape[0]} != array size {pos.shape[0]}")
    grid = grid or AngleGrid()
    k = 0 if axis == "az" else 1
    if method == "fft":
        return _fft_spectrum(values, pos[:, k], grid.az_limit if k == 0 else grid.el_limit, fft_size)
    if method != "direct":
        raise ValueError("method must be 'direct' or 'fft'")
    az, el = grid.axes()
    if k == 0:
        mag = correlate_grid(pos, values, az, np.array([0.0]))[:, 0]
        return AngleSpectrum(az, None, mag)
    mag = correlate_grid(pos, values, np.array([0.0]), el)[0, :]
    return AngleSpectrum(el, None, mag)


def _fft_spectrum(values, x, limit, fft_size):
    d = np.diff(np.sort(x))
    step = float(d.min()) if d.size else 0.0
    if step <= 0 or not np.allclose(d, step, atol=1e-9):
        raise ValueError("FFT path needs uniformly spaced, distinct elements")
    idx = np.rint((x - x.min()) / step).astype(int)
    n = int(idx.max()) + 1
    fft_size = fft_size or 1 << int(math.ceil(math.log2(max(8 * n, 64))))
    buf = np.zeros(fft_size, dtype=np.complex128)
    np.add.at(buf, idx, values)
    # sum_l s_l exp(+j 2 pi x_l u) with x_l = x0 + idx_l * step and u = k / (fft_size * step)
    spec = np.fft.ifft(buf) * fft_size
    k = np.fft.fftfreq(fft_size) * fft_size
    u = k / (fft_size * step)
    keep = np.abs(u) <= math.sin(math.radians(limit)) + 1e-12
    order = np.argsort(u[keep])
    ang = np.degrees(np.arcsin(u[keep][order]))
    mag = np.abs(spec[keep][order])
    return AngleSpectrum(ang, None, mag)


def angle_spectrum_2d(snapshot, array, grid: AngleGrid | None = None) -> AngleSpectrum:
    values = snapshot.values if isinstance(snapshot, ChannelSnapshot) else np.asarray(snapshot)
    pos = _positions(array)
    if values.shape[0] != pos.shape[0]:
        raise ValueError(f"snapshot length {values.shape[0]} != array size {pos.shape[0]}")
    grid = grid or AngleGrid()
    az, el = grid.axes()
    if not np.ptp(pos[:, 1]) > 0:
        el = np.array([0.0])
    return AngleSpectrum(az, el, correlate_grid(pos, values, az, el))


# ---------------------------------------------------------------------------
# 2-D estimation
# ---------------------------------------------------------------------------


def _quad_offset(ym, y0, yp) -> float:
    den = ym - 2.0 * y0 + yp
    if den >= 0:
        return 0.0
    return float(np.clip(0.5 * (ym - yp) / den, -0.5, 0.5))


def _quad_offset_2d(w: np.ndarray) -> tuple[float, float]:
    """Vertex of the least-squares quadric through a 3 x 3 neighbourhood.

    The cross term matters: staggered rows tilt the mainlobe in
    (az, el), and separate 1-D fits then slide along the ridge.
    Falls back to the 1-D fits if the quadric is not a maximum.
    """
    # central differences on the unit grid
    gx = 0.5 * (w[2, 1] - w[0, 1])
    gy = 0.5 * (w[1, 2] - w[1, 0])
    hxx = w[2, 1] - 2.0 * w[1, 1] + w[0, 1]
    hyy = w[1, 2] - 2.0 * w[1, 1] + w[1, 0]
    hxy = 0.25 * (w[2, 2] - w[2, 0] - w[0, 2] + w[0, 0])
    det = hxx * hyy - hxy * hxy
    if hxx < 0 and det > 0:
        dx = (-hyy * gx + hxy * gy) / det
        dy = (hxy * gx - hxx * gy) / det
        if abs(dx) <= 1.0 and abs(dy) <= 1.0:
            return float(dx), float(dy)
    return _quad_offset(w[0, 1], w[1, 1], w[2, 1]), _quad_offset(w[1, 0], w[1, 1], w[1, 2])


def _polish(plan: "_Plan", values: np.ndarray, az: float, el: float, mag: float):
    """Continuous maximisation of the spectrum within one grid step.

    The grid argmax plus a local quadric leaves errors of up to a grid
    step along a tilted mainlobe; a bounded simplex search on ``|a^H s|``
    removes them.
    """
    g = plan.grid
    lo_az, hi_az = max(az - g.az_step, -g.az_limit), min(az + g.az_step, g.az_limit)
    if not plan.planar:
        res = optimize.minimize_scalar(
            lambda x: -_correlation_at(plan.pos, values, x, 0.0), bounds=(lo_az, hi_az), method="bounded",
            options={"xatol": 1e-3 * g.az_step})
        return (-res.fun, float(res.x), 0.0) if -res.fun >= mag else (mag, az, el)
    lo_el, hi_el = max(el - g.el_step, -g.el_limit), min(el + g.el_step, g.el_limit)
    x0 = np.array([min(max(az, lo_az), hi_az), min(max(el, lo_el), hi_el)])
    simplex = np.array([x0, x0 + [0.3 * g.az_step, 0.0], x0 + [0.0, 0.3 * g.el_step]])
    res = optimize.minimize(
        lambda x: -_correlation_at(plan.pos, values, x[0], x[1]), x0, method="Nelder-Mead",
        bounds=[(lo_az, hi_az), (lo_el, hi_el)],
        options={"initial_simplex": simplex, "xatol": 1e-3 * min(g.az_step, g.el_step), "fatol": 1e-9 * mag})
    if -res.fun >= mag:
        return float(-res.fun), float(res.x[0]), float(res.x[1])
    return mag, az, el


def _correlation_at(pos: np.ndarray, values: np.ndarray, az: float, el: float) -> float:
    uh, uv = direction_cosines(az, el)
    return float(abs(np.exp(2j * math.pi * (pos[:, 0] * uh + pos[:, 1] * uv)) @ values))


def _coarse_step(extent: float, fine: float, cap: float) -> float:
    if extent <= 0:
        return fine
    beam = math.degrees(0.886 / extent)
    step = min(cap, max(fine, beam / 3.0))
    return fine * max(1, int(step / fine))


class _Plan:
    """Grids shared by all snapshots of one estimation call."""

    def __init__(self, pos: np.ndarray, grid: AngleGrid):
        self.pos = pos
        self.grid = grid
        self.planar = bool(np.ptp(pos[:, 1]) > 0)
        self.az_fine, el_fine = grid.axes()
        self.el_fine = el_fine if self.planar else np.array([0.0])
        self.az_c = _coarse_step(float(np.ptp(pos[:, 0])), grid.az_step, 0.5)
        self.el_c = _coarse_step(float(np.ptp(pos[:, 1])), grid.el_step, 1.0)
        cg = AngleGrid(grid.az_limit, grid.el_limit, self.az_c, self.el_c)
        self.az_coarse, el_coarse = cg.axes()
        self.el_coarse = el_coarse if self.planar else np.array([0.0])
        self.az_half = max(2.0 * self.az_c, 1.5)
        self.el_half = max(2.0 * self.el_c, 3.0)

    def window(self, az0: float, el0: float):
        az = self.az_fine[np.abs(self.az_fine - az0) <= self.az_half + 1e-9]
        el = self.el_fine[np.abs(self.el_fine - el0) <= self.el_half + 1e-9]
        return az, el


def _peaks_for(plan: _Plan, values: np.ndarray, coarse: np.ndarray, max_peaks: int, floor_db: float, n_candidates: int):
    labels = climb_labels(coarse)
    terms = np.unique(labels)
    n_el = coarse.shape[1]
    cvals = coarse.ravel()[terms]
    order = np.argsort(-cvals, kind="stable")
    terms = terms[order]
    cvals = cvals[order]
    found = {}
    for t in terms[:n_candidates]:
        i, j = divmod(int(t), n_el)
        az_w, el_w = plan.window(plan.az_coarse[i], plan.el_coarse[j])
        mag = correlate_grid(plan.pos, values, az_w, el_w)
        for (a, b) in _interior_maxima(mag, az_w, el_w, plan):
            key = (round(float(az_w[a]), 9), round(float(el_w[b]), 9))
            if key in found:
                continue
            if 0 < a < mag.shape[0] - 1 and 0 < b < mag.shape[1] - 1:
                da, de = _quad_offset_2d(mag[a - 1:a + 2, b - 1:b + 2])
            else:
                da = _quad_offset(mag[a - 1, b], mag[a, b], mag[a + 1, b]) if 0 < a < mag.shape[0] - 1 else 0.0
                de = _quad_offset(mag[a, b - 1], mag[a, b], mag[a, b + 1]) if 0 < b < mag.shape[1] - 1 else 0.0
            az = float(az_w[a] + da * plan.grid.az_step)
            el = float(el_w[b] + de * plan.grid.el_step) if plan.planar else 0.0
            found[key] = (float(mag[a, b]), az, el)
    if not found:
        return [], cvals
    ranked = sorted(found.values(), key=lambda v: -v[0])
    top = ranked[0][0]
    floor = top * 10.0 ** (floor_db / 20.0)
    keep = []
    for m, az, el in ranked:
        if m < floor or len(keep) == max_peaks:
            break
        m, az, el = _polish(plan, values, az, el, m)
        # grid maxima on one lobe polish to the same point
        if not any(abs(az - k[1]) <= plan.grid.az_step and abs(el - k[2]) <= plan.grid.el_step for k in keep):
            keep.append((m, az, el))
    return keep, cvals


def _interior_maxima(mag: np.ndarray, az_w, el_w, plan: _Plan):
    """Local maxima of a window, minus those on a window edge the full grid continues past."""
    labels = climb_labels(mag)
    terms = np.unique(labels)
    n_az, n_el = mag.shape
    out = []
    for t in terms:
        a, b = divmod(int(t), n_el)
        if (a == 0 and az_w[0] > plan.az_fine[0]) or (a == n_az - 1 and az_w[-1] < plan.az_fine[-1]):
            continue
        if (b == 0 and el_w[0] > plan.el_fine[0]) or (b == n_el - 1 and el_w[-1] < plan.el_fine[-1]):
            continue
        out.append((a, b))
    return out


def estimate_peaks_2d(
    snapshot,
    array,
    grid: AngleGrid | None = None,
    *,
    max_peaks: int = 2,
    floor_db: float = -6.0,
    n_candidates: int = 3,
) -> list[AngleEstimate]:
    """Up to ``max_peaks`` spectrum peaks within ``floor_db`` of the strongest."""
    return estimate_batch([snapshot], array, grid, max_peaks=max_peaks, floor_db=floor_db,
                          n_candidates=n_candidates)[0]


def estimate_angles_2d(snapshot, array, grid: AngleGrid | None = None) -> AngleEstimate:
    """Azimuth/elevation of the strongest spectrum peak.

    Returns
    -------
    AngleEstimate
        ``(azimuth, elevation, quality)`` in degrees and dB; quality is the
        ratio of the peak to the strongest other lobe (``inf`` if none).

    Raises
    ------
    DegenerateSnapshot
        For an all-zero snapshot.
    """
    return estimate_batch([snapshot], array, grid, max_peaks=1)[0][0]


def estimate_batch(
    snapshots,
    array,
    grid: AngleGrid | None = None,
    *,
    max_peaks: int = 1,
    floor_db: float = -6.0,
    n_candidates: int = 3,
) -> list[list[AngleEstimate]]:
    """Estimate angles for many snapshots sharing one coarse-grid evaluation."""
    pos = _positions(array)
    grid = grid or AngleGrid()
    vals = []
    for s in snapshots:
        v = s.values if isinstance(s, ChannelSnapshot) else np.asarray(s, dtype=np.complex128)
        if v.shape[0] != pos.shape[0]:
            raise ValueError(f"snapshot length {v.shape[0]} != array size {pos.shape[0]}")
        if not np.any(v):
            raise DegenerateSnapshot("all-zero snapshot")
        vals.append(v)
    if not vals:
        return []
    plan = _Plan(pos, grid)
    coarse = correlate_grid(pos, np.stack(vals, axis=1), plan.az_coarse, plan.el_coarse)
    out = []
    for k, v in enumerate(vals):
        peaks, cvals = _peaks_for(plan, v, coarse[:, :, k], max_peaks, floor_db, max(n_candidates, max_peaks + 1))
        if len(cvals) > 1 and cvals[1] > 0:
            quality = float(20.0 * math.log10(peaks[0][0] / cvals[1])) if peaks else 0.0
        else:
            quality = math.inf
        out.append([AngleEstimate(az, el, quality) for (_, az, el) in peaks])
    return out


def refine_peaks(snapshots, array, seeds, grid: AngleGrid | None = None) -> list[AngleEstimate]:
    """Local spectrum maximum near each seed direction.

    Each snapshot is searched on the fine grid inside the mainlobe-sized
    window around its seed (an :class:`AngleEstimate` or ``(az, el)``);
    the maximum nearest the seed is interpolated and polished.  Used after
    near-field focusing, which moves a peak by a fraction of a beamwidth
    but must not hand a weak source over to a stronger neighbour.
    """
    pos = _positions(array)
    grid = grid or AngleGrid()
    plan = _Plan(pos, grid)
    out = []
    for s, seed in zip(snapshots, seeds):
        v = s.values if isinstance(s, ChannelSnapshot) else np.asarray(s, dtype=np.complex128)
        az0, el0 = float(seed[0]), float(seed[1]) if plan.planar else 0.0
        quality = seed[2] if len(seed) > 2 else math.inf
        az_w, el_w = plan.window(az0, el0)
        mag = correlate_grid(pos, v, az_w, el_w)
        cands = _interior_maxima(mag, az_w, el_w, plan)
        if not cands:
            out.append(AngleEstimate(az0, el0, quality))
            continue
        a, b = min(cands, key=lambda ab: ((az_w[ab[0]] - az0) / grid.az_step) ** 2 + ((el_w[ab[1]] - el0) / grid.el_step) ** 2)
        if 0 < a < mag.shape[0] - 1 and 0 < b < mag.shape[1] - 1:
            da, de = _quad_offset_2d(mag[a - 1:a + 2, b - 1:b + 2])
        else:
            da = _quad_offset(mag[a - 1, b], mag[a, b], mag[a + 1, b]) if 0 < a < mag.shape[0] - 1 else 0.0
            de = _quad_offset(mag[a, b - 1], mag[a, b], mag[a, b + 1]) if 0 < b < mag.shape[1] - 1 else 0.0
        az = float(az_w[a] + da * grid.az_step)
        el = float(el_w[b] + de * grid.el_step) if plan.planar else 0.0
        _, az, el = _polish(plan, v, az, el, float(mag[a, b]))
        out.append(AngleEstimate(az, el, quality))
    return out
