"""FMCW waveform, TDM-MIMO timing, point-scatterer scenes and beat-signal synthesis.

Sample model for TX ``m``, RX ``n``, chirp ``a`` and fast time ``t``::

    s = sum_q sigma_q exp(j 2 pi R(t_a) / lambda) exp(-j 2 pi k_r (R(t_a) / c) t)

where ``R`` is the full TX -> scatterer -> RX path evaluated with the
scatterer advanced to the chirp start ``t_a = (a * M + m) * T_c``
(round-robin TDM, stop-and-go within the chirp).  The residual video phase
``pi k_r (R / c)^2`` is optional and off by default.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _accel
from ._accel import njit
from .array_design import AntennaLayout
from .errors import AliasedSceneError, ValidationError

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class WaveformConfig:
    """Linear FMCW chirp train parameters (SI units).

    ``wavelength`` is derived from the carrier.  ``chirp_repetition_interval``
    is the duration of one TDM slot; one frame lasts
    ``num_tx * chirps_per_frame_per_tx * chirp_repetition_interval``.
    """

    carrier_frequency: float
    chirp_rate: float
    pulse_duration: float
    sample_rate: float
    samples_per_chirp: int
    chirps_per_frame_per_tx: int
    chirp_repetition_interval: float
    residual_video_phase: bool = False
    wavelength: float = field(init=False)

    def __post_init__(self):
        if not (self.carrier_frequency > 0 and math.isfinite(self.carrier_frequency)):
            raise ValidationError("carrier_frequency must be positive")
        if not self.chirp_rate > 0:
            raise ValidationError("chirp_rate must be positive")
        if not self.sample_rate > 0:
            raise ValidationError("sample_rate must be positive")
        if int(self.samples_per_chirp) != self.samples_per_chirp or self.samples_per_chirp < 2:
            raise ValidationError("samples_per_chirp must be an integer >= 2")
        if int(self.chirps_per_frame_per_tx) != self.chirps_per_frame_per_tx or self.chirps_per_frame_per_tx < 1:
            raise ValidationError("chirps_per_frame_per_tx must be a positive integer")
        if self.samples_per_chirp / self.sample_rate > self.pulse_duration * (1 + 1e-12):
            raise ValidationError("sampling window N_s / f_s exceeds the pulse duration")
        if self.chirp_repetition_interval < self.pulse_duration:
            raise ValidationError("chirp_repetition_interval must be >= pulse_duration")
        object.__setattr__(self, "samples_per_chirp", int(self.samples_per_chirp))
        object.__setattr__(self, "chirps_per_frame_per_tx", int(self.chirps_per_frame_per_tx))
        object.__setattr__(self, "wavelength", SPEED_OF_LIGHT / self.carrier_frequency)

    @property
    def bandwidth(self) -> float:
        """Swept bandwidth over the sampled part of the chirp."""
        return self.chirp_rate * self.samples_per_chirp / self.sample_rate

    @property
    def range_resolution(self) -> float:
        return SPEED_OF_LIGHT / (2.0 * self.bandwidth)

    @property
    def max_path_length(self) -> float:
        """Longest two-way path whose beat frequency stays below f_s / 2."""
        return 0.5 * self.sample_rate * SPEED_OF_LIGHT / self.chirp_rate

    def max_velocity(self, num_tx: int) -> float:
        """Unambiguous radial speed for per-TX Doppler processing."""
        return self.wavelength / (4.0 * num_tx * self.chirp_repetition_interval)

    def frame_time(self, num_tx: int) -> float:
        return num_tx * self.chirps_per_frame_per_tx * self.chirp_repetition_interval

    def beat_frequency(self, path_length: float) -> float:
        return self.chirp_rate * path_length / SPEED_OF_LIGHT


@dataclass(frozen=True)
class Scatterer:
    position: tuple[float, float, float]
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    reflectivity: complex = 1.0 + 0.0j

    def __post_init__(self):
        pos = tuple(float(v) for v in self.position)
        vel = tuple(float(v) for v in self.velocity)
        if len(pos) != 3 or len(vel) != 3:
            raise ValidationError("position and velocity must be 3-vectors")
        if not all(math.isfinite(v) for v in pos + vel):
            raise ValidationError("scatterer position/velocity must be finite")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "velocity", vel)
        object.__setattr__(self, "reflectivity", complex(self.reflectivity))


@dataclass(frozen=True)
class ClutterRegion:
    """Band-limited clutter: monostatic range interval (m), radial velocity interval (m/s), power."""

    range_interval: tuple[float, float]
    velocity_interval: tuple[float, float]
    power: float

    def __post_init__(self):
        r0, r1 = (float(v) for v in self.range_interval)
        v0, v1 = (float(v) for v in self.velocity_interval)
        if not (r0 < r1) or not (v0 < v1):
            raise ValidationError("clutter intervals must be non-empty and increasing")
        if not self.power >= 0:
            raise ValidationError("clutter power must be nonnegative")
        object.__setattr__(self, "range_interval", (r0, r1))
        object.__setattr__(self, "velocity_interval", (v0, v1))
        object.__setattr__(self, "power", float(self.power))


@dataclass(frozen=True)
class Scene:
    scatterers: tuple[Scatterer, ...] = ()
    noise_power: float = 0.0
    clutter_regions: tuple[ClutterRegion, ...] = ()
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scatterers", tuple(self.scatterers))
        object.__setattr__(self, "clutter_regions", tuple(self.clutter_regions))
        if not self.noise_power >= 0:
            raise ValidationError("noise_power must be nonnegative")
        if int(self.rng_seed) != self.rng_seed or self.rng_seed < 0:
            raise ValidationError("rng_seed must be a nonnegative integer")

    def union(self, other: "Scene") -> "Scene":
        return replace(self, scatterers=self.scatterers + other.scatterers)

    def digest(self) -> str:
        """Short stable hash of the scene content (used in run summaries)."""
        h = hashlib.sha256()
        for s in self.scatterers:
            h.update(np.array(s.position + s.velocity + (s.reflectivity.real, s.reflectivity.imag)).tobytes())
        for c in self.clutter_regions:
            h.update(np.array(c.range_interval + c.velocity_interval + (c.power,)).tobytes())
        h.update(np.array([self.noise_power, float(self.rng_seed)]).tobytes())
        return h.hexdigest()[:12]


@dataclass(frozen=True, eq=False)
class DataCube:
    """Dechirped samples ``[channel][chirp][sample]``.

    Channel ``l = m * N + n`` holds the ``N_c`` chirps fired by TX ``m`` and
    received on RX ``n``; chirp ``a`` of that channel started at
    ``(a * M + m) * T_c``.
    """

    samples: np.ndarray
    config: WaveformConfig
    num_tx: int
    num_rx: int

    def __post_init__(self):
        L, nc, ns = self.samples.shape
        if L != self.num_tx * self.num_rx:
            raise ValidationError("channel count must equal num_tx * num_rx")
        if (nc, ns) != (self.config.chirps_per_frame_per_tx, self.config.samples_per_chirp):
            raise ValidationError("cube shape does not match the waveform configuration")

    @property
    def num_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def channel_map(self) -> np.ndarray:
        return np.arange(self.num_channels).reshape(self.num_tx, self.num_rx)

    @property
    def tx_index(self) -> np.ndarray:
        return np.arange(self.num_channels) // self.num_rx


def path_length(tx_position, rx_position, scatterer_position) -> float:
    """Two-way path ``|s - tx| + |s - rx|`` in metres."""
    s = np.asarray(scatterer_position, dtype=np.float64)
    return float(
        np.linalg.norm(s - np.asarray(tx_position, dtype=np.float64))
        + np.linalg.norm(s - np.asarray(rx_position, dtype=np.float64))
    )


# ---------------------------------------------------------------------------
# synthesis kernels
# ---------------------------------------------------------------------------


_ANCHOR = 64  # samples between exact re-anchoring of the phasor recurrence


@njit
def _synth_numba(out, tx, rx, pos, vel, refl, n_tx, t_c, lam, kr_over_c, inv_fs, rvp_coef):  # pragma: no cover - jit
    n_l, n_c, n_s = out.shape
    n_rx = rx.shape[0]
    n_q = pos.shape[0]
    two_pi = 2.0 * math.pi
    for l in range(n_l):
        m = l // n_rx
        n = l % n_rx
        for a in range(n_c):
            t_a = (a * n_tx + m) * t_c
            for q in range(n_q):
                px = pos[q, 0] + vel[q, 0] * t_a
                py = pos[q, 1] + vel[q, 1] * t_a
                pz = pos[q, 2] + vel[q, 2] * t_a
                d1 = math.sqrt((px - tx[m, 0]) ** 2 + (py - tx[m, 1]) ** 2 + (pz - tx[m, 2]) ** 2)
                d2 = math.sqrt((px - rx[n, 0]) ** 2 + (py - rx[n, 1]) ** 2 + (pz - rx[n, 2]) ** 2)
                r = d1 + d2
                ph0 = two_pi * r / lam + rvp_coef * r * r
                amp = refl[q] * complex(math.cos(ph0), math.sin(ph0))
                dph = -two_pi * kr_over_c * r * inv_fs
                step = complex(math.cos(dph), math.sin(dph))
                # rotate a phasor sample by sample, re-anchoring exactly every
                # _ANCHOR samples so rounding drift stays at the 1e-15 level
                for s0 in range(0, n_s, _ANCHOR):
                    ph = dph * s0
                    z = amp * complex(math.cos(ph), math.sin(ph))
                    s1 = min(s0 + _ANCHOR, n_s)
                    for s in range(s0, s1):
                        out[l, a, s] += z
                        z *= step


def _synth_numpy(out, tx, rx, pos, vel, refl, n_tx, t_c, lam, kr_over_c, inv_fs, rvp_coef, q_chunk=32):
    n_l, n_c, n_s = out.shape
    n_rx = rx.shape[0]
    s_idx = np.arange(n_s, dtype=np.float64)
    a_idx = np.arange(n_c, dtype=np.float64)
    for l in range(n_l):
        m, n = divmod(l, n_rx)
        t_a = (a_idx * n_tx + m) * t_c  # (n_c,)
        for q0 in range(0, pos.shape[0], q_chunk):
            sl = slice(q0, q0 + q_chunk)
            p = pos[None, sl, :] + vel[None, sl, :] * t_a[:, None, None]  # (n_c, Q, 3)
            r = np.sqrt(np.sum((p - tx[m]) ** 2, axis=-1)) + np.sqrt(np.sum((p - rx[n]) ** 2, axis=-1))
            amp = refl[None, sl] * np.exp(1j * (2.0 * math.pi * r / lam + rvp_coef * r * r))
            ph = (-2.0 * math.pi * kr_over_c * inv_fs) * r[:, :, None] * s_idx[None, None, :]
            out[l] += np.einsum("aq,aqs->as", amp, np.exp(1j * ph))


def _check_aliasing(config: WaveformConfig, tx, rx, scene: Scene, num_tx: int) -> None:
    if not scene.scatterers:
        return
    t_end = (config.chirps_per_frame_per_tx - 1) * num_tx * config.chirp_repetition_interval
    t_end += (num_tx - 1) * config.chirp_repetition_interval
    limit = config.max_path_length
    for q, s in enumerate(scene.scatterers):
        for t in (0.0, t_end):
            p = np.asarray(s.position) + np.asarray(s.velocity) * t
            d_tx = np.linalg.norm(p[None, :] - tx, axis=1)
            d_rx = np.linalg.norm(p[None, :] - rx, axis=1)
            if min(d_tx.min(), d_rx.min()) <= 1e-9:
                raise ValidationError(f"scatterer {q} coincides with an antenna element")
            # the path is convex in t, so the frame endpoints bound it
            if d_tx.max() + d_rx.max() >= limit:
                raise AliasedSceneError(
                    f"scatterer {q}: path {d_tx.max() + d_rx.max():.3f} m gives a beat "
                    f"frequency at or above f_s/2 (limit {limit:.3f} m)"
                )


def _channel_streams(seed: int, stream: int, n: int) -> list[np.random.Generator]:
    ss = np.random.SeedSequence([int(seed), int(stream)])
    return [np.random.Generator(np.random.PCG64(child)) for child in ss.spawn(n)]


def synthesize_beat_signal(config: WaveformConfig, layout: AntennaLayout, scene: Scene) -> DataCube:
    """Synthesize the dechirped data cube of ``scene`` seen through ``layout``.

    Noise (per-sample power ``scene.noise_power``) and every clutter region
    are drawn from per-channel substreams of ``scene.rng_seed``, so the
    result does not depend on evaluation order.

    Raises
    ------
    AliasedSceneError
        If any scatterer's beat frequency reaches ``f_s / 2`` during the frame.
    """
    tx, rx = layout.positions_3d(config.wavelength)
    m_tx = layout.num_tx
    _check_aliasing(config, tx, rx, scene, m_tx)
    L = m_tx * layout.num_rx
    out = np.zeros((L, config.chirps_per_frame_per_tx, config.samples_per_chirp), dtype=np.complex128)
    if scene.scatterers:
        pos = np.array([s.position for s in scene.scatterers], dtype=np.float64)
        vel = np.array([s.velocity for s in scene.scatterers], dtype=np.float64)
        refl = np.array([s.reflectivity for s in scene.scatterers], dtype=np.complex128)
        rvp = math.pi * config.chirp_rate / SPEED_OF_LIGHT**2 if config.residual_video_phase else 0.0
        kernel = _synth_numba if _accel.use_numba() else _synth_numpy
        kernel(
            out, tx, rx, pos, vel, refl, m_tx, config.chirp_repetition_interval,
            config.wavelength, config.chirp_rate / SPEED_OF_LIGHT, 1.0 / config.sample_rate, rvp,
        )
    if scene.noise_power > 0:
        sd = math.sqrt(scene.noise_power / 2.0)
        for l, rng in enumerate(_channel_streams(scene.rng_seed, 0, L)):
            shape = out.shape[1:]
            out[l] += sd * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    cube = DataCube(out, config, m_tx, layout.num_rx)
    for k, region in enumerate(scene.clutter_regions):
        cube = add_clutter_region(cube, region, _region_seed(scene.rng_seed, k))
    return cube


def _region_seed(seed: int, k: int) -> int:
    return int(np.random.SeedSequence([int(seed), 1 + k]).generate_state(1, np.uint64)[0])


def native_bin_axes(config: WaveformConfig, num_tx: int) -> tuple[np.ndarray, np.ndarray]:
    """Monostatic range (m) and radial velocity (m/s) of the unpadded FFT bins."""
    ns, nc = config.samples_per_chirp, config.chirps_per_frame_per_tx
    rng = np.arange(ns) * config.sample_rate / ns * SPEED_OF_LIGHT / (2.0 * config.chirp_rate)
    signed = np.fft.fftfreq(nc) * nc
    vel = signed / (nc * num_tx * config.chirp_repetition_interval) * config.wavelength / 2.0
    return rng, vel


def add_clutter_region(cube: DataCube, region: ClutterRegion, seed: int) -> DataCube:
    """Add zero-mean Gaussian returns confined to a range/velocity box.

    The returns are drawn directly on the native (unpadded) range/Doppler
    grid of every channel with cell variance ``power * N_s * N_c`` and
    brought back to samples by the inverse of the processing transform, so
    every covered RD cell gains ``power * N_s * N_c`` of variance.  The
    unambiguous range extent is the positive-beat half of the native range
    bins, so a region spanning all of it adds about ``power / 2`` per sample.

    Raises
    ------
    ValidationError
        If the region lies outside the unambiguous extent or selects no bins.
    """
    cfg = cube.config
    r_axis, v_axis = native_bin_axes(cfg, cube.num_tx)
    r_max = cfg.max_path_length / 2.0
    v_max = cfg.max_velocity(cube.num_tx)
    (r0, r1), (v0, v1) = region.range_interval, region.velocity_interval
    if r0 < 0 or r1 > r_max * (1 + 1e-12) or v0 < -v_max * (1 + 1e-12) or v1 > v_max * (1 + 1e-12):
        raise ValidationError(
            f"clutter region outside the unambiguous extent [0, {r_max:.3f}] m x +/-{v_max:.4f} m/s"
        )
    if region.power == 0:
        return cube
    r_sel = (r_axis >= r0) & (r_axis <= r1)
    v_sel = (v_axis >= v0) & (v_axis <= v1)
    if not (r_sel.any() and v_sel.any()):
        raise ValidationError("clutter region selects no range/Doppler bins")
    ns, nc = cfg.samples_per_chirp, cfg.chirps_per_frame_per_tx
    ri = np.flatnonzero(r_sel)
    vi = np.flatnonzero(v_sel)
    sd = math.sqrt(region.power * ns * nc / 2.0)
    out = cube.samples.astype(np.complex128, copy=True)
    for l, rng in enumerate(_channel_streams(seed, 0, cube.num_channels)):
        spec = np.zeros((nc, ns), dtype=np.complex128)
        shape = (vi.size, ri.size)
        spec[np.ix_(vi, ri)] = sd * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        # processing uses the exp(+j) kernel unnormalised; its inverse is fft / n
        out[l] += np.fft.fft2(spec) / (ns * nc)
    return replace(cube, samples=out)


