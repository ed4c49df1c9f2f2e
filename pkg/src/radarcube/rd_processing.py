"""Range and Doppler FFTs and non-coherent channel integration.

Both transforms use the ``exp(+j 2 pi k n / N)`` kernel without
normalisation, which places the beat tone ``exp(-j 2 pi f_b t)`` at the
positive bin ``f_b * N / f_s`` and a closing target (slow-time phase
``exp(-j 2 pi (2 v / lambda) t_a)``) at a positive Doppler bin.  Doppler
bins are stored unshifted: bin 0 is zero velocity, bins above ``N_d / 2``
are negative (receding) velocities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.fft
from scipy.signal import get_window

from .waveform import SPEED_OF_LIGHT, DataCube, WaveformConfig

WINDOWS = ("none", "hann")


def window_coefficients(kind: str, n: int) -> np.ndarray:
    """Periodic window of length ``n`` (``none`` gives ones)."""
    if kind == "none":
        return np.ones(n)
    if kind == "hann":
        return get_window("hann", n, fftbins=True)
    raise ValueError(f"unknown window {kind!r}; expected one of {WINDOWS}")


def window_centroid(kind: str, n: int) -> float:
    """Amplitude-weighted centre of a window, in samples."""
    w = window_coefficients(kind, n)
    return float(np.dot(np.arange(n), w) / np.sum(w))


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _default_fft(n: int) -> int:
    return 1 << int(math.ceil(math.log2(2 * n)))


@dataclass(frozen=True, eq=False)
class RangeProfiles:
    """Range FFT output ``[channel][chirp][range bin]``."""

    data: np.ndarray
    fft_size: int
    window_kind: str
    config: WaveformConfig
    num_tx: int
    num_rx: int

    @property
    def range_bin_size(self) -> float:
        cfg = self.config
        return SPEED_OF_LIGHT * cfg.sample_rate / (2.0 * cfg.chirp_rate * self.fft_size)


@dataclass(frozen=True, eq=False)
class RDMap:
    """Per-channel complex RD maps ``[L][N_r][N_d]`` and their power sum ``[N_r][N_d]``."""

    per_channel: np.ndarray | None
    integrated: np.ndarray | None
    range_bin_size: float
    velocity_bin_size: float
    window_kind: str
    range_fft_size: int
    doppler_fft_size: int
    config: WaveformConfig | None = None
    num_tx: int = 1
    num_rx: int = 1

    @property
    def shape(self) -> tuple[int, int]:
        src = self.integrated if self.integrated is not None else self.per_channel[0]
        return src.shape

    def range_of_bin(self, r):
        return np.asarray(r, dtype=np.float64) * self.range_bin_size

    def signed_doppler(self, d):
        """Signed Doppler index for stored bin ``d`` (may be fractional)."""
        n = self.doppler_fft_size
        d = np.asarray(d, dtype=np.float64)
        return np.where(d >= n / 2.0, d - n, d)

    def velocity_of_bin(self, d):
        return self.signed_doppler(d) * self.velocity_bin_size

    def range_axis(self) -> np.ndarray:
        return self.range_of_bin(np.arange(self.shape[0]))

    def velocity_axis(self) -> np.ndarray:
        return self.velocity_of_bin(np.arange(self.shape[1]))


def _check_size(fft_size, n, what):
    if fft_size < n:
        raise ValueError(f"{what} fft_size {fft_size} < {n}")
    if not _is_pow2(fft_size):
        raise ValueError(f"{what} fft_size must be a power of two")


def _range_spectrum(x, fft_size, window, crop, workers):
    rdtype = np.float32 if x.dtype == np.complex64 else np.float64
    w = window_coefficients(window, x.shape[-1]).astype(rdtype)
    spec = scipy.fft.ifft(x * w, n=fft_size, axis=-1, norm="forward", workers=workers)
    return spec[..., : fft_size // 2] if crop else spec


def _doppler_spectrum(x, fft_size, window, workers):
    rdtype = np.float32 if x.dtype == np.complex64 else np.float64
    w = window_coefficients(window, x.shape[1]).astype(rdtype)
    spec = scipy.fft.ifft(x * w[None, :, None], n=fft_size, axis=1, norm="forward", workers=workers)
    return np.ascontiguousarray(spec.transpose(0, 2, 1))


def _accumulate_power(acc, per_channel):
    for ch in per_channel:
        acc += ch.real.astype(np.float64) ** 2 + ch.imag.astype(np.float64) ** 2
    return acc


def range_fft(cube: DataCube, fft_size: int | None = None, window: str = "hann", *, crop: bool = True, workers: int | None = None) -> RangeProfiles:
    """Windowed, zero-padded FFT along fast time.

    Parameters
    ----------
    cube : DataCube
    fft_size : int, optional
        Power of two >= N_s; defaults to twice N_s rounded up to a power of two.
    window : {"hann", "none"}
    crop : bool
        Keep only the bins below f_s / 2 (the unaliased range extent).

    Returns
    -------
    RangeProfiles
        Bin ``f`` corresponds to monostatic range ``f * f_s / fft_size * c / (2 k_r)``.
    """
    ns = cube.config.samples_per_chirp
    fft_size = _default_fft(ns) if fft_size is None else int(fft_size)
    _check_size(fft_size, ns, "range")
    spec = _range_spectrum(cube.samples, fft_size, window, crop, workers)
    return RangeProfiles(spec, fft_size, window, cube.config, cube.num_tx, cube.num_rx)


def _rdmap_meta(cfg, num_tx, num_rx, range_fft_size, doppler_fft_size, kind, per_channel=None, integrated=None):
    return RDMap(
        per_channel=per_channel,
        integrated=integrated,
        range_bin_size=SPEED_OF_LIGHT * cfg.sample_rate / (2.0 * cfg.chirp_rate * range_fft_size),
        velocity_bin_size=cfg.wavelength / (2.0 * num_tx * cfg.chirp_repetition_interval * doppler_fft_size),
        window_kind=kind,
        range_fft_size=range_fft_size,
        doppler_fft_size=doppler_fft_size,
        config=cfg,
        num_tx=num_tx,
        num_rx=num_rx,
    )


def doppler_fft(profiles: RangeProfiles, fft_size: int | None = None, window: str | None = None, *, workers: int | None = None) -> RDMap:
    """FFT across the ``N_c`` chirps of each channel (slow-time step ``M * T_c``).

    The Doppler window defaults to the range window.  Returns an
    :class:`RDMap` with ``per_channel`` filled and ``integrated`` unset.
    """
    cfg = profiles.config
    nc = cfg.chirps_per_frame_per_tx
    window = profiles.window_kind if window is None else window
    fft_size = _default_fft(nc) if fft_size is None else int(fft_size)
    _check_size(fft_size, nc, "doppler")
    per_channel = _doppler_spectrum(profiles.data, fft_size, window, workers)
    kind = window if window == profiles.window_kind else f"{profiles.window_kind}/{window}"
    return _rdmap_meta(cfg, profiles.num_tx, profiles.num_rx, profiles.fft_size, fft_size, kind, per_channel)


def integrate_channels(rdmap: RDMap) -> RDMap:
    """Square-law sum over channels, accumulated in channel order (float64)."""
    pc = rdmap.per_channel
    if pc is None:
        raise ValueError("RD map has no per-channel data")
    acc = _accumulate_power(np.zeros(pc.shape[1:], dtype=np.float64), pc)
    return replace(rdmap, integrated=acc)


def compute_rd_map(
    cube: DataCube,
    range_fft_size: int | None = None,
    doppler_fft_size: int | None = None,
    window: str = "hann",
    *,
    keep_per_channel: bool = True,
    chunk_channels: int = 16,
    workers: int | None = None,
) -> RDMap:
    """Range FFT, Doppler FFT and integration in one call.

    Channels are transformed in chunks of ``chunk_channels`` to bound the
    working set; the integrated map is accumulated in channel order, so the
    result does not depend on the chunk size.
    """
    cfg = cube.config
    ns, nc = cfg.samples_per_chirp, cfg.chirps_per_frame_per_tx
    nr_fft = _default_fft(ns) if range_fft_size is None else int(range_fft_size)
    nd_fft = _default_fft(nc) if doppler_fft_size is None else int(doppler_fft_size)
    _check_size(nr_fft, ns, "range")
    _check_size(nd_fft, nc, "doppler")
    L = cube.num_channels
    cdtype = np.complex64 if cube.samples.dtype == np.complex64 else np.complex128
    per_channel = np.empty((L, nr_fft // 2, nd_fft), dtype=cdtype) if keep_per_channel else None
    acc = np.zeros((nr_fft // 2, nd_fft), dtype=np.float64)
    chunk = max(1, int(chunk_channels))
    for start in range(0, L, chunk):
        x = cube.samples[start : start + chunk]
        rd = _doppler_spectrum(_range_spectrum(x, nr_fft, window, True, workers), nd_fft, window, workers)
        _accumulate_power(acc, rd)
        if keep_per_channel:
            per_channel[start : start + chunk] = rd
    return _rdmap_meta(cfg, cube.num_tx, cube.num_rx, nr_fft, nd_fft, window, per_channel, acc)
