"""Angle grids, direction cosines and the steering-correlation kernel.

Convention used throughout the package: a direction (azimuth, elevation)
has direction cosines ``u = (sin(az) * cos(el), sin(el))`` against the
(horizontal, vertical) element coordinates, and the steering vector of an
element at ``p`` (in wavelengths) is ``exp(-j 2 pi p . u)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _accel
from ._accel import njit

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class AngleGrid:
    """Rectangular azimuth x elevation grid in degrees.

    The grid spans ``[-az_limit, az_limit] x [-el_limit, el_limit]`` and is
    anchored on a centre direction so that the centre is always a grid
    node (see :meth:`axes`).
    """

    az_limit: float = 60.0
    el_limit: float = 20.0
    az_step: float = 0.1
    el_step: float = 0.5

    def __post_init__(self):
        for name in ("az_limit", "el_limit"):
            v = getattr(self, name)
            if not (0.0 <= v <= 90.0):
                raise ValueError(f"{name} must lie in [0, 90] degrees, got {v}")
        for name in ("az_step", "el_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def axes(self, center: tuple[float, float] = (0.0, 0.0)) -> tuple[np.ndarray, np.ndarray]:
        """Return (az, el) node vectors containing ``center`` exactly."""
        return (
            _axis(center[0], self.az_limit, self.az_step),
            _axis(center[1], self.el_limit, self.el_step),
        )

    def contains(self, az: float, el: float) -> bool:
        eps = 1e-9
        return abs(az) <= self.az_limit + eps and abs(el) <= self.el_limit + eps


def _axis(center: float, limit: float, step: float) -> np.ndarray:
    eps = 1e-9
    if abs(center) > limit + eps:
        raise ValueError(f"centre {center} outside +/-{limit}")
    k_lo = math.ceil((-limit - center) / step - eps)
    k_hi = math.floor((limit - center) / step + eps)
    k = np.arange(k_lo, k_hi + 1, dtype=np.float64)
    return center + k * step


def direction_cosines(az_deg, el_deg):
    """Return ``(u_h, u_v)`` for azimuth/elevation in degrees (broadcasting)."""
    az = np.deg2rad(az_deg)
    el = np.deg2rad(el_deg)
    return np.sin(az) * np.cos(el), np.sin(el)


def steering_vector(positions: np.ndarray, az_deg: float, el_deg: float) -> np.ndarray:
    """Unit-modulus steering vector ``exp(-j 2 pi p . u)`` for ``positions`` (L, 2)."""
    positions = np.asarray(positions, dtype=np.float64)
    uh, uv = direction_cosines(az_deg, el_deg)
    return np.exp(-1j * TWO_PI * (positions[:, 0] * uh + positions[:, 1] * uv))


# ---------------------------------------------------------------------------
# steering correlation |a(az, el)^H s| over a grid
# ---------------------------------------------------------------------------


@njit(parallel=False)
def _correlate_numba(xs, group, pz, snaps, az_rad, el_rad):  # pragma: no cover - jit
    n_l, n_d = snaps.shape
    n_x = xs.shape[0]
    n_az = az_rad.shape[0]
    n_el = el_rad.shape[0]
    out = np.empty((n_az, n_el, n_d), dtype=np.float64)
    sin_az = np.sin(az_rad)
    grouped = np.empty((n_x, n_d), dtype=np.complex128)
    for j in range(n_el):
        uz = math.sin(el_rad[j])
        cz = math.cos(el_rad[j])
        grouped[:, :] = 0.0
        for l in range(n_l):
            ph = TWO_PI * pz[l] * uz
            rot = complex(math.cos(ph), math.sin(ph))
            g = group[l]
            for d in range(n_d):
                grouped[g, d] += rot * snaps[l, d]
        acc = np.empty(n_d, dtype=np.complex128)
        for i in range(n_az):
            ux = sin_az[i] * cz
            acc[:] = 0.0
            for x in range(n_x):
                ph = TWO_PI * xs[x] * ux
                e = complex(math.cos(ph), math.sin(ph))
                for d in range(n_d):
                    acc[d] += e * grouped[x, d]
            for d in range(n_d):
                out[i, j, d] = abs(acc[d])
    return out


def _correlate_numpy(xs, group, pz, snaps, az_rad, el_rad):
    n_d = snaps.shape[1]
    out = np.empty((az_rad.size, el_rad.size, n_d), dtype=np.float64)
    sin_az = np.sin(az_rad)
    for j, el in enumerate(el_rad):
        rot = np.exp(1j * TWO_PI * pz * math.sin(el))
        grouped = np.zeros((xs.size, n_d), dtype=np.complex128)
        np.add.at(grouped, group, rot[:, None] * snaps)
        ux = sin_az * math.cos(el)
        e = np.exp(1j * TWO_PI * np.outer(ux, xs))
        out[:, j, :] = np.abs(e @ grouped)
    return out


def correlate_grid(positions, snapshots, az_deg, el_deg) -> np.ndarray:
    """Evaluate ``|a(az, el)^H s|`` for every grid node and snapshot.

    Parameters
    ----------
    positions : (L, 2) array
        Element positions in wavelengths (horizontal, vertical).
    snapshots : (L,) or (L, D) complex array
    az_deg, el_deg : 1-D arrays
        Grid axes in degrees.

    Returns
    -------
    ndarray
        Magnitudes with shape (n_az, n_el) for a single snapshot or
        (n_az, n_el, D) for a batch.

    Notes
    -----
    Elements sharing a horizontal coordinate are pre-combined per
    elevation row, so the cost scales with the number of distinct
    horizontal positions rather than the number of elements.
    """
    positions = np.asarray(positions, dtype=np.float64)
    snaps = np.asarray(snapshots, dtype=np.complex128)
    single = snaps.ndim == 1
    if single:
        snaps = snaps[:, None]
    if snaps.shape[0] != positions.shape[0]:
        raise ValueError(
            f"snapshot length {snaps.shape[0]} does not match {positions.shape[0]} elements"
        )
    xs, group = np.unique(positions[:, 0], return_inverse=True)
    group = group.astype(np.int64).ravel()
    az_rad = np.deg2rad(np.asarray(az_deg, dtype=np.float64))
    el_rad = np.deg2rad(np.asarray(el_deg, dtype=np.float64))
    pz = np.ascontiguousarray(positions[:, 1])
    snaps = np.ascontiguousarray(snaps)
    if _accel.use_numba():
        out = _correlate_numba(xs, group, pz, snaps, az_rad, el_rad)
    else:
        out = _correlate_numpy(xs, group, pz, snaps, az_rad, el_rad)
    return out[:, :, 0] if single else out
