"""4-D radar points, Cartesian conversion and cloud quality metrics.

Coordinates: ``y`` is boresight, ``x`` to the right, ``z`` up::

    x = r cos(el) sin(az),  y = r cos(el) cos(az),  z = r sin(el)

Radial velocity is positive for closing targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .cfar import Detection


def spherical_to_cartesian(range_m, azimuth_deg, elevation_deg):
    """Convert (r, az, el) to (x, y, z); broadcasts over array inputs."""
    r = np.asarray(range_m, dtype=np.float64)
    if np.any(r <= 0):
        raise ValueError("range must be positive")
    az = np.deg2rad(azimuth_deg)
    el = np.deg2rad(elevation_deg)
    ce = np.cos(el)
    out = (r * ce * np.sin(az), r * ce * np.cos(az), r * np.sin(el))
    if np.ndim(out[0]) == 0:
        return tuple(float(v) for v in out)
    return out


def cartesian_to_spherical(x, y, z):
    """Inverse of :func:`spherical_to_cartesian`; angles in degrees."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    r = np.sqrt(x * x + y * y + z * z)
    if np.any(r <= 0):
        raise ValueError("origin has no direction")
    az = np.rad2deg(np.arctan2(x, y))
    el = np.rad2deg(np.arctan2(z, np.hypot(x, y)))
    out = (r, az, el)
    if np.ndim(r) == 0:
        return tuple(float(v) for v in out)
    return out


@dataclass(frozen=True)
class RadarPoint:
    range: float
    radial_velocity: float
    azimuth: float
    elevation: float
    intensity: float
    x: float
    y: float
    z: float

    @classmethod
    def from_spherical(cls, range_m, velocity, azimuth, elevation, intensity) -> "RadarPoint":
        x, y, z = spherical_to_cartesian(range_m, azimuth, elevation)
        return cls(float(range_m), float(velocity), float(azimuth), float(elevation), float(intensity), x, y, z)


@dataclass(frozen=True)
class PointCloud:
    points: tuple[RadarPoint, ...] = ()

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def xyz(self) -> np.ndarray:
        if not self.points:
            return np.zeros((0, 3))
        return np.array([(p.x, p.y, p.z) for p in self.points])


@dataclass(frozen=True)
class CloudMetrics:
    point_count: int
    extent: tuple[float, float, float]
    extent_error: tuple[float, float, float] | None
    density_gain: Fraction | None


def _parabolic(ym, y0, yp) -> float:
    den = ym - 2.0 * y0 + yp
    if den >= 0:
        return 0.0
    return float(np.clip(0.5 * (ym - yp) / den, -0.5, 0.5))


def interpolated_bins(power: np.ndarray, r: int, d: int) -> tuple[float, float]:
    """Sub-bin peak position by parabolic fit of log power on each axis.

    The Doppler axis wraps; range bins at the map edge are not refined.
    """
    n_r, n_d = power.shape
    with np.errstate(divide="ignore"):
        lp = lambda v: math.log(v) if v > 0 else -745.0  # noqa: E731
        dr = 0.0
        if 0 < r < n_r - 1:
            dr = _parabolic(lp(power[r - 1, d]), lp(power[r, d]), lp(power[r + 1, d]))
        dd = _parabolic(lp(power[r, (d - 1) % n_d]), lp(power[r, d]), lp(power[r, (d + 1) % n_d]))
    return r + dr, d + dd


def build_point_cloud(detections, angles, rdmap) -> PointCloud:
    """Combine detections with their angle estimates.

    Parameters
    ----------
    detections : sequence of Detection
    angles : sequence
        One entry per detection: an ``(az, el, ...)`` tuple, or a list of
        such tuples (multi-peak mode); each tuple becomes one point.
    rdmap : RDMap
        Supplies bin sizes and the integrated map for sub-bin refinement.

    Points with a non-positive refined range (DC bin) are dropped.
    """
    if len(detections) != len(angles):
        raise ValueError(f"{len(detections)} detections but {len(angles)} angle entries")
    pts = []
    power = rdmap.integrated
    for det, ang in zip(detections, angles):
        if power is not None:
            rf, df = interpolated_bins(power, det.range_bin, det.doppler_bin)
        else:
            rf, df = float(det.range_bin), float(det.doppler_bin)
        rng = float(rdmap.range_of_bin(rf))
        vel = float(rdmap.velocity_of_bin(df % rdmap.doppler_fft_size))
        if rng <= 0:
            continue
        intensity = 10.0 * math.log10(det.amplitude / det.noise_estimate) if det.noise_estimate > 0 else math.inf
        group = ang if (len(ang) and isinstance(ang[0], (tuple, list))) else [ang]
        for a in group:
            pts.append(RadarPoint.from_spherical(rng, vel, float(a[0]), float(a[1]), intensity))
    return PointCloud(tuple(pts))


def robust_extent(xyz: np.ndarray, lo: float = 2.0, hi: float = 98.0) -> tuple[float, float, float]:
    """Per-axis span between the ``lo`` and ``hi`` percentiles."""
    q = np.percentile(xyz, [lo, hi], axis=0)
    return tuple(float(v) for v in (q[1] - q[0]))


def cloud_metrics(cloud: PointCloud, ground_truth_box=None, baseline: PointCloud | None = None) -> CloudMetrics:
    """Extent, extent error and density gain of a cloud.

    Parameters
    ----------
    ground_truth_box : (length, width, height), optional
        Box size along (x, y, z) in metres.
    baseline : PointCloud, optional
        Reference cloud for ``density_gain = len(cloud) / len(baseline)``,
        returned as an exact fraction.
    """
    if len(cloud) == 0:
        raise ValueError("cloud is empty")
    ext = robust_extent(cloud.xyz())
    err = None
    if ground_truth_box is not None:
        box = tuple(float(v) for v in ground_truth_box)
        err = tuple(abs(e - b) for e, b in zip(ext, box))
    gain = None
    if baseline is not None:
        if len(baseline) == 0:
            raise ValueError("baseline cloud is empty")
        gain = Fraction(len(cloud), len(baseline))
    return CloudMetrics(len(cloud), ext, err, gain)


def density_gain(count: int, baseline_count: int) -> Fraction:
    """``count / baseline_count`` as an exact fraction."""
    if baseline_count <= 0 or count < 0:
        raise ValueError("counts must be nonnegative with a positive baseline")
    return Fraction(int(count), int(baseline_count))
