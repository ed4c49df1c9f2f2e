"""MIMO layouts, virtual arrays, coarray redundancy and ladder-layout search.

All positions are two-dimensional ``(horizontal, vertical)`` coordinates in
carrier wavelengths.  Virtual elements use the sum convention
``p_v = p_tx + p_rx`` so that the steering phase of a virtual element is
``2 pi p_v . u`` (see :mod:`radarcube.angles`).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import ndimage

from .angles import AngleGrid, correlate_grid, steering_vector
from .errors import InfeasibleConstraints, MainlobeUnresolved, ValidationError
from .peaks import climb_labels

HALF_POWER = 1.0 / math.sqrt(2.0)
_POS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class AntennaLayout:
    """Physical TX/RX element positions in wavelengths.

    Parameters
    ----------
    tx_positions, rx_positions : array_like, shape (M, 2) / (N, 2)
        (horizontal, vertical) coordinates.
    board_extent : (width, height)
        Board bounding box ``[0, width] x [0, height]`` that must contain
        every element.
    """

    tx_positions: np.ndarray
    rx_positions: np.ndarray
    board_extent: tuple[float, float] = (35.0, 35.0)

    def __post_init__(self):
        tx = _as_positions(self.tx_positions, "tx_positions")
        rx = _as_positions(self.rx_positions, "rx_positions")
        w, h = (float(v) for v in self.board_extent)
        if not (w >= 0 and h >= 0):
            raise ValidationError("board_extent must be nonnegative")
        for name, arr in (("tx", tx), ("rx", rx)):
            if _has_duplicates(arr):
                raise ValidationError(f"coincident {name} positions")
            lo_ok = np.all(arr >= -_POS_TOL)
            hi_ok = np.all(arr[:, 0] <= w + _POS_TOL) and np.all(arr[:, 1] <= h + _POS_TOL)
            if not (lo_ok and hi_ok):
                raise ValidationError(f"{name} positions fall outside the {w} x {h} board")
        object.__setattr__(self, "tx_positions", tx)
        object.__setattr__(self, "rx_positions", rx)
        object.__setattr__(self, "board_extent", (w, h))

    @property
    def num_tx(self) -> int:
        return self.tx_positions.shape[0]

    @property
    def num_rx(self) -> int:
        return self.rx_positions.shape[0]

    def positions_3d(self, wavelength: float) -> tuple[np.ndarray, np.ndarray]:
        """TX and RX positions in metres on the ``y = 0`` plane (x right, z up)."""
        def lift(p):
            out = np.zeros((p.shape[0], 3))
            out[:, 0] = p[:, 0] * wavelength
            out[:, 2] = p[:, 1] * wavelength
            return out

        return lift(self.tx_positions), lift(self.rx_positions)

    def __eq__(self, other):
        if not isinstance(other, AntennaLayout):
            return NotImplemented
        return (
            np.array_equal(self.tx_positions, other.tx_positions)
            and np.array_equal(self.rx_positions, other.rx_positions)
            and self.board_extent == other.board_extent
        )

    __hash__ = None


def _as_positions(p, name) -> np.ndarray:
    arr = np.array(p, dtype=np.float64, copy=True)
    if arr.ndim == 1:
        arr = np.stack([arr, np.zeros_like(arr)], axis=1)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
        raise ValidationError(f"{name} must be a non-empty list of (h, v) pairs")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


def _has_duplicates(arr: np.ndarray) -> bool:
    for i, j in itertools.combinations(range(arr.shape[0]), 2):
        if np.all(np.abs(arr[i] - arr[j]) <= _POS_TOL):
            return True
    return False


@dataclass(frozen=True, eq=False)
class VirtualArray:
    """Virtual elements ``p = tx_m + rx_n`` stored at index ``l = m * N + n``."""

    positions: np.ndarray
    num_tx: int
    num_rx: int

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    @property
    def channel_map(self) -> np.ndarray:
        """(M, N) array with the channel index of every TX/RX pair."""
        return np.arange(self.size).reshape(self.num_tx, self.num_rx)

    @property
    def tx_index(self) -> np.ndarray:
        return np.arange(self.size) // self.num_rx

    @property
    def rx_index(self) -> np.ndarray:
        return np.arange(self.size) % self.num_rx

    def channel(self, m: int, n: int) -> int:
        if not (0 <= m < self.num_tx and 0 <= n < self.num_rx):
            raise IndexError((m, n))
        return m * self.num_rx + n

    @property
    def is_planar(self) -> bool:
        """True if the array has vertical aperture (can resolve elevation)."""
        return bool(np.ptp(self.positions[:, 1]) > _POS_TOL)


def synthesize_virtual_array(layout: AntennaLayout) -> VirtualArray:
    tx = layout.tx_positions
    rx = layout.rx_positions
    pos = (tx[:, None, :] + rx[None, :, :]).reshape(-1, 2)
    pos.setflags(write=False)
    return VirtualArray(pos, layout.num_tx, layout.num_rx)


# ---------------------------------------------------------------------------
# coarray statistics
# ---------------------------------------------------------------------------


def distinct_lags(positions, tol: float = _POS_TOL) -> np.ndarray:
    """Sorted distinct positive pairwise differences (clustered within ``tol``)."""
    x = np.sort(np.asarray(positions, dtype=np.float64).ravel())
    i, j = np.triu_indices(x.size, k=1)
    d = np.sort(x[j] - x[i])
    d = d[d > tol]
    if d.size == 0:
        return d
    keep = np.concatenate(([True], np.diff(d) > tol))
    return d[keep]


def redundancy(positions) -> Fraction:
    """Coarray redundancy ``C(L, 2) / L_max``.

    ``L_max`` counts distinct positive pairwise differences (tolerance
    1e-9 wavelength).  Returned as an exact :class:`fractions.Fraction`.

    Raises
    ------
    ValueError
        Fewer than two elements, or all elements coincide.
    """
    x = np.asarray(positions, dtype=np.float64).ravel()
    if x.size < 2:
        raise ValueError("redundancy needs at least two elements")
    n_lags = distinct_lags(x).size
    if n_lags == 0:
        raise ValueError("all elements coincide; no positive lag")
    return Fraction(math.comb(x.size, 2), n_lags)


def covariance_model(positions, doas, powers, noise_power: float = 0.0) -> np.ndarray:
    """Narrow-band covariance of a 1-D array.

    ``R_ij = sum_k P_k exp(-j 2 pi (d_i - d_j) sin(phi_k)) + noise * [i == j]``
    with positions in wavelengths and DOAs in degrees.  The result is
    Hermitian bit-for-bit (the lower triangle mirrors the upper).
    """
    d = np.asarray(positions, dtype=np.float64).ravel()
    doas = np.atleast_1d(np.asarray(doas, dtype=np.float64))
    powers = np.atleast_1d(np.asarray(powers, dtype=np.float64))
    if doas.shape != powers.shape:
        raise ValueError("doas and powers must have the same length")
    if np.any(powers < 0) or noise_power < 0:
        raise ValueError("powers must be nonnegative")
    lag = d[:, None] - d[None, :]
    s = np.sin(np.deg2rad(doas))
    r = np.zeros(lag.shape, dtype=np.complex128)
    for p_k, s_k in zip(powers, s):
        r += p_k * np.exp(-2j * np.pi * lag * s_k)
    upper = np.triu(r, k=1)
    r = upper + upper.conj().T + np.diag(np.real(np.diag(r)) + noise_power).astype(np.complex128)
    return r


# ---------------------------------------------------------------------------
# ambiguity map and resolution
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AmbiguityMap:
    """Normalised array response ``|chi|`` on an azimuth x elevation grid."""

    az: np.ndarray
    el: np.ndarray
    magnitude: np.ndarray  # (n_az, n_el)
    reference: tuple[float, float]

    @property
    def reference_index(self) -> tuple[int, int]:
        return (
            int(np.argmin(np.abs(self.az - self.reference[0]))),
            int(np.argmin(np.abs(self.el - self.reference[1]))),
        )

    def magnitude_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 20.0 * np.log10(self.magnitude)


def ambiguity_map(array, reference=(0.0, 0.0), grid: AngleGrid | None = None) -> AmbiguityMap:
    """Ambiguity map of a virtual array for a source at ``reference``.

    Parameters
    ----------
    array : VirtualArray or (L, 2) array
        Virtual element positions in wavelengths.
    reference : (az, el) degrees
    grid : AngleGrid
        Defaults to +/-60 x +/-20 degrees at 0.1 x 0.5 degree steps.  The
        grid is anchored on the reference, which is therefore a node.
    """
    pos = array.positions if isinstance(array, VirtualArray) else np.asarray(array, float)
    grid = grid or AngleGrid()
    if not grid.contains(*reference):
        raise ValueError("reference direction outside the grid")
    az, el = grid.axes(reference)
    s = steering_vector(pos, *reference)
    mag = correlate_grid(pos, s, az, el)
    amap = AmbiguityMap(az, el, mag, (float(reference[0]), float(reference[1])))
    i, j = amap.reference_index
    mag /= mag[i, j]
    return amap


def resolution_from_map(amap: AmbiguityMap, axis: str = "az") -> float:
    """Full -3 dB mainlobe width (degrees) along a cut through the reference.

    The crossings on both sides are linearly interpolated between grid
    nodes.  Raises :class:`MainlobeUnresolved` when the cut never drops
    below -3 dB on one side inside the grid.
    """
    i, j = amap.reference_index
    if axis == "az":
        cut, ang, k0 = amap.magnitude[:, j], amap.az, i
    elif axis == "el":
        cut, ang, k0 = amap.magnitude[i, :], amap.el, j
    else:
        raise ValueError("axis must be 'az' or 'el'")
    if cut.size < 3:
        raise MainlobeUnresolved(f"{axis} cut has fewer than three nodes")
    return _crossing(cut, ang, k0, +1) - _crossing(cut, ang, k0, -1)


def _crossing(cut, ang, k0, step) -> float:
    k = k0
    while 0 <= k + step < cut.size:
        a, b = cut[k], cut[k + step]
        if b < HALF_POWER <= a:
            t = (a - HALF_POWER) / (a - b)
            return float(ang[k] + t * (ang[k + step] - ang[k]))
        k += step
    raise MainlobeUnresolved("mainlobe does not fall below -3 dB inside the grid")


def peak_sidelobe_db(amap: AmbiguityMap) -> float:
    """Highest lobe outside the reference mainlobe, in dB (``-inf`` if none).

    Every node is assigned to the lobe its steepest-ascent path ends on.
    The mainlobe is the union of the lobes whose peak lies in the
    connected -3 dB region around the reference: off boresight the
    mainlobe of a staggered array is a sheared ridge, and a coarse
    elevation step can leave a crest node of that ridge as a separate
    grid-local maximum.  True sidelobes and grating lobes are separated
    from the reference by nulls and stay outside.
    """
    mag = amap.magnitude
    labels = climb_labels(mag)
    i, j = amap.reference_index
    core, _ = ndimage.label(mag >= HALF_POWER, structure=np.ones((3, 3), dtype=bool))
    core_id = core[i, j]
    terminals = np.unique(labels)
    main_terms = terminals[core.ravel()[terminals] == core_id]
    outside = ~np.isin(labels, main_terms)
    if not np.any(outside):
        return -math.inf
    return float(20.0 * np.log10(np.max(mag[outside])))


# ---------------------------------------------------------------------------
# constraints and ladder search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstraintSet:
    """Design constraints; angles in degrees, extent in wavelengths.

    A resolution bound of 180 degrees or more is treated as unconstrained.
    """

    min_fov_az: float = 60.0
    min_fov_el: float = 20.0
    max_res_az: float = 2.0
    max_res_el: float = 6.0
    max_extent: float = 35.0
    num_tx: int = 12
    num_rx: int = 16
    max_sidelobe_db: float = -10.0

    def __post_init__(self):
        for name in ("min_fov_az", "min_fov_el", "max_res_az", "max_res_el", "max_extent"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.num_tx < 1 or self.num_rx < 1:
            raise ValidationError("num_tx and num_rx must be positive")

    def reference_directions(self) -> list[tuple[float, float]]:
        """Boresight plus the four half-FoV corners (off-axis sidelobe report)."""
        a, e = self.min_fov_az / 2.0, self.min_fov_el / 2.0
        return [(0.0, 0.0), (-a, -e), (-a, e), (a, -e), (a, e)]


@dataclass(frozen=True)
class ConstraintReport:
    az_width: float
    el_width: float
    peak_sidelobe_db: float
    extent: tuple[float, float]
    failures: tuple[str, ...] = field(default_factory=tuple)
    offaxis_sidelobe_db: float | None = None

    @property
    def passed(self) -> bool:
        return not self.failures


_WIDTH_TOL = 1e-6


def verify_constraints(
    layout: AntennaLayout,
    constraints: ConstraintSet,
    grid: AngleGrid | None = None,
    *,
    stop_early: bool = False,
    offaxis: bool = False,
) -> ConstraintReport:
    """Check a layout against ``constraints`` via its ambiguity map.

    Widths and the sidelobe ceiling are evaluated for a boresight source
    over the full required field of view.  With ``offaxis=True`` the worst
    sidelobe over the half-FoV corner references
    (:meth:`ConstraintSet.reference_directions`) is also reported; it is
    informational and does not affect ``passed``.
    """
    failures = []
    grid = grid or AngleGrid(constraints.min_fov_az, constraints.min_fov_el)
    tx, rx = layout.tx_positions, layout.rx_positions
    allpos = np.vstack([tx, rx])
    extent = tuple(float(v) for v in np.ptp(allpos, axis=0))
    if max(extent) > constraints.max_extent + _POS_TOL:
        failures.append(f"extent {extent} exceeds {constraints.max_extent}")
    if (layout.num_tx, layout.num_rx) != (constraints.num_tx, constraints.num_rx):
        failures.append("element counts differ from constraints")
    varr = synthesize_virtual_array(layout)
    if not varr.is_planar:
        # no vertical aperture: elevation is unobservable, analyse the azimuth cut
        grid = AngleGrid(grid.az_limit, 0.0, grid.az_step, grid.el_step)

    az_w = _axis_width(varr, grid, "az")
    el_w = _axis_width(varr, grid, "el")
    for name, width, bound in (("az", az_w, constraints.max_res_az), ("el", el_w, constraints.max_res_el)):
        if bound < 180.0 and not width <= bound + _WIDTH_TOL:
            failures.append(f"{name} width {width:.3f} > {bound}")
    psl = -math.inf
    if not (stop_early and failures):
        psl = peak_sidelobe_db(ambiguity_map(varr, (0.0, 0.0), grid))
        if psl > constraints.max_sidelobe_db:
            failures.append(f"sidelobe {psl:.2f} dB above {constraints.max_sidelobe_db} dB")
    worst = None
    if offaxis:
        refs = constraints.reference_directions()
        if not varr.is_planar:
            refs = sorted({(a, 0.0) for a, _ in refs})
        worst = max(peak_sidelobe_db(ambiguity_map(varr, r, grid)) for r in refs)
    return ConstraintReport(az_w, el_w, psl, extent, tuple(failures), worst)


def _axis_width(varr: VirtualArray, grid: AngleGrid, axis: str) -> float:
    if axis == "el" and not varr.is_planar:
        return math.inf
    if axis == "az" and np.ptp(varr.positions[:, 0]) <= _POS_TOL:
        return math.inf
    cut_grid = AngleGrid(grid.az_limit, grid.el_limit, grid.az_step, grid.el_step)
    az, el = cut_grid.axes()
    s = steering_vector(varr.positions, 0.0, 0.0)
    if axis == "az":
        mag = correlate_grid(varr.positions, s, az, np.array([0.0]))
        amap = AmbiguityMap(az, np.array([0.0]), mag / mag.max(), (0.0, 0.0))
    else:
        mag = correlate_grid(varr.positions, s, np.array([0.0]), el)
        amap = AmbiguityMap(np.array([0.0]), el, mag / mag.max(), (0.0, 0.0))
    try:
        return resolution_from_map(amap, axis)
    except MainlobeUnresolved:
        return math.inf


@dataclass(frozen=True)
class LadderParameters:
    """One member of the ladder family searched by :func:`generate_ladder_layout`."""

    tx_pitch: float
    row_pitch: float
    stagger_span: float
    rows: int


def ladder_layout(params: LadderParameters, num_tx: int, num_rx: int, board: float) -> AntennaLayout:
    """Build the layout described by ``params``.

    TX: ``num_tx`` elements on the bottom edge at ``tx_pitch``.
    RX: pairs ``{a, a + tx_pitch / 2}`` (which cancel the TX-pitch grating
    lobe of the virtual array); pairs are dealt to ``rows`` rows spaced by
    ``row_pitch``, middle rows first; a row carrying several pairs repeats
    them every ``num_tx * tx_pitch``, i.e. one full virtual row length.
    Row offsets ``a`` grow as a staircase from 0 to ``stagger_span`` on a
    half-wavelength grid.  An odd RX count places the last element alone.
    """
    p, h, span, rows = params.tx_pitch, params.row_pitch, params.stagger_span, params.rows
    tx = [(p * k, 0.0) for k in range(num_tx)]
    n_pairs, single = divmod(num_rx, 2)
    rows = max(1, min(rows, n_pairs + single))
    per_row = [n_pairs // rows] * rows
    order = sorted(range(rows), key=lambda r: (abs(r - (rows - 1) / 2.0), r))
    for r in order[: n_pairs % rows]:
        per_row[r] += 1
    row_len = num_tx * p
    rx = []
    for r in range(rows):
        a = 0.0 if rows == 1 else math.floor(2.0 * span * r / (rows - 1) + 0.5) / 2.0
        z = h * r
        for k in range(per_row[r]):
            rx.append((a + k * row_len, z))
            rx.append((a + k * row_len + p / 2.0, z))
    if single:
        r = order[0]
        a = 0.0 if rows == 1 else math.floor(2.0 * span * r / (rows - 1) + 0.5) / 2.0
        rx.append((a + per_row[r] * row_len, h * r))
    return AntennaLayout(np.round(np.array(tx), 9), np.round(np.array(rx), 9), (board, board))


def _min_width_bound_deg(max_extent: float) -> float:
    # a virtual aperture is at most twice the board side; an ideal uniform
    # aperture D has -3 dB width 0.886 / D radians at boresight
    return math.degrees(0.886 / (2.0 * max_extent))


def generate_ladder_layout(
    constraints: ConstraintSet,
    *,
    rows: int = 7,
    tx_pitches=(0.5, 1.0),
    row_pitches=None,
    span_step: float = 0.5,
    screen_grid: AngleGrid | None = None,
    final_grid: AngleGrid | None = None,
) -> AntennaLayout:
    """Search the ladder family for the least-redundant feasible layout.

    The TX pitch is restricted to at most one wavelength: a pitch ``p``
    gives the RX pairs a grating lobe at ``|du| = 2 / p``, which stays
    outside the field of view for every in-FoV source only when
    ``2 / p > 1 + sin(fov_az)``.

    Candidates are ranked by the redundancy of the horizontal projection of
    the virtual array (ties: lexicographically smallest position vector)
    and verified in that order; the first one whose ambiguity maps satisfy
    ``constraints`` on a coarse screening grid and then on the final grid
    is returned.

    Raises
    ------
    InfeasibleConstraints
        When a resolution bound is below the aperture limit of the board,
        or no candidate passes verification.
    """
    bound = _min_width_bound_deg(constraints.max_extent)
    if constraints.max_res_az < bound or constraints.max_res_el < bound:
        raise InfeasibleConstraints(
            f"resolution below the {bound:.2f} deg aperture limit of a "
            f"{constraints.max_extent} wavelength board"
        )
    if row_pitches is None:
        row_pitches = np.round(np.arange(1.0, 2.0001, 0.05), 10)
    screen_grid = screen_grid or AngleGrid(constraints.min_fov_az, constraints.min_fov_el, 0.25, 0.5)
    final_grid = final_grid or AngleGrid(constraints.min_fov_az, constraints.min_fov_el)
    board = constraints.max_extent

    candidates = []
    seen = set()
    for p in tx_pitches:
        for span in np.arange(0.0, board + 1e-9, span_step):
            base = LadderParameters(float(p), 1.0, float(span), rows)
            try:
                probe = ladder_layout(base, constraints.num_tx, constraints.num_rx, board)
            except ValidationError:
                continue
            key_x = tuple(np.round(synthesize_virtual_array(probe).positions[:, 0], 9))
            red = redundancy(key_x) if len(key_x) >= 2 and np.ptp(key_x) > 0 else Fraction(10**9)
            for h in row_pitches:
                params = LadderParameters(float(p), float(h), float(span), rows)
                try:
                    lay = ladder_layout(params, constraints.num_tx, constraints.num_rx, board)
                except ValidationError:
                    continue
                vec = tuple(np.concatenate([lay.tx_positions.ravel(), lay.rx_positions.ravel()]))
                if vec in seen:
                    continue
                seen.add(vec)
                candidates.append((red, vec, lay))
    candidates.sort(key=lambda c: (c[0], c[1]))
    for _, _, lay in candidates:
        if not verify_constraints(lay, constraints, screen_grid, stop_early=True).passed:
            continue
        if verify_constraints(lay, constraints, final_grid, stop_early=True).passed:
            return lay
    raise InfeasibleConstraints("no ladder candidate satisfies the constraints")
