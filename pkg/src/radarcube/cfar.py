"""CFAR detectors: cell averaging, smallest-of, and clutter-edge-aware dynamic CFAR.

All detectors assume square-law (exponentially distributed) noise cells.
One-dimensional detectors slide a window of ``num_guard`` guard cells and
``num_training`` training cells on each side of the cell under test (CUT).
Near the ends of a non-circular vector the window is truncated and the
threshold factor is re-derived for the number of cells actually used.

Region codes returned by the 1-D detectors: 0 homogeneous, 1 strong, 2 weak.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from . import _accel
from ._accel import njit
from .errors import ValidationError
from .peaks import climb_labels

MODES = ("CA", "SOCA", "DYNAMIC")
REGION_NAMES = ("homogeneous", "strong", "weak")
HOMOGENEOUS, STRONG, WEAK = 0, 1, 2


@dataclass(frozen=True)
class RegionPrior:
    """RD-map rectangle (inclusive stored bin ranges) labelled strong or weak clutter."""

    range_bins: tuple[int, int]
    doppler_bins: tuple[int, int]
    label: str

    def __post_init__(self):
        if self.label not in ("strong", "weak"):
            raise ValidationError("region prior label must be 'strong' or 'weak'")
        for lo, hi in (self.range_bins, self.doppler_bins):
            if not (0 <= lo <= hi):
                raise ValidationError("region prior bin ranges must satisfy 0 <= lo <= hi")


@dataclass(frozen=True)
class CfarConfig:
    """Detector parameters.

    ``edge_window`` is the total number of reference cells (both sides)
    examined by the dynamic detector's edge search; it defaults to
    ``2 * num_training``.
    """

    num_training: int = 8
    num_guard: int = 2
    pfa: float = 1e-3
    mode: str = "CA"
    edge_window: int | None = None
    edge_trigger_ratio: float = 4.0
    region_prior: tuple[RegionPrior, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not (0.0 < self.pfa < 1.0):
            raise ValidationError("pfa must lie in (0, 1)")
        if self.num_training < 1:
            raise ValidationError("num_training must be >= 1")
        if self.num_guard < 0:
            raise ValidationError("num_guard must be >= 0")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")
        if self.edge_window is None:
            object.__setattr__(self, "edge_window", 2 * self.num_training)
        if self.edge_window < 4:
            raise ValidationError("edge_window must be >= 4")
        if not self.edge_trigger_ratio >= 1.0:
            raise ValidationError("edge_trigger_ratio must be >= 1")
        object.__setattr__(self, "region_prior", tuple(self.region_prior))

    @property
    def edge_half(self) -> int:
        return max(2, self.edge_window // 2)

    @property
    def reach(self) -> int:
        """Largest one-sided distance from the CUT touched by any window."""
        t = max(self.num_training, self.edge_half) if self.mode == "DYNAMIC" else self.num_training
        return self.num_guard + t


@dataclass(frozen=True)
class Detection:
    range_bin: int
    doppler_bin: int
    amplitude: float
    noise_estimate: float
    threshold: float
    detector: str
    region: str = "homogeneous"


@dataclass(frozen=True, eq=False)
class CfarResult:
    """Per-cell output of a 1-D detector (arrays share the input shape)."""

    threshold: np.ndarray
    noise: np.ndarray
    decision: np.ndarray
    region: np.ndarray

    def region_labels(self) -> np.ndarray:
        return np.array(REGION_NAMES, dtype=object)[self.region]


# ---------------------------------------------------------------------------
# threshold factors
# ---------------------------------------------------------------------------


def threshold_factor_ca(n_training_total: int, pfa: float) -> float:
    """Cell-averaging factor ``a = N (P_fa^(-1/N) - 1)`` (threshold = a * mean)."""
    if int(n_training_total) != n_training_total or n_training_total < 1:
        raise ValueError("n_training_total must be a positive integer")
    if not (0.0 < pfa < 1.0):
        raise ValueError("pfa must lie in (0, 1)")
    n = float(n_training_total)
    return n * math.expm1(-math.log(pfa) / n)


def _mean_gamma_logpdf(n: int, y: float) -> float:
    # mean of n unit exponentials ~ Gamma(n, scale=1/n)
    return n * math.log(n) + (n - 1) * math.log(y) - n * y - math.lgamma(n)


def soca_false_alarm(alpha: float, n_left: int, n_right: int) -> float:
    """False-alarm probability of ``x > alpha * min(mean_left, mean_right)``.

    Exact for unit exponential cells: ``E[exp(-alpha * Y)]`` where ``Y`` is
    the minimum of two independent gamma means, evaluated by quadrature.
    """
    n1, n2 = int(n_left), int(n_right)

    def integrand(y):
        if y <= 0.0:
            return 0.0
        f1 = math.exp(_mean_gamma_logpdf(n1, y))
        f2 = math.exp(_mean_gamma_logpdf(n2, y))
        return math.exp(-alpha * y) * (f1 * special.gammaincc(n2, n2 * y) + f2 * special.gammaincc(n1, n1 * y))

    upper = 50.0
    val, _ = integrate.quad(integrand, 0.0, upper, limit=400, epsabs=0.0, epsrel=1e-11,
                            points=[1.0 / max(alpha, 1e-3)])
    return val


@functools.lru_cache(maxsize=None)
def soca_threshold_factor(n_left: int, n_right: int, pfa: float) -> float:
    """Smallest-of factor giving false-alarm rate ``pfa`` on homogeneous noise.

    Obtained by inverting :func:`soca_false_alarm` with Brent's method; a
    one-sided window reduces to the cell-averaging factor.
    """
    if n_left < 0 or n_right < 0 or n_left + n_right < 1:
        raise ValueError("need at least one training cell")
    if not (0.0 < pfa < 1.0):
        raise ValueError("pfa must lie in (0, 1)")
    if n_left == 0 or n_right == 0:
        return threshold_factor_ca(n_left + n_right, pfa)
    lo = threshold_factor_ca(n_left + n_right, pfa)
    hi = lo
    while soca_false_alarm(hi, n_left, n_right) > pfa:
        hi *= 2.0
    return optimize.brentq(lambda a: soca_false_alarm(a, n_left, n_right) - pfa, lo, hi, xtol=1e-12, rtol=1e-13)


def _ca_table(n_max: int, pfa: float) -> np.ndarray:
    tab = np.zeros(n_max + 1)
    for n in range(1, n_max + 1):
        tab[n] = threshold_factor_ca(n, pfa)
    return tab


def _soca_table(t: int, pfa: float) -> np.ndarray:
    tab = np.zeros((t + 1, t + 1))
    for i in range(t + 1):
        for j in range(t + 1):
            if i + j:
                tab[i, j] = soca_threshold_factor(i, j, pfa)
    return tab


# ---------------------------------------------------------------------------
# kernels: rows of a 2-D array, window along the last axis
# ---------------------------------------------------------------------------


@njit
def _window_sums(row, i, g, t, circular):  # pragma: no cover - jit
    n = row.shape[0]
    sl = 0.0
    nl = 0
    sr = 0.0
    nr = 0
    for k in range(i - g - t, i - g):
        if circular:
            sl += row[k % n]
            nl += 1
        elif k >= 0:
            sl += row[k]
            nl += 1
    for k in range(i + g + 1, i + g + t + 1):
        if circular:
            sr += row[k % n]
            nr += 1
        elif k < n:
            sr += row[k]
            nr += 1
    return sl, nl, sr, nr


@njit
def _ca_numba(x, g, t, circular, ca_tab):  # pragma: no cover - jit
    n_rows, n = x.shape
    thr = np.empty((n_rows, n))
    noise = np.empty((n_rows, n))
    for r in range(n_rows):
        for i in range(n):
            sl, nl, sr, nr = _window_sums(x[r], i, g, t, circular)
            mu = (sl + sr) / (nl + nr)
            noise[r, i] = mu
            thr[r, i] = ca_tab[nl + nr] * mu
    return thr, noise


@njit
def _soca_numba(x, g, t, circular, soca_tab):  # pragma: no cover - jit
    n_rows, n = x.shape
    thr = np.empty((n_rows, n))
    noise = np.empty((n_rows, n))
    for r in range(n_rows):
        for i in range(n):
            sl, nl, sr, nr = _window_sums(x[r], i, g, t, circular)
            if nl > 0 and nr > 0:
                mu = min(sl / nl, sr / nr)
            elif nl > 0:
                mu = sl / nl
            else:
                mu = sr / nr
            noise[r, i] = mu
            thr[r, i] = soca_tab[nl, nr] * mu
    return thr, noise


@njit
def _edge_split_numba(w, n):  # pragma: no cover - jit
    """Argmin of K ln(mean w[:K]) + (n-K) ln(mean w[K:n]) over 2 <= K <= n-2."""
    total = 0.0
    for k in range(n):
        total += w[k]
    best_k = 2
    best = np.inf
    objs = np.empty(n + 1)
    s = 0.0
    for k in range(n - 1):
        s += w[k]
        kk = k + 1
        if kk >= 2 and kk <= n - 2:
            objs[kk] = kk * math.log(s / kk) + (n - kk) * math.log((total - s) / (n - kk))
            if objs[kk] < best:
                best = objs[kk]
    tol = 1e-12 * max(1.0, abs(best))
    for kk in range(2, n - 1):
        if objs[kk] <= best + tol:
            best_k = kk
            break
    return best_k


@njit
def _dynamic_numba(x, prior, g, t, e, circular, trig, ca_tab):  # pragma: no cover - jit
    n_rows, n = x.shape
    thr = np.empty((n_rows, n))
    noise = np.empty((n_rows, n))
    region = np.zeros((n_rows, n), dtype=np.int8)
    w = np.empty(2 * e)
    use_prior = prior.shape[0] > 0
    for r in range(n_rows):
        row = x[r]
        for i in range(n):
            nl = 0
            for k in range(i - g - e, i - g):
                if circular or k >= 0:
                    w[nl] = row[k % n]
                    nl += 1
            nw = nl
            for k in range(i + g + 1, i + g + e + 1):
                if circular or k < n:
                    w[nw] = row[k % n]
                    nw += 1
            nr = nw - nl
            triggered = False
            positive = True
            for k in range(nw):
                if not w[k] > 0.0:
                    positive = False
            if nl > 0 and nr > 0 and positive:
                ml = 0.0
                for k in range(nl):
                    ml += w[k]
                ml /= nl
                mr = 0.0
                for k in range(nl, nw):
                    mr += w[k]
                mr /= nr
                triggered = max(ml, mr) > trig * min(ml, mr)
            if use_prior and not triggered:
                lab = prior[r, i]
                for k in range(i - g - e, i + g + e + 1):
                    if circular or (k >= 0 and k < n):
                        if prior[r, k % n] != lab:
                            triggered = True
            if triggered and nw >= 4 and positive:
                ks = _edge_split_numba(w, nw)
                s1 = 0.0
                for k in range(ks):
                    s1 += w[k]
                s2 = 0.0
                for k in range(ks, nw):
                    s2 += w[k]
                m1 = s1 / ks
                m2 = s2 / (nw - ks)
                if ks > nl:
                    side = 1
                elif ks < nl:
                    side = 2
                else:
                    side = 1 if m1 >= m2 else 2
                if side == 1:
                    mu, cnt, other = m1, ks, m2
                else:
                    mu, cnt, other = m2, nw - ks, m1
                noise[r, i] = mu
                thr[r, i] = ca_tab[cnt] * mu
                region[r, i] = 1 if mu > other else 2
            else:
                sl, cl, sr, cr = _window_sums(row, i, g, t, circular)
                mu = (sl + sr) / (cl + cr)
                noise[r, i] = mu
                thr[r, i] = ca_tab[cl + cr] * mu
    return thr, noise, region


def _padded_sums(x, g, t, circular):
    """Left/right training sums and counts for every cell (numpy path)."""
    n_rows, n = x.shape
    pad = g + t
    if circular:
        reps = -(-pad // n) + 1
        tiled = np.concatenate([x] * (2 * reps + 1), axis=1)
        xp = tiled[:, reps * n - pad : reps * n + n + pad]
        vp = np.ones_like(xp)
    else:
        xp = np.zeros((n_rows, n + 2 * pad))
        xp[:, pad : pad + n] = x
        vp = np.zeros_like(xp)
        vp[:, pad : pad + n] = 1.0
    idx = np.arange(n)
    left = idx[:, None] + np.arange(t)[None, :]  # padded coords: i + (pad - g - t) + k, pad - g - t = 0
    right = idx[:, None] + pad + g + 1 + np.arange(t)[None, :]
    sl = xp[:, left].sum(axis=-1)
    sr = xp[:, right].sum(axis=-1)
    nl = vp[:, left].sum(axis=-1).astype(np.int64)
    nr = vp[:, right].sum(axis=-1).astype(np.int64)
    return sl, nl, sr, nr


def _ca_numpy(x, g, t, circular, ca_tab):
    sl, nl, sr, nr = _padded_sums(x, g, t, circular)
    mu = (sl + sr) / (nl + nr)
    return ca_tab[nl + nr] * mu, mu


def _soca_numpy(x, g, t, circular, soca_tab):
    sl, nl, sr, nr = _padded_sums(x, g, t, circular)
    with np.errstate(invalid="ignore", divide="ignore"):
        ml = sl / nl
        mr = sr / nr
    mu = np.where((nl > 0) & (nr > 0), np.minimum(ml, mr), np.where(nl > 0, ml, mr))
    return soca_tab[nl, nr] * mu, mu


def _edge_split_numpy(windows, lengths):
    """Vectorised edge split for packed windows (cells, width) with per-cell lengths."""
    n_cells, width = windows.shape
    cs = np.cumsum(windows, axis=1)
    total = cs[np.arange(n_cells), lengths - 1]
    ks = np.arange(2, width - 1)
    objs = np.full((n_cells, ks.size), np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        for j, k in enumerate(ks):
            ok = k <= lengths - 2
            s = cs[:, k - 1]
            val = k * np.log(s / k) + (lengths - k) * np.log((total - s) / (lengths - k))
            objs[:, j] = np.where(ok, val, np.inf)
    best = objs.min(axis=1)
    tol = 1e-12 * np.maximum(1.0, np.abs(best))
    first = np.argmax(objs <= (best + tol)[:, None], axis=1)
    return ks[first]


def _dynamic_numpy(x, prior, g, t, e, circular, trig, ca_tab):
    n_rows, n = x.shape
    thr, noise = _ca_numpy(x, g, t, circular, ca_tab)
    region = np.zeros((n_rows, n), dtype=np.int8)

    # packed reference windows: available left cells, then available right cells
    i = np.arange(n)
    offs_l = np.arange(-g - e, -g)
    offs_r = np.arange(g + 1, g + e + 1)
    raw_l = i[:, None] + offs_l[None, :]
    raw_r = i[:, None] + offs_r[None, :]
    if circular:
        valid_l = np.ones_like(raw_l, dtype=bool)
        valid_r = np.ones_like(raw_r, dtype=bool)
    else:
        valid_l = raw_l >= 0
        valid_r = raw_r < n
    nl = valid_l.sum(axis=1)
    nr = valid_r.sum(axis=1)
    nw = nl + nr
    # left cells are a contiguous suffix of offs_l, right cells a prefix of offs_r
    j = np.arange(2 * e)[None, :]
    start_l = e - nl
    src = np.where(
        j < nl[:, None],
        i[:, None] - g - nl[:, None] + j,
        i[:, None] + g + 1 + (j - nl[:, None]),
    )
    in_win = j < nw[:, None]
    src = np.where(in_win, src % n, 0)
    del start_l

    if prior is not None and prior.size:
        span = i[:, None] + np.arange(-g - e, g + e + 1)[None, :]
        span_ok = np.ones_like(span, dtype=bool) if circular else (span >= 0) & (span < n)
        span = span % n

    for r in range(n_rows):
        row = x[r]
        win = np.where(in_win, row[src], np.nan)
        positive = np.all(np.where(in_win, win > 0, True), axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            ml = np.nansum(np.where(j < nl[:, None], win, np.nan), axis=1) / nl
            mr = np.nansum(np.where((j >= nl[:, None]) & in_win, win, np.nan), axis=1) / nr
            trig_mask = (nl > 0) & (nr > 0) & positive & (np.maximum(ml, mr) > trig * np.minimum(ml, mr))
        if prior is not None and prior.size:
            lab = prior[r]
            differs = np.any((lab[span] != lab[:, None]) & span_ok, axis=1)
            trig_mask |= differs
        trig_mask &= (nw >= 4) & positive
        cells = np.flatnonzero(trig_mask)
        if cells.size == 0:
            continue
        w = np.where(in_win[cells], win[cells], 0.0)
        lens = nw[cells]
        ks = _edge_split_numpy(w, lens)
        cs = np.cumsum(w, axis=1)
        s1 = cs[np.arange(cells.size), ks - 1]
        s2 = cs[np.arange(cells.size), lens - 1] - s1
        m1 = s1 / ks
        m2 = s2 / (lens - ks)
        side1 = (ks > nl[cells]) | ((ks == nl[cells]) & (m1 >= m2))
        mu = np.where(side1, m1, m2)
        other = np.where(side1, m2, m1)
        cnt = np.where(side1, ks, lens - ks)
        noise[r, cells] = mu
        thr[r, cells] = ca_tab[cnt] * mu
        region[r, cells] = np.where(mu > other, STRONG, WEAK)
    return thr, noise, region


# ---------------------------------------------------------------------------
# public 1-D API
# ---------------------------------------------------------------------------


def _as_rows(cells):
    x = np.asarray(cells, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.ndim != 2:
        raise ValueError("cells must be a 1-D vector or a 2-D array of rows")
    return np.ascontiguousarray(x), squeeze


def _check_length(n, config, circular=False):
    need = 2 * config.reach + 1
    if n <= need:
        raise ValueError(f"vector of {n} cells is not longer than the {need}-cell window")


def _finish(x, thr, noise, region, squeeze):
    dec = x >= thr
    if squeeze:
        return CfarResult(thr[0], noise[0], dec[0], region[0])
    return CfarResult(thr, noise, dec, region)


def ca_cfar_1d(cells, config: CfarConfig, *, circular: bool = False) -> CfarResult:
    """Cell-averaging CFAR along the last axis.

    Parameters
    ----------
    cells : array_like
        Square-law powers; a 2-D input is processed row by row.
    config : CfarConfig
    circular : bool
        Wrap the window around the ends (used for Doppler).
    """
    x, squeeze = _as_rows(cells)
    _check_length(x.shape[1], CfarConfig(config.num_training, config.num_guard, config.pfa))
    g, t = config.num_guard, config.num_training
    tab = _ca_table(2 * t, config.pfa)
    if _accel.use_numba():
        thr, noise = _ca_numba(x, g, t, circular, tab)
    else:
        thr, noise = _ca_numpy(x, g, t, circular, tab)
    return _finish(x, thr, noise, np.zeros(x.shape, np.int8), squeeze)


def soca_cfar_1d(cells, config: CfarConfig, *, circular: bool = False) -> CfarResult:
    """Smallest-of CFAR: noise = min of the leading/lagging training means."""
    x, squeeze = _as_rows(cells)
    _check_length(x.shape[1], CfarConfig(config.num_training, config.num_guard, config.pfa))
    g, t = config.num_guard, config.num_training
    tab = _soca_table(t, config.pfa)
    if _accel.use_numba():
        thr, noise = _soca_numba(x, g, t, circular, tab)
    else:
        thr, noise = _soca_numpy(x, g, t, circular, tab)
    return _finish(x, thr, noise, np.zeros(x.shape, np.int8), squeeze)


def estimate_clutter_edge(window) -> int:
    """Maximum-likelihood split of a reference window into two exponential regions.

    Returns the number of cells ``K`` in the left region, minimising
    ``K ln(mean(w[:K])) + (n - K) ln(mean(w[K:]))`` over ``2 <= K <= n - 2``;
    objectives within 1e-12 (relative) of the minimum count as ties and the
    smallest such ``K`` wins.

    Raises
    ------
    ValueError
        Window shorter than 4 cells or containing nonpositive powers.
    """
    w = np.asarray(window, dtype=np.float64).ravel()
    if w.size < 4:
        raise ValueError("window must contain at least 4 cells")
    if not np.all(w > 0):
        raise ValueError("window powers must be positive")
    if _accel.use_numba():
        return int(_edge_split_numba(w, w.size))
    return int(_edge_split_numpy(w[None, :], np.array([w.size]))[0])


def dynamic_cfar_1d(cells, config: CfarConfig, *, circular: bool = False, prior_labels=None) -> CfarResult:
    """Clutter-edge-aware CFAR.

    For each CUT the reference window (``edge_window // 2`` cells per side
    beyond the guards) is tested for an edge: the ratio of the two
    half-window means exceeding ``edge_trigger_ratio``, or differing prior
    labels inside the window.  On an edge the window is split by
    :func:`estimate_clutter_edge`, the CUT is assigned to the side it lies
    on (to the stronger side when the split falls exactly at the CUT), and
    the noise is the mean of that side's cells with the cell-averaging
    factor for that count.  Without an edge the output equals
    :func:`ca_cfar_1d`.

    Parameters
    ----------
    prior_labels : array_like of int, optional
        Per-cell region labels with the shape of ``cells`` (0 none,
        1 strong, 2 weak); any change of label within a window triggers the
        edge search.
    """
    x, squeeze = _as_rows(cells)
    _check_length(x.shape[1], config)
    g, t, e = config.num_guard, config.num_training, config.edge_half
    tab = _ca_table(2 * max(t, e), config.pfa)
    if prior_labels is None:
        prior = np.zeros((0, 0), dtype=np.int8)
    else:
        prior = np.ascontiguousarray(np.asarray(prior_labels, dtype=np.int8).reshape(x.shape))
    if _accel.use_numba():
        thr, noise, region = _dynamic_numba(x, prior, g, t, e, circular, float(config.edge_trigger_ratio), tab)
    else:
        thr, noise, region = _dynamic_numpy(x, prior if prior.size else None, g, t, e, circular,
                                            float(config.edge_trigger_ratio), tab)
    return _finish(x, thr, noise, region, squeeze)


def run_1d(cells, config: CfarConfig, *, circular: bool = False, prior_labels=None) -> CfarResult:
    """Dispatch to the detector selected by ``config.mode``."""
    if config.mode == "CA":
        return ca_cfar_1d(cells, config, circular=circular)
    if config.mode == "SOCA":
        return soca_cfar_1d(cells, config, circular=circular)
    return dynamic_cfar_1d(cells, config, circular=circular, prior_labels=prior_labels)


# ---------------------------------------------------------------------------
# 2-D detection
# ---------------------------------------------------------------------------


def prior_label_map(priors, shape) -> np.ndarray | None:
    """Rasterise region priors into an int8 label map (later rectangles win)."""
    if not priors:
        return None
    lab = np.zeros(shape, dtype=np.int8)
    for p in priors:
        r0, r1 = p.range_bins
        d0, d1 = p.doppler_bins
        lab[r0 : r1 + 1, d0 : d1 + 1] = STRONG if p.label == "strong" else WEAK
    return lab


def detection_mask(power: np.ndarray, config: CfarConfig):
    """Per-cell decisions of the range/Doppler AND rule.

    Returns ``(mask, threshold, noise, region)`` where the last three come
    from whichever axis imposed the larger threshold.  ``power`` is indexed
    ``[range][doppler]`` with unshifted Doppler bins; the Doppler axis is
    treated as circular.
    """
    p = np.asarray(power, dtype=np.float64)
    n_r, n_d = p.shape
    need = 2 * config.reach + 1
    if n_r <= need or n_d <= need:
        raise ValueError(f"map {p.shape} too small for a {need}-cell window")
    prior = prior_label_map(config.region_prior, p.shape)
    rng = run_1d(p.T, config, circular=False, prior_labels=None if prior is None else prior.T)
    dop = run_1d(p, config, circular=True, prior_labels=prior)
    t_r, n_rr, g_r = rng.threshold.T, rng.noise.T, rng.region.T
    t_d, n_dd, g_d = dop.threshold, dop.noise, dop.region
    mask = (p >= t_r) & (p >= t_d) & (p > 0)
    use_r = t_r >= t_d
    thr = np.where(use_r, t_r, t_d)
    noise = np.where(use_r, n_rr, n_dd)
    region = np.where(use_r, g_r, g_d)
    return mask, thr, noise, region


def detect_2d(power, config: CfarConfig) -> list[Detection]:
    """Detect targets on an integrated RD power map.

    Cells passing both the range-axis and Doppler-axis detectors are
    grouped by steepest ascent inside the detected set (Doppler wraps);
    each group yields one :class:`Detection` at its local-maximum cell.
    Detections are ordered by (range bin, Doppler bin).
    """
    if hasattr(power, "integrated"):
        power = power.integrated
    p = np.asarray(power, dtype=np.float64)
    mask, thr, noise, region = detection_mask(p, config)
    if not mask.any():
        return []
    labels = climb_labels(p, mask, wrap_cols=True)
    terms = np.unique(labels[labels >= 0])
    n_d = p.shape[1]
    out = []
    for t in terms:
        r, d = divmod(int(t), n_d)
        out.append(
            Detection(
                range_bin=r,
                doppler_bin=d,
                amplitude=float(p[r, d]),
                noise_estimate=float(noise[r, d]),
                threshold=float(thr[r, d]),
                detector=config.mode,
                region=REGION_NAMES[int(region[r, d])],
            )
        )
    return out
