"""Steepest-ascent peak grouping on 2-D grids.

Every active cell points at its largest 8-neighbour (itself when no
neighbour is strictly larger; the first neighbour in row-major scan order
wins ties).  Following the pointers ends at a local maximum, and cells that
share a terminal form one group.  Used both for CFAR cluster reduction and
for separating the mainlobe of an ambiguity map from its sidelobes.
"""

from __future__ import annotations

import numpy as np

from . import _accel
from ._accel import njit

_OFFSETS = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)]


@njit
def _climb_numba(values, mask, wrap_cols):  # pragma: no cover - jit
    n_r, n_c = values.shape
    ptr = np.full(n_r * n_c, -1, dtype=np.int64)
    for r in range(n_r):
        for c in range(n_c):
            if not mask[r, c]:
                continue
            best = values[r, c]
            idx = r * n_c + c
            for dr in range(-1, 2):
                rr = r + dr
                if rr < 0 or rr >= n_r:
                    continue
                for dc in range(-1, 2):
                    if dr == 0 and dc == 0:
                        continue
                    cc = c + dc
                    if wrap_cols:
                        cc = cc % n_c
                    elif cc < 0 or cc >= n_c:
                        continue
                    if mask[rr, cc] and values[rr, cc] > best:
                        best = values[rr, cc]
                        idx = rr * n_c + cc
            ptr[r * n_c + c] = idx
    out = np.full(n_r * n_c, -1, dtype=np.int64)
    for k in range(n_r * n_c):
        if ptr[k] < 0:
            continue
        j = k
        while ptr[j] != j:
            j = ptr[j]
        out[k] = j
    return out


def _climb_numpy(values, mask, wrap_cols):
    n_r, n_c = values.shape
    neg = np.where(mask, values, -np.inf)
    padded = np.full((n_r + 2, n_c + 2), -np.inf)
    padded[1:-1, 1:-1] = neg
    if wrap_cols:
        padded[1:-1, 0] = neg[:, -1]
        padded[1:-1, -1] = neg[:, 0]
    rows, cols = np.indices((n_r, n_c))
    cand_vals = [neg]
    cand_idx = [rows * n_c + cols]
    for dr, dc in _OFFSETS:
        cand_vals.append(padded[1 + dr : 1 + dr + n_r, 1 + dc : 1 + dc + n_c])
        rr = rows + dr
        cc = (cols + dc) % n_c if wrap_cols else cols + dc
        cand_idx.append(rr * n_c + cc)
    stack = np.stack(cand_vals)
    choice = np.argmax(stack, axis=0)
    idx = np.take_along_axis(np.stack(cand_idx), choice[None], axis=0)[0]
    ptr = np.where(mask, idx, -1).ravel()
    active = ptr >= 0
    term = ptr.copy()
    while True:
        nxt = term.copy()
        nxt[active] = term[term[active]]
        if np.array_equal(nxt, term):
            break
        term = nxt
    return term


def climb_labels(values: np.ndarray, mask: np.ndarray | None = None, wrap_cols: bool = False) -> np.ndarray:
    """Terminal (local-maximum) flat index for every active cell, -1 elsewhere.

    Parameters
    ----------
    values : (R, C) float array
    mask : (R, C) bool array, optional
        Active cells; neighbours outside the mask are ignored.
    wrap_cols : bool
        Treat the column axis as circular (Doppler).
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    if mask is None:
        mask = np.ones(values.shape, dtype=np.bool_)
    mask = np.ascontiguousarray(mask, dtype=np.bool_)
    if _accel.use_numba():
        flat = _climb_numba(values, mask, bool(wrap_cols))
    else:
        flat = _climb_numpy(values, mask, bool(wrap_cols))
    return flat.reshape(values.shape)


def local_maxima(values: np.ndarray, mask: np.ndarray | None = None, wrap_cols: bool = False):
    """Sorted (row, col) indices of terminal cells of :func:`climb_labels`."""
    labels = climb_labels(values, mask, wrap_cols)
    terms = np.unique(labels[labels >= 0])
    n_c = values.shape[1]
    return [(int(t // n_c), int(t % n_c)) for t in terms]
