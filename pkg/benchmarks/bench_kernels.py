"""Compare the numba and numpy kernel backends on reference-size workloads.

Usage::

    python benchmarks/bench_kernels.py [--repeat 3] [--json results.json]

Each workload is timed with both backends (best of ``--repeat`` runs, after
one warm-up call that also triggers JIT compilation) and the outputs of the
two backends are checked for agreement.  Setting ``RADARCUBE_BACKEND`` has
no effect here; the script switches backends itself.
"""

from __future__ import annotations

import argparse
import json
import time

import numpy as np

from radarcube import _accel, scenarios
from radarcube.angles import AngleGrid, correlate_grid
from radarcube.array_design import synthesize_virtual_array
from radarcube.cfar import CfarConfig, detection_mask
from radarcube.pipeline import process_cube, scenario_from_document, simulate
from radarcube.waveform import Scene, synthesize_beat_signal


def _best_of(fn, repeat):
    fn()
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def workloads():
    cfg = scenario_from_document(scenarios.reference_frame())
    cube = simulate(cfg)
    layout = cfg.layout
    few = Scene(cfg.scene.scatterers[:8])

    rng = np.random.default_rng(0)
    power = rng.exponential(size=(512, 256))
    power[200:, :] *= 300.0
    dyn = CfarConfig(num_training=8, num_guard=2, pfa=1e-4, mode="DYNAMIC")
    ca = CfarConfig(num_training=8, num_guard=2, pfa=1e-4, mode="CA")

    pos = synthesize_virtual_array(layout).positions
    snaps = rng.normal(size=(pos.shape[0], 64)) + 1j * rng.normal(size=(pos.shape[0], 64))
    grid = AngleGrid(60.0, 20.0, 0.5, 1.0)

    return {
        "synthesis (192 ch x 128 x 512, 8 scatterers)": (
            lambda: synthesize_beat_signal(cfg.waveform, layout, few).samples),
        "CA-CFAR 2-D mask (512 x 256)": lambda: detection_mask(power, ca)[0],
        "dynamic CFAR 2-D mask (512 x 256)": lambda: detection_mask(power, dyn)[0],
        "steering correlation (192 el, 64 snapshots, 241 x 41 grid)": (
            lambda: correlate_grid(pos, snaps, *grid.axes())),
        "full frame RD + CFAR + DOA": lambda: len(process_cube(cube, cfg, threads=1).detections),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="also write the timings to this file")
    args = ap.parse_args(argv)

    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    rows = []
    for name, fn in workloads().items():
        times, outs = {}, {}
        for backend in ("numba", "numpy"):
            with _accel.backend(backend):
                times[backend], outs[backend] = _best_of(fn, args.repeat)
        a, b = np.asarray(outs["numba"]), np.asarray(outs["numpy"])
        if a.dtype == bool:
            agree = bool(np.array_equal(a, b))
        else:
            agree = bool(np.allclose(a, b, rtol=1e-9, atol=1e-9 * float(np.max(np.abs(a), initial=1.0))))
        rows.append({"workload": name, **times, "speedup": times["numpy"] / times["numba"], "agree": agree})

    width = max(len(r["workload"]) for r in rows)
    print(f"{'workload':<{width}}  {'numba s':>9}  {'numpy s':>9}  {'speedup':>7}  agree")
    for r in rows:
        print(f"{r['workload']:<{width}}  {r['numba']:9.4f}  {r['numpy']:9.4f}  {r['speedup']:6.1f}x  {r['agree']}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
