"""Scenario ingestion and end-to-end runs: simulate, process, compare, array analysis.

A scenario document (JSON, schema ``radarcube/scenario/1``) fixes the
waveform, the antenna layout, the scene and every processing parameter;
:func:`load_scenario` parses it into a :class:`ScenarioConfig` and checks
cross-field consistency before anything is computed.
"""

from __future__ import annotations

import io as _stdio
import logging
import math
import time
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import _accel
from . import io as rio
from .angles import AngleGrid
from .array_design import (
    AntennaLayout,
    ConstraintSet,
    ambiguity_map,
    generate_ladder_layout,
    redundancy,
    synthesize_virtual_array,
    verify_constraints,
)
from .cfar import CfarConfig, RegionPrior, detect_2d
from .doa import effective_wavelength, estimate_batch, extract_snapshot, focus_correction, refine_peaks, tdm_motion_compensate
from .errors import SceneMismatchError, ValidationError
from .point_cloud import CloudMetrics, PointCloud, build_point_cloud, cloud_metrics, interpolated_bins
from .rd_processing import compute_rd_map
from .waveform import (
    ClutterRegion,
    DataCube,
    Scatterer,
    Scene,
    WaveformConfig,
    _check_aliasing,
    synthesize_beat_signal,
)

log = logging.getLogger(__name__)

BUILTIN_LAYOUTS = ("reference_ladder", "ula8")


# ---------------------------------------------------------------------------
# configuration objects
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProcessingConfig:
    range_fft: int | None = None
    doppler_fft: int | None = None
    window: str = "hann"


@dataclass(frozen=True)
class DoaConfig:
    grid: AngleGrid = field(default_factory=AngleGrid)
    multi_peak: bool = False
    motion_compensation: bool = True
    focus: bool = True


@dataclass(frozen=True)
class OutputsConfig:
    rd_map: bool = True
    detections: bool = True
    point_cloud: bool = True
    ply: bool = False


@dataclass(frozen=True)
class GroundTruth:
    """Object box for cloud metrics.

    Only points inside ``center +/- (box_size / 2 + margin)`` are counted
    and measured, so clutter or noise points elsewhere in the scene do not
    enter the object's extent or density.
    """

    box_size: tuple[float, float, float]
    center: tuple[float, float, float] | None = None
    margin: float = 0.5

    def select(self, cloud: PointCloud) -> PointCloud:
        if self.center is None:
            return cloud
        c = np.asarray(self.center)
        half = np.asarray(self.box_size) / 2.0 + self.margin
        pts = tuple(p for p in cloud if np.all(np.abs(np.array([p.x, p.y, p.z]) - c) <= half))
        return PointCloud(pts)


@dataclass(frozen=True)
class ScenarioConfig:
    waveform: WaveformConfig
    layout: AntennaLayout
    scene: Scene
    processing: ProcessingConfig = field(default_factory=ProcessingConfig)
    cfar: CfarConfig = field(default_factory=CfarConfig)
    doa: DoaConfig = field(default_factory=DoaConfig)
    outputs: OutputsConfig = field(default_factory=OutputsConfig)
    ground_truth: GroundTruth | None = None
    name: str = "scenario"

    @property
    def range_fft_size(self) -> int:
        ns = self.waveform.samples_per_chirp
        return self.processing.range_fft or 1 << int(math.ceil(math.log2(2 * ns)))

    @property
    def doppler_fft_size(self) -> int:
        nc = self.waveform.chirps_per_frame_per_tx
        return self.processing.doppler_fft or 1 << int(math.ceil(math.log2(2 * nc)))

    @property
    def map_shape(self) -> tuple[int, int]:
        return self.range_fft_size // 2, self.doppler_fft_size

    def with_seed(self, seed: int | None) -> "ScenarioConfig":
        if seed is None:
            return self
        return replace(self, scene=replace(self.scene, rng_seed=int(seed)))

    def validate(self) -> None:
        """Cross-field checks run before any computation.

        Raises
        ------
        ValidationError
            FFT sizes, CFAR windows, region priors or the angle grid do not fit.
        AliasedSceneError
            A scatterer's beat frequency reaches ``f_s / 2``.
        """
        wf = self.waveform
        for name, size, n in (("range_fft", self.range_fft_size, wf.samples_per_chirp),
                              ("doppler_fft", self.doppler_fft_size, wf.chirps_per_frame_per_tx)):
            if size < n or size & (size - 1):
                raise ValidationError(f"processing.{name} must be a power of two >= {n}, got {size}")
        if self.processing.window not in ("hann", "none"):
            raise ValidationError(f"unknown window {self.processing.window!r}")
        n_r, n_d = self.map_shape
        need = 2 * self.cfar.reach + 1
        if n_r <= need or n_d <= need:
            raise ValidationError(f"CFAR window of {need} cells does not fit the {n_r} x {n_d} RD map")
        for k, p in enumerate(self.cfar.region_prior):
            if p.range_bins[1] >= n_r or p.doppler_bins[1] >= n_d:
                raise ValidationError(f"cfar.region_prior/{k} lies outside the {n_r} x {n_d} RD map")
        g = self.doa.grid
        if g.az_step >= 2 * g.az_limit or (g.el_limit > 0 and g.el_step >= 2 * g.el_limit):
            raise ValidationError("doa grid step must be smaller than the field of view")
        tx, rx = self.layout.positions_3d(wf.wavelength)
        _check_aliasing(wf, tx, rx, self.scene, self.layout.num_tx)
        r_max = wf.max_path_length / 2.0
        v_max = wf.max_velocity(self.layout.num_tx)
        for k, c in enumerate(self.scene.clutter_regions):
            (r0, r1), (v0, v1) = c.range_interval, c.velocity_interval
            tol = 1 + 1e-12
            if r0 < 0 or r1 > r_max * tol or v0 < -v_max * tol or v1 > v_max * tol:
                raise ValidationError(
                    f"scene.clutter_regions/{k} outside the unambiguous extent "
                    f"[0, {r_max:.3f}] m x +/-{v_max:.4f} m/s"
                )


# ---------------------------------------------------------------------------
# documents -> objects
# ---------------------------------------------------------------------------


def builtin_layout(name: str) -> AntennaLayout:
    if name not in BUILTIN_LAYOUTS:
        raise ValidationError(f"unknown builtin layout {name!r}")
    ref = resources.files("radarcube") / "data" / f"{name}.json"
    with resources.as_file(ref) as path:
        return rio.load_layout(path)


def _layout_from_ref(ref: dict, base_dir: Path) -> AntennaLayout:
    if "builtin" in ref:
        return builtin_layout(ref["builtin"])
    if "file" in ref:
        path = Path(ref["file"])
        if not path.is_absolute():
            path = base_dir / path
        return rio.load_layout(path)
    return rio.layout_from_document(ref)


def extended_target_scatterers(spec: dict, seed: int, index: int) -> list[Scatterer]:
    """Expand an extended-target description into point scatterers.

    ``patch``: points uniform in the box ``center +/- size / 2`` (a zero size
    component gives a flat patch).  ``box_shell``: points uniform on the
    surface of that box, faces chosen in proportion to their area.

    Every point moves with ``velocity + angular_velocity x (p - center)``
    (rigid motion) plus an independent Gaussian velocity of standard
    deviation ``velocity_spread`` along the boresight axis (micro-motion).
    Draws come from a substream of the scene seed, so the same document
    and seed always give the same scatterers.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 1000 + index])))
    c = np.asarray(spec["center"], dtype=np.float64)
    size = np.asarray(spec["size"], dtype=np.float64)
    n = int(spec["count"])
    v0 = np.asarray(spec.get("velocity", (0.0, 0.0, 0.0)), dtype=np.float64)
    w = np.asarray(spec.get("angular_velocity", (0.0, 0.0, 0.0)), dtype=np.float64)
    spread = float(spec.get("velocity_spread", 0.0))
    amp = float(spec.get("amplitude", 1.0))
    u = rng.uniform(-0.5, 0.5, size=(n, 3))
    if spec["shape"] == "box_shell":
        sx, sy, sz = size
        areas = np.array([sy * sz, sx * sz, sx * sy])
        if not areas.sum() > 0:
            raise ValidationError("box_shell needs at least two non-zero dimensions")
        axis = rng.choice(3, size=n, p=areas / areas.sum())
        side = rng.choice([-0.5, 0.5], size=n)
        u[np.arange(n), axis] = side
    offs = u * size
    pos = c + offs
    vel = v0 + np.cross(w, offs)
    if spread > 0:
        vel[:, 1] += spread * rng.standard_normal(n)
    if spec.get("random_phase", True):
        phase = rng.uniform(0.0, 2.0 * math.pi, size=n)
    else:
        phase = np.zeros(n)
    return [
        Scatterer(tuple(p), tuple(v), amp * complex(math.cos(f), math.sin(f)))
        for p, v, f in zip(pos, vel, phase)
    ]


def _reflectivity(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def scene_from_document(doc: dict) -> Scene:
    seed = int(doc.get("seed", 0))
    scatterers = [
        Scatterer(tuple(s["position"]), tuple(s.get("velocity", (0.0, 0.0, 0.0))), _reflectivity(s.get("reflectivity", 1.0)))
        for s in doc.get("scatterers", ())
    ]
    for k, ext in enumerate(doc.get("extended_targets", ())):
        scatterers.extend(extended_target_scatterers(ext, seed, k))
    clutter = [ClutterRegion(tuple(c["range"]), tuple(c["velocity"]), c["power"]) for c in doc.get("clutter_regions", ())]
    return Scene(tuple(scatterers), float(doc.get("noise_power", 0.0)), tuple(clutter), seed)


def scenario_from_document(doc: dict, base_dir=".", *, name: str = "scenario", seed: int | None = None) -> ScenarioConfig:
    """Build and validate a :class:`ScenarioConfig` from a parsed document."""
    rio.validate_document(doc, rio.SCENARIO_SCHEMA, "scenario")
    base_dir = Path(base_dir)
    scene_doc = dict(doc["scene"])
    if seed is not None:
        scene_doc["seed"] = int(seed)
    try:
        wf = WaveformConfig(**doc["waveform"])
        layout = _layout_from_ref(doc["layout"], base_dir)
        scene = scene_from_document(scene_doc)
        p = doc.get("processing", {})
        processing = ProcessingConfig(p.get("range_fft"), p.get("doppler_fft"), p.get("window", "hann"))
        c = dict(doc.get("cfar", {}))
        priors = tuple(RegionPrior(tuple(r["range_bins"]), tuple(r["doppler_bins"]), r["label"]) for r in c.pop("region_prior", ()))
        cfar = CfarConfig(**c, region_prior=priors)
        d = dict(doc.get("doa", {}))
        grid = AngleGrid(az_limit=d.pop("az_limit", 60.0), el_limit=d.pop("el_limit", 20.0),
                         az_step=d.pop("az_step", 0.1), el_step=d.pop("el_step", 0.5))
        doa = DoaConfig(grid, **d)
        outputs = OutputsConfig(**doc.get("outputs", {}))
        gt = doc.get("ground_truth")
        ground_truth = None
        if gt is not None:
            ground_truth = GroundTruth(tuple(gt["box_size"]), tuple(gt["center"]) if "center" in gt else None,
                                       float(gt.get("margin", 0.5)))
    except ValueError as exc:  # includes ValidationError
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(str(exc)) from exc
    cfg = ScenarioConfig(wf, layout, scene, processing, cfar, doa, outputs, ground_truth, name)
    cfg.validate()
    return cfg


def load_scenario(path, *, seed: int | None = None) -> ScenarioConfig:
    path = Path(path)
    doc = rio.load_json_document(path, rio.SCENARIO_SCHEMA, "scenario")
    return scenario_from_document(doc, path.parent, name=path.stem, seed=seed)


# ---------------------------------------------------------------------------
# processing
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProcessResult:
    rdmap: object
    detections: list
    angles: list
    cloud: PointCloud
    timings: dict

    def summary(self) -> str:
        t = ", ".join(f"{k} {v:.3f} s" for k, v in self.timings.items())
        return f"process: {len(self.detections)} detections, {len(self.cloud)} points; {t}"


def _detection_velocity(rdmap, det) -> float:
    _, df = interpolated_bins(rdmap.integrated, det.range_bin, det.doppler_bin)
    return float(rdmap.velocity_of_bin(df % rdmap.doppler_fft_size))


def _detection_range(rdmap, det) -> float:
    rf, _ = interpolated_bins(rdmap.integrated, det.range_bin, det.doppler_bin)
    return float(rdmap.range_of_bin(rf))


def estimate_detection_angles(cube_or_map, cfg: ScenarioConfig, detections, rdmap=None) -> list:
    """Angle estimates per detection (a list of ``AngleEstimate`` each).

    Per detection: channel snapshot, TDM motion compensation at the
    interpolated velocity, a first estimate on the window-corrected
    virtual array, then (if enabled) near-field focusing on the strongest
    peak and a final estimate on the focused snapshot.  In multi-peak mode
    the further peaks are searched in the focused spectrum and each is
    refined after refocusing on its own direction.
    """
    rdmap = cube_or_map if rdmap is None else rdmap
    if not detections:
        return []
    wf = cfg.waveform
    layout = cfg.layout
    varr = synthesize_virtual_array(layout)
    lam_eff = effective_wavelength(wf, cfg.processing.window)
    pos = varr.positions * (wf.wavelength / lam_eff)
    tx_m, rx_m = layout.positions_3d(wf.wavelength)
    max_peaks = 2 if cfg.doa.multi_peak else 1
    snaps = []
    for det in detections:
        snap = extract_snapshot(rdmap, det)
        if cfg.doa.motion_compensation and layout.num_tx > 1:
            snap = tdm_motion_compensate(snap, _detection_velocity(rdmap, det), wf, varr.tx_index)
        snaps.append(snap)
    live = [k for k, s in enumerate(snaps) if not s.degenerate]
    est = [[] for _ in snaps]
    if not cfg.doa.focus:
        for k, e in zip(live, estimate_batch([snaps[k] for k in live], pos, cfg.doa.grid, max_peaks=max_peaks)):
            est[k] = e
        return est
    # the unfocused spectrum of a near target is smeared, and its secondary
    # maxima are mostly artefacts of that: focus on the primary peak first,
    # then look for further peaks in the focused spectrum
    first = estimate_batch([snaps[k] for k in live], pos, cfg.doa.grid, max_peaks=1)
    focused, ranges = [], []
    for k, e in zip(live, first):
        rng = _detection_range(rdmap, detections[k])
        ranges.append(rng)
        a0 = e[0]
        corr = focus_correction(tx_m, rx_m, rng, a0.azimuth, a0.elevation, lam_eff) if rng > 0 else 1.0
        focused.append(snaps[k].values * corr)
    second = estimate_batch(focused, pos, cfg.doa.grid, max_peaks=max_peaks)
    # secondary peaks lie in other directions: refocus on each and refine locally
    jobs, refocus = [], []
    for i, (k, peaks) in enumerate(zip(live, second)):
        est[k] = list(peaks)
        for j, p in enumerate(peaks[1:], start=1):
            if ranges[i] > 0:
                jobs.append((k, j))
                refocus.append(snaps[k].values * focus_correction(tx_m, rx_m, ranges[i], p.azimuth, p.elevation, lam_eff))
    refined = refine_peaks(refocus, pos, [est[k][j] for k, j in jobs], cfg.doa.grid)
    for (k, j), r in zip(jobs, refined):
        est[k][j] = r
    az_tol, el_tol = cfg.doa.grid.az_step, cfg.doa.grid.el_step
    for k in live:
        kept = []
        for a in est[k]:
            if not any(abs(a.azimuth - b.azimuth) <= az_tol and abs(a.elevation - b.elevation) <= el_tol for b in kept):
                kept.append(a)
        est[k] = kept
    return est


def process_cube(cube: DataCube, cfg: ScenarioConfig, *, threads: int | None = None) -> ProcessResult:
    """RD map, CFAR, DOA and point cloud for one data cube."""
    workers = _accel.resolve_threads(threads)
    _accel.configure_threads(workers)
    timings = {}
    t0 = time.perf_counter()
    rdmap = compute_rd_map(cube, cfg.range_fft_size, cfg.doppler_fft_size, cfg.processing.window, workers=workers)
    t1 = time.perf_counter()
    timings["rd"] = t1 - t0
    detections = detect_2d(rdmap.integrated, cfg.cfar)
    t2 = time.perf_counter()
    timings["cfar"] = t2 - t1
    est = estimate_detection_angles(rdmap, cfg, detections)
    t3 = time.perf_counter()
    timings["doa"] = t3 - t2
    keep = [k for k, e in enumerate(est) if e]
    dets = [detections[k] for k in keep]
    angles = [[(a.azimuth, a.elevation) for a in est[k]] for k in keep]
    cloud = build_point_cloud(dets, angles, rdmap)
    timings["cloud"] = time.perf_counter() - t3
    return ProcessResult(rdmap, detections, est, cloud, timings)


def simulate(cfg: ScenarioConfig) -> DataCube:
    cfg.validate()
    return synthesize_beat_signal(cfg.waveform, cfg.layout, cfg.scene)


def run_pipeline(cfg: ScenarioConfig, *, threads: int | None = None) -> ProcessResult:
    """Simulate and process in memory (no files)."""
    cube = simulate(cfg)
    # the on-disk cube is complex64; process the same precision so in-memory
    # and file-based runs agree
    cube = replace(cube, samples=cube.samples.astype(np.complex64))
    return process_cube(cube, cfg, threads=threads)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def run_simulate(cfg: ScenarioConfig, out_dir, *, threads: int | None = None) -> tuple[Path, str]:
    """Synthesize the scenario and write ``<out>/<name>.cube``; return the path and summary line."""
    _accel.configure_threads(_accel.resolve_threads(threads))
    cube = simulate(cfg)
    path = Path(out_dir) / f"{cfg.name}.cube"
    rio.write_cube(path, cube)
    L, nc, ns = cube.samples.shape
    summary = f"simulate: {path.name}: channels={L} chirps={nc} samples={ns} scene={cfg.scene.digest()}"
    return path, summary


def load_cube(path, cfg: ScenarioConfig) -> DataCube:
    hdr, samples = rio.read_cube_samples(path)
    rio.check_cube_header(hdr, cfg.waveform, cfg.layout.num_tx, cfg.layout.num_rx)
    return DataCube(samples, cfg.waveform, cfg.layout.num_tx, cfg.layout.num_rx)


def write_outputs(result: ProcessResult, cfg: ScenarioConfig, out_dir, *, fmt: str = "csv") -> list[Path]:
    out_dir = Path(out_dir)
    written = []
    if cfg.outputs.rd_map:
        if fmt == "binary":
            p = out_dir / f"{cfg.name}_rd.bin"
            rio.write_rd_binary(p, result.rdmap)
        else:
            p = out_dir / f"{cfg.name}_rd.csv"
            rio.write_rd_csv(p, result.rdmap)
        written.append(p)
    if cfg.outputs.detections:
        p = out_dir / f"{cfg.name}_detections.csv"
        rio.write_detections_csv(p, result.detections, result.rdmap)
        written.append(p)
    if cfg.outputs.point_cloud:
        p = out_dir / f"{cfg.name}_cloud.csv"
        rio.write_cloud_csv(p, result.cloud)
        written.append(p)
    if cfg.outputs.ply:
        p = out_dir / f"{cfg.name}_cloud.ply"
        rio.write_cloud_ply(p, result.cloud)
        written.append(p)
    return written


def run_process(cube_path, cfg: ScenarioConfig, out_dir, *, fmt: str = "csv", threads: int | None = None):
    """Process a cube file; returns ``(ProcessResult, written paths)``."""
    cube = load_cube(cube_path, cfg)
    result = process_cube(cube, cfg, threads=threads)
    return result, write_outputs(result, cfg, out_dir, fmt=fmt)


@dataclass(frozen=True)
class CompareReport:
    names: tuple[str, str]
    metrics: tuple[CloudMetrics, CloudMetrics]
    density_gain: object  # Fraction

    def extent_error_delta(self):
        a, b = (m.extent_error for m in self.metrics)
        if a is None or b is None:
            return None
        return tuple(eb - ea for ea, eb in zip(a, b))

    def rows(self):
        rows = []
        for name, m in zip(self.names, self.metrics):
            err = m.extent_error or (math.nan,) * 3
            rows.append((name, m.point_count, *m.extent, *err))
        return rows

    def table(self) -> str:
        buf = _stdio.StringIO()
        head = f"{'config':<24}{'points':>8}{'len x':>9}{'len y':>9}{'len z':>9}{'err x':>9}{'err y':>9}{'err z':>9}"
        buf.write(head + "\n" + "-" * len(head) + "\n")
        for name, n, ex, ey, ez, rx, ry, rz in self.rows():
            buf.write(f"{name:<24}{n:>8d}{ex:>9.3f}{ey:>9.3f}{ez:>9.3f}{rx:>9.3f}{ry:>9.3f}{rz:>9.3f}\n")
        g = self.density_gain
        buf.write(f"density gain ({self.names[1]} / {self.names[0]}): {g.numerator}/{g.denominator} = {float(g):.3f}\n")
        delta = self.extent_error_delta()
        if delta is not None:
            buf.write("extent error delta (B - A): " + ", ".join(f"{d:+.3f}" for d in delta) + "\n")
        return buf.getvalue()


def compare_clouds(cfg_a: ScenarioConfig, cloud_a: PointCloud, cfg_b: ScenarioConfig, cloud_b: PointCloud) -> CompareReport:
    gt = cfg_a.ground_truth or cfg_b.ground_truth
    box = gt.box_size if gt else None
    sel_a = gt.select(cloud_a) if gt else cloud_a
    sel_b = gt.select(cloud_b) if gt else cloud_b
    if len(sel_a) == 0 or len(sel_b) == 0:
        raise ValidationError("a compared configuration produced no object points")
    ma = cloud_metrics(sel_a, box)
    mb = cloud_metrics(sel_b, box, baseline=sel_a)
    return CompareReport((cfg_a.name, cfg_b.name), (ma, mb), mb.density_gain)


def run_compare(cfg_a: ScenarioConfig, cfg_b: ScenarioConfig, out_dir=None, *, threads: int | None = None) -> CompareReport:
    """Run both pipelines on the shared scene; density gain is B over A."""
    if cfg_a.scene != cfg_b.scene:
        raise SceneMismatchError("compared configurations describe different scenes")
    ra = run_pipeline(cfg_a, threads=threads)
    rb = run_pipeline(cfg_b, threads=threads)
    report = compare_clouds(cfg_a, ra.cloud, cfg_b, rb.cloud)
    if out_dir is not None:
        out_dir = Path(out_dir)
        header = ("config", "points", "extent_x_m", "extent_y_m", "extent_z_m", "error_x_m", "error_y_m", "error_z_m")
        rio.write_csv(out_dir / "compare.csv", header, report.rows())
        with rio.atomic_open(out_dir / "compare.txt") as fh:
            fh.write(report.table())
    return report


@dataclass(frozen=True)
class ArrayReport:
    redundancy_h: object
    redundancy_v: object
    az_width: float
    el_width: float
    peak_sidelobe_db: float
    worst_sidelobe_db: float
    extent: tuple[float, float]

    def text(self) -> str:
        def fr(f):
            return f"{f.numerator}/{f.denominator} ({float(f):.4f})" if f is not None else "n/a"

        return (
            f"redundancy horizontal: {fr(self.redundancy_h)}\n"
            f"redundancy vertical:   {fr(self.redundancy_v)}\n"
            f"-3 dB width az: {self.az_width:.4f} deg, el: {self.el_width:.4f} deg\n"
            f"peak sidelobe (boresight): {self.peak_sidelobe_db:.2f} dB\n"
            f"worst in-FoV sidelobe: {self.worst_sidelobe_db:.2f} dB\n"
            f"physical extent: {self.extent[0]:.3f} x {self.extent[1]:.3f} wavelengths\n"
        )


def run_array_analyze(layout: AntennaLayout, grid: AngleGrid | None = None, out_dir=None, *,
                      constraints: ConstraintSet | None = None) -> ArrayReport:
    """Coarray redundancy, widths and sidelobes of a layout; writes the boresight ambiguity map CSV."""
    grid = grid or AngleGrid()
    cons = constraints or ConstraintSet(num_tx=layout.num_tx, num_rx=layout.num_rx,
                                        max_res_az=180.0, max_res_el=180.0, max_sidelobe_db=0.0)
    varr = synthesize_virtual_array(layout)
    rep = verify_constraints(layout, cons, grid, offaxis=True)
    pos = varr.positions
    red_h = redundancy(pos[:, 0]) if np.unique(np.round(pos[:, 0], 9)).size > 1 else None
    red_v = redundancy(pos[:, 1]) if np.unique(np.round(pos[:, 1], 9)).size > 1 else None
    worst = rep.offaxis_sidelobe_db if rep.offaxis_sidelobe_db is not None else rep.peak_sidelobe_db
    worst = max(worst, rep.peak_sidelobe_db)
    report = ArrayReport(red_h, red_v, rep.az_width, rep.el_width, rep.peak_sidelobe_db, worst, rep.extent)
    if out_dir is not None:
        g = grid if varr.is_planar else replace(grid, el_limit=0.0)
        amap = ambiguity_map(varr, (0.0, 0.0), g)
        rio.write_ambiguity_csv(Path(out_dir) / "ambiguity.csv", amap)
    return report


def load_constraints(path) -> tuple[ConstraintSet, int]:
    doc = rio.load_json_document(path, rio.CONSTRAINTS_SCHEMA, "constraints")
    d = {k: v for k, v in doc.items() if k not in ("schema", "rows")}
    return ConstraintSet(**d), int(doc.get("rows", 7))


def run_array_generate(constraints: ConstraintSet, out_dir, *, rows: int = 7):
    layout = generate_ladder_layout(constraints, rows=rows)
    report = verify_constraints(layout, constraints)
    path = Path(out_dir) / "layout.json"
    rio.save_layout(path, layout, "ladder layout generated for the given constraints")
    return path, layout, report
