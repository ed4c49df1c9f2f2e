"""File formats: cube/RD binaries, CSV and PLY exports, JSON layout and config documents.

Binary formats are little-endian.

Cube (``RDC1``): 64-byte header -- magic, then ``version, L, chirps,
samples`` as uint32 and ``f_c, k_r, T_p, f_s, T_c`` as float64, zero
padded -- followed by complex64 samples in ``[channel][chirp][sample]``
order.

RD map (``RDM1``): 32-byte header -- magic, ``n_range, n_doppler`` as
uint32, ``range_bin_size, velocity_bin_size`` as float64, zero padded --
followed by the integrated power as float32 ``[range][doppler]``.

Text exports use a single header row, comma separators, LF line endings
and 6 significant digits.
"""

from __future__ import annotations

import contextlib
import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .errors import FileFormatError, ValidationError

CUBE_MAGIC = b"RDC1"
CUBE_VERSION = 1
CUBE_HEADER = struct.Struct("<4s4I5d4x")
RD_MAGIC = b"RDM1"
RD_HEADER = struct.Struct("<4s2I2d4x")
assert CUBE_HEADER.size == 64 and RD_HEADER.size == 32


# ---------------------------------------------------------------------------
# atomic writes
# ---------------------------------------------------------------------------


@contextlib.contextmanager
def atomic_open(path, mode: str = "w"):
    """Open a temporary sibling of ``path`` and rename it into place on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    # mkstemp creates 0600 files; give the result the usual umask-derived mode
    umask = os.umask(0)
    os.umask(umask)
    os.chmod(tmp, 0o666 & ~umask)
    kwargs = {"newline": ""} if "b" not in mode else {}
    try:
        with os.fdopen(fd, mode, **kwargs) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def fmt(v) -> str:
    """Six significant digits, '.' decimal separator."""
    if isinstance(v, str):
        return v
    return format(float(v), ".6g")


def write_csv(path, header, rows) -> None:
    with atomic_open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def _db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(x, dtype=np.float64))


# ---------------------------------------------------------------------------
# cube files
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CubeHeader:
    version: int
    num_channels: int
    num_chirps: int
    num_samples: int
    carrier_frequency: float
    chirp_rate: float
    pulse_duration: float
    sample_rate: float
    chirp_repetition_interval: float


def write_cube(path, cube) -> None:
    cfg = cube.config
    L, nc, ns = cube.samples.shape
    header = CUBE_HEADER.pack(
        CUBE_MAGIC, CUBE_VERSION, L, nc, ns,
        cfg.carrier_frequency, cfg.chirp_rate, cfg.pulse_duration, cfg.sample_rate, cfg.chirp_repetition_interval,
    )
    data = np.ascontiguousarray(cube.samples, dtype="<c8")
    with atomic_open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def read_cube_header(path) -> CubeHeader:
    try:
        with open(path, "rb") as fh:
            raw = fh.read(CUBE_HEADER.size)
    except OSError as exc:
        raise FileFormatError(f"cannot read cube file {path}: {exc}") from exc
    if len(raw) < CUBE_HEADER.size:
        raise FileFormatError(f"{path}: truncated header")
    magic, version, L, nc, ns, *floats = CUBE_HEADER.unpack(raw)
    if magic != CUBE_MAGIC:
        raise FileFormatError(f"{path}: bad magic {magic!r}, expected {CUBE_MAGIC!r}")
    if version != CUBE_VERSION:
        raise FileFormatError(f"{path}: unsupported cube format version {version}")
    return CubeHeader(version, L, nc, ns, *floats)


def read_cube_samples(path) -> tuple[CubeHeader, np.ndarray]:
    """Header and complex64 samples ``(L, chirps, samples)``; checks the payload size."""
    hdr = read_cube_header(path)
    expected = hdr.num_channels * hdr.num_chirps * hdr.num_samples
    size = os.path.getsize(path) - CUBE_HEADER.size
    if size != expected * 8:
        raise FileFormatError(f"{path}: payload has {size} bytes, header implies {expected * 8}")
    data = np.fromfile(path, dtype="<c8", offset=CUBE_HEADER.size)
    return hdr, data.reshape(hdr.num_channels, hdr.num_chirps, hdr.num_samples).astype(np.complex64, copy=False)


def check_cube_header(hdr: CubeHeader, config, num_tx: int, num_rx: int) -> None:
    """Raise :class:`FileFormatError` if the header disagrees with a configuration."""
    problems = []
    if hdr.num_channels != num_tx * num_rx:
        problems.append(f"channels {hdr.num_channels} != {num_tx}x{num_rx}")
    if hdr.num_chirps != config.chirps_per_frame_per_tx:
        problems.append(f"chirps {hdr.num_chirps} != {config.chirps_per_frame_per_tx}")
    if hdr.num_samples != config.samples_per_chirp:
        problems.append(f"samples {hdr.num_samples} != {config.samples_per_chirp}")
    for name in ("carrier_frequency", "chirp_rate", "pulse_duration", "sample_rate", "chirp_repetition_interval"):
        a, b = getattr(hdr, name), getattr(config, name)
        if not np.isclose(a, b, rtol=1e-12, atol=0.0):
            problems.append(f"{name} {a} != {b}")
    if problems:
        raise FileFormatError("cube header does not match the configuration: " + "; ".join(problems))


# ---------------------------------------------------------------------------
# RD maps
# ---------------------------------------------------------------------------


def write_rd_binary(path, rdmap) -> None:
    p = np.ascontiguousarray(rdmap.integrated, dtype="<f4")
    n_r, n_d = p.shape
    header = RD_HEADER.pack(RD_MAGIC, n_r, n_d, rdmap.range_bin_size, rdmap.velocity_bin_size)
    with atomic_open(path, "wb") as fh:
        fh.write(header)
        fh.write(p.tobytes())


def read_rd_binary(path):
    """Return ``(power, range_bin_size, velocity_bin_size)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < RD_HEADER.size:
        raise FileFormatError(f"{path}: truncated header")
    magic, n_r, n_d, rbs, vbs = RD_HEADER.unpack(raw[: RD_HEADER.size])
    if magic != RD_MAGIC:
        raise FileFormatError(f"{path}: bad magic {magic!r}")
    body = raw[RD_HEADER.size :]
    if len(body) != n_r * n_d * 4:
        raise FileFormatError(f"{path}: payload size mismatch")
    return np.frombuffer(body, dtype="<f4").reshape(n_r, n_d), rbs, vbs


def write_rd_csv(path, rdmap) -> None:
    """Rows ordered by range, then by ascending velocity."""
    p = rdmap.integrated
    rng = rdmap.range_axis()
    vel = rdmap.velocity_axis()
    order = np.argsort(vel, kind="stable")
    db = _db(p)
    rows = ((rng[r], vel[d], db[r, d]) for r in range(p.shape[0]) for d in order)
    write_csv(path, ("range_m", "velocity_mps", "power_db"), rows)


# ---------------------------------------------------------------------------
# detections and clouds
# ---------------------------------------------------------------------------


def write_detections_csv(path, detections, rdmap) -> None:
    rows = []
    for d in detections:
        rows.append((
            float(rdmap.range_of_bin(d.range_bin)),
            float(rdmap.velocity_of_bin(d.doppler_bin)),
            float(_db(d.amplitude)),
            float(_db(d.noise_estimate)),
            float(_db(d.threshold)),
            d.detector,
            d.region,
        ))
    write_csv(path, ("range_m", "velocity_mps", "power_db", "noise_db", "threshold_db", "detector", "region"), rows)


CLOUD_COLUMNS = ("x_m", "y_m", "z_m", "range_m", "velocity_mps", "azimuth_deg", "elevation_deg", "intensity_db")


def write_cloud_csv(path, cloud) -> None:
    rows = ((p.x, p.y, p.z, p.range, p.radial_velocity, p.azimuth, p.elevation, p.intensity) for p in cloud)
    write_csv(path, CLOUD_COLUMNS, rows)


def read_cloud_csv(path):
    from .point_cloud import PointCloud, RadarPoint

    with open(path, newline="") as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != CLOUD_COLUMNS:
            raise FileFormatError(f"{path}: unexpected header {header}")
        pts = []
        for line in fh:
            x, y, z, r, v, az, el, inten = (float(t) for t in line.strip().split(","))
            pts.append(RadarPoint(r, v, az, el, inten, x, y, z))
    return PointCloud(tuple(pts))


def write_cloud_ply(path, cloud) -> None:
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(cloud)}",
        "property float x",
        "property float y",
        "property float z",
        "property float velocity",
        "property float intensity",
        "end_header",
    ]
    for p in cloud:
        lines.append(" ".join(fmt(v) for v in (p.x, p.y, p.z, p.radial_velocity, p.intensity)))
    with atomic_open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_ambiguity_csv(path, amap) -> None:
    db = amap.magnitude_db()
    rows = ((amap.az[i], amap.el[j], db[i, j]) for i in range(amap.az.size) for j in range(amap.el.size))
    write_csv(path, ("az_deg", "el_deg", "magnitude_db"), rows)


def write_spectrum_csv(path, spectrum) -> None:
    db = spectrum.magnitude_db()
    if spectrum.el is None:
        write_csv(path, ("angle_deg", "magnitude_db"), zip(spectrum.az, db))
    else:
        rows = ((spectrum.az[i], spectrum.el[j], db[i, j]) for i in range(spectrum.az.size) for j in range(spectrum.el.size))
        write_csv(path, ("angle_deg", "el_deg", "magnitude_db"), rows)


# ---------------------------------------------------------------------------
# JSON documents
# ---------------------------------------------------------------------------

_PAIR = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_TRIPLE = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_INTERVAL = _PAIR
_POS_LIST = {"type": "array", "items": _PAIR, "minItems": 1}

LAYOUT_SCHEMA_ID = "radarcube/layout/1"
SCENARIO_SCHEMA_ID = "radarcube/scenario/1"
CONSTRAINTS_SCHEMA_ID = "radarcube/constraints/1"

LAYOUT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema", "tx", "rx"],
    "properties": {
        "schema": {"const": LAYOUT_SCHEMA_ID},
        "units": {"const": "wavelength"},
        "description": {"type": "string"},
        "board_extent": _PAIR,
        "tx": _POS_LIST,
        "rx": _POS_LIST,
    },
}

_LAYOUT_REF = {
    "oneOf": [
        {"type": "object", "additionalProperties": False, "required": ["file"],
         "properties": {"file": {"type": "string"}}},
        {"type": "object", "additionalProperties": False, "required": ["builtin"],
         "properties": {"builtin": {"enum": ["reference_ladder", "ula8"]}}},
        {"type": "object", "additionalProperties": False, "required": ["tx", "rx"],
         "properties": {"tx": _POS_LIST, "rx": _POS_LIST, "board_extent": _PAIR}},
    ]
}

_REFLECTIVITY = {"oneOf": [{"type": "number"}, _PAIR]}

SCENARIO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema", "waveform", "layout", "scene"],
    "properties": {
        "schema": {"const": SCENARIO_SCHEMA_ID},
        "description": {"type": "string"},
        "waveform": {
            "type": "object",
            "additionalProperties": False,
            "required": ["carrier_frequency", "chirp_rate", "pulse_duration", "sample_rate",
                         "samples_per_chirp", "chirps_per_frame_per_tx", "chirp_repetition_interval"],
            "properties": {
                "carrier_frequency": {"type": "number", "exclusiveMinimum": 0},
                "chirp_rate": {"type": "number", "exclusiveMinimum": 0},
                "pulse_duration": {"type": "number", "exclusiveMinimum": 0},
                "sample_rate": {"type": "number", "exclusiveMinimum": 0},
                "samples_per_chirp": {"type": "integer", "minimum": 2},
                "chirps_per_frame_per_tx": {"type": "integer", "minimum": 1},
                "chirp_repetition_interval": {"type": "number", "exclusiveMinimum": 0},
                "residual_video_phase": {"type": "boolean"},
            },
        },
        "layout": _LAYOUT_REF,
        "scene": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "noise_power": {"type": "number", "minimum": 0},
                "seed": {"type": "integer", "minimum": 0},
                "scatterers": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["position"],
                        "properties": {"position": _TRIPLE, "velocity": _TRIPLE, "reflectivity": _REFLECTIVITY},
                    },
                },
                "extended_targets": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["shape", "center", "size", "count"],
                        "properties": {
                            "shape": {"enum": ["patch", "box_shell"]},
                            "center": _TRIPLE,
                            "size": _TRIPLE,
                            "count": {"type": "integer", "minimum": 1},
                            "velocity": _TRIPLE,
                            "angular_velocity": _TRIPLE,
                            "velocity_spread": {"type": "number", "minimum": 0},
                            "amplitude": {"type": "number", "exclusiveMinimum": 0},
                            "random_phase": {"type": "boolean"},
                        },
                    },
                },
                "clutter_regions": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["range", "velocity", "power"],
                        "properties": {"range": _INTERVAL, "velocity": _INTERVAL,
                                       "power": {"type": "number", "minimum": 0}},
                    },
                },
            },
        },
        "ground_truth": {
            "type": "object",
            "additionalProperties": False,
            "required": ["box_size"],
            "properties": {"box_size": _TRIPLE, "center": _TRIPLE, "margin": {"type": "number", "minimum": 0}},
        },
        "processing": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "range_fft": {"type": "integer", "minimum": 2},
                "doppler_fft": {"type": "integer", "minimum": 1},
                "window": {"enum": ["hann", "none"]},
            },
        },
        "cfar": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["CA", "SOCA", "DYNAMIC"]},
                "num_training": {"type": "integer", "minimum": 1},
                "num_guard": {"type": "integer", "minimum": 0},
                "pfa": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "edge_window": {"type": "integer", "minimum": 4},
                "edge_trigger_ratio": {"type": "number", "minimum": 1},
                "region_prior": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["range_bins", "doppler_bins", "label"],
                        "properties": {
                            "range_bins": {"type": "array", "items": {"type": "integer", "minimum": 0},
                                           "minItems": 2, "maxItems": 2},
                            "doppler_bins": {"type": "array", "items": {"type": "integer", "minimum": 0},
                                             "minItems": 2, "maxItems": 2},
                            "label": {"enum": ["strong", "weak"]},
                        },
                    },
                },
            },
        },
        "doa": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "az_limit": {"type": "number", "exclusiveMinimum": 0, "maximum": 90},
                "el_limit": {"type": "number", "minimum": 0, "maximum": 90},
                "az_step": {"type": "number", "exclusiveMinimum": 0},
                "el_step": {"type": "number", "exclusiveMinimum": 0},
                "multi_peak": {"type": "boolean"},
                "motion_compensation": {"type": "boolean"},
                "focus": {"type": "boolean"},
            },
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rd_map": {"type": "boolean"},
                "detections": {"type": "boolean"},
                "point_cloud": {"type": "boolean"},
                "ply": {"type": "boolean"},
            },
        },
    },
}

CONSTRAINTS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema"],
    "properties": {
        "schema": {"const": CONSTRAINTS_SCHEMA_ID},
        "min_fov_az": {"type": "number", "exclusiveMinimum": 0},
        "min_fov_el": {"type": "number", "exclusiveMinimum": 0},
        "max_res_az": {"type": "number", "exclusiveMinimum": 0},
        "max_res_el": {"type": "number", "exclusiveMinimum": 0},
        "max_extent": {"type": "number", "exclusiveMinimum": 0},
        "num_tx": {"type": "integer", "minimum": 1},
        "num_rx": {"type": "integer", "minimum": 1},
        "max_sidelobe_db": {"type": "number"},
        "rows": {"type": "integer", "minimum": 1},
    },
}


def _line_of(text: str, path) -> int | None:
    """Best-effort line number of the JSON element at ``path`` (a key/index sequence)."""
    keys = [p for p in path if isinstance(p, str)]
    if not keys:
        return None
    needle = f'"{keys[-1]}"'
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return None


def load_json_document(path, schema: dict, what: str) -> dict:
    """Parse and schema-validate a JSON document.

    Raises
    ------
    FileFormatError
        Unreadable file or malformed JSON (the message names line and column).
    ValidationError
        Schema violations (the message names the field path and, when it can
        be located, the line).
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FileFormatError(f"cannot read {what} file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    validate_document(doc, schema, what, text=text, source=str(path))
    return doc


def validate_document(doc, schema, what, *, text: str | None = None, source: str = "<document>") -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if not errors:
        return
    err = jsonschema.exceptions.best_match(errors)
    field_path = "/".join(str(p) for p in err.absolute_path) or "<root>"
    where = ""
    if text is not None:
        path = list(err.absolute_path)
        if err.validator == "additionalProperties":
            extra = [k for k in err.instance if k not in err.schema.get("properties", {})]
            path = path + extra[:1]
        line = _line_of(text, path)
        if line is not None:
            where = f" (line {line})"
    raise ValidationError(f"{source}: invalid {what} at {field_path}{where}: {err.message}")


def load_layout(path):
    from .array_design import AntennaLayout

    doc = load_json_document(path, LAYOUT_SCHEMA, "layout")
    return layout_from_document(doc)


def layout_from_document(doc):
    from .array_design import AntennaLayout

    return AntennaLayout(np.array(doc["tx"], float), np.array(doc["rx"], float),
                         tuple(doc.get("board_extent", (35.0, 35.0))))


def layout_document(layout, description: str | None = None) -> dict:
    doc = {"schema": LAYOUT_SCHEMA_ID, "units": "wavelength"}
    if description:
        doc["description"] = description
    doc["board_extent"] = list(layout.board_extent)
    doc["tx"] = [[float(a), float(b)] for a, b in layout.tx_positions]
    doc["rx"] = [[float(a), float(b)] for a, b in layout.rx_positions]
    return doc


def dump_json(doc) -> str:
    """Stable JSON text: two-space indent, position pairs kept on one line."""
    text = json.dumps(doc, indent=2)
    # collapse short numeric arrays onto one line for readability
    import re

    pattern = re.compile(r"\[\s+(-?[\d.eE+-]+),\s+(-?[\d.eE+-]+)(?:,\s+(-?[\d.eE+-]+))?\s+\]")

    def repl(m):
        parts = [g for g in m.groups() if g is not None]
        return "[" + ", ".join(parts) + "]"

    return pattern.sub(repl, text) + "\n"


def save_layout(path, layout, description: str | None = None) -> None:
    with atomic_open(path, "w") as fh:
        fh.write(dump_json(layout_document(layout, description)))
