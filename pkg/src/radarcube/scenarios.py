"""Builders for the frozen reference layouts and scenario documents.

The JSON files under ``radarcube/data`` are generated by :func:`write_fixtures`
and shipped with the package, so acceptance runs never depend on the layout
search.  Tests check that the shipped files still match these builders.

Run ``python3 -m radarcube.scenarios <dir>`` to regenerate them.
"""

from __future__ import annotations

import copy
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import io as rio
from .array_design import AntennaLayout, LadderParameters, ladder_layout

#: 77 GHz, 1.536 GHz sampled sweep (9.8 cm range resolution), 25 m range, 12-way TDM
REFERENCE_WAVEFORM = {
    "carrier_frequency": 77e9,
    "chirp_rate": 3e13,
    "pulse_duration": 60e-6,
    "sample_rate": 10e6,
    "samples_per_chirp": 512,
    "chirps_per_frame_per_tx": 128,
    "chirp_repetition_interval": 65e-6,
}

#: parameters of the ladder layout selected by the constraint search for the
#: reference constraint set (12 TX, 16 RX, 35-wavelength board, 2 / 6 deg)
REFERENCE_LADDER = LadderParameters(tx_pitch=0.5, row_pitch=1.35, stagger_span=27.0, rows=7)

DEFAULT_CFAR = {"mode": "CA", "num_training": 8, "num_guard": 4, "pfa": 1e-4}


def reference_ladder_layout() -> AntennaLayout:
    return ladder_layout(REFERENCE_LADDER, 12, 16, 35.0)


def ula_layout(n: int, pitch: float = 0.5) -> AntennaLayout:
    """Single TX at the origin and ``n`` RX elements at ``pitch`` wavelengths."""
    rx = np.stack([np.arange(n) * pitch, np.zeros(n)], axis=1)
    return AntennaLayout(np.zeros((1, 2)), rx, (35.0, 35.0))


def _scenario(description, layout, scene, *, cfar=None, doa=None, processing=None, ground_truth=None, outputs=None):
    doc = {
        "schema": rio.SCENARIO_SCHEMA_ID,
        "description": description,
        "waveform": dict(REFERENCE_WAVEFORM),
        "layout": {"builtin": layout},
        "scene": scene,
        "processing": processing or {"window": "hann"},
        "cfar": cfar or dict(DEFAULT_CFAR),
        "doa": doa or {"az_limit": 60.0, "el_limit": 20.0, "az_step": 0.1, "el_step": 0.5},
    }
    if ground_truth is not None:
        doc["ground_truth"] = ground_truth
    if outputs is not None:
        doc["outputs"] = outputs
    return doc


def single_target() -> dict:
    """One static unit scatterer at 9 m boresight in white noise."""
    return _scenario(
        "single point scatterer at 9.00 m on boresight",
        "reference_ladder",
        {"noise_power": 10.0, "seed": 1, "scatterers": [{"position": [0.0, 9.0, 0.0]}]},
    )


def noise_only() -> dict:
    """White noise only, single channel, for false-alarm counting."""
    doc = _scenario("receiver noise only", "ula8", {"noise_power": 1.0, "seed": 7})
    doc["layout"] = {"tx": [[0.0, 0.0]], "rx": [[0.0, 0.0]]}
    return doc


CLUTTER_EDGE_RANGE = 12.0


def clutter_edge(mode: str = "CA") -> dict:
    """Weak targets just in front of a strong clutter band.

    The band covers every Doppler bin from ``CLUTTER_EDGE_RANGE`` outward at
    25 dB above the noise; three weak scatterers sit 0.45-0.75 m in front of it.
    """
    cfar = dict(DEFAULT_CFAR, mode=mode)
    targets = [
        {"position": [0.0, CLUTTER_EDGE_RANGE - 0.45, 0.0], "velocity": [0.0, -2.0, 0.0], "reflectivity": 0.04},
        {"position": [0.0, CLUTTER_EDGE_RANGE - 0.60, 0.0], "velocity": [0.0, 3.0, 0.0], "reflectivity": 0.04},
        {"position": [0.0, CLUTTER_EDGE_RANGE - 0.75, 0.0], "velocity": [0.0, -5.0, 0.0], "reflectivity": 0.04},
    ]
    scene = {
        "noise_power": 1.0,
        "seed": 3,
        "scatterers": targets,
        "clutter_regions": [{"range": [CLUTTER_EDGE_RANGE, 24.0], "velocity": [-14.9, 14.9], "power": 10.0 ** 2.5}],
    }
    return _scenario(f"weak targets in front of a 25 dB clutter edge ({mode} CFAR)", "ula8", scene, cfar=cfar,
                     doa={"az_limit": 60.0, "el_limit": 0.0, "az_step": 0.1, "el_step": 0.5})


EXTENDED_CENTER = [0.5, 7.0, 0.0]
PEDESTRIAN_CENTER = [0.0, 6.0, 0.0]


def extended_target(variant: str = "enhanced", seed: int = 11) -> dict:
    """Frontal 0.7 x 0.6 m patch of 40 scatterers at 7 m with a clutter band behind it.

    Each scatterer carries its own small radial velocity (vegetation-like
    micro-motion), which spreads the patch over Doppler so the object
    occupies many range-Doppler cells in a single frame.
    """
    scene = {
        "noise_power": 1.0,
        "seed": seed,
        "extended_targets": [
            {"shape": "patch", "center": EXTENDED_CENTER, "size": [0.7, 0.0, 0.6], "count": 40,
             "amplitude": 0.1, "velocity_spread": 0.5, "random_phase": True},
        ],
        "clutter_regions": [{"range": [7.4, 24.0], "velocity": [-0.2, 0.2], "power": 10.0 ** 2.5}],
    }
    gt = {"box_size": [0.7, 0.0, 0.6], "center": EXTENDED_CENTER, "margin": 0.5}
    return _variant(f"frontal patch with micro-motion ({variant})", variant, scene, gt)


def pedestrian(variant: str = "enhanced", seed: int = 5) -> dict:
    """Scatterers on the shell of a 0.7 x 0.15 x 1.82 m box at 6 m.

    The figure stands still; per-scatterer micro-motion (sway, breathing,
    clothing) spreads its returns over Doppler.
    """
    scene = {
        "noise_power": 1.0,
        "seed": seed,
        "extended_targets": [
            {"shape": "box_shell", "center": PEDESTRIAN_CENTER, "size": [0.7, 0.15, 1.82], "count": 80,
             "amplitude": 0.1, "velocity_spread": 0.5, "random_phase": True},
        ],
    }
    gt = {"box_size": [0.7, 0.15, 1.82], "center": PEDESTRIAN_CENTER, "margin": 0.5}
    return _variant(f"pedestrian-sized scatterer shell ({variant})", variant, scene, gt)


def _variant(description, variant, scene, gt):
    waveform = dict(REFERENCE_WAVEFORM)
    if variant == "enhanced":
        layout, cfar = "reference_ladder", dict(DEFAULT_CFAR, mode="DYNAMIC")
    elif variant == "baseline":
        layout, cfar = "ula8", dict(DEFAULT_CFAR, mode="CA")
        # one TX: space its chirps by the full 12-slot cycle so both configurations
        # share frame duration, velocity resolution and unambiguous velocity
        waveform["chirp_repetition_interval"] = 12 * REFERENCE_WAVEFORM["chirp_repetition_interval"]
    else:
        raise ValueError(f"unknown variant {variant!r}")
    doa = {"az_limit": 60.0, "el_limit": 20.0, "az_step": 0.1, "el_step": 0.5, "multi_peak": True}
    doc = _scenario(description, layout, scene, cfar=cfar, doa=doa, ground_truth=gt)
    doc["waveform"] = waveform
    return doc


def reference_frame(n_targets: int = 48, seed: int = 21) -> dict:
    """Full-size frame (192 channels, 128 chirps, 512 samples) with scattered targets."""
    rng = np.random.default_rng(seed)
    scat = []
    for _ in range(n_targets):
        r = rng.uniform(2.0, 22.0)
        az = np.radians(rng.uniform(-50.0, 50.0))
        el = np.radians(rng.uniform(-15.0, 15.0))
        pos = [r * np.cos(el) * np.sin(az), r * np.cos(el) * np.cos(az), r * np.sin(el)]
        vr = rng.uniform(-1.0, 1.0)
        vel = [-vr * p / r for p in pos]
        scat.append({"position": [round(float(p), 6) for p in pos],
                     "velocity": [round(float(v), 6) for v in vel],
                     "reflectivity": 1.0})
    return _scenario("reference-size frame for timing", "reference_ladder",
                     {"noise_power": 10.0, "seed": seed, "scatterers": scat})


def fixtures() -> dict[str, dict]:
    """All shipped documents keyed by file name."""
    out = {
        "reference_ladder.json": rio.layout_document(reference_ladder_layout(), "reference ladder layout, 12 TX / 16 RX"),
        "ula8.json": rio.layout_document(ula_layout(8), "baseline uniform linear array, 1 TX / 8 RX at half wavelength"),
        "single_target.json": single_target(),
        "noise_only.json": noise_only(),
        "clutter_edge_ca.json": clutter_edge("CA"),
        "clutter_edge_dynamic.json": clutter_edge("DYNAMIC"),
        "extended_enhanced.json": extended_target("enhanced"),
        "extended_baseline.json": extended_target("baseline"),
        "pedestrian_enhanced.json": pedestrian("enhanced"),
        "pedestrian_baseline.json": pedestrian("baseline"),
        "reference_frame.json": reference_frame(),
        "reference_constraints.json": {"schema": rio.CONSTRAINTS_SCHEMA_ID, "min_fov_az": 60.0, "min_fov_el": 20.0,
                                       "max_res_az": 2.0, "max_res_el": 6.0, "max_extent": 35.0,
                                       "num_tx": 12, "num_rx": 16, "max_sidelobe_db": -10.0, "rows": 7},
    }
    return copy.deepcopy(out)


def fixture_path(name: str) -> Path:
    """Filesystem path of a shipped fixture (editable or regular install)."""
    return Path(str(resources.files("radarcube") / "data" / name))


def write_fixtures(directory) -> list[Path]:
    directory = Path(directory)
    paths = []
    for name, doc in fixtures().items():
        p = directory / name
        with rio.atomic_open(p) as fh:
            fh.write(rio.dump_json(doc))
        paths.append(p)
    return paths


if __name__ == "__main__":  # pragma: no cover
    target = sys.argv[1] if len(sys.argv) > 1 else str(Path(__file__).parent / "data")
    for p in write_fixtures(target):
        print(p)
