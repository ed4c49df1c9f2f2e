"""Scenario files, output formats, the end-to-end pipeline and the command line."""

import json
import struct
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from radarcube import _accel, io as rio, scenarios
from radarcube.cli import main
from radarcube.errors import FileFormatError, SceneMismatchError, ValidationError
from radarcube.pipeline import (
    load_cube,
    load_scenario,
    run_compare,
    run_pipeline,
    run_simulate,
    scenario_from_document,
    simulate,
)
from radarcube.point_cloud import PointCloud, RadarPoint


def write_doc(path, doc):
    path.write_text(rio.dump_json(doc))
    return path


def run_cli(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


# ---------------------------------------------------------------------------
# file formats


def test_cube_header_layout():
    assert rio.CUBE_HEADER.size == 64


def test_cube_round_trip(tmp_path):
    cfg = scenario_from_document(scenarios.single_target())
    cube = simulate(cfg)
    path = tmp_path / "a.cube"
    rio.write_cube(path, cube)
    raw = path.read_bytes()
    magic, version, L, nc, ns = struct.unpack_from("<4s4I", raw)
    assert (magic, version, L, nc, ns) == (b"RDC1", 1, 192, 128, 512)
    assert struct.unpack_from("<5d", raw, 20) == (77e9, 3e13, 60e-6, 10e6, 65e-6)
    back = load_cube(path, cfg)
    np.testing.assert_array_equal(back.samples, cube.samples.astype(np.complex64))


def test_cube_header_mismatch(tmp_path):
    cfg = scenario_from_document(scenarios.single_target())
    path, _ = run_simulate(cfg, tmp_path)
    other = replace(cfg, waveform=replace(cfg.waveform, chirp_rate=2.9e13))
    with pytest.raises(FileFormatError, match="chirp_rate"):
        load_cube(path, other)


@pytest.mark.parametrize("damage", ["magic", "truncate"])
def test_corrupt_cube_rejected(tmp_path, damage):
    cfg = scenario_from_document(scenarios.noise_only())
    path, _ = run_simulate(cfg, tmp_path)
    raw = bytearray(path.read_bytes())
    if damage == "magic":
        raw[:4] = b"XXXX"
    else:
        raw = raw[:-8]
    path.write_bytes(bytes(raw))
    with pytest.raises(FileFormatError):
        load_cube(path, cfg)


def test_number_format_six_significant_digits():
    assert rio.fmt(1 / 3) == "0.333333"
    assert rio.fmt(123456789.0) == "1.23457e+08"
    assert rio.fmt(-0.000123456789) == "-0.000123457"
    assert rio.fmt("CA") == "CA"


def _cloud():
    return PointCloud((
        RadarPoint.from_spherical(9.00012345, 0.5, 1.23456789, -2.0, 17.5),
        RadarPoint.from_spherical(4.5, -1.25, -30.0, 10.0, 8.0),
    ))


def test_cloud_csv_round_trip(tmp_path):
    path = tmp_path / "c.csv"
    rio.write_cloud_csv(path, _cloud())
    raw = path.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    lines = raw.decode().splitlines()
    assert lines[0] == ",".join(rio.CLOUD_COLUMNS) and len(lines) == 3
    back = rio.read_cloud_csv(path)
    for a, b in zip(_cloud(), back):
        for f in ("x", "y", "z", "range", "radial_velocity", "azimuth", "elevation", "intensity"):
            assert getattr(b, f) == pytest.approx(getattr(a, f), rel=5e-6, abs=1e-12)


def test_cloud_ply(tmp_path):
    path = tmp_path / "c.ply"
    rio.write_cloud_ply(path, _cloud())
    text = path.read_text()
    head, body = text.split("end_header\n")
    assert head.startswith("ply\nformat ascii 1.0\nelement vertex 2\n")
    rows = [r.split() for r in body.strip().split("\n")]
    assert len(rows) == 2 and all(len(r) == 5 for r in rows)


def test_empty_cloud_files(tmp_path):
    rio.write_cloud_csv(tmp_path / "e.csv", PointCloud())
    assert (tmp_path / "e.csv").read_text() == ",".join(rio.CLOUD_COLUMNS) + "\n"
    assert len(rio.read_cloud_csv(tmp_path / "e.csv")) == 0


# ---------------------------------------------------------------------------
# scenario documents


def test_shipped_fixtures_match_builders():
    for name, doc in scenarios.fixtures().items():
        shipped = json.loads(scenarios.fixture_path(name).read_text())
        assert shipped == json.loads(json.dumps(doc)), name


def test_unknown_key_rejected(tmp_path):
    doc = scenarios.single_target()
    doc["scene"]["bogus"] = 1
    with pytest.raises(ValidationError, match="scene"):
        load_scenario(write_doc(tmp_path / "s.json", doc))


def test_schema_error_names_field_and_line(tmp_path):
    doc = scenarios.single_target()
    doc["waveform"]["samples_per_chirp"] = "many"
    path = write_doc(tmp_path / "s.json", doc)
    line = next(i for i, t in enumerate(path.read_text().splitlines(), 1) if "samples_per_chirp" in t)
    with pytest.raises(ValidationError) as exc:
        load_scenario(path)
    assert "waveform/samples_per_chirp" in str(exc.value)
    assert f"line {line}" in str(exc.value)


def test_malformed_json_names_line(tmp_path):
    path = tmp_path / "s.json"
    path.write_text('{\n  "schema": "radarcube/scenario/1",\n  "waveform": {,\n}\n')
    with pytest.raises(FileFormatError, match="line 3"):
        load_scenario(path)


def test_seed_override():
    cfg = scenario_from_document(scenarios.single_target())
    assert cfg.with_seed(99).scene.rng_seed == 99
    assert cfg.with_seed(None) is cfg


# ---------------------------------------------------------------------------
# end-to-end pipeline


def test_single_target_gives_exactly_one_point():
    cfg = scenario_from_document(scenarios.single_target())
    res = run_pipeline(cfg)
    assert len(res.cloud) == 1
    p = res.cloud.points[0]
    assert abs(p.range - 9.0) <= 0.05
    assert abs(p.azimuth) <= 0.2 and abs(p.elevation) <= 1.0
    assert set(res.timings) == {"rd", "cfar", "doa", "cloud"}


def test_noise_only_false_points_bounded():
    # 8 frames x 2^17 cells = 2^20 cells at P_fa = 1e-4
    cfg = scenario_from_document(scenarios.noise_only())
    total = 0
    for seed in range(8):
        res = run_pipeline(cfg.with_seed(seed))
        assert res.rdmap.integrated.size == 2**17
        total += len(res.cloud)
    assert total <= 420


def test_dynamic_cfar_adds_points_in_front_of_clutter():
    def weak_side(mode):
        cfg = scenario_from_document(scenarios.clutter_edge(mode))
        cloud = run_pipeline(cfg).cloud
        return sum(1 for p in cloud if p.range < scenarios.CLUTTER_EDGE_RANGE - 0.2)

    assert weak_side("DYNAMIC") > weak_side("CA")


def test_pipeline_is_deterministic():
    cfg = scenario_from_document(scenarios.single_target())
    a, b = run_pipeline(cfg), run_pipeline(cfg)
    assert a.cloud == b.cloud
    np.testing.assert_array_equal(a.rdmap.integrated, b.rdmap.integrated)


def test_compare_with_itself():
    cfg = scenario_from_document(scenarios.pedestrian("enhanced", seed=2))
    rep = run_compare(cfg, cfg)
    assert rep.density_gain == 1
    assert rep.extent_error_delta() == (0.0, 0.0, 0.0)


def test_compare_needs_same_scene():
    a = scenario_from_document(scenarios.pedestrian("baseline", seed=1))
    b = scenario_from_document(scenarios.pedestrian("enhanced", seed=2))
    with pytest.raises(SceneMismatchError):
        run_compare(a, b)


def test_pedestrian_enhanced_beats_baseline(tmp_path):
    a = scenario_from_document(scenarios.pedestrian("baseline"), name="baseline")
    b = scenario_from_document(scenarios.pedestrian("enhanced"), name="enhanced")
    rep = run_compare(a, b, tmp_path)
    ea, eb = (m.extent_error for m in rep.metrics)
    assert sum(y <= x for x, y in zip(ea, eb)) >= 2
    # frozen regression values (seed 5)
    assert ea == pytest.approx((0.280, 0.203, 1.82), abs=2e-3)
    assert eb == pytest.approx((0.124, 0.146, 0.006), abs=2e-3)
    assert (tmp_path / "compare.csv").read_text().count("\n") == 3


def test_threads_env_fallback(monkeypatch):
    monkeypatch.setenv("RADARCUBE_THREADS", "3")
    assert _accel.resolve_threads() == 3
    assert _accel.resolve_threads(2) == 2
    monkeypatch.delenv("RADARCUBE_THREADS")
    assert _accel.resolve_threads() == 1
    with pytest.raises(ValueError):
        _accel.resolve_threads(0)


def test_thread_count_does_not_change_results():
    cfg = scenario_from_document(scenarios.single_target())
    assert run_pipeline(cfg, threads=1).cloud == run_pipeline(cfg, threads=4).cloud


# ---------------------------------------------------------------------------
# command line


def test_cli_simulate_reference_scenario(tmp_path, capsys):
    cfg_path = scenarios.fixture_path("single_target.json")
    code, out, _ = run_cli(["simulate", "--config", cfg_path, "--out", tmp_path / "a"], capsys)
    assert code == 0
    assert "channels=192" in out and "chirps=128" in out and "samples=512" in out
    run_cli(["simulate", "--config", cfg_path, "--out", tmp_path / "b"], capsys)
    a_files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert len(a_files) == 1
    assert (tmp_path / "a" / a_files[0]).read_bytes() == (tmp_path / "b" / a_files[0]).read_bytes()


def test_cli_process_writes_outputs(tmp_path, capsys):
    cfg_path = scenarios.fixture_path("single_target.json")
    assert run_cli(["simulate", "--config", cfg_path, "--out", tmp_path], capsys)[0] == 0
    code, out, _ = run_cli(["process", "--config", cfg_path, "--out", tmp_path], capsys)
    assert code == 0
    assert "1 detections, 1 points" in out
    cloud = next(tmp_path.glob("*_cloud.csv"))
    assert len(rio.read_cloud_csv(cloud)) == 1
    rd = next(tmp_path.glob("*_rd.csv")).read_bytes()
    assert b"\r" not in rd and rd.count(b"\n") == 512 * 256 + 1


def test_cli_process_binary_rd(tmp_path, capsys):
    cfg_path = scenarios.fixture_path("noise_only.json")
    run_cli(["simulate", "--config", cfg_path, "--out", tmp_path], capsys)
    assert run_cli(["process", "--config", cfg_path, "--out", tmp_path, "--format", "binary"], capsys)[0] == 0
    power, rbs, vbs = rio.read_rd_binary(next(tmp_path.glob("*_rd.bin")))
    assert power.shape == (512, 256) and rbs > 0 and vbs > 0


def test_cli_reruns_are_byte_identical(tmp_path, capsys):
    cfg_path = scenarios.fixture_path("single_target.json")
    for d in ("a", "b"):
        run_cli(["simulate", "--config", cfg_path, "--out", tmp_path / d], capsys)
        run_cli(["process", "--config", cfg_path, "--out", tmp_path / d], capsys)
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name


def test_cli_aliased_scene_exit_code(tmp_path, capsys):
    doc = scenarios.single_target()
    doc["scene"]["scatterers"][0]["position"] = [0.0, 40.0, 0.0]
    path = write_doc(tmp_path / "far.json", doc)
    code, _, err = run_cli(["simulate", "--config", path, "--out", tmp_path], capsys)
    assert code == 2
    assert json.loads(err)["error"] == "AliasedScene"


def test_cli_corrupt_cube_exit_code(tmp_path, capsys):
    cfg_path = scenarios.fixture_path("noise_only.json")
    bad = tmp_path / "bad.cube"
    bad.write_bytes(b"RDC1" + b"\0" * 20)
    code, _, err = run_cli(["process", "--config", cfg_path, "--out", tmp_path, "--cube", bad], capsys)
    assert code == 3
    assert json.loads(err)["exit_code"] == 3


def test_cli_malformed_layout_names_line(tmp_path, capsys):
    path = tmp_path / "layout.json"
    path.write_text('{\n  "schema": "radarcube/layout/1",\n  "tx": [[0, 0]],\n  "rx": [[0, 0], [0.5]]\n}\n')
    code, _, err = run_cli(["array", "analyze", "--config", path, "--out", tmp_path], capsys)
    assert code != 0
    assert "line 4" in json.loads(err)["message"]


def test_cli_ula4_redundancy(tmp_path, capsys):
    doc = rio.layout_document(scenarios.ula_layout(4))
    path = write_doc(tmp_path / "ula4.json", doc)
    code, out, _ = run_cli(["array", "analyze", "--config", path, "--out", tmp_path], capsys)
    assert code == 0
    assert "redundancy horizontal: 2/1 (2.0000)" in out
    assert (tmp_path / "ambiguity.csv").exists()


def test_cli_reference_ladder_widths(tmp_path, capsys):
    code, out, _ = run_cli(["array", "analyze", "--config", scenarios.fixture_path("reference_ladder.json"),
                            "--out", tmp_path], capsys)
    assert code == 0
    line = next(t for t in out.splitlines() if t.startswith("-3 dB width"))
    az, el = (float(t.split()[0]) for t in line.split(":")[1:])
    assert az <= 2.0 and el <= 6.0


def test_cli_compare_same_file(tmp_path, capsys):
    cfg_path = scenarios.fixture_path("pedestrian_enhanced.json")
    code, out, _ = run_cli(["compare", "--config", cfg_path, "--config", cfg_path, "--out", tmp_path], capsys)
    assert code == 0
    assert "= 1.000" in out


def test_cli_usage_error_is_validation(capsys):
    code, _, _ = run_cli(["simulate"], capsys)
    assert code == 2


def test_cli_bad_threads_rejected(tmp_path, capsys):
    code, _, _ = run_cli(["simulate", "--config", scenarios.fixture_path("noise_only.json"), "--out", tmp_path,
                          "--threads", "0"], capsys)
    assert code == 2


def test_cli_infeasible_constraints_exit_code(tmp_path, capsys):
    doc = json.loads(scenarios.fixture_path("reference_constraints.json").read_text())
    doc.update(max_res_az=0.01, max_extent=1.0)
    path = write_doc(tmp_path / "c.json", doc)
    code, _, err = run_cli(["array", "generate", "--config", path, "--out", tmp_path], capsys)
    assert code == 4
    assert json.loads(err)["error"] == "InfeasibleConstraints"
