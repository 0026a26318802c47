import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from mmvsar.cli import EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_OK, main
from mmvsar.config import config_from_dict
from mmvsar.experiments import (build_scene, build_grid, build_geometry, build_subapertures,
                                run_experiment, support_metrics)
from mmvsar.resolution import SemimetricTable, semimetric_table

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL_BOUND = {
    "schema": 1, "seed": 3,
    "geometry": {"elementSpacing": 5.0},
    "segmentation": {"a": 1200.0, "nViews": 4},
    "grid": {"extentUnits": 20.0, "spacingUnits": 0.5},
    "scene": {"recipe": {"type": "random-line", "count": 4, "spacingUnits": [2.0, 3.0]}},
    "noise": {"sigmaFraction": 0.05},
    "experiment": {"kind": "bound-suite", "trials": 6, "r": 0.5},
}
SMALL_RATIO = {
    "schema": 1,
    "segmentation": {"a": 75.0, "nViews": 50},
    "experiment": {"kind": "ratio-histogram", "trials": 5, "supportSizes": [4, 9]},
}


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def _run(tmp_path, cfg, out="out", *extra):
    return main(["run", "--config", str(_write(tmp_path, cfg)), "--out",
                 str(tmp_path / out), *extra])


def _table(n=5):
    # points on a line, semimetric = min(1, |i - j| / 4)
    idx = np.arange(n)
    D = np.minimum(1.0, np.abs(idx[:, None] - idx[None, :]) / 4.0)
    return SemimetricTable(values=D, correlation=1 - D)


def test_support_metrics_examples():
    t = _table(12)
    m = support_metrics([2, 7], [2, 7], t, 0.5)
    assert m.exact_match and m.spurious == 0 and m.missed == 0
    m = support_metrics([2, 7], [2, 7, 11], t, 0.5)
    assert not m.exact_match and m.spurious == 1 and m.spurious_pixels == (11,)
    m = support_metrics([2, 7], [3], t, 0.5)
    assert m.spurious == 0 and m.missed == 1 and m.missed_pixels == (7,)
    m = support_metrics([2], [], t, 0.5)
    assert m.missed == 1 and m.to_dict()["missed_pixels"] == [2]


def test_validate_command(tmp_path, capsys):
    assert main(["validate", "--config", str(CONFIGS / "imaging_comparison.json")]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["valid"] and out["kind"] == "imaging-comparison"


def test_config_error_exit_code(tmp_path, capsys):
    bad = _write(tmp_path, {"schema": 1, "experiment": {"kind": "nope"}})
    assert main(["validate", "--config", str(bad)]) == EXIT_CONFIG
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "config" and "kind" in err["message"]
    assert main(["run", "--config", str(tmp_path / "none.json"), "--out",
                 str(tmp_path / "o")]) == EXIT_CONFIG


def test_unwritable_output_exit_code(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert _run(tmp_path, SMALL_RATIO, out="file/sub") == EXIT_CONFIG
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "output"


def test_negative_seed_rejected(tmp_path):
    assert _run(tmp_path, SMALL_RATIO, "o", "--seed", "-2") == EXIT_CONFIG


def test_nonconvergence_exit_code(tmp_path, capsys):
    cfg = json.loads(json.dumps(SMALL_BOUND))
    cfg["experiment"]["trials"] = 2
    cfg["solver"] = {"maxInnerIters": 1, "maxOuterIters": 2}
    assert _run(tmp_path, cfg) == EXIT_NONCONVERGED
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "nonconvergence"
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["nonconverged_required"] == 2


def test_outputs_carry_hash_and_seed(tmp_path):
    assert _run(tmp_path, SMALL_RATIO, "o", "--seed", "4") == EXIT_OK
    cfg = config_from_dict(SMALL_RATIO)
    out = tmp_path / "o"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config_hash"] == cfg.hash and summary["seed"] == 4
    for f in out.glob("*.csv"):
        head = f.read_text().splitlines()[:3]
        assert f"# config_hash={cfg.hash}" in head and "# seed=4" in head
    assert set(summary["files"]) == {p.name for p in out.iterdir()} - {"summary.json"}


@pytest.mark.parametrize("cfg", [SMALL_BOUND, SMALL_RATIO], ids=["bound-suite", "ratio"])
def test_reruns_are_byte_identical(tmp_path, cfg):
    assert _run(tmp_path, cfg, "a") == EXIT_OK
    assert _run(tmp_path, cfg, "b", "--threads", "3") == EXIT_OK
    files = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
    assert files
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_override_changes_trials(tmp_path):
    assert _run(tmp_path, SMALL_RATIO, "a", "--seed", "1") == EXIT_OK
    assert _run(tmp_path, SMALL_RATIO, "b", "--seed", "2") == EXIT_OK
    a = (tmp_path / "a" / "ratio_trials.csv").read_text().splitlines()[3:]
    b = (tmp_path / "b" / "ratio_trials.csv").read_text().splitlines()[3:]
    assert a != b


def test_installed_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mmvsar.cli", "validate", "--config",
                           str(CONFIGS / "ratio_histogram.json")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["kind"] == "ratio-histogram"


def test_explicit_scatterers_build_scene():
    cfg = config_from_dict({"schema": 1, "grid": {"extentUnits": 10.0, "spacingUnits": 1.0},
                            "scene": {"scatterers": [
                                {"positionUnits": -2.0, "amplitude": [1.0, 0.5]},
                                {"positionUnits": 3.0, "window": "boxcar",
                                 "visibilityWidth": 250.0}]},
                            "experiment": {"kind": "imaging-comparison"}})
    geom = build_geometry(cfg)
    grid = build_grid(cfg, geom)
    scene = build_scene(cfg, grid, geom)
    assert scene.support == (3, 8)
    assert scene.profiles[0].amplitude == 1 + 0.5j


def _one_scatterer(units):
    return config_from_dict({"schema": 1, "grid": {"extentUnits": 10.0, "spacingUnits": 1.0},
                             "scene": {"scatterers": [{"positionUnits": units}]},
                             "experiment": {"kind": "imaging-comparison"}})


def test_scatterers_snap_to_grid():
    cfg = _one_scatterer(1.3)
    geom = build_geometry(cfg)
    grid = build_grid(cfg, geom)
    assert build_scene(cfg, grid, geom).support == (6,)


def test_scatterer_outside_grid_rejected():
    cfg = _one_scatterer(7.0)
    geom = build_geometry(cfg)
    with pytest.raises(ValueError):
        build_scene(cfg, build_grid(cfg, geom), geom)


def test_view_count_fits_aperture():
    cfg = config_from_dict({"schema": 1, "segmentation": {"a": 75.0, "nViews": 50},
                            "experiment": {"kind": "ratio-histogram"}})
    subs = build_subapertures(cfg, build_geometry(cfg))
    assert len(subs) == 50
    span = subs[-1].positions[-1] - subs[0].positions[0]
    assert np.linalg.norm(span) == pytest.approx(1500.0)


def test_imaging_outputs_columns(tmp_path):
    assert main(["run", "--config", str(CONFIGS / "imaging_comparison.json"),
                 "--out", str(tmp_path / "img")]) == EXIT_OK
    out = tmp_path / "img"
    for name in ("mmv_row_norms.csv", "smv_modulus.csv", "migration.csv"):
        lines = [l for l in (out / name).read_text().splitlines() if not l.startswith("#")]
        assert lines[0] == "pixel,position_units,value,true_row_norm"
        assert len(lines) == 22
    summary = json.loads((out / "summary.json").read_text())["results"]
    assert {b["name"] for b in summary["bounds"]} >= {"support_error_sharp"}
