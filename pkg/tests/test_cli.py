"""CLI stage wiring: artifacts, exit codes, idempotency, config errors."""

import json

import pytest

from softgrip.cli import main


def test_mesh_stage_writes_artifacts(tmp_path, capsys):
    assert main(["mesh", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "gripper.obj").exists()
    blocks = json.loads((tmp_path / "blocks.json").read_text())
    assert blocks["n_blocks"] == 22
    assert (tmp_path / "run_manifest.json").exists()


def test_mesh_stage_idempotent(tmp_path):
    assert main(["mesh", "--out", str(tmp_path)]) == 0
    first = (tmp_path / "gripper.obj").read_bytes()
    assert main(["mesh", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "gripper.obj").read_bytes() == first


def test_route_stage(tmp_path):
    assert main(["route", "--out", str(tmp_path)]) == 0
    route = json.loads((tmp_path / "route_finger0.json").read_text())
    assert len(route["waypoints"]) == 7
    assert route["heights"][0] == pytest.approx(0.02)


def test_report_missing_artifact_exit_code(tmp_path, capsys):
    assert main(["report", "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "missing artifact" in err


def test_train_missing_dataset(tmp_path, capsys):
    assert main(["train", "--out", str(tmp_path)]) == 2
    assert "dataset.jsonl" in capsys.readouterr().err


def test_invalid_config_field_named(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"script": {"ramp_s": -1.0}}))
    assert main(["mesh", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "script" in capsys.readouterr().err


def test_unknown_schema_version(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"schema_version": 99}))
    assert main(["mesh", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "schema_version" in capsys.readouterr().err


def test_seed_flag_recorded_in_manifest(tmp_path):
    assert main(["mesh", "--seed", "7", "--out", str(tmp_path)]) == 0
    manifest = json.loads((tmp_path / "run_manifest.json").read_text())
    assert manifest["seed"] == 7
