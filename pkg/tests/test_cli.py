"""CLI harness: config handling, determinism, invariant verification."""
import json

import pytest

from besovflow.cli import ConfigError, DEFAULTS, build_parser, load_config, main


def run(argv):
    return main(argv)


def test_verify_passes(tmp_path):
    assert run(["verify", "--points-per-axis", "16", "--seed", "1",
                "--out", str(tmp_path)]) == 0


def test_split_deterministic(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    args = ["split", "--points-per-axis", "16", "--seed", "3", "--N", "2.0"]
    assert run(args + ["--out", str(out1)]) == 0
    assert run(args + ["--out", str(out2)]) == 0
    assert (out1 / "split.csv").read_bytes() == (out2 / "split.csv").read_bytes()
    cert1 = json.loads((out1 / "split.json").read_text())
    cert2 = json.loads((out2 / "split.json").read_text())
    assert cert1 == cert2
    assert cert1["config"]["seed"] == 3
    assert "out" not in cert1["config"]


def test_split_sweep(tmp_path):
    out = tmp_path / "sweep"
    assert run(["split", "--points-per-axis", "16", "--N-sweep", "1:8:4",
                "--out", str(out)]) == 0
    rows = (out / "split.csv").read_text().strip().splitlines()
    assert len(rows) == 5  # header + 4 sweep points


def test_norm_command(tmp_path):
    out = tmp_path / "norm"
    assert run(["norm", "--points-per-axis", "16", "--out", str(out)]) == 0
    cert = json.loads((out / "norm.json").read_text())
    assert cert["ratio"] > 0
    assert cert["dyadic"]["method"] == "dyadic"


def test_config_file_roundtrip(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"seed": 7, "points_per_axis": 16}))
    out = tmp_path / "out"
    assert run(["verify", "--config", str(cfg_path),
                "--out", str(out)]) == 0


def test_unknown_config_field_rejected(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"seeed": 7}))
    assert run(["verify", "--config", str(cfg_path)]) == 2


def test_missing_config_rejected(tmp_path):
    assert run(["verify", "--config", str(tmp_path / "nope.json")]) == 2


def test_invalid_json_rejected(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text("{not json")
    assert run(["verify", "--config", str(cfg_path)]) == 2


def test_nonpositive_tolerance_rejected(tmp_path):
    assert run(["mild-solve", "--tol=-1e-9"]) == 2


def test_load_config_precedence():
    parser = build_parser()
    args = parser.parse_args(["split", "--seed", "9"])
    cfg = load_config(args)
    assert cfg["seed"] == 9
    assert cfg["p"] == DEFAULTS["p"]


def test_flag_overrides_config(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"seed": 7}))
    parser = build_parser()
    args = parser.parse_args(["split", "--config", str(cfg_path),
                              "--seed", "11"])
    assert load_config(args)["seed"] == 11


def test_input_field_loading(tmp_path):
    """A field dumped by one run can seed another command."""
    from besovflow.fields import taylor_green
    from besovflow.spectral_core import FrequencyGrid, save_field

    grid = FrequencyGrid(points_per_axis=16)
    path = tmp_path / "u0.field"
    save_field(path, taylor_green(grid, amplitude=0.1))
    out = tmp_path / "out"
    assert run(["norm", "--points-per-axis", "16", "--input", str(path),
                "--out", str(out)]) == 0
