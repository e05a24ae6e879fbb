from __future__ import annotations

import csv
import json

import pytest

from subfrac.cli import main


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main(list(args) + ["--output-dir", str(out)])
    return code, out


def test_ms_run_structure(tmp_path):
    code, out = run(tmp_path, "run", "--experiment", "ms", "--group", "r1", "--orlicz", "power:2",
                    "--field", "bump:1", "--samples", "4096")
    assert code == 0
    with open(out / "sweep.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    assert list(rows[0]) == ["s", "raw_energy", "scaled_energy", "stderr", "near_field", "far_field", "tail_analytic"]
    verdicts = json.loads((out / "verdicts.json").read_text())
    assert "ms_power_exact" in {v["name"] for v in verdicts["verdicts"]}
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["cached_constants"]["C_b"]["seed"] == 20240611
    assert manifest["config"]["quad"]["samples"] == 4096
    assert list(manifest) == sorted(manifest)


def test_invalid_group_exit_1_no_artifacts(tmp_path):
    code, out = run(tmp_path, "run", "--group", "h7")
    assert code == 1 and not out.exists()


@pytest.mark.parametrize(
    "args",
    [
        ["run", "--bogus"],
        ["run", "--orlicz", "power"],
        ["run", "--orlicz", "power:0.5"],
        ["run", "--field", "hat:1"],
        ["run", "--samples", "10"],
        ["run", "--s-grid", "0.5,1.5,0.2"],
        ["constants", "--group", "h1", "--gauge", "euclidean"],
    ],
)
def test_usage_errors(tmp_path, args):
    assert run(tmp_path, *args)[0] == 1


def test_constants_prints(tmp_path, capsys):
    code, out = run(tmp_path, "constants", "--group", "h1", "--gauge", "koranyi", "--samples", "8192")
    assert code == 0
    text = capsys.readouterr().out
    assert "Q = 4" in text and "C_b" in text and "sigma(S)" in text
    data = json.loads((out / "constants.json").read_text())
    assert data["QC_b"] == pytest.approx(4 * data["C_b"])


def test_toml_config_with_override(tmp_path):
    cfg = tmp_path / "exp.toml"
    cfg.write_text(
        'experiment = "bbm"\ngroup = "r1"\ns_grid = [0.9, 0.95, 0.99]\n'
        '[orlicz]\nfamily = "power"\np = 2.0\n[field]\nname = "gauss"\nradius = 4.0\n'
        "[quad]\nsamples = 4096\nseed = 3\n"
    )
    code, out = run(tmp_path, "run", "--config", str(cfg), "--seed", "5")
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["quad"]["seed"] == 5
    assert manifest["config"]["field"] == {"name": "gauss", "radius": 4.0}
    assert len((out / "sweep.csv").read_text().strip().splitlines()) == 4


def test_bad_toml_key(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('experimnt = "ms"\n')
    assert run(tmp_path, "run", "--config", str(cfg))[0] == 1


def test_bbm_h1_band_failure_is_not_hard(tmp_path):
    code, out = run(tmp_path, "run", "--experiment", "bbm", "--group", "h1", "--field", "bump:1", "--samples", "4096")
    verdicts = json.loads((out / "verdicts.json").read_text())["verdicts"]
    band = [v for v in verdicts if v["name"] == "bbm_band_lower"][0]
    assert band["status"] == "fail" and band["gating"] is False
    assert code == 0


def test_rerun_bit_identical(tmp_path):
    args = ["run", "--experiment", "ms", "--group", "h1", "--field", "bump:1", "--samples", "4096"]
    _, a = run(tmp_path, *args, "--workers", "1", name="a")
    _, b = run(tmp_path, *args, "--workers", "4", name="b")
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()
