import csv
import hashlib
import json
import subprocess
import sys
from pathlib import Path

import pytest

from polaron_bounds.cli import main

MODELS = Path(__file__).resolve().parent.parent / "models"


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_validate_frohlich_exit_2(tmp_path, capsys):
    status = main(["--model", str(MODELS / "frohlich_d3.json"), "--command", "validate",
                   "--out", str(tmp_path)])
    assert status == 2
    assert "‖h‖² divergent" in capsys.readouterr().out
    assert (tmp_path / "validation.json").exists()
    assert "ValidationError" in (tmp_path / "errors.log").read_text()


def test_bounds_rows_and_gap(tmp_path):
    status = main(["--model", str(MODELS / "gaussian_d3.json"), "--command", "bounds",
                   "--alpha", "1,10,100", "--out", str(tmp_path)])
    assert status == 0
    rows = _rows(tmp_path / "bounds.csv")
    assert len(rows) == 3
    for row in rows[1:]:   # alpha >= alpha_m
        assert float(row["upper"]) - float(row["lower"]) == pytest.approx(2.4375, abs=1e-10)


def test_constants_deterministic(tmp_path):
    for sub in ("a", "b"):
        assert main(["--model", str(MODELS / "superfluid_d3.json"), "--command", "constants",
                     "--out", str(tmp_path / sub)]) == 0
    assert (tmp_path / "a" / "constants.csv").read_bytes() == (tmp_path / "b" / "constants.csv").read_bytes()


def test_manifest_lists_every_output(tmp_path):
    assert main(["--model", str(MODELS / "weak_d1.json"), "--command", "oracle-scan",
                 "--P=-0.5,0,0.5", "--n-modes", "12", "--out", str(tmp_path)]) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    files = {p.name for p in tmp_path.iterdir()} - {"manifest.json"}
    assert set(manifest["outputs"]) == files
    for name, digest in manifest["outputs"].items():
        assert hashlib.sha256((tmp_path / name).read_bytes()).hexdigest() == digest
    assert manifest["seed"] == 0 and "quadrature" in manifest and "wall_time_s" in manifest


def test_thread_cap_does_not_change_output(tmp_path, monkeypatch):
    args = ["--model", str(MODELS / "superfluid_d3.json"), "--command", "bounds",
            "--alpha", "1000", "--P", "0,50,100"]
    monkeypatch.setenv("POLARON_THREADS", "1")
    assert main(args + ["--out", str(tmp_path / "one")]) == 0
    monkeypatch.setenv("POLARON_THREADS", "4")
    assert main(args + ["--out", str(tmp_path / "four")]) == 0
    assert (tmp_path / "one" / "bounds.csv").read_bytes() == (tmp_path / "four" / "bounds.csv").read_bytes()


def test_numerical_failure_keeps_partial_output(tmp_path):
    # the second momentum exceeds the trial-state validity cap (alpha for eps = 1)
    status = main(["--model", str(MODELS / "gaussian_d3.json"), "--command", "trial",
                   "--alpha", "100", "--P", "0,1000", "--out", str(tmp_path)])
    assert status == 3
    rows = _rows(tmp_path / "trial_state.csv")
    assert [float(r["P"]) for r in rows] == [0.0]
    assert "WindowViolation" in (tmp_path / "errors.log").read_text()


def test_certificate_and_envelope(tmp_path):
    assert main(["--model", str(MODELS / "gaussian_d3.json"), "--command", "certificate",
                 "--alpha", "1e4,1e6", "--out", str(tmp_path / "c")]) == 0
    rows = _rows(tmp_path / "c" / "certificates.csv")
    assert float(rows[1]["meff_lower"]) > float(rows[0]["meff_lower"])
    assert main(["--model", str(MODELS / "weak_d1.json"), "--command", "envelope",
                 "--P=-1,-0.5,0,0.5,1", "--n-modes", "16", "--out", str(tmp_path / "e")]) == 0
    for row in _rows(tmp_path / "e" / "envelope.csv"):
        assert float(row["envelope"]) <= float(row["energy"])
        assert float(row["envelope"]) <= float(row["pekar_parabola"])


def test_pekar_command(tmp_path):
    assert main(["--model", str(MODELS / "gaussian_d3.json"), "--command", "pekar",
                 "--out", str(tmp_path)]) == 0
    summary = _rows(tmp_path / "pekar_summary.csv")
    assert -523.8743 <= float(summary[0]["energy"]) <= -521.4368
    assert (tmp_path / "pekar_alpha_100.csv").read_text().startswith("r,psi\n")


def test_missing_model_file(tmp_path):
    assert main(["--model", str(tmp_path / "none.json"), "--command", "constants",
                 "--out", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "polaron_bounds", "--model",
                           str(MODELS / "gaussian_d3.json"), "--command", "constants",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert (tmp_path / "constants.csv").read_text().startswith("name,value,err_estimate\n")
