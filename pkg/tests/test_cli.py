import json

import pytest

from spherical_ldp.cli import main, run


@pytest.fixture
def out(tmp_path, monkeypatch):
    monkeypatch.setenv("SPHERICAL_LDP_OUT_DIR", str(tmp_path))
    return tmp_path


def test_kostka_and_lr(out):
    code, rep = run(["kostka", "--lambda", "2,1", "--eta", "1,1,1"])
    assert code == 0 and rep["metrics"]["kostka"] == 2
    code, rep = run(["lr", "--lambda", "2,1", "--eta", "2,1", "--kappa", "3,2,1"])
    assert code == 0 and rep["metrics"]["lr"] == 2
    saved = json.loads((out / "lr-report.json").read_text())
    assert saved["metrics"] == rep["metrics"] and saved["artifact_version"]


def test_hciz_exact_single(out):
    code, rep = run(["hciz", "exact", "--a", "2", "--b", "3", "--n", "1"])
    assert code == 0 and rep["metrics"]["log_value"] == 6.0


def test_usage_errors(out, capsys):
    assert main(["kostka", "--lambda", "2,1", "--bogus", "1"]) == 1
    assert main(["bridge", "action"]) == 1
    assert "usage error" in capsys.readouterr().err


def test_named_measures_and_missing_files(out):
    code, rep = run(["hciz", "limit", "--a", "semicircle", "--b", "dirac:2"])
    assert code == 0 and rep["metrics"]["value"] == pytest.approx(0.0, abs=1e-12)
    code, rep = run(["hciz", "exact", "--a", "uniform:0:1", "--b", "dirac:1", "--n", "4", "--confluent"])
    assert code == 0 and rep["metrics"]["rate"] == pytest.approx(0.25)
    assert main(["hciz", "exact", "--a", "semicircle", "--b", "0,1"]) == 1
    assert main(["bridge", "residual", "--batch", str(out / "missing.csv")]) == 1


def test_outputs_have_checksums(out):
    code, rep = run(["experiment", "diag", "--spectrum-b=-1,0,1", "--samples", "10"])
    assert code == 0 and rep["outputs"]
    for o in rep["outputs"]:
        assert len(o["checksum"]) == 64


def test_config_file(out, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# kostka inputs\nlam = 3,1\neta = 2,1,1\n")
    code, rep = run(["kostka", "--config", str(cfg)])
    assert code == 0 and rep["metrics"]["kostka"] == 2
    # explicit flags win over the file
    code, rep = run(["kostka", "--config", str(cfg), "--eta", "1,1,1,1"])
    assert rep["metrics"]["kostka"] == 3
    cfg.write_text("nonsense = 1\n")
    assert main(["kostka", "--config", str(cfg)]) == 1


def test_bridge_closed_form_action(out):
    code, rep = run(["bridge", "action", "--closed-form", "1,1"])
    assert code == 0 and rep["metrics"]["action"] == pytest.approx(0.2451, abs=1e-3)


def test_verify_is_reproducible(out):
    args = ["verify", "--criteria", "2,3", "--suite", "quick", "--seed", "7"]
    c1, r1 = run(args)
    c2, r2 = run(args)
    assert c1 == c2 == 0
    assert r1["metrics"] == r2["metrics"]
