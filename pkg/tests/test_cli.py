import csv

import pytest

from cellfree.cli import main


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "desk.cfg"
    path.write_text("M = 20\nK = 4\ntau_cf = 2\ntau_sc_dl = 2\ntau_sc_ul = 2\nn_drops = 2\n")
    return path


def test_run_and_cdf(cfg, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--scenario", "random-nopc-corr", "--out", str(out)]) == 0
    for name in ("raw.csv", "cdf.csv", "summary.json", "effective_aps.csv"):
        assert (out / name).exists()
    assert "cf-dl" in capsys.readouterr().out
    assert main(["cdf", "--in", str(out / "raw.csv"), "--out", str(tmp_path / "c.csv"), "--pool-min"]) == 0
    with open(tmp_path / "c.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len([r for r in rows if r["system"] == "cf-ul"]) == 2


def test_harden(cfg, tmp_path):
    path = tmp_path / "h.csv"
    assert main(["harden", "--config", str(cfg), "--m-values", "8,16", "--samples", "200", "--out", str(path)]) == 0
    rows = list(csv.DictReader(open(path)))
    assert [int(r["M"]) for r in rows] == [8, 16] and {r["K"] for r in rows} == {"4"}


def test_validate_passes(capsys):
    assert main(["validate"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "6/6 checks passed" in out


def test_validate_reports_failures(monkeypatch, capsys):
    from cellfree import validation

    monkeypatch.setattr(validation, "CHECKS", (lambda: validation.Check("broken", False, "x"),))
    assert main(["validate"]) == 1
    assert "FAIL  broken" in capsys.readouterr().out


def test_bad_inputs(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("M = 0\n")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
    assert main(["run", "--scenario", "fast", "--out", str(tmp_path / "x")]) == 2
    assert "error" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["harden", "--m-values", "a,b"])
