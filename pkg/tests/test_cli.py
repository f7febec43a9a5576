import json

import pytest

from dcecav.cli import main
from dcecav.io import SERIES_HEADER, read_csv


def write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


BASE_CFG = {"model": {"Omega": 1.0, "eta": 2.0, "epsilon": 0.02, "g": 0.02}}


def test_validate_ok(tmp_path, capsys):
    assert main(["validate", "--config", write(tmp_path, BASE_CFG)]) == 0
    assert "ok" in capsys.readouterr().out


def test_validate_rejects(tmp_path, capsys):
    bad = {"model": dict(BASE_CFG["model"], epsilon=2.0)}
    assert main(["validate", "--config", write(tmp_path, bad)]) == 1
    assert "model.epsilon" in capsys.readouterr().err
    assert main(["validate", "--config", str(tmp_path / "nope.json")]) == 1


def test_simulate_outputs(tmp_path):
    cfg = dict(BASE_CFG, numerics={"t_max": 5.0, "dt_out": 0.5})
    out = tmp_path / "out"
    assert main(["simulate", "--config", write(tmp_path, cfg), "--out", str(out), "--debug"]) == 0
    assert (out / "series.csv").read_text().splitlines()[0] == SERIES_HEADER
    assert len(read_csv(out / "series.csv")["t"]) == 11
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    assert manifest["diagnostics"]["track_b"]["nmax_used"] == 128
    assert "max_rel_dev_n" in manifest["results"]
    for name in ("gamma.csv", "beta.csv", "state_final.csv"):
        assert (out / name).exists() and name in manifest["outputs"]


def test_simulate_nmax_override(tmp_path, capsys):
    cfg = dict(BASE_CFG, numerics={"t_max": 2.0, "dt_out": 1.0})
    out = tmp_path / "o"
    assert main(["simulate", "--config", write(tmp_path, cfg), "--out", str(out), "--nmax", "16", "--track", "b"]) == 0
    assert json.loads((out / "manifest.json").read_text())["config"]["numerics"]["nmax"] == 16
    assert main(["simulate", "--config", write(tmp_path, cfg), "--out", str(out), "--nmax", "2"]) == 1


def test_simulate_failure_writes_manifest(tmp_path):
    cfg = dict(BASE_CFG, numerics={"t_max": 150.0, "nmax": 16, "max_nmax": 16})
    out = tmp_path / "fail"
    assert main(["simulate", "--config", write(tmp_path, cfg), "--out", str(out), "--track", "b"]) == 2
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "failed"
    assert manifest["error"]["type"] == "TruncationError"
    assert 0 < manifest["error"]["time"] < 150 and manifest["error"]["tail"] > 1e-6


def test_sweep_manifest_has_peaks(tmp_path):
    cfg = dict(BASE_CFG, sweep={"ratios": [0.0, 0.5, 1.0], "eval_times": [20.0, 10.0]})
    out = tmp_path / "sw"
    assert main(["sweep", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    peaks = manifest["results"]["peak_ratio"]
    assert [p["t"] for p in peaks] == [20.0, 10.0]
    assert all(0 <= p["peak_ratio"] <= 1 for p in peaks)
    assert len(read_csv(out / "sweep.csv")["ratio"]) == 6


def test_qfunc_outputs(tmp_path):
    cfg = dict(BASE_CFG, qfunc={"snapshot_times": [0, 10], "points": 21})
    out = tmp_path / "q"
    assert main(["qfunc", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    snap = manifest["results"]["snapshots"][1]
    assert snap["t"] == 10 and "l1_distance" in snap
    assert snap["track_b"]["grid"]["shape"] == [21, 21]
    assert len(read_csv(out / snap["track_a"]["file"])["q"]) == 441


def test_reruns_identical(tmp_path):
    cfg = write(tmp_path, dict(BASE_CFG, numerics={"t_max": 10.0, "dt_out": 0.5}))
    for name in ("r1", "r2"):
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "r1" / "series.csv").read_bytes() == (tmp_path / "r2" / "series.csv").read_bytes()
    m1 = json.loads((tmp_path / "r1" / "manifest.json").read_text())
    m2 = json.loads((tmp_path / "r2" / "manifest.json").read_text())
    m1.pop("timing"), m2.pop("timing")
    assert m1 == m2


def test_bad_subcommand():
    with pytest.raises(SystemExit):
        main(["plot", "--config", "x"])
