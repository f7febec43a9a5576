import json
import math

import numpy as np
import pytest

from dcecav import RESONANT, ConfigError, InitialLadderState
from dcecav.experiments import ComparisonSeries, SweepTable
from dcecav.io import (
    QGRID_HEADER,
    SERIES_HEADER,
    RunManifest,
    parse_config,
    parse_config_text,
    qgrid_spec,
    read_csv,
    write_manifest,
    write_qgrid,
    write_series_csv,
    write_sweep_csv,
)
from dcecav.semianalytic import ObservableRecord, QGrid, husimi_grid, square_grid
from dcecav.su11 import GammaState
from dcecav.ladder import BetaState

BASE_CFG = '{"model": {"Omega": 1.0, "eta": 2.0, "epsilon": 0.02, "g": 0.02}}'


def config(**blocks):
    doc = {"model": {"Omega": 1.0, "eta": 2.0, "epsilon": 0.02, "g": 0.02}}
    for key, value in blocks.items():
        if isinstance(value, dict):
            doc.setdefault(key, {}).update(value)
        else:
            doc[key] = value
    return json.dumps(doc)


def test_minimal_resonant(tmp_path):
    path = tmp_path / "resonant.json"
    path.write_text(BASE_CFG)
    cfg = parse_config(path)
    assert cfg.model == RESONANT
    assert cfg.initial == InitialLadderState()


def test_epsilon_bound_named():
    with pytest.raises(ConfigError, match=r"model\.epsilon.*\|epsilon\|<1") as info:
        parse_config_text(config(model={"epsilon": 2.0}))
    assert info.value.field == "model.epsilon"


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="gamma5"):
        parse_config_text(config(model={"gamma5": 1.0}))
    with pytest.raises(ConfigError, match="gamma5"):
        parse_config_text(config(gamma5=1))
    with pytest.raises(ConfigError, match="rtoll"):
        parse_config_text(config(numerics={"rtoll": 1e-9}))


def test_missing_field():
    with pytest.raises(ConfigError, match="'g'") as info:
        parse_config_text('{"model": {"Omega": 1, "eta": 2, "epsilon": 0.02}}')
    assert info.value.field == "model.g"
    with pytest.raises(ConfigError, match="model"):
        parse_config_text("{}")


def test_syntax_error_has_line():
    with pytest.raises(ConfigError, match="line 3"):
        parse_config_text('{\n"model": {"Omega": 1,\n "g" 0.02}}')


def test_duplicate_key():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text('{"model": {"Omega": 1, "Omega": 2, "eta": 2, "epsilon": 0.02, "g": 0.02}}')


@pytest.mark.parametrize(
    "blocks",
    [
        {"numerics": {"nmax": 2}},
        {"numerics": {"nmax": 4.5}},
        {"numerics": {"rtol": "1e-9"}},
        {"numerics": {"method": 5}},
        {"model": {"g": True}},
        {"initial": {"alpha": 0.5}},
        {"initial": {"alpha": [1, 0, 0]}},
        {"sweep": {"ratios": [0.2, 0.1]}},
        {"sweep": {"ratios": {"start": 0, "stop": 1}}},
        {"qfunc": {"points": 1}},
        {"simulate": {"window": [5, 1]}},
        {"simulate": []},
    ],
)
def test_invalid_values(blocks):
    with pytest.raises(ConfigError):
        parse_config_text(config(**blocks))


def test_full_config():
    cfg = parse_config_text(
        config(
            initial={"alpha": [0.6, 0.0], "beta": [0.0, 0.8], "n": 2},
            numerics={"rtol": 1e-10, "nmax": 64, "method": "DOP853"},
            sweep={"ratios": {"start": 0.0, "stop": 1.2, "step": 0.05}, "eval_times": [134.5]},
            qfunc={"snapshot_times": [0, 20], "points": 51},
            simulate={"window": [0, 30]},
        )
    )
    assert cfg.initial == InitialLadderState(0.6, 0.8j, 2)
    assert cfg.numerics.nmax == 64 and cfg.numerics.method == "DOP853"
    assert len(cfg.sweep["ratios"]) == 25 and cfg.sweep["ratios"][-1] == pytest.approx(1.2)
    assert cfg.qfunc["points"] == 51
    again = parse_config_text(json.dumps(cfg.to_dict() | {"simulate": cfg.simulate}))
    assert again.model == cfg.model and again.initial == cfg.initial and again.numerics == cfg.numerics


def series_of(n):
    t = np.linspace(0, 1, n)
    rec = ObservableRecord(t, t**2 / 3, 1 - t / 7, t * 0, t * 0, 0.5 + t, 0.5 + np.pi * t)
    rec_b = ObservableRecord(t, t**2 / 3 + 1e-3, 1 - t / 7, t * 0, t * 0, 0.5 + t, 0.5 + t)
    return ComparisonSeries(t, rec, rec_b, {"abs_dev_n": t * 0 + 1e-3, "rel_dev_n": t * 0 + 0.1})


def test_series_csv_two_samples(tmp_path):
    path = write_series_csv(series_of(2), tmp_path / "s.csv")
    text = path.read_text()
    assert text.endswith("\n") and len(text.splitlines()) == 3
    assert text.splitlines()[0] == SERIES_HEADER


def test_series_csv_roundtrip_and_deterministic(tmp_path):
    s = series_of(17)
    a = write_series_csv(s, tmp_path / "a.csv")
    b = write_series_csv(s, tmp_path / "b.csv")
    assert a.read_bytes() == b.read_bytes()
    data = read_csv(a)
    assert np.array_equal(data["t"], s.times)
    assert np.array_equal(data["p_var_semi"], s.track_a.var_p)
    assert "," not in a.read_text().splitlines()[1].split(",")[0]


def test_series_csv_empty(tmp_path):
    with pytest.raises(ValueError):
        write_series_csv(series_of(0), tmp_path / "x.csv")


def test_io_error_names_path(tmp_path):
    with pytest.raises(OSError, match="missing"):
        write_series_csv(series_of(2), tmp_path / "missing" / "s.csv")


def test_qgrid_two_by_two(tmp_path):
    grid = QGrid(np.array([0.0, 1.0]), np.array([-1.0, 1.0]), np.array([[1.0, 2.0], [3.0, 4.0]]))
    lines = write_qgrid(grid, tmp_path / "q.csv").read_text().splitlines()
    assert lines == [QGRID_HEADER, "0.0,-1.0,1.0", "0.0,1.0,2.0", "1.0,-1.0,3.0", "1.0,1.0,4.0"]


def test_qgrid_vacuum(tmp_path):
    grid = husimi_grid(GammaState(), BetaState(), *square_grid(6.0, 201))
    data = read_csv(write_qgrid(grid, tmp_path / "q.csv"))
    assert abs(data["q"].max() - 1 / math.pi) < 1e-9
    cell = (data["re_z"][201] - data["re_z"][0]) * (data["im_z"][1] - data["im_z"][0])
    assert data["q"].sum() * cell == pytest.approx(1.0, abs=1e-3)
    spec = qgrid_spec(grid)
    assert spec["shape"] == [201, 201] and spec["normalization"] == pytest.approx(1.0, abs=1e-3)


def test_sweep_csv(tmp_path):
    table = SweepTable(np.array([0.0, 0.5]), np.array([10.0, 20.0]), np.arange(4.0).reshape(2, 2),
                       np.array([0.5, 0.5]), 0.5, [128, 256], 0.02)
    lines = write_sweep_csv(table, tmp_path / "w.csv").read_text().splitlines()
    assert lines[0] == "ratio,g,t,n_mean,nmax"
    assert lines[4] == "0.5,0.01,20.0,3.0,256"


def test_manifest_stable_except_timing(tmp_path):
    def run(path):
        m = RunManifest("sweep", {"model": {"g": 0.02}}, results={"peak_ratio": [{"t": 134.5, "peak_ratio": 0.6}]},
                        diagnostics={"values": np.array([1.0, np.nan])})
        return json.loads(write_manifest(m, path).read_text())

    a = run(tmp_path / "a.json")
    b = run(tmp_path / "b.json")
    a.pop("timing"), b.pop("timing")
    assert a == b
    assert a["results"]["peak_ratio"][0]["peak_ratio"] == 0.6
    assert a["diagnostics"]["values"] == [1.0, None]
    assert a["tool"]["name"] == "dcecav" and "baseline" in a


def test_manifest_failure_fields(tmp_path):
    m = RunManifest("simulate", {}, status="failed", error={"type": "TruncationError", "time": 75.0, "tail": 1e-6})
    data = json.loads(write_manifest(m, tmp_path / "m.json").read_text())
    assert data["status"] == "failed" and data["error"]["time"] == 75.0 and data["error"]["tail"] == 1e-6
