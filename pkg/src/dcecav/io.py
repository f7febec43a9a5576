"""Run configuration, CSV writers and JSON manifests.

Configs are JSON documents with four optional experiment blocks; every
level is parsed strictly (unknown keys, duplicate keys and wrong types
are errors).  See docs/config.md for the grammar.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .model import (
    ConfigError,
    InitialLadderState,
    ModelParams,
    NumericsConfig,
    validate_initial,
    validate_numerics,
    validate_params,
)

SERIES_HEADER = (
    "t,n_semi,n_exact,pe_semi,pe_exact,x_var_semi,x_var_exact,"
    "p_var_semi,p_var_exact,abs_dev_n,rel_dev_n"
)
QGRID_HEADER = "re_z,im_z,q"
SWEEP_HEADER = "ratio,g,t,n_mean,nmax"

_MODEL_REQUIRED = ("Omega", "epsilon", "eta", "g")
_MODEL_OPTIONAL = ("omega0",)
_NUMERIC_FIELDS = {
    "rtol": float,
    "atol": float,
    "nmax": int,
    "tail_threshold": float,
    "t_max": float,
    "dt_out": float,
    "method": str,
    "fixed_step": float,
    "frame": str,
    "max_nmax": int,
    "overflow_bound": float,
}


@dataclass
class RunConfig:
    model: ModelParams
    initial: InitialLadderState = field(default_factory=InitialLadderState)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    simulate: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    qfunc: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        initial = self.initial
        return {
            "model": asdict(self.model),
            "initial": {
                "alpha": [float(np.real(initial.alpha)), float(np.imag(initial.alpha))],
                "beta": [float(np.real(initial.beta_amp)), float(np.imag(initial.beta_amp))],
                "n": int(initial.n),
            },
            "numerics": asdict(self.numerics),
            "simulate": _jsonable(self.simulate),
            "sweep": _jsonable(self.sweep),
            "qfunc": _jsonable(self.qfunc),
        }


def _reject_duplicates(pairs):
    seen = {}
    for key, value in pairs:
        if key in seen:
            raise ConfigError(f"duplicate key {key!r}", field=key)
        seen[key] = value
    return seen


def _block(doc, name, allowed, required=()):
    block = doc.get(name, {})
    if not isinstance(block, dict):
        raise ConfigError(f"{name}: expected an object", field=name)
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ConfigError(f"{name}: unknown key {unknown[0]!r} (allowed: {', '.join(sorted(allowed))})",
                          field=f"{name}.{unknown[0]}")
    for key in required:
        if key not in block:
            raise ConfigError(f"{name}: missing required field {key!r}", field=f"{name}.{key}")
    return block


def _number(value, path, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}", field=path)
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{path}: expected an integer, got {value!r}", field=path)
        return int(value)
    if not math.isfinite(value):
        raise ConfigError(f"{path}: must be finite", field=path)
    return float(value)


def _complex(value, path):
    if isinstance(value, list):
        if len(value) != 2:
            raise ConfigError(f"{path}: complex values are [re, im]", field=path)
        return complex(_number(value[0], path), _number(value[1], path))
    return complex(_number(value, path))


def _number_list(value, path):
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{path}: expected a non-empty list of numbers", field=path)
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _ratios(value, path):
    if isinstance(value, dict):
        spec = _block({"r": value}, "r", ("start", "stop", "step"), ("start", "stop", "step"))
        start, stop, step = (_number(spec[k], f"{path}.{k}") for k in ("start", "stop", "step"))
        if step <= 0 or stop < start:
            raise ConfigError(f"{path}: need step > 0 and stop >= start", field=path)
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return list(start + step * np.arange(count))
    ratios = _number_list(value, path)
    if any(b <= a for a, b in zip(ratios, ratios[1:])):
        raise ConfigError(f"{path}: ratios must be strictly ascending", field=path)
    return ratios


def _prefixed(exc: ConfigError, block: str) -> ConfigError:
    name = f"{block}.{exc.field}" if exc.field else block
    return ConfigError(f"{name}: {exc}", field=name)


def parse_config_text(text: str) -> RunConfig:
    try:
        doc = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    top = ("model", "initial", "numerics", "simulate", "sweep", "qfunc")
    unknown = sorted(set(doc) - set(top))
    if unknown:
        raise ConfigError(f"unknown top-level key {unknown[0]!r}", field=unknown[0])
    if "model" not in doc:
        raise ConfigError("missing required block 'model'", field="model")

    mblock = _block(doc, "model", _MODEL_REQUIRED + _MODEL_OPTIONAL, _MODEL_REQUIRED)
    model = ModelParams(**{k: _number(v, f"model.{k}") for k, v in mblock.items()})
    try:
        validate_params(model)
    except ConfigError as exc:
        raise _prefixed(exc, "model") from None

    iblock = _block(doc, "initial", ("alpha", "beta", "n"))
    initial = InitialLadderState(
        alpha=_complex(iblock.get("alpha", 1.0), "initial.alpha"),
        beta_amp=_complex(iblock.get("beta", 0.0), "initial.beta"),
        n=_number(iblock.get("n", 0), "initial.n", int),
    )
    try:
        validate_initial(initial)
    except ConfigError as exc:
        raise _prefixed(exc, "initial") from None

    nblock = _block(doc, "numerics", tuple(_NUMERIC_FIELDS))
    values = {}
    for key, kind in _NUMERIC_FIELDS.items():
        if key in nblock:
            if kind is str:
                if not isinstance(nblock[key], str):
                    raise ConfigError(f"numerics.{key}: expected a string", field=f"numerics.{key}")
                values[key] = nblock[key]
            else:
                values[key] = _number(nblock[key], f"numerics.{key}", kind)
    numerics = NumericsConfig(**values)
    try:
        validate_numerics(numerics)
    except ConfigError as exc:
        raise _prefixed(exc, "numerics") from None

    sblock = _block(doc, "simulate", ("window",))
    simulate = {}
    if "window" in sblock:
        window = _number_list(sblock["window"], "simulate.window")
        if len(window) != 2 or window[1] < window[0]:
            raise ConfigError("simulate.window: expected [t_lo, t_hi] with t_lo <= t_hi", field="simulate.window")
        simulate["window"] = window

    wblock = _block(doc, "sweep", ("ratios", "eval_times"))
    sweep = {}
    if "ratios" in wblock:
        sweep["ratios"] = _ratios(wblock["ratios"], "sweep.ratios")
    if "eval_times" in wblock:
        sweep["eval_times"] = _number_list(wblock["eval_times"], "sweep.eval_times")

    qblock = _block(doc, "qfunc", ("snapshot_times", "extent", "points"))
    qfunc = {}
    if "snapshot_times" in qblock:
        qfunc["snapshot_times"] = _number_list(qblock["snapshot_times"], "qfunc.snapshot_times")
    if "extent" in qblock:
        qfunc["extent"] = _number(qblock["extent"], "qfunc.extent")
        if qfunc["extent"] <= 0:
            raise ConfigError("qfunc.extent: must be positive", field="qfunc.extent")
    if "points" in qblock:
        qfunc["points"] = _number(qblock["points"], "qfunc.points", int)
        if qfunc["points"] < 2:
            raise ConfigError("qfunc.points: must be >= 2", field="qfunc.points")

    return RunConfig(model, initial, numerics, simulate, sweep, qfunc)


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config_text(text)


def _fmt(value) -> str:
    return repr(float(value))


def _write_lines(path, lines):
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from None
    return path


def write_series_csv(series, path):
    if len(series.times) == 0:
        raise ValueError("empty series")
    a, b, dev = series.track_a, series.track_b, series.deviation
    columns = [
        series.times,
        a.n_mean,
        b.n_mean,
        a.p_excited,
        b.p_excited,
        a.var_x,
        b.var_x,
        a.var_p,
        b.var_p,
        dev["abs_dev_n"],
        dev["rel_dev_n"],
    ]
    rows = [",".join(_fmt(col[i]) for col in columns) for i in range(len(series.times))]
    return _write_lines(path, [SERIES_HEADER] + rows)


def read_csv(path) -> dict:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    return {name: data[:, i] for i, name in enumerate(header)}


def write_qgrid(grid, path):
    rows = [
        f"{_fmt(x)},{_fmt(y)},{_fmt(grid.values[i, j])}"
        for i, x in enumerate(grid.x_axis)
        for j, y in enumerate(grid.y_axis)
    ]
    return _write_lines(path, [QGRID_HEADER] + rows)


def qgrid_spec(grid) -> dict:
    return {
        "x_range": [float(grid.x_axis[0]), float(grid.x_axis[-1])],
        "y_range": [float(grid.y_axis[0]), float(grid.y_axis[-1])],
        "shape": [int(grid.x_axis.size), int(grid.y_axis.size)],
        "cell_area": grid.cell_area,
        "normalization": grid.normalization(),
        "order": "row-major, re_z outer",
    }


def write_sweep_csv(table, path):
    rows = []
    for i, ratio in enumerate(table.ratios):
        nmax = table.nmax_used[i] if table.nmax_used else -1
        for j, t in enumerate(table.times):
            rows.append(f"{_fmt(ratio)},{_fmt(ratio * table.epsilon)},{_fmt(t)},{_fmt(table.n_mean[i, j])},{nmax}")
    return _write_lines(path, [SWEEP_HEADER] + rows)


def write_gamma_csv(times, gamma, path):
    names = ("gamma1", "gamma2", "gamma3", "gamma4")
    header = "t," + ",".join(f"re_{n},im_{n}" for n in names)
    cols = [getattr(gamma, n) for n in names]
    rows = [
        ",".join([_fmt(t)] + [f"{_fmt(c[i].real)},{_fmt(c[i].imag)}" for c in cols]) for i, t in enumerate(times)
    ]
    return _write_lines(path, [header] + rows)


def write_beta_csv(times, beta, path):
    names = ("beta_z", "beta_plus", "beta_minus")
    header = "t," + ",".join(f"re_{n},im_{n}" for n in names) + ",chart"
    cols = [getattr(beta, n) for n in names]
    # chart index increments at every restart of the factorization
    if beta.anchor is None:
        chart = np.zeros(len(times), dtype=int)
    else:
        chart = np.concatenate([[0], np.cumsum(np.any(np.diff(beta.anchor, axis=0) != 0, axis=(1, 2)))])
    rows = [
        ",".join([_fmt(t)] + [f"{_fmt(c[i].real)},{_fmt(c[i].imag)}" for c in cols] + [str(int(chart[i]))])
        for i, t in enumerate(times)
    ]
    return _write_lines(path, [header] + rows)


def write_state_csv(state, path):
    d = state.nmax + 1
    rows = []
    for idx, amp in enumerate(state.amplitudes):
        atom = "e" if idx < d else "g"
        rows.append(f"{atom},{idx % d},{_fmt(amp.real)},{_fmt(amp.imag)}")
    return _write_lines(path, ["atom,n,re,im"] + rows)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


@dataclass
class RunManifest:
    command: str
    config: dict
    status: str = "ok"
    diagnostics: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    error: dict | None = None
    baseline: str = "self-generated oracle baselines; no tabulated reference values exist for these curves"
    started: float = field(default_factory=time.time)
    wall_time_s: float | None = None

    def to_dict(self) -> dict:
        return _jsonable(
            {
                "tool": {"name": "dcecav", "version": __version__},
                "command": self.command,
                "config": self.config,
                "status": self.status,
                "diagnostics": self.diagnostics,
                "results": self.results,
                "outputs": self.outputs,
                "error": self.error,
                "baseline": self.baseline,
                "timing": {
                    "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime(self.started)),
                    "wall_time_s": self.wall_time_s,
                },
            }
        )


def write_manifest(manifest: RunManifest, path):
    if manifest.wall_time_s is None:
        manifest.wall_time_s = time.time() - manifest.started
    text = json.dumps(manifest.to_dict(), indent=2, sort_keys=True, allow_nan=False)
    return _write_lines(path, [text])
