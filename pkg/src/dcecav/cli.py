"""Command-line entry point: simulate, sweep, qfunc, validate.

Exit codes: 0 success, 1 config error, 2 numerical failure (manifest still written).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .exact import FockQubitState, TruncationError, evolve
from .experiments import (
    lobe_analysis,
    l1_distance,
    qfunction_snapshots,
    run_comparison,
    sign_alternations,
    sweep_g_over_eps,
)
from .io import (
    RunManifest,
    parse_config,
    qgrid_spec,
    write_beta_csv,
    write_gamma_csv,
    write_manifest,
    write_qgrid,
    write_series_csv,
    write_state_csv,
    write_sweep_csv,
)
from .ladder import solve_joint
from .model import ConfigError, validate_numerics
from .ode import IntegrationError
from .semianalytic import DriftError

log = logging.getLogger("dcecav")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

DEFAULT_RATIOS = list(np.round(np.arange(0.0, 1.2 + 1e-9, 0.05), 10))
DEFAULT_EVAL_TIMES = [134.5, 170.0, 191.0]
DEFAULT_SNAPSHOTS = [0.0, 20.0, 40.0, 60.0, 80.0]


def _build_parser():
    parser = argparse.ArgumentParser(prog="dcecav", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("simulate", "single Track A / Track B comparison run"),
        ("sweep", "exact-solver <n> versus g/epsilon"),
        ("qfunc", "Husimi Q-function snapshots"),
        ("validate", "parse and check a config file only"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, type=Path, help="JSON config file")
        if name == "validate":
            continue
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
        p.add_argument("--nmax", type=int, help="override numerics.nmax")
        p.add_argument("--threads", type=int, default=1, help="worker processes for the sweep")
        p.add_argument("--debug", action="store_true", help="also write gamma/beta/state dumps")
        p.add_argument("-v", "--verbose", action="store_true")
        if name != "sweep":
            p.add_argument("--track", choices=("a", "b", "both"), default="both")
    return parser


def _load(args):
    cfg = parse_config(args.config)
    if getattr(args, "nmax", None) is not None:
        cfg.numerics = cfg.numerics.replace(nmax=args.nmax)
        try:
            validate_numerics(cfg.numerics)
        except ConfigError as exc:
            raise ConfigError(f"--nmax: {exc}", field="nmax") from None
    return cfg


def _simulate(cfg, args, manifest):
    window = cfg.simulate.get("window")
    series = run_comparison(cfg.model, cfg.initial, cfg.numerics, window=window, tracks=args.track)
    out = args.out
    manifest.outputs.append(str(write_series_csv(series, out / "series.csv").name))
    manifest.diagnostics = series.diagnostics
    results = dict(series.summary)
    if args.track == "both":
        late = series.times >= (window[0] if window else 0.0)
        results["sign_alternations_n"] = sign_alternations((series.track_a.n_mean - series.track_b.n_mean)[late])
    manifest.results = results
    if args.debug:
        if args.track in ("a", "both"):
            traj = solve_joint(cfg.model, cfg.initial.m_excitations, cfg.numerics, series.times)
            manifest.outputs.append(write_gamma_csv(traj.times, traj.gamma, out / "gamma.csv").name)
            manifest.outputs.append(write_beta_csv(traj.times, traj.beta, out / "beta.csv").name)
        if args.track in ("b", "both"):
            psi0 = FockQubitState.from_ladder(cfg.initial, cfg.numerics.nmax)
            traj_b = evolve(psi0, cfg.model, cfg.numerics, series.times)
            manifest.outputs.append(write_state_csv(traj_b.state(-1), out / "state_final.csv").name)


def _sweep(cfg, args, manifest):
    ratios = cfg.sweep.get("ratios", DEFAULT_RATIOS)
    eval_times = cfg.sweep.get("eval_times", DEFAULT_EVAL_TIMES)
    table = sweep_g_over_eps(cfg.model, ratios, eval_times, cfg.numerics, threads=args.threads)
    manifest.outputs.append(write_sweep_csv(table, args.out / "sweep.csv").name)
    zero = np.flatnonzero(table.ratios == 0.0)
    peaks = []
    for j, t in enumerate(table.times):
        entry = {
            "t": t,
            "peak_ratio": table.peak_ratio[j],
            "peak_uncertainty": table.peak_uncertainty,
            "n_at_grid_max": float(table.n_mean[:, j].max()),
        }
        if zero.size:
            entry["n_at_zero_coupling"] = float(table.n_mean[zero[0], j])
        peaks.append(entry)
    manifest.results = {"peak_ratio": peaks}
    manifest.diagnostics = {"nmax_used": dict(zip((repr(float(r)) for r in table.ratios), table.nmax_used))}


def _qfunc(cfg, args, manifest):
    times = cfg.qfunc.get("snapshot_times", DEFAULT_SNAPSHOTS)
    extent = cfg.qfunc.get("extent", 6.0)
    points = cfg.qfunc.get("points", 201)
    pairs = qfunction_snapshots(cfg.model, cfg.numerics, times, extent, points, args.track, cfg.initial)
    snapshots = []
    for pair in pairs:
        entry = {"t": pair.t}
        for label, grid in (("a", pair.semi), ("b", pair.exact)):
            if grid is None:
                continue
            name = f"qgrid_{label}_t{pair.t:g}.csv"
            write_qgrid(grid, args.out / name)
            manifest.outputs.append(name)
            lobes = lobe_analysis(grid)
            entry[f"track_{label}"] = {
                "file": name,
                "grid": qgrid_spec(grid),
                "maxima": [list(m) for m in lobes.maxima[:4]],
                "saddle_depth": lobes.depth,
            }
        if pair.semi is not None and pair.exact is not None:
            entry["l1_distance"] = l1_distance(pair.semi, pair.exact)
        snapshots.append(entry)
    manifest.results = {"snapshots": snapshots}


_COMMANDS = {"simulate": _simulate, "sweep": _sweep, "qfunc": _qfunc}


def _failure(exc):
    error = {"type": type(exc).__name__, "message": str(exc)}
    for attr in ("t", "tail", "nmax"):
        value = getattr(exc, attr, None)
        if value is not None:
            error[{"t": "time"}.get(attr, attr)] = value
    if getattr(exc, "escalations", None):
        error["escalations"] = exc.escalations
    return error


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(f"{args.config}: ok")
        return EXIT_OK

    try:
        args.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"cannot create output directory {args.out}: {exc.strerror}", file=sys.stderr)
        return EXIT_NUMERIC
    config_echo = cfg.to_dict()
    config_echo["overrides"] = {"track": getattr(args, "track", "b"), "threads": args.threads}
    manifest = RunManifest(command=args.command, config=config_echo)
    code = EXIT_OK
    try:
        _COMMANDS[args.command](cfg, args, manifest)
    except (IntegrationError, DriftError, TruncationError, ArithmeticError) as exc:
        manifest.status = "failed"
        manifest.error = _failure(exc)
        print(f"numerical failure: {exc}", file=sys.stderr)
        code = EXIT_NUMERIC
    write_manifest(manifest, args.out / "manifest.json")
    return code


if __name__ == "__main__":
    sys.exit(main())
