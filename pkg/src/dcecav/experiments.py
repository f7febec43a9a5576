"""Comparison runs, the coupling sweep and Q-function snapshots.

Track A is the Lie-algebraic ladder propagator, Track B the exact Fock
space integration.  Every driver returns in-memory results; file output
lives in ``dcecav.io``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter

from .exact import FockQubitState, evolve, husimi_q_numeric, observables_series, reduced_field_density
from .ladder import ladder_amplitudes, solve_joint, ui_matrix, unitarity_residual
from .model import InitialLadderState, ModelParams, NumericsConfig, validate_initial
from .semianalytic import (
    ObservableRecord,
    QGrid,
    excited_prob_raw,
    excursion,
    husimi_grid,
    semianalytic_series,
    square_grid,
)
from .su11 import bogoliubov_coeffs

log = logging.getLogger(__name__)

REL_FLOOR = 0.01
AGREEMENT = 0.01


def _nan_record(times):
    nan = np.full(np.shape(times), np.nan)
    return ObservableRecord(times, nan, nan, nan, nan, nan, nan)


def deviation(a, b, floor=REL_FLOOR):
    """Absolute and relative differences; the relative one divides by max(|b|, floor)."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    abs_dev = np.abs(a - b)
    return abs_dev, abs_dev / np.maximum(np.abs(b), floor)


def agreement_window(times, rel_dev, level=AGREEMENT):
    """Largest t* such that rel_dev < level on every sample in [0, t*]."""
    bad = np.flatnonzero(~(rel_dev < level))
    if bad.size == 0:
        return float(times[-1])
    if bad[0] == 0:
        return 0.0
    return float(times[bad[0] - 1])


@dataclass
class ComparisonSeries:
    times: np.ndarray
    track_a: ObservableRecord
    track_b: ObservableRecord
    deviation: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)


def track_a_run(params, initial, numerics, times):
    traj = solve_joint(params, initial.m_excitations, numerics, times)
    record = semianalytic_series(traj, initial)
    coeffs = bogoliubov_coeffs(traj.gamma)
    drift1, drift2 = coeffs.conjugacy_drift()
    diag = {
        "bogoliubov_drift": float(max(drift1.max(), drift2.max(), coeffs.symplectic_residual().max())),
        "unitarity_drift": float(unitarity_residual(ui_matrix(traj.beta)).max()),
        "ladder_norm_drift": float(ladder_amplitudes(traj.beta, initial).norm_residual().max()),
        "recharts": traj.recharts,
        "nfev": traj.nfev,
        "steps": traj.n_steps,
    }
    if initial.alpha == 1 and initial.n == 0:
        diag["p_excited_excursion"] = float(excursion(excited_prob_raw(traj.gamma, traj.beta)).max())
    return traj, record, diag


def track_b_run(params, initial, numerics, times):
    psi0 = FockQubitState.from_ladder(initial, numerics.nmax)
    traj = evolve(psi0, params, numerics, times)
    diag = {
        "nmax_used": traj.nmax,
        "norm_drift": traj.norm_drift(),
        "truncation_tail": traj.max_tail,
        "escalations": [{k: float(v) for k, v in e.items()} for e in traj.escalations],
        "nfev": traj.nfev,
        "steps": traj.n_steps,
    }
    return traj, observables_series(traj), diag


def run_comparison(
    params: ModelParams,
    initial: InitialLadderState,
    numerics: NumericsConfig,
    t_grid=None,
    window=None,
    tracks: str = "both",
) -> ComparisonSeries:
    """Both tracks on one grid plus <n> deviation statistics.

    ``window`` = (t_lo, t_hi) restricts the max/mean deviation summary.
    """
    validate_initial(initial)
    times = numerics.sample_grid() if t_grid is None else np.asarray(t_grid, float)
    diagnostics = {}
    if tracks in ("a", "both"):
        _, rec_a, diagnostics["track_a"] = track_a_run(params, initial, numerics, times)
    else:
        rec_a = _nan_record(times)
    if tracks in ("b", "both"):
        _, rec_b, diagnostics["track_b"] = track_b_run(params, initial, numerics, times)
    else:
        rec_b = _nan_record(times)

    abs_n, rel_n = deviation(rec_a.n_mean, rec_b.n_mean)
    dev = {"abs_dev_n": abs_n, "rel_dev_n": rel_n}
    for name in ("p_excited", "var_x", "var_p"):
        dev[f"abs_dev_{name}"], dev[f"rel_dev_{name}"] = deviation(getattr(rec_a, name), getattr(rec_b, name))

    summary = {}
    if tracks == "both":
        lo, hi = window if window is not None else (times[0], times[-1])
        mask = (times >= lo) & (times <= hi)
        summary = {
            "window": [float(lo), float(hi)],
            "max_rel_dev_n": float(rel_n[mask].max()),
            "mean_rel_dev_n": float(rel_n[mask].mean()),
            "max_abs_dev_n": float(abs_n[mask].max()),
            "t_star_1pct": agreement_window(times, rel_n),
        }
    return ComparisonSeries(times, rec_a, rec_b, dev, summary, diagnostics)


def sign_alternations(values):
    """Number of sign changes in a sequence, ignoring exact zeros."""
    s = np.sign(np.asarray(values))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def refine_peak(x, y):
    """Vertex of the parabola through the grid maximum and its two neighbours.

    Falls back to the grid maximum at the ends of the interval.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    i = int(np.argmax(y))
    if i == 0 or i == len(x) - 1:
        return float(x[i])
    x0, x1, x2 = x[i - 1 : i + 2]
    y0, y1, y2 = y[i - 1 : i + 2]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom
    if a >= 0:
        return float(x1)
    return float(np.clip(-b / (2 * a), x0, x2))


@dataclass
class SweepTable:
    ratios: np.ndarray
    times: np.ndarray
    n_mean: np.ndarray  # (len(ratios), len(times))
    peak_ratio: np.ndarray
    peak_uncertainty: float
    nmax_used: list = field(default_factory=list)
    epsilon: float = 0.0


def _sweep_point(args):
    params, numerics, grid = args
    psi0 = FockQubitState.basis("e", 0, numerics.nmax)
    traj = evolve(psi0, params, numerics, grid)
    return observables_series(traj).n_mean, traj.nmax


def sweep_g_over_eps(
    params_base: ModelParams,
    ratios,
    eval_times,
    numerics: NumericsConfig,
    threads: int = 1,
) -> SweepTable:
    """Exact-solver <n>(t) for g = ratio * epsilon, initial state |e,0>.

    One evolution per ratio is sampled at every requested time.
    """
    ratios = np.asarray(ratios, float)
    eval_times = np.asarray(eval_times, float)
    if ratios.size == 0 or np.any(np.diff(ratios) <= 0):
        raise ValueError("ratios must be non-empty and strictly ascending")
    order = np.argsort(eval_times)
    grid = np.concatenate([[0.0], eval_times[order]]) if eval_times[order][0] > 0 else eval_times[order]
    tasks = [(params_base.replace(g=float(r * params_base.epsilon)), numerics, grid) for r in ratios]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(task) for task in tasks]
    offset = len(grid) - len(eval_times)
    table = np.empty((ratios.size, eval_times.size))
    for i, (n_mean, _) in enumerate(results):
        table[i, order] = n_mean[offset:]
    peaks = np.array([refine_peak(ratios, table[:, j]) for j in range(eval_times.size)])
    step = float(np.min(np.diff(ratios))) if ratios.size > 1 else 0.0
    return SweepTable(ratios, eval_times, table, peaks, step, [nm for _, nm in results], params_base.epsilon)


@dataclass
class QPair:
    t: float
    semi: QGrid | None
    exact: QGrid | None


def qfunction_snapshots(
    params: ModelParams,
    numerics: NumericsConfig,
    snapshot_times,
    extent: float = 6.0,
    points: int = 201,
    tracks: str = "both",
    initial: InitialLadderState | None = None,
) -> list:
    """Paired Q(z) grids (Track A formula, Track B numeric) at each snapshot time."""
    initial = InitialLadderState() if initial is None else initial
    if not (initial.alpha == 1 and initial.n == 0):
        raise ValueError("Q-function snapshots need the |e,0> initial state")
    times = np.asarray(snapshot_times, float)
    order = np.argsort(times)
    grid = times[order]
    if grid[0] > 0:
        grid = np.concatenate([[0.0], grid])
    offset = len(grid) - len(times)
    x_axis, y_axis = square_grid(extent, points)
    semi = [None] * len(times)
    exact = [None] * len(times)
    if tracks in ("a", "both"):
        traj = solve_joint(params, 1, numerics, grid)
        for k, idx in enumerate(order):
            gamma, beta = traj.at(k + offset)
            semi[idx] = husimi_grid(gamma, beta, x_axis, y_axis)
    if tracks in ("b", "both"):
        traj_b = evolve(FockQubitState.basis("e", 0, numerics.nmax), params, numerics, grid)
        for k, idx in enumerate(order):
            rho = reduced_field_density(traj_b.state(k + offset))
            exact[idx] = husimi_q_numeric(rho, x_axis, y_axis)
    return [QPair(float(times[i]), semi[i], exact[i]) for i in range(len(times))]


def l1_distance(first: QGrid, second: QGrid) -> float:
    return float(np.abs(first.values - second.values).sum() * first.cell_area)


@dataclass
class LobeReport:
    maxima: list  # [(re z, im z, Q)], strongest first
    saddle: float  # minimum of Q on the segment between the two strongest maxima
    depth: float  # min(peak1, peak2) - saddle

    @property
    def bimodal(self) -> bool:
        return len(self.maxima) >= 2


def lobe_analysis(grid: QGrid, window: int = 9, rel_height: float = 0.05) -> LobeReport:
    """Local maxima of a Q grid and the depth of the dip between the two strongest."""
    values = grid.values
    is_max = (values == maximum_filter(values, size=window, mode="nearest")) & (
        values > rel_height * values.max()
    )
    idx = np.argwhere(is_max)
    found = sorted(
        ((float(grid.x_axis[i]), float(grid.y_axis[j]), float(values[i, j])) for i, j in idx),
        key=lambda m: -m[2],
    )
    if len(found) < 2:
        return LobeReport(found, float("nan"), 0.0)
    (x1, y1, q1), (x2, y2, q2) = found[0], found[1]
    s = np.linspace(0.0, 1.0, 401)
    xs = x1 + s * (x2 - x1)
    ys = y1 + s * (y2 - y1)
    # bilinear interpolation of Q along the segment
    fx = np.interp(xs, grid.x_axis, np.arange(grid.x_axis.size))
    fy = np.interp(ys, grid.y_axis, np.arange(grid.y_axis.size))
    i0 = np.clip(np.floor(fx).astype(int), 0, grid.x_axis.size - 2)
    j0 = np.clip(np.floor(fy).astype(int), 0, grid.y_axis.size - 2)
    u = fx - i0
    v = fy - j0
    line = (
        values[i0, j0] * (1 - u) * (1 - v)
        + values[i0 + 1, j0] * u * (1 - v)
        + values[i0, j0 + 1] * (1 - u) * v
        + values[i0 + 1, j0 + 1] * u * v
    )
    saddle = float(line.min())
    return LobeReport(found, saddle, min(q1, q2) - saddle)
