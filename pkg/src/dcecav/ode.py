"""Integration of first-order complex ODE systems sampled on a fixed grid.

Adaptive runs use scipy's embedded Runge-Kutta steppers (Dormand-Prince
5(4) by default, DOP853 optionally) driven one step at a time so that
samples come from the dense output of the step that brackets them.  A
fixed-step classical RK4 and forward Euler exist as cross-checks; they
land exactly on every sample time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import DOP853, RK45

_ADAPTIVE = {"RK45": RK45, "DOP853": DOP853}


class IntegrationError(RuntimeError):
    """Integrator failure; ``t`` is the time at which it happened."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class NonFiniteError(IntegrationError):
    pass


@dataclass
class OdeProblem:
    rhs: Callable[[float, np.ndarray], np.ndarray]
    y0: np.ndarray
    t_span: tuple

    def __post_init__(self):
        self.y0 = np.atleast_1d(np.asarray(self.y0, dtype=complex))
        t0, t1 = self.t_span
        if self.y0.size < 1:
            raise ValueError("ODE dimension must be >= 1")
        if not t1 > t0:
            raise ValueError(f"t_span must satisfy t1 > t0, got {self.t_span}")

    @property
    def dimension(self) -> int:
        return self.y0.size


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (len(times), dimension)
    nfev: int = 0
    n_steps: int = 0
    # Set when a stop_when predicate halted the run early.
    stopped_at: Optional[float] = None
    last_t: float = 0.0
    last_y: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return len(self.times)


def _checked(rhs, counter):
    def fun(t, y):
        counter[0] += 1
        dy = np.asarray(rhs(t, y), dtype=complex)
        if not np.all(np.isfinite(dy)):
            raise NonFiniteError(f"non-finite right-hand side at t={t!r}", t=t)
        return dy

    return fun


def _grid(problem, sample_grid):
    t0, t1 = problem.t_span
    if sample_grid is None:
        return np.array([t0, t1], dtype=float)
    grid = np.asarray(sample_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("sample grid must be a non-empty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("sample grid must be strictly increasing")
    if grid[0] < t0 or grid[-1] > t1 * (1 + 1e-14) + 1e-14:
        raise ValueError("sample grid must lie inside t_span")
    return grid


def integrate(
    problem: OdeProblem,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    sample_grid=None,
    method: str = "RK45",
    step: Optional[float] = None,
    stop_when: Optional[Callable[[float, np.ndarray], bool]] = None,
    max_step: float = np.inf,
) -> Trajectory:
    """Integrate ``problem`` and return its values on ``sample_grid``.

    ``stop_when(t, y)`` is evaluated after every accepted step; when it
    returns True the run stops there and the trajectory holds only the
    samples reached so far (``stopped_at`` gives the stop time and
    ``last_y`` the state, ready for a restart).
    """
    grid = _grid(problem, sample_grid)
    if method in _ADAPTIVE:
        return _integrate_adaptive(problem, rtol, atol, grid, method, stop_when, max_step)
    if method in ("RK4", "euler"):
        if step is None:
            raise ValueError(f"fixed-step method {method} needs a step size")
        return _integrate_fixed(problem, grid, method, step, stop_when)
    raise ValueError(f"unknown method {method!r}")


def _integrate_adaptive(problem, rtol, atol, grid, method, stop_when, max_step):
    counter = [0]
    fun = _checked(problem.rhs, counter)
    t0 = problem.t_span[0]
    t_end = grid[-1]
    states = np.empty((grid.size, problem.dimension), dtype=complex)
    k = 0
    while k < grid.size and grid[k] <= t0:
        states[k] = problem.y0
        k += 1
    if k == grid.size:
        return Trajectory(grid, states, 0, 0, None, t0, problem.y0.copy())

    solver = _ADAPTIVE[method](fun, t0, problem.y0, t_end, rtol=rtol, atol=atol, max_step=max_step)
    n_steps = 0
    stopped = None
    while solver.status == "running":
        message = solver.step()
        if solver.status == "failed":
            raise IntegrationError(f"integration failed at t={solver.t!r}: {message}", t=solver.t)
        n_steps += 1
        t_new = solver.t
        if k < grid.size and grid[k] <= t_new:
            dense = solver.dense_output()
            while k < grid.size and grid[k] <= t_new:
                states[k] = solver.y if grid[k] == t_new else dense(grid[k])
                k += 1
        if stop_when is not None and solver.status == "running" and stop_when(t_new, solver.y):
            stopped = t_new
            break
    return Trajectory(grid[:k], states[:k], counter[0], n_steps, stopped, solver.t, solver.y.copy())


def _rk4_step(fun, t, y, h):
    k1 = fun(t, y)
    k2 = fun(t + h / 2, y + h / 2 * k1)
    k3 = fun(t + h / 2, y + h / 2 * k2)
    k4 = fun(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _euler_step(fun, t, y, h):
    return y + h * fun(t, y)


def _integrate_fixed(problem, grid, method, step, stop_when):
    counter = [0]
    fun = _checked(problem.rhs, counter)
    advance = _rk4_step if method == "RK4" else _euler_step
    t = problem.t_span[0]
    y = problem.y0.copy()
    states = np.empty((grid.size, problem.dimension), dtype=complex)
    n_steps = 0
    for k, target in enumerate(grid):
        span = target - t
        if span > 0:
            # Uniform sub-steps that land exactly on the sample time.
            n_sub = max(1, math.ceil(span / step - 1e-9))
            h = span / n_sub
            for i in range(n_sub):
                y = advance(fun, t + i * h, y, h)
                n_steps += 1
            t = target
        states[k] = y
        if stop_when is not None and stop_when(t, y):
            return Trajectory(grid[: k + 1], states[: k + 1], counter[0], n_steps, t, t, y.copy())
    return Trajectory(grid, states, counter[0], n_steps, None, t, y.copy())


def convergence_order(problem: OdeProblem, exact_solution, method="RK4", step=0.1):
    """Empirical order from the final-time errors at ``step`` and ``step/2``.

    Returns None when the coarse error is already zero (nothing to measure).
    """
    t1 = problem.t_span[1]
    exact = np.asarray(exact_solution(t1), dtype=complex)
    errors = []
    for h in (step, step / 2):
        traj = integrate(problem, sample_grid=[problem.t_span[0], t1], method=method, step=h)
        errors.append(np.max(np.abs(traj.states[-1] - exact)))
    if errors[0] == 0.0:
        return None
    return math.log2(errors[0] / errors[1])
