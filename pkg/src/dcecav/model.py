"""Physical parameters, numerical settings and the cavity modulation.

Units: hbar = 1 and omega0 sets the frequency scale, so frequencies are in
units of omega0 and times in units of 1/omega0.  The evolution always
starts at t0 = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ConfigError(ValueError):
    """Raised when parameters or numerical settings violate an invariant."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True)
class ModelParams:
    """Cavity + atom parameters.

    omega(t) = omega0 (1 + epsilon sin(eta t)) is the modulated mode
    frequency, Omega the atomic transition frequency and g the dipole
    coupling.
    """

    Omega: float = 1.0
    epsilon: float = 0.02
    eta: float = 2.0
    g: float = 0.02
    omega0: float = 1.0

    def replace(self, **changes) -> "ModelParams":
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values.update(changes)
        return ModelParams(**values)


@dataclass(frozen=True)
class InitialLadderState:
    """alpha |e,n> + beta_amp |g,n+1>; the ladder carries M = n + 1 excitations."""

    alpha: complex = 1.0
    beta_amp: complex = 0.0
    n: int = 0

    @property
    def m_excitations(self) -> int:
        return self.n + 1

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.alpha, self.beta_amp], dtype=complex)


@dataclass(frozen=True)
class NumericsConfig:
    rtol: float = 1e-9
    atol: float = 1e-12
    nmax: int = 128
    tail_threshold: float = 1e-6
    t_max: float = 200.0
    dt_out: float = 0.1
    method: str = "RK45"
    fixed_step: float = 0.01
    frame: str = "rotating"
    max_nmax: int = 4096
    overflow_bound: float = 300.0

    def replace(self, **changes) -> "NumericsConfig":
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values.update(changes)
        return NumericsConfig(**values)

    def sample_grid(self, t_max=None) -> np.ndarray:
        """Uniform output grid 0, dt_out, ..., t_max (t_max always included)."""
        t_end = self.t_max if t_max is None else t_max
        count = int(math.floor(t_end / self.dt_out + 1e-9))
        grid = np.arange(count + 1) * self.dt_out
        if t_end - grid[-1] > 1e-9 * max(1.0, t_end):
            grid = np.append(grid, t_end)
        return grid


METHODS = ("RK45", "DOP853", "RK4", "euler")
FRAMES = ("rotating", "lab")


def omega_at(params: ModelParams, t):
    """Instantaneous mode frequency omega0 (1 + epsilon sin(eta t))."""
    return params.omega0 * (1.0 + params.epsilon * np.sin(params.eta * t))


def chi_at(params: ModelParams, t):
    """Squeezing rate chi = (d omega/dt) / (4 omega)."""
    eps, eta = params.epsilon, params.eta
    return eps * eta * np.cos(eta * t) / (4.0 * (1.0 + eps * np.sin(eta * t)))


def _check(condition, message, name):
    if not condition:
        raise ConfigError(message, field=name)


def validate_params(params: ModelParams) -> ModelParams:
    for name in ("omega0", "Omega", "epsilon", "eta", "g"):
        value = getattr(params, name)
        _check(
            isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value),
            f"{name} must be a finite real number, got {value!r}",
            name,
        )
    _check(params.omega0 > 0, "omega0 must be positive", "omega0")
    _check(abs(params.epsilon) < 1, "modulation amplitude must satisfy |epsilon|<1", "epsilon")
    _check(params.eta >= 0, "modulation frequency eta must be >= 0", "eta")
    _check(params.g >= 0, "coupling g must be >= 0", "g")
    _check(params.Omega >= 0, "atomic frequency Omega must be >= 0", "Omega")
    return params


def validate_initial(initial: InitialLadderState, tol=1e-12) -> InitialLadderState:
    _check(
        isinstance(initial.n, (int, np.integer)) and not isinstance(initial.n, bool) and initial.n >= 0,
        f"ladder photon number n must be a non-negative integer, got {initial.n!r}",
        "n",
    )
    norm = abs(initial.alpha) ** 2 + abs(initial.beta_amp) ** 2
    _check(
        abs(norm - 1.0) <= tol,
        f"initial state must be normalized: |alpha|^2+|beta|^2 = {norm!r}",
        "alpha",
    )
    return initial


def validate_numerics(numerics: NumericsConfig) -> NumericsConfig:
    _check(numerics.rtol > 0, "rtol must be positive", "rtol")
    _check(numerics.atol > 0, "atol must be positive", "atol")
    _check(
        isinstance(numerics.nmax, (int, np.integer)) and numerics.nmax >= 4,
        f"nmax must be an integer >= 4, got {numerics.nmax!r}",
        "nmax",
    )
    _check(
        0 < numerics.tail_threshold < 1,
        "tail_threshold must lie strictly between 0 and 1",
        "tail_threshold",
    )
    _check(numerics.dt_out > 0, "dt_out must be positive", "dt_out")
    _check(numerics.t_max > 0, "t_max must be positive", "t_max")
    _check(numerics.fixed_step > 0, "fixed_step must be positive", "fixed_step")
    _check(numerics.method in METHODS, f"method must be one of {METHODS}", "method")
    _check(numerics.frame in FRAMES, f"frame must be one of {FRAMES}", "frame")
    _check(numerics.max_nmax >= numerics.nmax, "max_nmax must be >= nmax", "max_nmax")
    _check(numerics.overflow_bound > 0, "overflow_bound must be positive", "overflow_bound")
    return numerics


def validate(params: ModelParams, numerics: NumericsConfig | None = None):
    """Check every invariant; returns the inputs unchanged or raises ConfigError."""
    validate_params(params)
    if numerics is not None:
        validate_numerics(numerics)
    return params, numerics


# Reference parameter sets: {Omega, eta, epsilon, g}.
DISPERSIVE = ModelParams(Omega=0.2, eta=2.0, epsilon=0.02, g=0.05)
RESONANT = ModelParams(Omega=1.0, eta=2.0, epsilon=0.02, g=0.02)
