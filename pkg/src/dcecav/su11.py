"""Wei-Norman solution of the unperturbed (squeezing) propagator.

U0 = exp(-i Omega t sz/2) exp(g1 n) exp(g2 a+^2) exp(g3 a^2) exp(g4).

The four complex functions obey a closed ODE system driven by chi(t); the
n-term uses the constant omega0.  From them follow the Bogoliubov
coefficients (U0+ a U0 = t1 a + t2 a+, U0+ a+ U0 = t3 a + t4 a+) and the
decomposition U0+ n U0 = g11 n + g20 a+^2 + g02 a^2 + g00.

All containers accept scalars or equally shaped arrays, so the same
functions serve single instants and whole trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams, NumericsConfig, chi_at
from .ode import IntegrationError, OdeProblem, integrate


class OverflowGuardError(IntegrationError):
    """exp(+-2 g1) (or exp(+-2 beta_z)) left the configured safe range."""


@dataclass
class GammaState:
    gamma1: complex | np.ndarray = 0j
    gamma2: complex | np.ndarray = 0j
    gamma3: complex | np.ndarray = 0j
    gamma4: complex | np.ndarray = 0j

    def as_array(self) -> np.ndarray:
        return np.array([self.gamma1, self.gamma2, self.gamma3, self.gamma4], dtype=complex)

    @classmethod
    def from_array(cls, y) -> "GammaState":
        y = np.asarray(y, dtype=complex)
        return cls(y[..., 0], y[..., 1], y[..., 2], y[..., 3])

    def at(self, index) -> "GammaState":
        return GammaState(self.gamma1[index], self.gamma2[index], self.gamma3[index], self.gamma4[index])


@dataclass
class BogoliubovCoeffs:
    t1: complex | np.ndarray
    t2: complex | np.ndarray
    t3: complex | np.ndarray
    t4: complex | np.ndarray

    def determinant(self):
        return self.t1 * self.t4 - self.t2 * self.t3

    def conjugacy_drift(self):
        """|t4 - t1*| and |t3 - t2*|; both vanish for an exactly unitary U0."""
        return np.abs(self.t4 - np.conj(self.t1)), np.abs(self.t3 - np.conj(self.t2))

    def symplectic_residual(self):
        return np.abs(np.abs(self.t1) ** 2 - np.abs(self.t2) ** 2 - 1.0)


@dataclass
class NumberCoeffs:
    g11: complex | np.ndarray
    g20: complex | np.ndarray
    g02: complex | np.ndarray
    g00: complex | np.ndarray


@dataclass
class GammaTrajectory:
    times: np.ndarray
    gamma: GammaState
    nfev: int = 0
    n_steps: int = 0

    def bogoliubov(self) -> BogoliubovCoeffs:
        return bogoliubov_coeffs(self.gamma)

    def number(self) -> NumberCoeffs:
        return number_coeffs(self.gamma)


def _gamma_derivatives(chi, omega0, g1, g2):
    e2 = np.exp(2 * g1)
    d1 = -1j * omega0 - 4j * e2 * chi * g2
    d2 = (-1j * np.exp(-2 * g1) + 4j * e2 * g2 * g2) * chi
    d3 = -1j * e2 * chi
    d4 = -2j * e2 * chi * g2
    return d1, d2, d3, d4


def gamma_rhs(t, gamma: GammaState, params: ModelParams) -> GammaState:
    """Time derivatives of the four Wei-Norman functions of U0."""
    chi = chi_at(params, t)
    return GammaState(*_gamma_derivatives(chi, params.omega0, gamma.gamma1, gamma.gamma2))


def guard_overflow(g1, bound, t=None):
    # exp(+-2 gamma1) both appear in the rhs
    if abs(np.real(2 * g1)) > bound:
        raise OverflowGuardError(f"|Re(2*gamma1)| = {abs(np.real(2 * g1)):.6g} exceeds overflow bound {bound}", t=t)


def _vector_rhs(params: ModelParams, bound: float):
    omega0 = params.omega0

    def rhs(t, y):
        guard_overflow(y[0], bound, t)
        return np.array(_gamma_derivatives(chi_at(params, t), omega0, y[0], y[1]))

    return rhs


def solve_gammas(params: ModelParams, numerics: NumericsConfig, sample_grid) -> GammaTrajectory:
    """Integrate the gamma system from gamma(0) = 0 over ``sample_grid``."""
    grid = np.asarray(sample_grid, dtype=float)
    problem = OdeProblem(_vector_rhs(params, numerics.overflow_bound), np.zeros(4, complex), (0.0, grid[-1]))
    traj = integrate(
        problem,
        rtol=numerics.rtol,
        atol=numerics.atol,
        sample_grid=grid,
        method=numerics.method,
        step=numerics.fixed_step,
    )
    return GammaTrajectory(traj.times, GammaState.from_array(traj.states), traj.nfev, traj.n_steps)


def bogoliubov_coeffs(gamma: GammaState) -> BogoliubovCoeffs:
    e1 = np.exp(gamma.gamma1)
    g23 = gamma.gamma2 * gamma.gamma3
    return BogoliubovCoeffs(
        t1=e1 * (1 - 4 * g23),
        t2=2 * e1 * gamma.gamma2,
        t3=-2 * np.exp(-gamma.gamma1) * gamma.gamma3,
        t4=np.exp(-gamma.gamma1),
    )


def number_coeffs(gamma: GammaState) -> NumberCoeffs:
    g23 = gamma.gamma2 * gamma.gamma3
    return NumberCoeffs(
        g11=1 - 8 * g23,
        g20=2 * gamma.gamma2,
        g02=2 * gamma.gamma3 * (4 * g23 - 1),
        g00=-4 * g23,
    )
