"""Closed-form field and atom observables from the gamma/beta functions.

All formulas are evaluated in the interaction picture of U0 on a single
ladder.  Quantities that are real for an exactly unitary propagator are
checked for an imaginary residual before it is discarded, so conjugacy
drift in the gamma integration surfaces as ``DriftError``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ladder import BetaState, JointTrajectory, ladder_amplitudes
from .model import InitialLadderState
from .su11 import GammaState, number_coeffs

IMAG_TOL = 1e-8
ROUNDOFF = 1e-9


class DriftError(ArithmeticError):
    """A nominally real or bounded quantity left its tolerance band."""


@dataclass
class ObservableRecord:
    t: float | np.ndarray
    n_mean: float | np.ndarray
    p_excited: float | np.ndarray
    x_mean: float | np.ndarray
    p_mean: float | np.ndarray
    var_x: float | np.ndarray
    var_p: float | np.ndarray

    def at(self, index) -> "ObservableRecord":
        return ObservableRecord(*(np.asarray(getattr(self, f))[index] for f in self.__dataclass_fields__))


@dataclass
class QGrid:
    x_axis: np.ndarray
    y_axis: np.ndarray
    values: np.ndarray  # values[i, j] = Q(x_axis[i] + 1j * y_axis[j])

    @property
    def cell_area(self) -> float:
        return float((self.x_axis[1] - self.x_axis[0]) * (self.y_axis[1] - self.y_axis[0]))

    def normalization(self) -> float:
        return float(self.values.sum() * self.cell_area)

    def points(self):
        x, y = np.meshgrid(self.x_axis, self.y_axis, indexing="ij")
        return x + 1j * y


def square_grid(extent=6.0, points=201):
    axis = np.linspace(-extent, extent, points)
    return axis, axis.copy()


def _real(value, what, tol=IMAG_TOL):
    value = np.asarray(value)
    residual = np.abs(value.imag)
    scale = np.maximum(1.0, np.abs(value.real))
    if np.any(residual > tol * scale):
        worst = float(np.max(residual / scale))
        raise DriftError(f"{what}: imaginary residual {worst:.3g} exceeds {tol:g} (gamma conjugacy drift)")
    return value.real


_EXCITED = InitialLadderState(1.0, 0.0, 0)


def mean_photons(gamma: GammaState, beta: BetaState, initial: InitialLadderState):
    """<n> = g11 [n |C_en|^2 + (n+1) |C_gn1|^2] + g00 on the ladder of ``initial``."""
    coeffs = number_coeffs(gamma)
    amps = ladder_amplitudes(beta, initial)
    n = initial.n
    value = coeffs.g11 * (n * np.abs(amps.c_en) ** 2 + (n + 1) * np.abs(amps.c_gn1) ** 2) + coeffs.g00
    return _real(value, "mean photon number")


def mean_photons_vacuum_ladder(gamma: GammaState, beta: BetaState, alpha=1.0):
    """Specialized form g11 |alpha beta_+|^2 exp(-2 Re beta_z) + g00 for |e,0>-started runs.

    Only meaningful before any chart restart.
    """
    if not np.all(beta.is_unanchored()):
        raise ValueError("vacuum-ladder photon formula needs the original (unanchored) chart")
    coeffs = number_coeffs(gamma)
    value = coeffs.g11 * np.abs(alpha * beta.beta_plus) ** 2 * np.exp(-2 * np.real(beta.beta_z)) + coeffs.g00
    return _real(value, "mean photon number")


def _vacuum_branch_weight(gamma: GammaState):
    arg = 1 - 4 * np.abs(gamma.gamma2) ** 2 * np.exp(4 * np.real(gamma.gamma1))
    if np.any(arg <= 0):
        raise DriftError("1 - 4|gamma2|^2 exp(4 Re gamma1) <= 0: squeezing factorization out of validity")
    return np.exp(2 * np.real(gamma.gamma4)) / np.sqrt(arg)


def excited_prob_raw(gamma: GammaState, beta: BetaState):
    """Unclamped value of the excited-state formula (see ``excited_prob``)."""
    if beta.m_excitations != 1:
        raise ValueError("excited_prob is only defined for the |e,0> ladder (M = 1)")
    if beta.anchor is None:
        weight_e = np.exp(2 * np.real(beta.beta_z))
    else:
        weight_e = np.abs(ladder_amplitudes(beta, _EXCITED).c_en) ** 2
    return weight_e * _vacuum_branch_weight(gamma)


def excursion(p):
    """How far a probability lies outside [0, 1]."""
    return np.maximum(np.maximum(p - 1.0, -p), 0.0)


def excited_prob(gamma: GammaState, beta: BetaState):
    """Excited-state probability for a run started in |e,0>.

    exp(2 Re(gamma4 + beta_z)) / sqrt(1 - 4|gamma2|^2 exp(4 Re gamma1)); after a
    chart restart exp(2 Re beta_z) is replaced by |C_en|^2, its value in the
    original chart.  Excursions outside [0, 1] up to ROUNDOFF are clamped.
    """
    p = excited_prob_raw(gamma, beta)
    if np.any(excursion(p) > ROUNDOFF):
        raise DriftError(f"excited-state probability {float(np.max(p)):.12g} outside [0, 1]")
    return np.clip(p, 0.0, 1.0)


def field_moments(gamma: GammaState, beta: BetaState, initial: InitialLadderState):
    """(<a>, <a^2>) for an initial state alpha|e,0> + beta|g,1>.

    <a+>  = (beta b+* alpha* - 2 beta* b+ alpha gamma3) exp(-2 Re bz - gamma1)
    <a+2> = -2 gamma3 exp(-2 gamma1) (2 |alpha b+|^2 exp(-2 Re bz) + 1)
    and the returned values are their complex conjugates.
    """
    if initial.n != 0:
        raise ValueError("field moment formulas hold for the n = 0 ladder only")
    alpha, b = initial.alpha, initial.beta_amp
    g1, g3 = gamma.gamma1, gamma.gamma3
    if b == 0:
        # Both formulas depend on beta only through |C_{g,1}|^2 here, which
        # stays valid across chart restarts.
        pop_g = np.abs(ladder_amplitudes(beta, initial).c_gn1) ** 2
        mean_adag = np.zeros(np.shape(g1), dtype=complex)
    else:
        if not np.all(beta.is_unanchored()):
            raise ValueError("field moments with beta_amp != 0 need the original (unanchored) chart")
        bz, bp = beta.beta_z, beta.beta_plus
        pop_g = np.abs(alpha * bp) ** 2 * np.exp(-2 * np.real(bz))
        mean_adag = (b * np.conj(bp) * np.conj(alpha) - 2 * np.conj(b) * bp * alpha * g3) * np.exp(
            -2 * np.real(bz) - g1
        )
    mean_adag2 = -2 * g3 * np.exp(-2 * g1) * (2 * pop_g + 1)
    return np.conj(mean_adag), np.conj(mean_adag2)


def quadrature_variances(mean_a, mean_a2, n_mean):
    """Variances of X = (a + a+)/sqrt2 and P = (a - a+)/(sqrt2 i)."""
    mean_a = np.asarray(mean_a)
    mean_a2 = np.asarray(mean_a2)
    var_x = n_mean + 0.5 + mean_a2.real - (np.sqrt(2) * mean_a.real) ** 2
    var_p = n_mean + 0.5 - mean_a2.real - (np.sqrt(2) * mean_a.imag) ** 2
    if np.any(var_x < -ROUNDOFF) or np.any(var_p < -ROUNDOFF):
        raise DriftError("negative quadrature variance")
    return var_x, var_p


def husimi_q(gamma: GammaState, beta: BetaState, z):
    """Q(z) of the field for the |e,0> initial state at one instant.

    (1/pi) exp(-|z|^2 + 2 Re(gamma4 + z*^2 gamma2 exp(2 gamma1)))
           * (exp(2 Re bz) + |z b+|^2 exp(2 Re(gamma1 - bz)))
    """
    z = np.asarray(z, dtype=complex)
    g1, g2, g4 = gamma.gamma1, gamma.gamma2, gamma.gamma4
    if beta.anchor is None:
        pop_e = np.exp(2 * np.real(beta.beta_z))
        pop_g = np.abs(beta.beta_plus) ** 2 * np.exp(-2 * np.real(beta.beta_z))
    else:
        amps = ladder_amplitudes(beta, _EXCITED)
        pop_e, pop_g = np.abs(amps.c_en) ** 2, np.abs(amps.c_gn1) ** 2
    envelope = np.exp(-np.abs(z) ** 2 + 2 * np.real(g4 + np.conj(z) ** 2 * g2 * np.exp(2 * g1)))
    return envelope * (pop_e + np.abs(z) ** 2 * pop_g * np.exp(2 * np.real(g1))) / np.pi


def husimi_grid(gamma: GammaState, beta: BetaState, x_axis, y_axis) -> QGrid:
    grid = QGrid(np.asarray(x_axis, float), np.asarray(y_axis, float), None)
    grid.values = husimi_q(gamma, beta, grid.points())
    return grid


def semianalytic_series(traj: JointTrajectory, initial: InitialLadderState) -> ObservableRecord:
    """Observable series of a joint trajectory; NaN where a formula is out of its scope."""
    gamma, beta = traj.gamma, traj.beta
    nan = np.full(traj.times.shape, np.nan)
    n_mean = mean_photons(gamma, beta, initial)
    if initial.alpha == 1 and initial.n == 0:
        # out-of-band samples become NaN here; callers read the excursion
        # from excited_prob_raw to report it
        raw = excited_prob_raw(gamma, beta)
        p_e = np.where(excursion(raw) > ROUNDOFF, np.nan, np.clip(raw, 0.0, 1.0))
    else:
        p_e = nan.copy()
    if initial.n == 0 and (initial.beta_amp == 0 or np.all(beta.is_unanchored())):
        mean_a, mean_a2 = field_moments(gamma, beta, initial)
        var_x, var_p = quadrature_variances(mean_a, mean_a2, n_mean)
        x_mean, p_mean = np.sqrt(2) * mean_a.real, np.sqrt(2) * mean_a.imag
    else:
        var_x, var_p, x_mean, p_mean = nan.copy(), nan.copy(), nan.copy(), nan.copy()
    return ObservableRecord(traj.times, n_mean, p_e, x_mean, p_mean, var_x, var_p)
