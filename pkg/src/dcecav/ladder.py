"""Interaction-picture propagator on a single excitation ladder.

Inside span{|e,n>, |g,n+1>} the rotating-wave interaction is generated by
b = a s+/sqrt(M), b+ = a+ s-/sqrt(M) and sz, and the propagator factorizes
as U_I = exp(bz sz) exp(b+ b+) exp(b- b).  The beta functions are driven by
the Bogoliubov coefficients of U0, so gamma and beta are integrated as one
7-component system.

The factorized form is a coordinate chart on SU(2); it breaks down when
the |e,n> -> |e,n> element exp(bz) of the current factor passes through
zero (exact resonance, g t = pi/2).  With ``rechart=True`` the run is
restarted from beta = 0 whenever |exp(bz)|^2 drops below
``chart_threshold`` and the propagator accumulated so far is carried in
``BetaState.anchor``: U_I(t) = W(beta(t)) @ anchor.  Until the first
restart the anchor is exactly the identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import InitialLadderState, ModelParams, NumericsConfig, chi_at
from .ode import OdeProblem, integrate
from .su11 import (
    BogoliubovCoeffs,
    GammaState,
    OverflowGuardError,
    _gamma_derivatives,
    guard_overflow,
    solve_gammas,
)

CHART_THRESHOLD = 0.5


@dataclass
class BetaState:
    beta_z: complex | np.ndarray = 0j
    beta_plus: complex | np.ndarray = 0j
    beta_minus: complex | np.ndarray = 0j
    m_excitations: int = 1
    anchor: np.ndarray | None = None  # (..., 2, 2); None means identity

    def anchor_matrix(self) -> np.ndarray:
        shape = np.shape(self.beta_z)
        if self.anchor is None:
            return np.broadcast_to(np.eye(2, dtype=complex), shape + (2, 2))
        return self.anchor

    def is_unanchored(self):
        """True where no chart restart has happened yet (anchor == identity)."""
        if self.anchor is None:
            return np.ones(np.shape(self.beta_z), dtype=bool)
        return np.all(self.anchor == np.eye(2), axis=(-2, -1))

    def at(self, index) -> "BetaState":
        anchor = None if self.anchor is None else self.anchor[index]
        return BetaState(
            self.beta_z[index], self.beta_plus[index], self.beta_minus[index], self.m_excitations, anchor
        )


@dataclass
class LadderAmplitudes:
    c_en: complex | np.ndarray
    c_gn1: complex | np.ndarray

    def norm_residual(self):
        return np.abs(np.abs(self.c_en) ** 2 + np.abs(self.c_gn1) ** 2 - 1.0)


@dataclass
class JointTrajectory:
    times: np.ndarray
    gamma: GammaState
    beta: BetaState
    nfev: int = 0
    n_steps: int = 0
    recharts: list = field(default_factory=list)

    def at(self, index):
        return self.gamma.at(index), self.beta.at(index)


def _beta_derivatives(t, bz, bp, coupling, omega_atom, a_sum, b_sum):
    # a_sum = t1 + t3 multiplies a s+, b_sum = t2 + t4 multiplies a+ s-
    up = np.exp(1j * omega_atom * t - 2 * bz)
    down = np.exp(-1j * omega_atom * t + 2 * bz)
    dz = -1j * up * coupling * a_sum * bp
    dp = -1j * coupling * (down * b_sum + up * a_sum * bp * bp)
    dm = -1j * up * coupling * a_sum
    return dz, dp, dm


def beta_rhs(t, beta: BetaState, coeffs: BogoliubovCoeffs, params: ModelParams) -> BetaState:
    """Time derivatives of (beta_z, beta_+, beta_-); ``coeffs`` must be taken at the same t."""
    coupling = params.g * math.sqrt(beta.m_excitations)
    dz, dp, dm = _beta_derivatives(
        t, beta.beta_z, beta.beta_plus, coupling, params.Omega, coeffs.t1 + coeffs.t3, coeffs.t2 + coeffs.t4
    )
    return BetaState(dz, dp, dm, beta.m_excitations)


def _joint_rhs(params: ModelParams, m: int, bound: float):
    omega0 = params.omega0
    coupling = params.g * math.sqrt(m)
    omega_atom = params.Omega

    def rhs(t, y):
        g1, g2, g3, _, bz, bp, _ = y
        guard_overflow(g1, bound, t)
        if abs(2 * bz.real) > bound:
            raise OverflowGuardError(f"|Re(2*beta_z)| = {abs(2 * bz.real):.6g} exceeds overflow bound {bound}", t=t)
        chi = chi_at(params, t)
        d1, d2, d3, d4 = _gamma_derivatives(chi, omega0, g1, g2)
        e1 = np.exp(g1)
        em1 = np.exp(-g1)
        a_sum = e1 * (1 - 4 * g2 * g3) - 2 * em1 * g3
        b_sum = 2 * e1 * g2 + em1
        dz, dp, dm = _beta_derivatives(t, bz, bp, coupling, omega_atom, a_sum, b_sum)
        return np.array([d1, d2, d3, d4, dz, dp, dm])

    return rhs


def ui_matrix(beta: BetaState) -> np.ndarray:
    """Propagator on the ladder in the basis (|e,n>, |g,n+1>); shape (..., 2, 2)."""
    ez = np.exp(beta.beta_z)
    emz = np.exp(-beta.beta_z)
    bp, bm = beta.beta_plus, beta.beta_minus
    w = np.empty(np.shape(ez) + (2, 2), dtype=complex)
    w[..., 0, 0] = ez
    w[..., 1, 0] = emz * bp
    w[..., 0, 1] = ez * bm
    w[..., 1, 1] = emz * (1 + bp * bm)
    if beta.anchor is not None:
        w = w @ beta.anchor
    return w


def unitarity_residual(u: np.ndarray):
    """max |U+U - 1| per matrix."""
    prod = np.conj(np.swapaxes(u, -1, -2)) @ u
    return np.max(np.abs(prod - np.eye(u.shape[-1])), axis=(-2, -1))


def ladder_amplitudes(beta: BetaState, initial: InitialLadderState) -> LadderAmplitudes:
    """Evolved ladder amplitudes C_{e,n}, C_{g,n+1} in the interaction picture."""
    if beta.anchor is None:
        alpha, b = initial.alpha, initial.beta_amp
    else:
        v = beta.anchor @ initial.vector
        alpha, b = v[..., 0], v[..., 1]
    ez = np.exp(beta.beta_z)
    emz = np.exp(-beta.beta_z)
    bp, bm = beta.beta_plus, beta.beta_minus
    return LadderAmplitudes(c_en=ez * (alpha + b * bm), c_gn1=emz * (alpha * bp + b * (1 + bp * bm)))


def solve_joint(
    params: ModelParams,
    m: int,
    numerics: NumericsConfig,
    sample_grid,
    rechart: bool = True,
    chart_threshold: float = CHART_THRESHOLD,
) -> JointTrajectory:
    """Integrate gamma and beta together from zero initial values.

    With g = 0 the beta functions stay identically zero and the gamma part
    is delegated to ``solve_gammas`` (same stepping, same numbers).
    """
    if m < 1:
        raise ValueError("ladder excitation number M must be >= 1")
    grid = np.asarray(sample_grid, dtype=float)
    if params.g == 0:
        gt = solve_gammas(params, numerics, grid)
        zeros = np.zeros(gt.times.shape, dtype=complex)
        return JointTrajectory(
            gt.times, gt.gamma, BetaState(zeros, zeros.copy(), zeros.copy(), m), gt.nfev, gt.n_steps
        )

    rhs = _joint_rhs(params, m, numerics.overflow_bound)
    log_threshold = math.log(chart_threshold)
    stop_when = (lambda t, y: 2 * y[4].real < log_threshold) if rechart else None

    t_start = 0.0
    y = np.zeros(7, dtype=complex)
    anchor = np.eye(2, dtype=complex)
    pieces, anchors, recharts = [], [], []
    nfev = n_steps = 0
    remaining = grid
    while True:
        problem = OdeProblem(rhs, y, (t_start, grid[-1]))
        traj = integrate(
            problem,
            rtol=numerics.rtol,
            atol=numerics.atol,
            sample_grid=remaining,
            method=numerics.method,
            step=numerics.fixed_step,
            stop_when=stop_when,
        )
        nfev += traj.nfev
        n_steps += traj.n_steps
        pieces.append(traj.states)
        anchors.append(np.broadcast_to(anchor, (len(traj.times), 2, 2)))
        remaining = remaining[len(traj.times):]
        if traj.stopped_at is None or remaining.size == 0:
            break
        last = traj.last_y
        w = ui_matrix(BetaState(last[4], last[5], last[6], m))
        anchor = w @ anchor
        recharts.append(float(traj.stopped_at))
        y = last.copy()
        y[4:] = 0.0
        t_start = traj.stopped_at

    states = np.concatenate(pieces)
    anchor_arr = np.concatenate(anchors).copy()
    gamma = GammaState.from_array(states[:, :4])
    beta = BetaState(states[:, 4], states[:, 5], states[:, 6], m, anchor_arr if recharts else None)
    return JointTrajectory(grid[: len(states)], gamma, beta, nfev, n_steps, recharts)
