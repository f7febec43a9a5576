"""Reference solution of the full Hamiltonian on a truncated Fock x qubit space.

H(t) = omega(t) n + chi(t)(a^2 + a+^2) + (Omega/2) sz + g (a + a+)(s+ + s-)

with no rotating-wave approximation.  Amplitude vectors have length
2 (nmax + 1), ordered |e,0..nmax> then |g,0..nmax>.

The default ``frame="rotating"`` integrates phi = exp(i H_free t) psi with
H_free = omega0 n + (Omega/2) sz.  This is an exact change of variables;
it removes the fast phases of the highly excited Fock levels that would
otherwise force tiny explicit steps.  Returned states are always in the
lab frame.  ``frame="lab"`` integrates psi directly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .model import InitialLadderState, ModelParams, NumericsConfig, chi_at, omega_at
from .ode import IntegrationError, OdeProblem, integrate
from .semianalytic import ObservableRecord, QGrid

HERMITIAN_TOL = 1e-10


class TruncationError(IntegrationError):
    """Population reached the top of the Fock space; carries the measured tail."""

    def __init__(self, message, t=None, tail=None, nmax=None):
        super().__init__(message, t=t)
        self.tail = tail
        self.nmax = nmax


@dataclass
class FockQubitState:
    amplitudes: np.ndarray
    nmax: int

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2 * (self.nmax + 1),):
            raise ValueError(f"expected {2 * (self.nmax + 1)} amplitudes for nmax={self.nmax}")

    @classmethod
    def basis(cls, atom: str, n: int, nmax: int) -> "FockQubitState":
        amps = np.zeros(2 * (nmax + 1), dtype=complex)
        amps[_index(atom, n, nmax)] = 1.0
        return cls(amps, nmax)

    @classmethod
    def from_ladder(cls, initial: InitialLadderState, nmax: int) -> "FockQubitState":
        if initial.n + 1 > nmax:
            raise ValueError("nmax too small for the initial ladder")
        amps = np.zeros(2 * (nmax + 1), dtype=complex)
        amps[_index("e", initial.n, nmax)] = initial.alpha
        amps[_index("g", initial.n + 1, nmax)] = initial.beta_amp
        return cls(amps, nmax)

    def embed(self, nmax: int) -> "FockQubitState":
        """Same state in a larger truncation."""
        if nmax < self.nmax:
            raise ValueError("can only embed into a larger space")
        d_old, d_new = self.nmax + 1, nmax + 1
        amps = np.zeros(2 * d_new, dtype=complex)
        amps[:d_old] = self.amplitudes[:d_old]
        amps[d_new : d_new + d_old] = self.amplitudes[d_old:]
        return FockQubitState(amps, nmax)

    def branches(self):
        d = self.nmax + 1
        return self.amplitudes[:d], self.amplitudes[d:]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def _index(atom, n, nmax):
    if atom not in ("e", "g"):
        raise ValueError("atom level must be 'e' or 'g'")
    if not 0 <= n <= nmax:
        raise ValueError(f"photon number {n} outside 0..{nmax}")
    return n if atom == "e" else nmax + 1 + n


@dataclass
class OperatorSet:
    """Composite-space operators as sparse CSR matrices."""

    nmax: int
    a: sp.csr_matrix
    adag: sp.csr_matrix
    num: sp.csr_matrix
    sigma_z: sp.csr_matrix
    sigma_plus: sp.csr_matrix
    sigma_minus: sp.csr_matrix

    @property
    def dim(self) -> int:
        return 2 * (self.nmax + 1)


def build_operators(nmax: int) -> OperatorSet:
    """a|n> = sqrt(n)|n-1>; |e> = (1, 0), |g> = (0, 1), sz|e> = +|e>."""
    if nmax < 1:
        raise ValueError("nmax must be >= 1")
    d = nmax + 1
    field_a = sp.diags(np.sqrt(np.arange(1, d, dtype=float)), 1, shape=(d, d))
    field_n = sp.diags(np.arange(d, dtype=float))
    eye_f = sp.identity(d)
    eye_a = sp.identity(2)
    s_plus = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
    s_z = sp.diags([1.0, -1.0])
    a = sp.kron(eye_a, field_a, format="csr")
    return OperatorSet(
        nmax=nmax,
        a=a,
        adag=a.T.tocsr(),
        num=sp.kron(eye_a, field_n, format="csr"),
        sigma_z=sp.kron(s_z, eye_f, format="csr"),
        sigma_plus=sp.kron(s_plus, eye_f, format="csr"),
        sigma_minus=sp.kron(s_plus.T, eye_f, format="csr"),
    )


def hamiltonian_at(t, params: ModelParams, ops: OperatorSet) -> sp.csr_matrix:
    squeeze = ops.a @ ops.a + ops.adag @ ops.adag
    coupling = (ops.a + ops.adag) @ (ops.sigma_plus + ops.sigma_minus)
    h = (
        omega_at(params, t) * ops.num
        + chi_at(params, t) * squeeze
        + 0.5 * params.Omega * ops.sigma_z
        + params.g * coupling
    )
    return h.tocsr()


class _LabRhs:
    # H = omega(t) N + chi(t) S + C, applied part by part.
    def __init__(self, params, ops):
        self.params = params
        self.n_diag = ops.num.diagonal()
        self.squeeze = (ops.a @ ops.a + ops.adag @ ops.adag).tocsr()
        self.const = (
            0.5 * params.Omega * ops.sigma_z + params.g * (ops.a + ops.adag) @ (ops.sigma_plus + ops.sigma_minus)
        ).tocsr()

    def __call__(self, t, y):
        w = omega_at(self.params, t)
        c = chi_at(self.params, t)
        return -1j * (w * self.n_diag * y + c * (self.squeeze @ y) + self.const @ y)


class _RotatingRhs:
    # H_rot = eps w0 sin(eta t) N + chi(t)(e^{-2i w0 t} a^2 + h.c.)
    #         + g(e^{-i(w0-W)t} a s+ + e^{-i(w0+W)t} a s- + h.c.)
    def __init__(self, params, ops):
        self.params = params
        self.n_diag = ops.num.diagonal()
        self.a2 = (ops.a @ ops.a).tocsr()
        self.a2_dag = self.a2.T.tocsr()
        self.a_up = (ops.a @ ops.sigma_plus).tocsr()
        self.a_up_dag = self.a_up.T.tocsr()
        self.a_down = (ops.a @ ops.sigma_minus).tocsr()
        self.a_down_dag = self.a_down.T.tocsr()

    def __call__(self, t, y):
        p = self.params
        w0 = p.omega0
        h = (p.epsilon * w0 * math.sin(p.eta * t)) * self.n_diag * y
        c = chi_at(p, t)
        if c != 0.0:
            ph = c * complex(math.cos(2 * w0 * t), -math.sin(2 * w0 * t))
            h = h + ph * (self.a2 @ y) + ph.conjugate() * (self.a2_dag @ y)
        if p.g != 0.0:
            slow = p.g * complex(math.cos((w0 - p.Omega) * t), -math.sin((w0 - p.Omega) * t))
            fast = p.g * complex(math.cos((w0 + p.Omega) * t), -math.sin((w0 + p.Omega) * t))
            h = (
                h
                + slow * (self.a_up @ y)
                + slow.conjugate() * (self.a_up_dag @ y)
                + fast * (self.a_down @ y)
                + fast.conjugate() * (self.a_down_dag @ y)
            )
        return -1j * h


def _free_energies(params, ops):
    # diagonal of omega0 n + (Omega/2) sz
    return params.omega0 * ops.num.diagonal() + 0.5 * params.Omega * ops.sigma_z.diagonal()


def tail_population(amplitudes: np.ndarray, nmax: int):
    """Population in the top 10% of Fock levels, both atomic branches."""
    d = nmax + 1
    width = max(1, math.ceil(0.1 * d))
    amps = np.asarray(amplitudes)
    pops = np.abs(amps) ** 2
    return pops[..., d - width : d].sum(axis=-1) + pops[..., 2 * d - width :].sum(axis=-1)


@dataclass
class ExactTrajectory:
    times: np.ndarray
    states: np.ndarray  # lab-frame amplitudes, shape (len(times), 2(nmax+1))
    nmax: int
    nfev: int = 0
    n_steps: int = 0
    max_tail: float = 0.0
    escalations: list = field(default_factory=list)

    def norm_drift(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.states, axis=1) - 1.0)))

    def state(self, index) -> FockQubitState:
        return FockQubitState(self.states[index], self.nmax)


def _evolve_once(psi0: FockQubitState, params, numerics, grid):
    ops = build_operators(psi0.nmax)
    rotating = numerics.frame == "rotating"
    rhs = _RotatingRhs(params, ops) if rotating else _LabRhs(params, ops)
    threshold = numerics.tail_threshold
    nmax = psi0.nmax
    problem = OdeProblem(rhs, psi0.amplitudes, (0.0, grid[-1]))
    traj = integrate(
        problem,
        rtol=numerics.rtol,
        atol=numerics.atol,
        sample_grid=grid,
        method=numerics.method,
        step=numerics.fixed_step,
        stop_when=lambda t, y: tail_population(y, nmax) > threshold,
    )
    states = traj.states
    if rotating:
        states = states * np.exp(-1j * np.outer(traj.times, _free_energies(params, ops)))
    tails = tail_population(states, nmax)
    if traj.stopped_at is not None or np.any(tails > threshold):
        t_fail = traj.stopped_at if traj.stopped_at is not None else float(traj.times[np.argmax(tails > threshold)])
        tail = float(tail_population(traj.last_y, nmax)) if traj.stopped_at is not None else float(tails.max())
        raise TruncationError(
            f"truncation breach at t={t_fail:.6g}: tail population {tail:.3g} > {threshold:g} "
            f"with nmax={nmax}; increase nmax",
            t=t_fail,
            tail=tail,
            nmax=nmax,
        )
    return ExactTrajectory(traj.times, states, nmax, traj.nfev, traj.n_steps, float(tails.max()) if tails.size else 0.0)


def evolve(
    psi0: FockQubitState,
    params: ModelParams,
    numerics: NumericsConfig,
    sample_grid,
    escalate: bool = True,
) -> ExactTrajectory:
    """Integrate i d/dt psi = H(t) psi from t = 0 and sample on ``sample_grid``.

    On a truncation breach the run restarts with nmax doubled (up to
    ``numerics.max_nmax``) when ``escalate`` is set; otherwise, or past the
    cap, TruncationError is raised.
    """
    grid = np.asarray(sample_grid, dtype=float)
    if abs(psi0.norm() - 1.0) > 1e-10:
        raise ValueError("initial state must be normalized")
    escalations = []
    state = psi0
    while True:
        try:
            result = _evolve_once(state, params, numerics, grid)
        except TruncationError as exc:
            escalations.append({"nmax": exc.nmax, "t": exc.t, "tail": exc.tail})
            if not escalate or 2 * state.nmax > numerics.max_nmax:
                exc.escalations = escalations
                raise
            state = state.embed(2 * state.nmax)
            continue
        result.escalations = escalations
        return result


def _expect(psi, op):
    return np.vdot(psi, op @ psi)


def observables(psi: FockQubitState, ops: OperatorSet) -> ObservableRecord:
    """Field and atom expectation values of one state via operator matrices."""
    amps = psi.amplitudes
    n_mean = _expect(amps, ops.num)
    p_e = _expect(amps, ops.sigma_plus @ ops.sigma_minus)
    for value, name in ((n_mean, "<n>"), (p_e, "P_e")):
        if abs(value.imag) > HERMITIAN_TOL:
            raise ArithmeticError(f"{name} has imaginary part {value.imag:.3g}")
    mean_a = _expect(amps, ops.a)
    mean_a2 = _expect(amps, ops.a @ ops.a)
    var_x = n_mean.real + 0.5 + mean_a2.real - 2 * mean_a.real**2
    var_p = n_mean.real + 0.5 - mean_a2.real - 2 * mean_a.imag**2
    return ObservableRecord(
        t=np.nan,
        n_mean=n_mean.real,
        p_excited=p_e.real,
        x_mean=np.sqrt(2) * mean_a.real,
        p_mean=np.sqrt(2) * mean_a.imag,
        var_x=var_x,
        var_p=var_p,
    )


def observables_series(traj: ExactTrajectory) -> ObservableRecord:
    """Vectorized observables over all samples of a trajectory."""
    d = traj.nmax + 1
    k = np.arange(d, dtype=float)
    n_mean = np.zeros(len(traj.times))
    mean_a = np.zeros(len(traj.times), dtype=complex)
    mean_a2 = np.zeros(len(traj.times), dtype=complex)
    sqrt1 = np.sqrt(k[1:])
    sqrt2 = np.sqrt(k[1:-1] * k[2:])
    for branch in (traj.states[:, :d], traj.states[:, d:]):
        pops = np.abs(branch) ** 2
        n_mean += pops @ k
        mean_a += np.sum(np.conj(branch[:, :-1]) * sqrt1 * branch[:, 1:], axis=1)
        mean_a2 += np.sum(np.conj(branch[:, :-2]) * sqrt2 * branch[:, 2:], axis=1)
    p_e = np.sum(np.abs(traj.states[:, :d]) ** 2, axis=1)
    var_x = n_mean + 0.5 + mean_a2.real - 2 * mean_a.real**2
    var_p = n_mean + 0.5 - mean_a2.real - 2 * mean_a.imag**2
    return ObservableRecord(
        traj.times, n_mean, p_e, np.sqrt(2) * mean_a.real, np.sqrt(2) * mean_a.imag, var_x, var_p
    )


def reduced_field_density(psi: FockQubitState) -> np.ndarray:
    """rho_F = Tr_atom |psi><psi|."""
    e, g = psi.branches()
    return np.outer(e, np.conj(e)) + np.outer(g, np.conj(g))


def _coherent_overlaps(z, d):
    # <k|z> = exp(-|z|^2/2) z^k / sqrt(k!), built by recursion to avoid overflow
    z = np.asarray(z, dtype=complex).ravel()
    out = np.empty((z.size, d), dtype=complex)
    out[:, 0] = np.exp(-np.abs(z) ** 2 / 2)
    for k in range(1, d):
        out[:, k] = out[:, k - 1] * z / math.sqrt(k)
    return out


def husimi_q_numeric(rho_field: np.ndarray, x_axis, y_axis, warn_tol=1e-2) -> QGrid:
    """Q(z) = <z|rho_F|z>/pi on the grid x_axis (x) y_axis."""
    rho = np.asarray(rho_field, dtype=complex)
    d = rho.shape[0]
    weights, vectors = np.linalg.eigh(rho)
    keep = weights > 1e-15 * max(weights.max(), 1e-300)
    weights, vectors = weights[keep], vectors[:, keep]
    x_axis = np.asarray(x_axis, float)
    y_axis = np.asarray(y_axis, float)
    values = np.empty((x_axis.size, y_axis.size))
    for i, x in enumerate(x_axis):
        overlaps = np.conj(_coherent_overlaps(x + 1j * y_axis, d)) @ vectors  # <z|u_j>
        values[i] = (np.abs(overlaps) ** 2) @ weights / np.pi
    grid = QGrid(x_axis, y_axis, values)
    deficit = 1.0 - grid.normalization()
    if deficit > warn_tol:
        warnings.warn(f"grid or truncation too small: Q normalization deficit {deficit:.3g}", RuntimeWarning)
    return grid
