import functools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcecav import DISPERSIVE, RESONANT, InitialLadderState, NumericsConfig, ladder_amplitudes, solve_gammas, solve_joint, ui_matrix
from dcecav.ladder import BetaState, beta_rhs, unitarity_residual
from dcecav.su11 import BogoliubovCoeffs
from oracles import rwa_ladder

JC = RESONANT.replace(epsilon=0.0)


def test_beta_rhs_at_origin():
    d = beta_rhs(0.0, BetaState(), BogoliubovCoeffs(1, 0, 0, 1), RESONANT)
    assert (d.beta_z, d.beta_plus, d.beta_minus) == pytest.approx((0, -0.02j, -0.02j), abs=1e-16)


def test_beta_rhs_vanishes_without_coupling():
    d = beta_rhs(1.3, BetaState(0.2 + 0.1j, 0.3j, -0.4), BogoliubovCoeffs(1.1, 0.2, 0.2, 1.1), RESONANT.replace(g=0.0))
    assert (d.beta_z, d.beta_plus, d.beta_minus) == (0, 0, 0)


def test_ui_matrix_examples():
    assert np.array_equal(ui_matrix(BetaState()), np.eye(2))
    phi = 0.7
    u = ui_matrix(BetaState(1j * phi, 0, 0))
    assert u == pytest.approx(np.diag([np.exp(1j * phi), np.exp(-1j * phi)]))


def test_amplitudes_examples():
    a = ladder_amplitudes(BetaState(), InitialLadderState(1.0, 0.0))
    assert (a.c_en, a.c_gn1) == (1, 0)
    a = ladder_amplitudes(BetaState(), InitialLadderState(0.0, 1.0))
    assert (a.c_en, a.c_gn1) == (0, 1)


def test_jc_limit_rabi(numerics):
    t = np.linspace(0, 200, 2001)
    traj = solve_joint(JC, 1, numerics, t)
    pe = np.abs(ladder_amplitudes(traj.beta, InitialLadderState()).c_en) ** 2
    assert np.max(np.abs(pe - np.cos(JC.g * t) ** 2)) < 1e-6
    assert len(traj.recharts) > 0


def test_jc_limit_higher_ladder(numerics):
    t = np.linspace(0, 100, 501)
    traj = solve_joint(JC, 4, numerics, t)
    pe = np.abs(ladder_amplitudes(traj.beta, InitialLadderState(n=3)).c_en) ** 2
    assert np.max(np.abs(pe - np.cos(2 * JC.g * t) ** 2)) < 1e-6


def test_without_rechart_chart_breaks(numerics):
    from dcecav.ode import IntegrationError

    with pytest.raises(IntegrationError):
        solve_joint(JC, 1, numerics, np.linspace(0, 100, 11), rechart=False)


def test_g_zero_bit_identical(numerics):
    t = np.linspace(0, 50, 101)
    joint = solve_joint(RESONANT.replace(g=0.0), 1, numerics, t)
    alone = solve_gammas(RESONANT.replace(g=0.0), numerics, t)
    assert np.array_equal(joint.gamma.as_array(), alone.gamma.as_array())
    assert not np.any(joint.beta.beta_z) and not np.any(joint.beta.beta_plus) and not np.any(joint.beta.beta_minus)


@pytest.mark.parametrize("params", [DISPERSIVE, RESONANT], ids=["dispersive", "resonant"])
def test_unitarity_along_trajectory(params, numerics):
    t = numerics.sample_grid()
    traj = solve_joint(params, 1, numerics, t)
    assert np.max(unitarity_residual(ui_matrix(traj.beta))) < 1e-7
    for init in (InitialLadderState(), InitialLadderState(0.6, 0.8j)):
        assert np.max(ladder_amplitudes(traj.beta, init).norm_residual()) < 1e-7


def test_matches_rwa_oracle(numerics):
    t = np.linspace(0, 200, 401)
    traj = solve_joint(RESONANT, 1, numerics, t)
    amps = ladder_amplitudes(traj.beta, InitialLadderState())
    ce, cg, *_ = rwa_ladder(RESONANT, t)
    assert np.max(np.abs(np.abs(amps.c_en) ** 2 - np.abs(ce) ** 2)) < 1e-7
    assert np.max(np.abs(np.abs(amps.c_gn1) ** 2 - np.abs(cg) ** 2)) < 1e-7


def test_weak_coupling_continuity(numerics):
    t = np.linspace(0, 50, 51)
    init = InitialLadderState(0.6, 0.8)
    amps = ladder_amplitudes(solve_joint(RESONANT.replace(g=1e-6), 1, numerics, t).beta, init)
    assert np.max(np.abs(np.abs(amps.c_en) - 0.6)) < 1e-4
    assert np.max(np.abs(np.abs(amps.c_gn1) - 0.8)) < 1e-4


def test_invalid_ladder(numerics):
    with pytest.raises(ValueError):
        solve_joint(RESONANT, 0, numerics, [0.0, 1.0])


@functools.lru_cache(maxsize=None)
def _resonant_trajectory():
    return solve_joint(RESONANT, 1, NumericsConfig(), np.linspace(0, 200, 201))


@settings(max_examples=30, deadline=None)
@given(phase=st.floats(0, 2 * math.pi), theta=st.floats(0, math.pi / 2))
def test_norm_for_any_initial_state(phase, theta):
    init = InitialLadderState(math.cos(theta), math.sin(theta) * np.exp(1j * phase))
    assert np.max(ladder_amplitudes(_resonant_trajectory().beta, init).norm_residual()) < 1e-7
