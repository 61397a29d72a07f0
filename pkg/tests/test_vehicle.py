import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lpvmpc.vehicle import (DegenerateSpeed, VehicleParams, dynamics_continuous, jacobians_euler,
                            step_euler, tire_response)

from strategies import inputs, sample_box, states

P = VehicleParams()
TS = 0.05

# hand evaluation with exact fractions: 2/1919*(-34900) and 2/2937*(1.04*-15600 + 1.4*19300)
NU_DOT = -36.37311099531006
OMEGA_DOT = 7.351719441607082


def test_default_parameters():
    assert (P.c_alpha_f, P.c_alpha_r, P.l_f, P.l_r, P.i_z, P.mass) == (156_000, 193_000, 1.04, 1.4, 2937, 1919)


def test_derived_coefficients_follow_base_fields():
    q = VehicleParams(mass=1000.0)
    assert q.beta_f == 2 * 156_000 / 1000.0
    assert q.beta_r == 2 * 193_000 / 1000.0
    assert q.gamma_f == 2 * 1.04 * 156_000 / 2937
    assert q.gamma_r == 2 * 1.4 * 193_000 / 2937


@pytest.mark.parametrize("field", ["c_alpha_f", "mass", "i_z", "l_r"])
def test_params_must_be_positive(field):
    with pytest.raises(ValueError):
        VehicleParams(**{field: 0.0})


def test_tire_steer_only():
    t = tire_response((0, 0, 10, 0, 0, 0), (0.1, 0), P)
    assert t.alpha_f == pytest.approx(0.1)
    assert t.f_yf == pytest.approx(15_600)


def test_tire_straight_is_force_free():
    t = tire_response((0, 0, 10, 0, 0, 0), (0, 0), P)
    assert (t.alpha_f, t.alpha_r, t.f_yf, t.f_yr) == (0, 0, 0, 0)


def test_tire_lateral_velocity():
    t = tire_response((0, 0, 10, 1, 0, 0), (0, 0), P)
    assert t.alpha_f == pytest.approx(-0.1)
    assert t.alpha_r == pytest.approx(-0.1)
    assert t.f_yf == pytest.approx(-15_600)
    assert t.f_yr == pytest.approx(-19_300)


def test_speed_guard():
    with pytest.raises(DegenerateSpeed):
        tire_response((0, 0, 0.5, 0, 0, 0), (0, 0), P)
    with pytest.raises(DegenerateSpeed):
        step_euler((0, 0, 0.0, 0, 0, 0), (0, 0), P, TS)


def test_coasting_derivative():
    np.testing.assert_array_equal(dynamics_continuous((0, 0, 10, 0, 0, 0), (0, 0), P), [10, 0, 0, 0, 0, 0])


def test_lateral_velocity_derivative():
    d = dynamics_continuous((0, 0, 10, 1, 0, 0), (0, 0), P)
    np.testing.assert_allclose(d, [10, 1, 0, NU_DOT, 0, OMEGA_DOT], rtol=1e-12)


def test_heading_rotates_velocity():
    d = dynamics_continuous((0, 0, 10, 0, math.pi / 2, 0), (0, 1), P)
    np.testing.assert_allclose(d, [0, 10, 1, 0, 0, 0], atol=1e-12)


def test_euler_examples():
    np.testing.assert_allclose(step_euler((0, 0, 10, 0, 0, 0), (0, 0), P, TS), [0.5, 0, 10, 0, 0, 0])
    np.testing.assert_allclose(step_euler((0, 0, 10, 0, 0, 0), (0, 2), P, TS), [0.5, 0, 10.1, 0, 0, 0])
    np.testing.assert_allclose(step_euler((0, 0, 10, 1, 0, 0), (0, 0), P, TS),
                               [0.5, 0.05, 10, 1 + TS * NU_DOT, 0, TS * OMEGA_DOT], rtol=1e-12)
    assert 1 + TS * NU_DOT == pytest.approx(-0.8186555, abs=1e-7)
    assert TS * OMEGA_DOT == pytest.approx(0.3675862, abs=1e-6)


@given(states, inputs)
def test_euler_is_one_derivative_step(z, u):
    z = np.array(z)
    np.testing.assert_allclose(step_euler(z, u, P, TS) - z, TS * dynamics_continuous(z, u, P),
                               rtol=1e-12, atol=1e-9)


@given(st.floats(1, 50), st.floats(-math.pi, math.pi), st.integers(1, 50))
def test_straight_motion_stays_straight(v, yaw, steps):
    z = np.array([0, 0, v, 0, yaw, 0])
    for _ in range(steps):
        z = step_euler(z, (0, 0), P, TS)
    assert z[3] == 0 and z[5] == 0 and z[4] == yaw


@given(states, inputs, inputs, st.floats(0, 1))
def test_slip_angles_are_affine_in_steer(z, u1, u2, w):
    mix = w * np.array(u1) + (1 - w) * np.array(u2)
    t1, t2, tm = (tire_response(z, u, P) for u in (u1, u2, mix))
    assert tm.alpha_f == pytest.approx(w * t1.alpha_f + (1 - w) * t2.alpha_f, abs=1e-9)
    assert tm.alpha_r == pytest.approx(w * t1.alpha_r + (1 - w) * t2.alpha_r, abs=1e-9)


def central_difference(z, u, h=1e-6):
    jz = np.zeros((6, 6))
    ju = np.zeros((6, 2))
    for j in range(6):
        e = np.zeros(6)
        e[j] = h
        jz[:, j] = (step_euler(z + e, u, P, TS) - step_euler(z - e, u, P, TS)) / (2 * h)
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        ju[:, j] = (step_euler(z, u + e, P, TS) - step_euler(z, u - e, P, TS)) / (2 * h)
    return jz, ju


def test_jacobians_match_finite_differences(rng):
    zs, us = sample_box(rng, 200)
    for z, u in zip(zs, us):
        jz, ju = jacobians_euler(z, u, P, TS)
        fz, fu = central_difference(z, u)
        np.testing.assert_allclose(jz, fz, atol=1e-5)
        np.testing.assert_allclose(ju, fu, atol=1e-5)


def test_jacobian_euler_structure():
    jz, ju = jacobians_euler(np.array([0, 0, 10.0, 0, 0, 0]), np.zeros(2), P, TS)
    assert jz[0, 0] == 1 and jz[0, 2] == pytest.approx(TS)
    np.testing.assert_allclose(ju[:, 1], [0, 0, TS, 0, 0, 0])
