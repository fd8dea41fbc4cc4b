import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isotrack.controller import (
    ControllerParams,
    ControllerState,
    PILikeController,
    dirty_derivative,
    error_term,
    reset,
    update,
)
from isotrack.dubins import RobotState
from isotrack.errors import MissingOracle
from isotrack.field import LinearRadial
from isotrack.simulator import Scenario, run

TABLE1 = dict(kp=10.0, ki=0.0, c1=0.1, c2=1.0)


def test_error_term_examples():
    assert error_term(0.0, 0.0, 0.3, 2.0) == 0.0
    # tanh(1) = (e^2 - 1) / (e^2 + 1)
    e2 = math.exp(2.0)
    assert error_term(1.0, 0.0, 0.2, 1.0) == pytest.approx(0.2 * (e2 - 1) / (e2 + 1), rel=1e-14)
    assert error_term(1.0, 0.0, 0.2, 1.0) == pytest.approx(0.152319, abs=5e-7)
    assert error_term(1e6, 0.0, 0.2, 1.0) == pytest.approx(0.2)
    assert error_term(-1e6, 0.4, 0.2, 1.0) == pytest.approx(0.2)


@settings(max_examples=200)
@given(
    eps=st.floats(-1e6, 1e6),
    deps=st.floats(-1e3, 1e3),
    c1=st.floats(1e-3, 10),
    c2=st.floats(1e-3, 10),
)
def test_error_term_drift_bounded(eps, deps, c1, c2):
    assert abs(error_term(eps, deps, c1, c2) - deps) <= c1 + 1e-12 * (1 + abs(deps))


def test_update_table1_example():
    p = ControllerParams(**TABLE1, derivative_mode="oracle")
    omega, st_ = update(ControllerState(), p, s_meas=11.0, s_d=10.0, dt=0.01, oracle_sdot=0.0)
    assert omega == pytest.approx(10 * 0.1 * math.tanh(1), rel=1e-12)
    assert omega == pytest.approx(0.76159, abs=5e-6)
    assert st_.sigma == pytest.approx(0.1 * math.tanh(1) * 0.01)


def test_zero_error_gives_zero_turn():
    for mode in ("dirty", "oracle"):
        ctrl = PILikeController(ControllerParams(3, 2, 0.5, 0.7, derivative_mode=mode), s_d=4.0)
        for _ in range(100):
            assert ctrl(4.0, 0.05, oracle_sdot=0.0) == 0.0
        assert ctrl.state.sigma == 0.0


def test_missing_oracle():
    p = ControllerParams(**TABLE1, derivative_mode="oracle")
    with pytest.raises(MissingOracle):
        update(ControllerState(), p, 1.0, 0.0, 0.01)


def test_first_dirty_call_primes_filter():
    p = ControllerParams(**TABLE1)
    omega, st_ = update(ControllerState(), p, 12.0, 10.0, 0.01)
    assert st_.deriv_estimate == 0.0 and st_.initialized
    assert st_.prev_epsilon == 2.0
    assert omega == pytest.approx(10 * 0.1 * math.tanh(2))


def test_clamps():
    p = ControllerParams(1.0, 5.0, 1.0, 1.0, derivative_mode="oracle", sigma_limit=0.3, omega_limit=0.5)
    st_ = ControllerState()
    for _ in range(100):
        omega, st_ = update(st_, p, 10.0, 0.0, 0.1, oracle_sdot=0.0)
    assert st_.sigma == pytest.approx(0.3)
    assert omega == pytest.approx(0.5)


def test_reset():
    p = ControllerParams(**TABLE1)
    ctrl = PILikeController(p, s_d=1.0)
    first = ctrl(3.0, 0.1)
    ctrl(2.0, 0.1)
    ctrl.reset()
    assert ctrl.state == ControllerState()
    assert ctrl.state.sigma == 0.0 and not ctrl.state.initialized
    assert ctrl(3.0, 0.1) == first
    assert reset(reset(ControllerState(sigma=3.0))) == reset() == ControllerState()


def test_dirty_derivative_constant_signal_decays():
    est, prev = 1.0, 2.0
    history = []
    for _ in range(50):
        est = dirty_derivative(est, prev, 2.0, 0.01, 0.05)
        history.append(est)
    ratios = np.array(history[1:]) / np.array(history[:-1])
    assert np.allclose(ratios, 0.05 / 0.06)
    assert history[-1] < 1e-3


def test_dirty_derivative_ramp():
    dt, tau = 0.01, 0.05
    est, prev = 0.0, 0.0
    for k in range(1, 51):
        est = dirty_derivative(est, prev, k * dt, dt, tau)
        prev = k * dt
    assert est == pytest.approx(1.0, rel=0.01)


def test_dirty_derivative_tracks_cosine():
    dt, tau = 0.01, 0.05
    est, prev = 0.0, 0.0
    worst = 0.0
    for k in range(1, 2001):
        t = k * dt
        est = dirty_derivative(est, prev, math.sin(t), dt, tau)
        prev = math.sin(t)
        if t >= 0.5:
            worst = max(worst, abs(est - math.cos(t)))
    assert worst < 0.06


def test_sliding_surface_attracts():
    # hold e = 0: eps' = -c1 tanh(eps/c2); RK4 on this 1-D ODE
    c1, c2, dt = 0.2, 1.0, 0.01
    f = lambda z: -c1 * math.tanh(z / c2)  # noqa: E731
    for eps0 in (5 * c2, -5 * c2):
        z, prev = eps0, abs(eps0)
        for _ in range(5000):
            k1 = f(z)
            k2 = f(z + dt / 2 * k1)
            k3 = f(z + dt / 2 * k2)
            k4 = f(z + dt * k3)
            z += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            assert abs(z) < prev
            prev = abs(z)
        assert abs(z) < 0.05 * abs(eps0)


@settings(max_examples=100)
@given(eps=st.floats(-5, 5), deps=st.floats(-1, 1), delta=st.floats(1e-9, 1e-5))
def test_omega_lipschitz_in_epsilon(eps, deps, delta):
    p = ControllerParams(7.0, 0.0, 0.3, 0.8, derivative_mode="oracle")
    w0, _ = update(ControllerState(), p, eps, 0.0, 0.01, oracle_sdot=deps)
    w1, _ = update(ControllerState(), p, eps + delta, 0.0, 0.01, oracle_sdot=deps)
    assert abs(w1 - w0) <= p.kp * p.c1 * delta / p.c2 * (1 + 1e-6) + 1e-15


def test_static_feedback_without_integral():
    p = ControllerParams(4.0, 0.0, 0.3, 0.8, derivative_mode="oracle")
    a = update(ControllerState(sigma=0.0), p, 1.3, 0.0, 0.01, oracle_sdot=-0.2)[0]
    b = update(ControllerState(sigma=17.0, prev_epsilon=3.0), p, 1.3, 0.0, 0.5, oracle_sdot=-0.2)[0]
    assert a == b


def test_sigma_increment_linear_in_e():
    p = ControllerParams(1.0, 1.0, 0.5, 1.0, derivative_mode="oracle")
    s0 = ControllerState(sigma=0.25)
    e1 = error_term(0.0, 0.1, 0.5, 1.0)
    _, a = update(s0, p, 0.0, 0.0, 0.02, oracle_sdot=0.1)
    _, b = update(s0, p, 0.0, 0.0, 0.02, oracle_sdot=0.2)
    assert (b.sigma - 0.25) == pytest.approx(2 * (a.sigma - 0.25), rel=1e-12)
    assert a.sigma - 0.25 == pytest.approx(e1 * 0.02)


def test_params_validation():
    for bad in (dict(kp=0), dict(ki=-1), dict(c1=0), dict(c2=-1)):
        kw = {**TABLE1, **bad}
        with pytest.raises(ValueError):
            ControllerParams(**kw).validate()
    with pytest.raises(ValueError):
        ControllerParams(**TABLE1, derivative_mode="magic").validate()
    with pytest.raises(ValueError):
        ControllerParams(**TABLE1, tau_f=0).validate()


def test_integral_converges_to_orbit_turn_rate():
    # linear-radial field, robot starts on the isoline heading clockwise
    r_d, v = 8.0, 0.5
    f = LinearRadial(s_d=5.0, alpha=0.6, r_d=r_d)
    sc = Scenario(
        f,
        5.0,
        RobotState(0.0, r_d + 1.0, 0.0),
        v,
        ControllerParams(6.0, 0.5, 0.1, 1.0, derivative_mode="oracle"),
        sim_dt=0.02,
        duration=600.0,
    )
    traj = run(sc)
    assert traj.completed
    assert 0.5 * traj.sigma[-1] == pytest.approx(-v / r_d, rel=0.01)
    assert traj.omega[-1] == pytest.approx(-v / r_d, rel=0.01)
    assert abs(traj.e[-1]) < 1e-3
