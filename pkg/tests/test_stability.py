import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isotrack.errors import (
    BoundUndefined,
    InfeasibleMargin,
    NotSymmetric,
    PreconditionViolated,
)
from isotrack.stability import (
    CircularLoopParams,
    check_gain_conditions,
    format_report,
    certificate_report,
    is_hurwitz,
    is_positive_definite,
    jacobian,
    lemma1_bound,
    lyapunov_certificate,
    lyapunov_matrices,
    prop2_analysis,
    prop2_error_bound,
    prop2_threshold,
    simulate_lemma1,
)

TABLE2 = CircularLoopParams(kp=10, ki=1, c1=0.2, c2=1, alpha=0.5, v=0.5, r_d=10 * math.log(2))


def closed_loop_rhs(x, p):
    """Polar closed loop in (d, phi, sigma) for F = s_d - alpha (d - r_d),
    with the exact concentration rate fed to the controller."""
    d, phi, sigma = x
    ddot = p.v * math.cos(phi)
    e = -p.alpha * ddot + p.c1 * math.tanh(-p.alpha * (d - p.r_d) / p.c2)
    omega = p.kp * e + p.ki * sigma
    return np.array([ddot, omega - p.v * math.sin(phi) / d, e])


def numeric_jacobian(p, h=1e-6):
    x0 = np.array([p.r_d, -math.pi / 2, -p.v / (p.ki * p.r_d)])
    J = np.empty((3, 3))
    for j in range(3):
        dx = np.zeros(3)
        dx[j] = h
        J[:, j] = (closed_loop_rhs(x0 + dx, p) - closed_loop_rhs(x0 - dx, p)) / (2 * h)
    return J


def random_params(rng, c2=None):
    kp = rng.uniform(3, 20)
    alpha = rng.uniform(0.2, 1)
    v = rng.uniform(0.3, 1)
    r_d = rng.uniform(3, 15)
    ki = rng.uniform(0.01, 0.99) * kp * (kp - 2) * v * alpha
    c1 = rng.uniform(0.01, 0.99) * v * alpha
    c2 = rng.uniform(0.2, 5) if c2 is None else c2
    return CircularLoopParams(kp, ki, c1, c2, alpha, v, r_d)


def test_gain_condition_examples():
    p = CircularLoopParams(kp=10, ki=1, c1=0.2, c2=1, alpha=0.5, v=0.5, r_d=5)
    v = check_gain_conditions(p)
    assert v.integral_condition and v.rate_condition and v.passed
    v = check_gain_conditions(CircularLoopParams(10, 1, 0.3, 1, 0.5, 0.5, 5))
    assert v.integral_condition and not v.rate_condition and not v.passed
    v = check_gain_conditions(CircularLoopParams(1, 0, 0.2, 1, 0.5, 0.5, 5))
    assert not v.integral_condition and not v.kp_above_two


def test_jacobian_matches_numeric_linearisation():
    rng = np.random.default_rng(11)
    for p in [TABLE2] + [random_params(rng) for _ in range(50)]:
        assert np.allclose(jacobian(p), numeric_jacobian(p), rtol=1e-6, atol=1e-7)


def test_jacobian_structure():
    A = jacobian(TABLE2)
    assert list(A[0]) == [0, 0.5, 0]
    A0 = jacobian(CircularLoopParams(10, 0, 0.2, 1, 0.5, 0.5, 7))
    assert np.all(A0[:, 2] == 0)
    assert np.linalg.det(A0) == 0.0
    assert np.abs(np.linalg.eigvals(A0)).min() < 1e-12
    assert is_hurwitz(A)


def test_table2_certificate():
    cert = lyapunov_certificate(TABLE2)
    assert cert.status == "pass" and cert.positive
    assert np.array_equal(cert.P, cert.P.T) and np.array_equal(cert.Q, cert.Q.T)
    assert cert.residual < 1e-12
    assert cert.decay_rate == pytest.approx(cert.eig_Q.min() / cert.eig_P.max())


def test_lyapunov_identity_random():
    rng = np.random.default_rng(5)
    for _ in range(100):
        cert = lyapunov_certificate(random_params(rng))
        R = cert.A.T @ cert.P + cert.P @ cert.A + cert.Q
        assert np.abs(R).max() <= 1e-8 * np.abs(cert.Q).max()


def test_quadratic_form_matches_sum_of_squares():
    rng = np.random.default_rng(2)
    for _ in range(20):
        p = random_params(rng)
        mu1, mu2, mu3, mu4, P, _ = lyapunov_matrices(p)
        z = rng.normal(size=3)
        row2 = mu1 * z[0] + p.kp * p.alpha * p.v * z[1] - p.ki * z[2]
        V = mu2 * z[0] ** 2 + mu3 * z[1] ** 2 + mu4 * z[2] ** 2 + 0.5 * row2**2
        assert z @ P @ z == pytest.approx(V, rel=1e-10)


def test_q_offdiagonal_sign_is_forced_by_identity():
    # flipping the sign of the leading ki (kp alpha v)^2 term in Q[1, 2]
    # breaks A'P + PA = -Q by exactly 2 ki (kp alpha v)^2
    cert = lyapunov_certificate(TABLE2)
    kav = TABLE2.kp * TABLE2.alpha * TABLE2.v
    Qflip = cert.Q.copy()
    Qflip[1, 2] += 2 * TABLE2.ki * kav**2
    Qflip[2, 1] = Qflip[1, 2]
    R = cert.A.T @ cert.P + cert.P @ cert.A + Qflip
    assert R[1, 2] == pytest.approx(2 * TABLE2.ki * kav**2)


def test_p_positive_and_a_hurwitz_random():
    rng = np.random.default_rng(9)
    for _ in range(100):
        p = random_params(rng)
        assert check_gain_conditions(p).passed
        cert = lyapunov_certificate(p)
        assert cert.eig_P.min() > 0
        assert is_hurwitz(cert.A)


def test_q_can_be_indefinite_for_small_c1():
    # gain conditions hold and A is Hurwitz, yet the quadratic certificate fails
    p = CircularLoopParams(kp=9.0, ki=9.0, c1=1e-3, c2=1.0, alpha=0.5, v=0.7, r_d=4.0)
    assert check_gain_conditions(p).passed
    cert = lyapunov_certificate(p)
    assert is_hurwitz(cert.A)
    assert cert.eig_P.min() > 0
    assert cert.eig_Q.min() < 0
    assert cert.status == "fail"
    assert cert.residual < 1e-12


def test_certificate_rejects_zero_ki():
    with pytest.raises(PreconditionViolated):
        lyapunov_certificate(CircularLoopParams(10, 0, 0.2, 1, 0.5, 0.5, 7))


def test_prop2_threshold_example():
    thr = prop2_threshold(1, 2, 0.1, 0.1, 1, 0.5, math.pi / 3)
    s = math.sin(math.pi / 3)
    first = 0.05 / (s * (0.25 - 0.1))
    second = (0.05 + 0.2) / (0.1 * s)
    assert first == pytest.approx(0.3849, abs=1e-4)
    assert thr == pytest.approx(second) and thr == pytest.approx(2.8868, abs=1e-4)


def test_prop2_threshold_infeasible():
    with pytest.raises(InfeasibleMargin):
        prop2_threshold(1, 2, 0.1, 0.5, 1, 0.5, math.pi / 3)
    with pytest.raises(InfeasibleMargin):
        prop2_threshold(1, 2, 0.1, 0.5, 1, 0.5, 0.01)


def test_prop2_threshold_limit():
    eps = 0.7
    thr = prop2_threshold(1.5, 3.0, 1e-12, 0.1, 1, 0.5, eps)
    assert thr == pytest.approx(3.0 / (1.5 * math.sin(eps)), rel=1e-9)


def test_prop2_error_bound_examples():
    b = prop2_error_bound(10, 0.1, 1, 1, 2, 0.1, 0.5, math.pi / 3)
    assert b == pytest.approx(math.atanh(0.25 / math.sin(math.pi / 3)))
    assert b == pytest.approx(0.297120, abs=5e-7)
    b2 = prop2_error_bound(20, 0.1, 1, 1, 2, 0.1, 0.5, math.pi / 3)
    assert b2 == pytest.approx(0.14536, abs=5e-5)
    assert b2 <= b / 2
    assert prop2_error_bound(1e9, 0.1, 1, 1, 2, 0.1, 0.5, math.pi / 3) < 1e-8
    with pytest.raises(BoundUndefined):
        prop2_error_bound(1, 0.1, 1, 1, 2, 0.1, 0.5, math.pi / 3)


def test_prop2_error_bound_scales_with_c2():
    b1 = prop2_error_bound(30, 0.1, 1.0, 1, 2, 0.1, 0.5, 1.0)
    b2 = prop2_error_bound(30, 0.1, 2.0, 1, 2, 0.05, 0.5, 1.0)  # same ratio
    assert b2 == pytest.approx(2 * b1)


def test_prop2_monotonicity_sweeps():
    base = dict(kp=10, c1=0.1, c2=1, gamma1=1, gamma2=2, gamma3=0.1, v=0.5, epsilon_angle=1.0)
    for key, grid, sign in [
        ("kp", np.linspace(5, 100, 40), -1),
        ("gamma3", np.linspace(0.0, 0.2, 40), 1),
        ("gamma2", np.linspace(1.0, 3.0, 40), 1),
    ]:
        vals = [prop2_error_bound(**{**base, key: x}) for x in grid]
        assert np.all(sign * np.diff(vals) > 0), key


def test_prop2_analysis_rho():
    res = prop2_analysis(10, 0.1, 1, 1, 2, 0.1, 0.5, math.pi / 3)
    assert res.rho * 10 * math.sin(math.pi / 3) == pytest.approx(0.1 * 0.5 + 0.1 * 2 / 1)
    assert math.tanh(res.error_bound) == pytest.approx(res.rho / 0.1)


def test_lemma1_bound():
    assert lemma1_bound(1, 0.5) == pytest.approx(0.54931, abs=5e-6)
    assert lemma1_bound(3, 0) == 0
    with pytest.raises(BoundUndefined):
        lemma1_bound(1, 1)
    with pytest.raises(PreconditionViolated):
        lemma1_bound(0.5, 1)


def test_simulate_lemma1_examples():
    z_star = math.atanh(0.5)
    t, z = simulate_lemma1(1, 0.5, 2.0, 30)
    assert t[-1] == pytest.approx(30)
    assert abs(z[-1] - z_star) < 1e-3
    assert np.all(np.diff(z) <= 0)  # approaches from above
    _, z = simulate_lemma1(1, 0.5, z_star, 10)
    assert np.abs(z - z_star).max() < 1e-12
    _, z = simulate_lemma1(1, 0.5, -2.0, 30)
    assert np.all(np.diff(z) > 0)
    assert abs(z[-1] - z_star) < 1e-3
    with pytest.raises(PreconditionViolated):
        simulate_lemma1(1, 0.5, 0, 1, dt=0.1)


@settings(max_examples=10, deadline=None)
@given(k=st.floats(0.5, 5), frac=st.floats(0.01, 0.9), z0=st.floats(-3, 3))
def test_lemma1_tail_property(k, frac, z0):
    b = frac * k
    _, z = simulate_lemma1(k, b, z0, 200)
    tail = np.abs(z[-len(z) // 10 :])
    assert tail.max() <= lemma1_bound(k, b) + 1e-3


def test_pd_and_hurwitz_helpers():
    assert is_positive_definite(np.eye(3))
    assert not is_positive_definite(np.diag([1.0, -1.0]))
    assert is_hurwitz([[0, 1], [-1, -1]])
    assert not is_hurwitz([[0, 1], [-1, 0]])
    with pytest.raises(NotSymmetric):
        is_positive_definite([[1, 2], [0, 1]])


def test_report_format():
    text = format_report(certificate_report(TABLE2))
    keys = [line.split(" = ")[0] for line in text.splitlines()]
    assert keys[:3] == ["gain.integral_condition", "gain.rate_condition", "gain.kp_above_two"]
    A_line = next(l for l in text.splitlines() if l.startswith("A = "))
    assert len(A_line.split(" = ")[1].split()) == 9
    assert "certificate = pass" in text
