"""Stability certificates for the PI-like isoline controller.

Circular fields (linearised as ``F = s_d - alpha (d - r_d)``) get a local
Lyapunov certificate: Jacobian ``A`` of the closed loop in error
coordinates ``z = [d - r_d, phi + pi/2, sigma + v/(ki r_d)]``, quadratic
form ``P`` and decay matrix ``Q`` with ``A'P + PA = -Q``.

General smooth fields get the ultimate bound on ``|s - s_d|`` for
``ki = 0``, driven by the gradient/Hessian bounds ``gamma1..gamma3``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BoundUndefined,
    InfeasibleMargin,
    NotSymmetric,
    PreconditionViolated,
)
from .field import fmt

EIG_TOL = 1e-10


@dataclass(frozen=True)
class CircularLoopParams:
    kp: float
    ki: float
    c1: float
    c2: float
    alpha: float
    v: float
    r_d: float
    alpha_lower: float | None = None

    def __post_init__(self):
        if self.alpha_lower is None:
            object.__setattr__(self, "alpha_lower", self.alpha)
        for name in ("kp", "c1", "c2", "alpha", "v", "r_d", "alpha_lower"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.ki < 0:
            raise ValueError("ki must be >= 0")
        if self.alpha < self.alpha_lower:
            raise ValueError("alpha must be >= alpha_lower")


@dataclass(frozen=True)
class GainVerdict:
    integral_condition: bool  # kp (kp - 2) v alpha_lower > ki
    rate_condition: bool  # v alpha_lower > c1 > 0
    kp_above_two: bool

    @property
    def passed(self) -> bool:
        return self.integral_condition and self.rate_condition


def check_gain_conditions(p: CircularLoopParams) -> GainVerdict:
    va = p.v * p.alpha_lower
    return GainVerdict(
        integral_condition=p.kp * (p.kp - 2) * va > p.ki,
        rate_condition=va > p.c1 > 0,
        kp_above_two=p.kp > 2,
    )


def jacobian(p: CircularLoopParams) -> np.ndarray:
    """Linearisation of the polar closed loop about the circular orbit."""
    kp, ki, c1, c2, a, v, rd = p.kp, p.ki, p.c1, p.c2, p.alpha, p.v, p.r_d
    return np.array(
        [
            [0.0, v, 0.0],
            [-kp * c1 * a / c2 - v / rd**2, -kp * v * a, ki],
            [-c1 * a / c2, -v * a, 0.0],
        ]
    )


@dataclass(frozen=True)
class LyapunovCertificate:
    mu1: float
    mu2: float
    mu3: float
    mu4: float
    A: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    eig_A: np.ndarray
    eig_P: np.ndarray
    eig_Q: np.ndarray

    @property
    def decay_rate(self) -> float:
        return float(self.eig_Q.min() / self.eig_P.max())

    @property
    def residual(self) -> float:
        """Relative Frobenius residual of ``A'P + PA + Q``."""
        R = self.A.T @ self.P + self.P @ self.A + self.Q
        return float(np.linalg.norm(R) / np.linalg.norm(self.Q))

    @property
    def positive(self) -> bool:
        return bool(self.eig_P.min() > EIG_TOL and self.eig_Q.min() > EIG_TOL)

    @property
    def status(self) -> str:
        lo = min(self.eig_P.min(), self.eig_Q.min())
        if lo > EIG_TOL:
            return "pass"
        if lo >= -EIG_TOL:
            return "marginal"
        return "fail"


def lyapunov_matrices(p: CircularLoopParams):
    """Return ``(mu1, mu2, mu3, mu4, P, Q)``."""
    kp, ki, c1, c2, a, v, rd = p.kp, p.ki, p.c1, p.c2, p.alpha, p.v, p.r_d
    mu1 = kp * c1 * a / c2 + v / rd**2
    mu2 = kp * a * (kp * a * v * mu1 - ki * c1 * a / (2 * c2))
    mu3 = mu1 * v / 2 + ki * a * v / 2
    mu4 = kp * ki * c2 * v * mu1 / c1 - ki**2 / 2
    kav = kp * a * v
    P = 0.5 * np.array(
        [
            [2 * mu2 + mu1**2, kav * mu1, -ki * mu1],
            [kav * mu1, 2 * mu3 + kav**2, -kp * ki * a * v],
            [-ki * mu1, -kp * ki * a * v, 2 * mu4 + ki**2],
        ]
    )
    # Leading term carries a minus sign; with it A'P + PA = -Q holds exactly.
    q23 = -ki * kav**2 - ki**2 * a * v / 2 + kp * ki * c2 * (a * v) ** 2 * mu1 / (c1 * a)
    Q = np.array(
        [
            [kav * mu1**2 - ki * c1 * a * mu1 / c2, 0.0, 0.0],
            [0.0, kav**3, q23],
            [0.0, q23, kp * ki**2 * a * v],
        ]
    )
    return mu1, mu2, mu3, mu4, P, Q


def lyapunov_certificate(p: CircularLoopParams) -> LyapunovCertificate:
    if not p.ki > 0:
        raise PreconditionViolated("Lyapunov certificate needs ki > 0 (Q is singular at ki = 0)")
    mu1, mu2, mu3, mu4, P, Q = lyapunov_matrices(p)
    A = jacobian(p)
    return LyapunovCertificate(
        mu1,
        mu2,
        mu3,
        mu4,
        A,
        P,
        Q,
        np.linalg.eigvals(A),
        np.linalg.eigvalsh(P),
        np.linalg.eigvalsh(Q),
    )


def is_positive_definite(M, tol: float = EIG_TOL) -> bool:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NotSymmetric("matrix must be square")
    scale = max(1.0, float(np.abs(M).max()))
    if np.abs(M - M.T).max() > 1e-9 * scale:
        raise NotSymmetric("matrix is not symmetric")
    return bool(np.linalg.eigvalsh(0.5 * (M + M.T)).min() > tol)


def is_hurwitz(A, tol: float = EIG_TOL) -> bool:
    return bool(np.linalg.eigvals(np.asarray(A, dtype=float)).real.max() < -tol)


# --------------------------------------------------------------------------
# smooth fields, ki = 0


def _check_margin(gamma1, v, c1, epsilon_angle):
    if not 0 < epsilon_angle < math.pi / 2:
        raise PreconditionViolated("epsilon_angle must lie in (0, pi/2)")
    if not gamma1 > 0:
        raise PreconditionViolated("gamma1 must be positive")
    if v * gamma1 * math.cos(epsilon_angle) <= c1:
        raise InfeasibleMargin(
            f"v*gamma1*cos(eps) = {v * gamma1 * math.cos(epsilon_angle):.6g} <= c1 = {c1:g}"
        )


def prop2_threshold(gamma1, gamma2, gamma3, c1, c2, v, epsilon_angle) -> float:
    """Smallest proportional gain for which the ki = 0 error bound holds."""
    _check_margin(gamma1, v, c1, epsilon_angle)
    se, ce = math.sin(epsilon_angle), math.cos(epsilon_angle)
    heading_branch = gamma3 * v / (gamma1 * se * (v * gamma1 * ce - c1))
    error_branch = (c2 * gamma3 * v + c1 * gamma2) / (c1 * gamma1 * se)
    return max(heading_branch, error_branch)


def _prop2_ratio(kp, c1, c2, gamma1, gamma2, gamma3, v, epsilon_angle):
    return (c2 * gamma3 * v + c1 * gamma2) / (kp * c1 * gamma1 * math.sin(epsilon_angle))


def prop2_error_bound(kp, c1, c2, gamma1, gamma2, gamma3, v, epsilon_angle) -> float:
    """Ultimate bound on ``|s - s_d|``: ``c2 * atanh(ratio)``.

    ``ratio`` is the ultimate bound on ``|e|`` divided by ``c1``; the ``c2``
    factor converts the bound on ``|eps|/c2`` back to concentration units.
    """
    arg = _prop2_ratio(kp, c1, c2, gamma1, gamma2, gamma3, v, epsilon_angle)
    if arg >= 1:
        raise BoundUndefined(f"atanh argument {arg:.6g} >= 1; increase kp")
    return c2 * math.atanh(arg)


@dataclass(frozen=True)
class Prop2Bound:
    epsilon_angle: float
    kp_threshold: float
    rho: float
    error_bound: float


def prop2_analysis(kp, c1, c2, gamma1, gamma2, gamma3, v, epsilon_angle=math.pi / 3) -> Prop2Bound:
    thr = prop2_threshold(gamma1, gamma2, gamma3, c1, c2, v, epsilon_angle)
    rho = (gamma3 * v + c1 * gamma2 / c2) / (kp * gamma1 * math.sin(epsilon_angle))
    bound = prop2_error_bound(kp, c1, c2, gamma1, gamma2, gamma3, v, epsilon_angle)
    return Prop2Bound(epsilon_angle, thr, rho, bound)


# --------------------------------------------------------------------------
# scalar comparison system z' = -k tanh z + b


def lemma1_bound(k: float, b: float) -> float:
    if b == k:
        raise BoundUndefined("b == k: bound is infinite")
    if not (k > b >= 0):
        raise PreconditionViolated(f"need k > b >= 0, got k={k}, b={b}")
    return math.atanh(b / k)


def simulate_lemma1(k, b, z0, T, dt=None):
    """RK4 integration of ``z' = -k tanh(z) + b``; returns ``(t, z)`` arrays."""
    lemma1_bound(k, b)
    if dt is None:
        dt = 0.01 / k
    if not 0 < dt <= 0.01 / k * (1 + 1e-12):
        raise PreconditionViolated(f"dt must be in (0, 0.01/k], got {dt}")
    n = int(math.ceil(T / dt - 1e-9))
    dt = T / n
    f = lambda z: -k * math.tanh(z) + b  # noqa: E731
    z = np.empty(n + 1)
    z[0] = zc = float(z0)
    for i in range(n):
        k1 = f(zc)
        k2 = f(zc + 0.5 * dt * k1)
        k3 = f(zc + 0.5 * dt * k2)
        k4 = f(zc + dt * k3)
        zc = zc + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        z[i + 1] = zc
    return np.linspace(0.0, T, n + 1), z


# --------------------------------------------------------------------------
# reporting


def _mat(M) -> str:
    return " ".join(fmt(x) for x in np.asarray(M).ravel())


def _eigs(w) -> str:
    w = np.asarray(w)
    if np.iscomplexobj(w):
        return " ".join(f"{fmt(z.real)}{'+' if z.imag >= 0 else '-'}{fmt(abs(z.imag))}j" for z in w)
    return " ".join(fmt(x) for x in w)


def format_report(items: dict) -> str:
    """Flat ``key = value`` text; arrays are written row-major."""
    lines = []
    for key, val in items.items():
        if isinstance(val, bool):
            text = "true" if val else "false"
        elif isinstance(val, np.ndarray):
            text = _eigs(val) if np.iscomplexobj(val) else _mat(val)
        elif isinstance(val, float):
            text = fmt(val)
        else:
            text = str(val)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def certificate_report(p: CircularLoopParams) -> dict:
    verdict = check_gain_conditions(p)
    out = {
        "gain.integral_condition": verdict.integral_condition,
        "gain.rate_condition": verdict.rate_condition,
        "gain.kp_above_two": verdict.kp_above_two,
    }
    A = jacobian(p)
    out["A"] = A
    out["A.eigenvalues"] = np.linalg.eigvals(A).astype(complex)
    out["A.hurwitz"] = is_hurwitz(A)
    if p.ki > 0:
        cert = lyapunov_certificate(p)
        out.update(
            {
                "P": cert.P,
                "Q": cert.Q,
                "P.lambda_min": float(cert.eig_P.min()),
                "Q.lambda_min": float(cert.eig_Q.min()),
                "decay_rate": cert.decay_rate,
                "lyapunov_residual": cert.residual,
                "certificate": cert.status,
            }
        )
    return out
