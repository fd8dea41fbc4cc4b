"""PI-like concentration-feedback steering law.

The turn rate is ``omega = kp*e + ki*sigma`` with ``sigma' = e`` and the
sliding-surface error::

    e = eps_dot + c1 * tanh(eps / c2),    eps = s - s_d

Only the measured concentration is used; ``eps_dot`` comes either from a
dirty-derivative filter on the sampled ``eps`` or, for diagnostics, from an
externally supplied exact rate (``derivative_mode="oracle"``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

from .errors import MissingOracle

ORACLE = "oracle"
DIRTY = "dirty"


@dataclass(frozen=True)
class ControllerParams:
    kp: float
    ki: float
    c1: float
    c2: float
    derivative_mode: str = DIRTY
    tau_f: Optional[float] = None  # None -> 5 * controller dt
    sigma_limit: Optional[float] = None
    omega_limit: Optional[float] = None

    def validate(self):
        if not self.kp > 0:
            raise ValueError(f"kp must be > 0, got {self.kp}")
        if not self.ki >= 0:
            raise ValueError(f"ki must be >= 0, got {self.ki}")
        if not (self.c1 > 0 and self.c2 > 0):
            raise ValueError("c1 and c2 must be > 0")
        if self.derivative_mode not in (ORACLE, DIRTY):
            raise ValueError(f"unknown derivative_mode {self.derivative_mode!r}")
        if self.tau_f is not None and not self.tau_f > 0:
            raise ValueError("tau_f must be > 0")
        for name in ("sigma_limit", "omega_limit"):
            lim = getattr(self, name)
            if lim is not None and not lim > 0:
                raise ValueError(f"{name} must be > 0")
        return self


@dataclass(frozen=True)
class ControllerState:
    sigma: float = 0.0
    prev_epsilon: float = 0.0
    deriv_estimate: float = 0.0
    initialized: bool = False
    e: float = 0.0  # last error term, kept for logging


def error_term(epsilon: float, epsilon_dot: float, c1: float, c2: float) -> float:
    return epsilon_dot + c1 * math.tanh(epsilon / c2)


def dirty_derivative(prev_estimate, prev_epsilon, epsilon, dt, tau_f):
    """Low-pass filtered backward difference."""
    a = tau_f / (tau_f + dt)
    return a * prev_estimate + (1.0 - a) * (epsilon - prev_epsilon) / dt


def reset(ctrl: ControllerState | None = None) -> ControllerState:
    return ControllerState()


def _clamp(x, lim):
    if lim is None:
        return x
    return min(max(x, -lim), lim)


def update(
    ctrl: ControllerState,
    params: ControllerParams,
    s_meas: float,
    s_d: float,
    dt: float,
    oracle_sdot: float | None = None,
) -> tuple[float, ControllerState]:
    """One controller tick. Returns the turn rate and the new state."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    eps = s_meas - s_d
    if params.derivative_mode == ORACLE:
        if oracle_sdot is None:
            raise MissingOracle("oracle derivative mode needs oracle_sdot")
        eps_dot = oracle_sdot
    elif not ctrl.initialized:
        eps_dot = 0.0
    else:
        tau = params.tau_f if params.tau_f is not None else 5.0 * dt
        eps_dot = dirty_derivative(ctrl.deriv_estimate, ctrl.prev_epsilon, eps, dt, tau)

    e = error_term(eps, eps_dot, params.c1, params.c2)
    sigma = _clamp(ctrl.sigma + e * dt, params.sigma_limit)
    omega = _clamp(params.kp * e + params.ki * sigma, params.omega_limit)
    new = replace(
        ctrl, sigma=sigma, prev_epsilon=eps, deriv_estimate=eps_dot, initialized=True, e=e
    )
    return omega, new


class PILikeController:
    """Stateful wrapper around :func:`update` for step-by-step use."""

    def __init__(self, params: ControllerParams, s_d: float, sigma0: float = 0.0):
        self.params = params.validate()
        self.s_d = s_d
        self.sigma0 = sigma0
        self.state = ControllerState(sigma=sigma0)

    def __call__(self, s_meas, dt, oracle_sdot=None) -> float:
        omega, self.state = update(self.state, self.params, s_meas, self.s_d, dt, oracle_sdot)
        return omega

    def reset(self):
        self.state = ControllerState(sigma=self.sigma0)
