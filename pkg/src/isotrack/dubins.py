"""Constant-speed Dubins vehicle and its field-frame observables."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NonpositiveStep, SingularPoint
from .field import ScalarField


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    w = math.remainder(a, 2 * math.pi)
    return math.pi if w == -math.pi else w


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    theta: float

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def heading(self) -> np.ndarray:
        return np.array([math.cos(self.theta), math.sin(self.theta)])


@dataclass(frozen=True)
class Observables:
    """Concentration ``s``, crossing angle ``phi``, distance to source ``d``
    (None for non-radial fields) and field gradient ``n``."""

    s: float
    phi: float
    d: Optional[float]
    n: np.ndarray


def _rhs(theta, v):
    return v * math.cos(theta), v * math.sin(theta)


def step(state: RobotState, omega: float, v: float, dt: float) -> RobotState:
    """Advance the unicycle model by one RK4 step with ``omega`` held constant."""
    if not dt > 0:
        raise NonpositiveStep(f"dt must be positive, got {dt}")
    th = state.theta
    k1x, k1y = _rhs(th, v)
    k2x, k2y = _rhs(th + 0.5 * dt * omega, v)
    k3x, k3y = k2x, k2y  # theta-stage is independent of position
    k4x, k4y = _rhs(th + dt * omega, v)
    x = state.x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
    y = state.y + dt / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
    return RobotState(x, y, wrap_angle(th + dt * omega))


def arc_oracle(state: RobotState, omega: float, v: float, t: float) -> RobotState:
    """Closed-form pose after ``t`` seconds at constant ``omega`` and ``v``.

    A straight line for ``omega == 0``, otherwise an arc of radius
    ``v/|omega|``; the half-angle form stays accurate as ``omega -> 0``.
    """
    half = 0.5 * omega * t
    chord = v * t * (math.sin(half) / half if half != 0.0 else 1.0)
    mid = state.theta + half
    return RobotState(
        state.x + chord * math.cos(mid),
        state.y + chord * math.sin(mid),
        wrap_angle(state.theta + omega * t),
    )


def crossing_angle(n, theta: float) -> float:
    """Signed angle from ``-n`` to the heading, counter-clockwise positive."""
    nx, ny = float(n[0]), float(n[1])
    if nx == 0.0 and ny == 0.0:
        raise SingularPoint("zero gradient: crossing angle undefined")
    hx, hy = math.cos(theta), math.sin(theta)
    return wrap_angle(math.atan2(-nx * hy + ny * hx, -nx * hx - ny * hy))


def observe(field: ScalarField, state: RobotState) -> Observables:
    p = (state.x, state.y)
    s = field.value(p)
    n = field.gradient(p)
    phi = crossing_angle(n, state.theta)
    d = None
    if field.source is not None:
        d = math.hypot(state.x - field.source[0], state.y - field.source[1])
    return Observables(s, phi, d, n)


def analytic_sdot(field: ScalarField, state: RobotState, v: float) -> float:
    """Rate of change of the measured concentration, ``v * n . h``."""
    n = field.gradient((state.x, state.y))
    return v * (float(n[0]) * math.cos(state.theta) + float(n[1]) * math.sin(state.theta))
