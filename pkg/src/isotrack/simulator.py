"""Closed-loop simulation, tracking metrics and parameter sweeps."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import controller as ctl
from .dubins import RobotState, analytic_sdot, step
from .errors import EmptyTrajectory, InvalidScenario, OutOfDomain, SingularPoint
from .field import ScalarField, fmt

COLUMNS = ("t", "x", "y", "theta", "s", "epsilon", "e", "omega", "sigma")
SWEEP_AXES = ("kp", "ki", "c1", "c2", "v", "noise_std", "initial.theta")


@dataclass(frozen=True)
class Scenario:
    field: ScalarField
    s_d: float
    initial: RobotState
    v: float
    params: ctl.ControllerParams
    sim_dt: float = 0.01
    controller_dt: Optional[float] = None  # None -> sim_dt
    duration: float = 400.0
    noise_std: float = 0.0
    seed: int = 0
    initial_sigma: float = 0.0

    @property
    def ticks_per_update(self) -> int:
        cdt = self.sim_dt if self.controller_dt is None else self.controller_dt
        return int(round(cdt / self.sim_dt))

    def validate(self):
        try:
            self.params.validate()
        except ValueError as exc:
            raise InvalidScenario(str(exc)) from None
        if not self.sim_dt > 0:
            raise InvalidScenario("sim_dt must be positive")
        if not self.v > 0:
            raise InvalidScenario("v must be positive")
        cdt = self.sim_dt if self.controller_dt is None else self.controller_dt
        m = cdt / self.sim_dt
        if round(m) < 1 or abs(m - round(m)) > 1e-9 * max(1.0, m):
            raise InvalidScenario("controller_dt must be an integer multiple of sim_dt")
        if not self.duration >= 10 * cdt:
            raise InvalidScenario("duration must cover at least 10 controller periods")
        if self.noise_std < 0:
            raise InvalidScenario("noise_std must be >= 0")
        src = self.field.source
        if src is not None and (self.initial.x, self.initial.y) == tuple(src):
            raise InvalidScenario("initial position coincides with the field source")
        return self


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    s: np.ndarray
    epsilon: np.ndarray
    e: np.ndarray
    omega: np.ndarray
    sigma: np.ndarray
    completed: bool = True
    failure_reason: Optional[str] = None

    def __len__(self):
        return len(self.t)

    def rows(self):
        return np.column_stack([getattr(self, c) for c in COLUMNS])

    def to_csv(self, sink=None) -> str:
        """Write the trajectory CSV; returns the text as well."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in self.rows():
            w.writerow([fmt(v) for v in row])
        text = buf.getvalue()
        if sink is not None:
            if isinstance(sink, (str, os.PathLike)):
                with open(sink, "w", encoding="ascii", newline="") as fh:
                    fh.write(text)
            else:
                sink.write(text)
        return text


def read_trajectory_csv(source) -> Trajectory:
    """Parse a trajectory CSV (path, stream or text) back into columns."""
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source, encoding="ascii") as fh:
            text = fh.read()
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != COLUMNS:
        raise ValueError(f"bad trajectory header {header!r}")
    data = [[float(v) for v in row] for row in reader if row]
    for k, row in enumerate(data, start=2):
        if len(row) != len(COLUMNS):
            raise ValueError(f"line {k}: expected {len(COLUMNS)} fields")
    arr = np.array(data, dtype=float).reshape(-1, len(COLUMNS))
    return Trajectory(*(arr[:, i].copy() for i in range(len(COLUMNS))))


def run(scenario: Scenario) -> Trajectory:
    """Simulate the closed loop.

    The controller samples the field every ``controller_dt`` and its turn
    rate is held in between; the vehicle integrates at ``sim_dt``. A domain
    exit or singular point stops the run with ``completed=False`` and the
    samples recorded so far.
    """
    sc = scenario.validate()
    p = sc.params
    field = sc.field
    m = sc.ticks_per_update
    cdt = m * sc.sim_dt
    n_steps = int(round(sc.duration / sc.sim_dt))
    rng = np.random.default_rng(sc.seed)
    oracle = p.derivative_mode == ctl.ORACLE

    cols = {c: [] for c in COLUMNS}
    state = sc.initial
    cstate = ctl.ControllerState(sigma=sc.initial_sigma)
    omega = 0.0
    completed, reason = True, None
    for k in range(n_steps + 1):
        try:
            s = field.value((state.x, state.y))
            if k % m == 0:
                s_meas = s + rng.normal(0.0, sc.noise_std) if sc.noise_std > 0 else s
                sdot = analytic_sdot(field, state, sc.v) if oracle else None
                omega, cstate = ctl.update(cstate, p, s_meas, sc.s_d, cdt, sdot)
        except (OutOfDomain, SingularPoint) as exc:
            completed, reason = False, f"{type(exc).__name__}: {exc}"
            break
        cols["t"].append(k * sc.sim_dt)
        cols["x"].append(state.x)
        cols["y"].append(state.y)
        cols["theta"].append(state.theta)
        cols["s"].append(s)
        cols["epsilon"].append(s - sc.s_d)
        cols["e"].append(cstate.e)
        cols["omega"].append(omega)
        cols["sigma"].append(cstate.sigma)
        if k < n_steps:
            state = step(state, omega, sc.v, sc.sim_dt)
    arrays = [np.asarray(cols[c], dtype=float) for c in COLUMNS]
    return Trajectory(*arrays, completed=completed, failure_reason=reason)


@dataclass(frozen=True)
class Metrics:
    steady_state_error_max: float
    steady_state_error_mean: float
    convergence_time: Optional[float]
    completed: bool
    failure_reason: Optional[str] = None

    def as_text(self) -> str:
        items = {
            "steady_state_error_max": fmt(self.steady_state_error_max),
            "steady_state_error_mean": fmt(self.steady_state_error_mean),
            "convergence_time": "none" if self.convergence_time is None else fmt(self.convergence_time),
            "completed": "true" if self.completed else "false",
        }
        if self.failure_reason:
            items["failure_reason"] = self.failure_reason
        return "".join(f"{k} = {v}\n" for k, v in items.items())


def metrics(traj: Trajectory, s_d: float, tail_fraction: float = 0.1, band: float | None = None) -> Metrics:
    """Tail error statistics and time to settle inside ``s_d +/- band``."""
    n = len(traj)
    if n == 0:
        raise EmptyTrajectory("trajectory has no samples")
    if band is None:
        band = 0.05 * abs(s_d)
    err = np.abs(np.asarray(traj.s) - s_d)
    n_tail = min(n, max(1, int(math.ceil(tail_fraction * n))))
    tail = err[-n_tail:]
    outside = np.nonzero(err > band)[0]
    if len(outside) == 0:
        conv = float(traj.t[0])
    elif outside[-1] == n - 1:
        conv = None
    else:
        conv = float(traj.t[outside[-1] + 1])
    return Metrics(float(tail.max()), float(tail.mean()), conv, traj.completed, traj.failure_reason)


def with_axis(base: Scenario, axis: str, value: float) -> Scenario:
    """Copy of ``base`` with one sweep axis replaced."""
    if axis in ("kp", "ki", "c1", "c2"):
        return replace(base, params=replace(base.params, **{axis: value}))
    if axis in ("v", "noise_std"):
        return replace(base, **{axis: value})
    if axis == "initial.theta":
        return replace(base, initial=replace(base.initial, theta=value))
    raise ValueError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")


@dataclass(frozen=True)
class SweepEntry:
    value: float
    metrics: Optional[Metrics]
    error: Optional[str] = None

    @property
    def completed(self) -> bool:
        return self.metrics is not None and self.metrics.completed


def _sweep_one(args):
    base, axis, value, tail_fraction, band = args
    try:
        sc = with_axis(base, axis, value)
        traj = run(sc)
    except InvalidScenario as exc:
        return SweepEntry(value, None, str(exc))
    return SweepEntry(value, metrics(traj, sc.s_d, tail_fraction, band))


def sweep(
    base: Scenario,
    axis: str,
    values: Sequence[float],
    tail_fraction: float = 0.1,
    band: float | None = None,
    workers: int | None = None,
) -> list[SweepEntry]:
    """Run one scenario per value; results follow the input order."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")
    jobs = [(base, axis, v, tail_fraction, band) for v in values]
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_one, jobs))
    return [_sweep_one(j) for j in jobs]


SWEEP_COLUMNS = ("value", "sse_max", "sse_mean", "convergence_time", "completed")


def sweep_to_csv(entries: Sequence[SweepEntry], sink=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for en in entries:
        m = en.metrics
        if m is None:
            w.writerow([fmt(en.value), "nan", "nan", "", "false"])
            continue
        conv = "" if m.convergence_time is None else fmt(m.convergence_time)
        w.writerow(
            [
                fmt(en.value),
                fmt(m.steady_state_error_max),
                fmt(m.steady_state_error_mean),
                conv,
                "true" if m.completed else "false",
            ]
        )
    text = buf.getvalue()
    if sink is not None:
        if isinstance(sink, (str, os.PathLike)):
            with open(sink, "w", encoding="ascii", newline="") as fh:
                fh.write(text)
        else:
            sink.write(text)
    return text


def read_sweep_csv(text: str) -> list[dict]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != SWEEP_COLUMNS:
        raise ValueError(f"bad sweep header {header!r}")
    rows = []
    for row in reader:
        if not row:
            continue
        if len(row) != len(SWEEP_COLUMNS) or row[4] not in ("true", "false"):
            raise ValueError(f"malformed sweep row {row!r}")
        rows.append(
            {
                "value": float(row[0]),
                "sse_max": float(row[1]),
                "sse_mean": float(row[2]),
                "convergence_time": float(row[3]) if row[3] else None,
                "completed": row[4] == "true",
            }
        )
    return rows
