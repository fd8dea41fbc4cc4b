"""Gradient-free isoline tracking with a PI-like concentration-feedback law."""

from .controller import ControllerParams, ControllerState, PILikeController
from .dubins import Observables, RobotState, analytic_sdot, arc_oracle, observe, step
from .field import (
    Annulus,
    Circular,
    FieldBounds,
    GaussianMixture,
    Gridded,
    LinearRadial,
    Rectangle,
    circular_isoline_radius,
    load_grid,
    save_grid,
    smoothness_bounds,
)
from .simulator import Metrics, Scenario, Trajectory, metrics, run, sweep

__version__ = "0.1.0"
