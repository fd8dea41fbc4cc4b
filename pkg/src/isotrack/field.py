"""Scalar concentration fields on the plane.

Four field variants share one query surface (``value``, ``gradient``,
``hessian``):

* :class:`Circular` -- ``I0 * exp(-rate * |p - p_o|)``
* :class:`LinearRadial` -- ``s_d - alpha * (|p - p_o| - r_d)``, the
  log-linearised circular field
* :class:`GaussianMixture` -- sum of anisotropic Gaussian bumps
* :class:`Gridded` -- bilinear interpolation of a regular lattice, with a
  plain-text file format (:func:`load_grid`, :func:`save_grid`)

Grid file layout::

    # comments start with '#'
    GRID <nx> <ny> <x0> <y0> <dx> <dy>
    v(0,0)    v(1,0)    ... v(nx-1,0)      <- y = y0
    ...
    v(0,ny-1) ...           v(nx-1,ny-1)   <- y = y0 + (ny-1)*dy
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyRegion,
    InfeasibleLevel,
    OutOfDomain,
    ParseError,
    SingularPoint,
)

_RADIAL_EPS = 1e-12


def _xy(p) -> tuple[float, float]:
    return float(p[0]), float(p[1])


def fmt(x: float) -> str:
    """Format a number with 9 significant digits (all text outputs use this)."""
    return f"{float(x):.9g}"


class ScalarField:
    """Common interface. Subclasses implement value, gradient and hessian."""

    #: source position for radial variants, None otherwise
    source = None

    def value(self, p) -> float:
        raise NotImplementedError

    def gradient(self, p) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, p) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, p) -> float:
        return self.value(p)


@dataclass(frozen=True)
class Circular(ScalarField):
    """Exponentially decaying radial field ``i0 * exp(-rate * r)``."""

    i0: float
    rate: float
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not (self.i0 > 0 and self.rate > 0):
            raise ValueError("Circular field needs i0 > 0 and rate > 0")
        object.__setattr__(self, "center", _xy(self.center))

    @property
    def source(self):
        return self.center

    def _offset(self, p):
        x, y = _xy(p)
        dx, dy = x - self.center[0], y - self.center[1]
        return dx, dy, math.hypot(dx, dy)

    def value(self, p) -> float:
        _, _, r = self._offset(p)
        return self.i0 * math.exp(-self.rate * r)

    def gradient(self, p) -> np.ndarray:
        dx, dy, r = self._offset(p)
        if r < _RADIAL_EPS:
            raise SingularPoint("gradient undefined at the field source")
        k = -self.rate * self.i0 * math.exp(-self.rate * r) / r
        return np.array([k * dx, k * dy])

    def hessian(self, p) -> np.ndarray:
        dx, dy, r = self._offset(p)
        if r < _RADIAL_EPS:
            raise SingularPoint("Hessian undefined at the field source")
        f = self.i0 * math.exp(-self.rate * r)
        u = np.array([dx, dy]) / r
        # radial curvature rate^2 f, tangential curvature -rate f / r
        radial = self.rate**2 * f
        tangential = -self.rate * f / r
        return radial * np.outer(u, u) + tangential * (np.eye(2) - np.outer(u, u))

    def isoline_radius(self, level: float) -> float:
        return circular_isoline_radius(self.i0, self.rate, level)


@dataclass(frozen=True)
class LinearRadial(ScalarField):
    """Field decreasing linearly with distance: ``s_d - alpha*(r - r_d)``."""

    s_d: float
    alpha: float
    r_d: float
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not (self.alpha > 0 and self.r_d > 0):
            raise ValueError("LinearRadial field needs alpha > 0 and r_d > 0")
        object.__setattr__(self, "center", _xy(self.center))

    @property
    def source(self):
        return self.center

    def _offset(self, p):
        x, y = _xy(p)
        dx, dy = x - self.center[0], y - self.center[1]
        return dx, dy, math.hypot(dx, dy)

    def value(self, p) -> float:
        _, _, r = self._offset(p)
        return self.s_d - self.alpha * (r - self.r_d)

    def gradient(self, p) -> np.ndarray:
        dx, dy, r = self._offset(p)
        if r < _RADIAL_EPS:
            raise SingularPoint("gradient undefined at the field source")
        return np.array([-self.alpha * dx / r, -self.alpha * dy / r])

    def hessian(self, p) -> np.ndarray:
        dx, dy, r = self._offset(p)
        if r < _RADIAL_EPS:
            raise SingularPoint("Hessian undefined at the field source")
        u = np.array([dx, dy]) / r
        return -self.alpha / r * (np.eye(2) - np.outer(u, u))


@dataclass(frozen=True)
class GaussianComponent:
    amplitude: float
    center: tuple[float, float]
    covariance: np.ndarray

    def __post_init__(self):
        cov = np.asarray(self.covariance, dtype=float).reshape(2, 2)
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(cov).min() <= 0:
            raise ValueError("covariance must be positive definite")
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "center", _xy(self.center))
        object.__setattr__(self, "_precision", np.linalg.inv(cov))


class GaussianMixture(ScalarField):
    """Sum of Gaussian bumps ``a * exp(-0.5 (p-c)' S^-1 (p-c))``.

    ``components`` is a sequence of ``(amplitude, center, covariance)``
    triples or :class:`GaussianComponent` objects.
    """

    def __init__(self, components):
        comps = []
        for c in components:
            if not isinstance(c, GaussianComponent):
                c = GaussianComponent(*c)
            comps.append(c)
        if not comps:
            raise ValueError("GaussianMixture needs at least one component")
        self.components = tuple(comps)
        self._amp = np.array([c.amplitude for c in comps])
        self._centers = np.array([c.center for c in comps])
        self._prec = np.array([c._precision for c in comps])

    def __repr__(self):
        return f"GaussianMixture({list(self.components)!r})"

    def __eq__(self, other):
        if not isinstance(other, GaussianMixture):
            return NotImplemented
        return (
            np.array_equal(self._amp, other._amp)
            and np.array_equal(self._centers, other._centers)
            and np.array_equal(self._prec, other._prec)
        )

    def _terms(self, p):
        d = np.asarray(_xy(p)) - self._centers  # (k, 2)
        sd = np.einsum("kij,kj->ki", self._prec, d)  # S^-1 d
        w = self._amp * np.exp(-0.5 * np.einsum("ki,ki->k", d, sd))
        return w, sd

    def value(self, p) -> float:
        w, _ = self._terms(p)
        return float(w.sum())

    def gradient(self, p) -> np.ndarray:
        w, sd = self._terms(p)
        return -(w[:, None] * sd).sum(axis=0)

    def hessian(self, p) -> np.ndarray:
        w, sd = self._terms(p)
        outer = np.einsum("ki,kj->kij", sd, sd)
        h = np.einsum("k,kij->ij", w, outer - self._prec)
        return 0.5 * (h + h.T)


class Gridded(ScalarField):
    """Bilinear interpolation over a regular lattice.

    ``values[j, i]`` holds the sample at ``(x0 + i*dx, y0 + j*dy)``. Queries
    outside the lattice rectangle raise :class:`OutOfDomain`; there is no
    extrapolation.
    """

    def __init__(self, x0, y0, dx, dy, values):
        values = np.array(values, dtype=float)
        if values.ndim != 2:
            raise DimensionMismatch("grid values must be a 2-D array (ny, nx)")
        ny, nx = values.shape
        if nx < 2 or ny < 2:
            raise DimensionMismatch(f"grid needs nx, ny >= 2, got {nx}x{ny}")
        if not (dx > 0 and dy > 0):
            raise ValueError("grid spacing must be positive")
        self.x0, self.y0 = float(x0), float(y0)
        self.dx, self.dy = float(dx), float(dy)
        self.values = values
        self.values.setflags(write=False)
        self.nx, self.ny = nx, ny
        self.x1 = self.x0 + (nx - 1) * self.dx
        self.y1 = self.y0 + (ny - 1) * self.dy
        self.fd_step = min(self.dx, self.dy) / 2

    def __repr__(self):
        return (
            f"Gridded(nx={self.nx}, ny={self.ny}, x0={self.x0}, y0={self.y0}, "
            f"dx={self.dx}, dy={self.dy})"
        )

    def __eq__(self, other):
        if not isinstance(other, Gridded):
            return NotImplemented
        return (self.x0, self.y0, self.dx, self.dy) == (
            other.x0,
            other.y0,
            other.dx,
            other.dy,
        ) and np.array_equal(self.values, other.values)

    def node(self, i: int, j: int) -> tuple[float, float]:
        return self.x0 + i * self.dx, self.y0 + j * self.dy

    def contains(self, p, margin: float = 0.0) -> bool:
        x, y = _xy(p)
        return (
            self.x0 + margin <= x <= self.x1 - margin
            and self.y0 + margin <= y <= self.y1 - margin
        )

    def value(self, p) -> float:
        x, y = _xy(p)
        if not (self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1):
            raise OutOfDomain(f"point ({x:g}, {y:g}) outside grid")
        u = (x - self.x0) / self.dx
        w = (y - self.y0) / self.dy
        i = min(int(u), self.nx - 2)
        j = min(int(w), self.ny - 2)
        u -= i
        w -= j
        v = self.values
        return float(
            (1 - u) * (1 - w) * v[j, i]
            + u * (1 - w) * v[j, i + 1]
            + (1 - u) * w * v[j + 1, i]
            + u * w * v[j + 1, i + 1]
        )

    def _check_interior(self, p):
        if not (
            self.x0 + self.dx <= float(p[0]) <= self.x1 - self.dx
            and self.y0 + self.dy <= float(p[1]) <= self.y1 - self.dy
        ):
            raise OutOfDomain("derivatives need a one-cell margin inside the grid")

    def gradient(self, p) -> np.ndarray:
        self._check_interior(p)
        x, y = _xy(p)
        h = self.fd_step
        gx = (self.value((x + h, y)) - self.value((x - h, y))) / (2 * h)
        gy = (self.value((x, y + h)) - self.value((x, y - h))) / (2 * h)
        return np.array([gx, gy])

    def hessian(self, p) -> np.ndarray:
        self._check_interior(p)
        x, y = _xy(p)
        h = self.fd_step
        f = self.value
        f0 = f((x, y))
        fxx = (f((x + h, y)) - 2 * f0 + f((x - h, y))) / h**2
        fyy = (f((x, y + h)) - 2 * f0 + f((x, y - h))) / h**2
        fxy = (
            f((x + h, y + h)) - f((x + h, y - h)) - f((x - h, y + h)) + f((x - h, y - h))
        ) / (4 * h**2)
        return np.array([[fxx, fxy], [fxy, fyy]])


# --------------------------------------------------------------------------
# functional surface


def value(field: ScalarField, p) -> float:
    return field.value(p)


def gradient(field: ScalarField, p) -> np.ndarray:
    return field.gradient(p)


def hessian(field: ScalarField, p) -> np.ndarray:
    return field.hessian(p)


def circular_isoline_radius(i0: float, rate: float, s_d: float) -> float:
    """Radius at which ``i0 * exp(-rate * r)`` equals ``s_d``."""
    if not (0 < s_d < i0):
        raise InfeasibleLevel(f"level {s_d} not in (0, {i0})")
    return math.log(i0 / s_d) / rate


# --------------------------------------------------------------------------
# regions and smoothness bounds


@dataclass(frozen=True)
class Rectangle:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def lattice(self, resolution: float) -> np.ndarray:
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise EmptyRegion("rectangle has zero area")
        nx = max(2, math.ceil((self.xmax - self.xmin) / resolution - 1e-9) + 1)
        ny = max(2, math.ceil((self.ymax - self.ymin) / resolution - 1e-9) + 1)
        xs = np.linspace(self.xmin, self.xmax, nx)
        ys = np.linspace(self.ymin, self.ymax, ny)
        X, Y = np.meshgrid(xs, ys)
        return np.column_stack([X.ravel(), Y.ravel()])

    def contains(self, p) -> bool:
        x, y = _xy(p)
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax


@dataclass(frozen=True)
class Annulus:
    center: tuple[float, float]
    r_min: float
    r_max: float

    def lattice(self, resolution: float) -> np.ndarray:
        """Polar lattice; both boundary circles are sampled exactly."""
        if not (self.r_max > self.r_min >= 0):
            raise EmptyRegion("annulus has zero area")
        cx, cy = _xy(self.center)
        nr = max(2, math.ceil((self.r_max - self.r_min) / resolution - 1e-9) + 1)
        na = max(8, math.ceil(2 * math.pi * self.r_max / resolution))
        rs = np.linspace(self.r_min, self.r_max, nr)
        angles = np.linspace(0.0, 2 * math.pi, na, endpoint=False)
        R, A = np.meshgrid(rs, angles)
        pts = np.column_stack([cx + (R * np.cos(A)).ravel(), cy + (R * np.sin(A)).ravel()])
        return pts

    def contains(self, p) -> bool:
        x, y = _xy(p)
        r = math.hypot(x - self.center[0], y - self.center[1])
        return self.r_min <= r <= self.r_max


@dataclass(frozen=True)
class FieldBounds:
    """Gradient-norm bounds ``gamma1 <= |grad F| <= gamma2`` and Hessian
    bound ``|hess F| <= gamma3`` over ``region``."""

    gamma1: float
    gamma2: float
    gamma3: float
    region: object = None

    def __post_init__(self):
        if not (0 <= self.gamma1 <= self.gamma2) or self.gamma3 < 0:
            raise ValueError(f"inconsistent field bounds {self}")


def smoothness_bounds(field: ScalarField, region, resolution: float) -> FieldBounds:
    """Estimate gamma1, gamma2, gamma3 on a sample lattice of ``region``.

    These are lattice estimates; the true extrema can lie between samples,
    so shrink ``resolution`` when conservative bounds matter.
    """
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    pts = region.lattice(resolution)
    if len(pts) == 0:
        raise EmptyRegion("region lattice is empty")
    gnorm = np.empty(len(pts))
    hnorm = np.empty(len(pts))
    for k, p in enumerate(pts):
        gnorm[k] = np.linalg.norm(field.gradient(p))
        hnorm[k] = np.linalg.norm(field.hessian(p), 2)
    return FieldBounds(float(gnorm.min()), float(gnorm.max()), float(hnorm.max()), region)


# --------------------------------------------------------------------------
# grid files


def sample_grid(field: ScalarField, region: Rectangle, resolution: float) -> Gridded:
    """Sample ``field`` on a lattice of spacing ``resolution`` anchored at the
    region's lower-left corner."""
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    if not (region.xmax > region.xmin and region.ymax > region.ymin):
        raise EmptyRegion("rectangle has zero area")
    nx = int(math.floor((region.xmax - region.xmin) / resolution + 1e-9)) + 1
    ny = int(math.floor((region.ymax - region.ymin) / resolution + 1e-9)) + 1
    vals = np.empty((ny, nx))
    for j in range(ny):
        y = region.ymin + j * resolution
        for i in range(nx):
            vals[j, i] = field.value((region.xmin + i * resolution, y))
    return Gridded(region.xmin, region.ymin, resolution, resolution, vals)


def _open_text(obj, mode):
    if isinstance(obj, (str, os.PathLike)):
        return open(obj, mode, encoding="ascii", newline="\n"), True
    if isinstance(obj, (io.RawIOBase, io.BufferedIOBase)) or "b" in getattr(obj, "mode", ""):
        return io.TextIOWrapper(obj, encoding="ascii", newline="\n"), False
    return obj, False


def write_grid_text(grid: Gridded) -> str:
    lines = [
        "GRID "
        + " ".join([str(grid.nx), str(grid.ny)] + [fmt(v) for v in (grid.x0, grid.y0, grid.dx, grid.dy)])
    ]
    for row in grid.values:
        lines.append(" ".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def save_grid(field: ScalarField, sink, region: Rectangle | None = None, resolution: float | None = None):
    """Write ``field`` in grid format to a path or stream.

    A :class:`Gridded` field is written as-is when no region is given;
    any other field is sampled over ``region`` at ``resolution`` first.
    """
    if region is not None or not isinstance(field, Gridded):
        if region is None or resolution is None:
            raise ValueError("region and resolution are required to sample a field")
        field = sample_grid(field, region, resolution)
    text = write_grid_text(field)
    fh, owned = _open_text(sink, "w")
    try:
        fh.write(text)
        fh.flush()
    finally:
        if owned:
            fh.close()
        elif isinstance(fh, io.TextIOWrapper) and fh is not sink:
            fh.detach()
    return field


def parse_grid(lines: Sequence[str]) -> Gridded:
    header = None
    rows: list[list[float]] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if header is None:
            if parts[0] != "GRID" or len(parts) != 7:
                raise ParseError("expected 'GRID nx ny x0 y0 dx dy'", lineno)
            try:
                nx, ny = int(parts[1]), int(parts[2])
                x0, y0, dx, dy = (float(t) for t in parts[3:])
            except ValueError as exc:
                raise ParseError(f"bad header value ({exc})", lineno) from None
            if nx < 2 or ny < 2:
                raise ParseError("nx and ny must be >= 2", lineno)
            if not (dx > 0 and dy > 0):
                raise ParseError("dx and dy must be positive", lineno)
            header = (nx, ny, x0, y0, dx, dy)
            continue
        try:
            rows.append([float(t) for t in parts])
        except ValueError as exc:
            raise ParseError(f"bad value ({exc})", lineno) from None
    if header is None:
        raise ParseError("missing GRID header")
    nx, ny, x0, y0, dx, dy = header
    flat = [v for row in rows for v in row]
    if len(flat) != nx * ny:
        raise DimensionMismatch(f"header declares {nx}x{ny}={nx * ny} values, found {len(flat)}")
    if any(len(row) != nx for row in rows) or len(rows) != ny:
        raise DimensionMismatch(f"expected {ny} rows of {nx} values")
    return Gridded(x0, y0, dx, dy, np.array(flat).reshape(ny, nx))


def load_grid(source) -> Gridded:
    """Read a grid file from a path, text stream or binary stream."""
    if isinstance(source, (bytes, bytearray)):
        return parse_grid(source.decode("ascii").splitlines())
    fh, owned = _open_text(source, "r")
    try:
        return parse_grid(fh.read().splitlines())
    finally:
        if owned:
            fh.close()
        elif isinstance(fh, io.TextIOWrapper) and fh is not source:
            fh.detach()
