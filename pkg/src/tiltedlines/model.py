"""Domain types and the model's elementary functionals.

The state of the sampler is n strictly ordered discrete paths above a floor on
a uniform grid, carrying boundary-condition metadata and the geometric
area-tilt parameters (a, lambda): line i (1-based) is weighted by
exp(-a * lambda**(i-1) * integral of the line).
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

__all__ = [
    "GridInterval", "TiltParams", "BoundaryKind", "BoundarySpec",
    "EnsembleState", "OrderingReport",
    "area_functional", "tilt_log_weight", "gaussian_bridge_mass",
    "check_ordering",
]


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class GridInterval:
    """Uniform discretization of [ell, r] with `steps` intervals."""

    ell: float
    r: float
    steps: int

    def __post_init__(self):
        if not (self.ell < self.r):
            raise ModelError(f"need ell < r, got [{self.ell}, {self.r}]")
        if self.steps < 1:
            raise ModelError(f"steps must be >= 1, got {self.steps}")

    @property
    def dt(self) -> float:
        return (self.r - self.ell) / self.steps

    @property
    def npoints(self) -> int:
        return self.steps + 1

    def times(self) -> np.ndarray:
        """Grid points t_0..t_m; endpoints are exact."""
        return np.linspace(self.ell, self.r, self.steps + 1)

    def index_of(self, t: float) -> int:
        """Nearest grid index of time t (t must lie on the grid up to 1e-9)."""
        j = round((t - self.ell) / self.dt)
        if not (0 <= j <= self.steps):
            raise ModelError(f"time {t} outside [{self.ell}, {self.r}]")
        if abs(self.ell + j * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ModelError(f"time {t} not on the grid (dt={self.dt})")
        return int(j)


@dataclass(frozen=True)
class TiltParams:
    """Area-tilt strength a and geometric ratio lambda (a>0, lambda>1).

    diagnostic=True relaxes the constraints to a>=0, lambda>=1 for
    cross-checks (untilted bridges, equal tilts).
    """

    a: float
    lam: float
    diagnostic: bool = False

    def __post_init__(self):
        if self.diagnostic:
            if self.a < 0 or self.lam < 1:
                raise ModelError("diagnostic mode still needs a>=0, lambda>=1")
        else:
            if not self.a > 0:
                raise ModelError(f"tilt strength a must be > 0, got {self.a}")
            if not self.lam > 1:
                raise ModelError(f"lambda must exceed 1, got {self.lam}")

    def line_coefficients(self, n: int) -> np.ndarray:
        """a * lambda**i for lines i = 0..n-1 (0-based line index)."""
        return self.a * self.lam ** np.arange(n, dtype=float)


class BoundaryKind(str, Enum):
    ZERO = "zero"
    FREE = "free"
    FIXED = "fixed"


@dataclass(frozen=True)
class BoundarySpec:
    kind: BoundaryKind
    left: Optional[np.ndarray] = None
    right: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind is BoundaryKind.FIXED:
            for name, vec in (("left", self.left), ("right", self.right)):
                if vec is None:
                    raise ModelError(f"fixed boundary needs a {name} vector")
                v = np.asarray(vec, float)
                if np.all(v == 0.0):
                    continue  # the zero-boundary limit point
                if np.any(np.diff(v) >= 0) or np.any(v <= 0):
                    raise ModelError(
                        f"{name} boundary must be strictly decreasing and "
                        f"positive (or all zeros), got {v}")
        elif self.left is not None or self.right is not None:
            raise ModelError(f"{self.kind.value} boundary takes no vectors")

    @staticmethod
    def zero() -> "BoundarySpec":
        return BoundarySpec(BoundaryKind.ZERO)

    @staticmethod
    def free() -> "BoundarySpec":
        return BoundarySpec(BoundaryKind.FREE)

    @staticmethod
    def fixed(left, right) -> "BoundarySpec":
        return BoundarySpec(BoundaryKind.FIXED,
                            np.asarray(left, float), np.asarray(right, float))


def _default_heights(n: int, grid: GridInterval, boundary: BoundarySpec,
                     floor: np.ndarray, scale: float = 0.7) -> np.ndarray:
    """A valid initial configuration: ordered tents above the floor."""
    t = grid.times()
    tent = np.minimum(np.minimum(t - grid.ell, grid.r - t), 1.0)
    heights = np.empty((n, grid.npoints))
    for i in range(n):
        heights[i] = floor + (n - i) * scale * np.maximum(tent, 0.0)
    if boundary.kind is BoundaryKind.ZERO:
        heights[:, 0] = 0.0
        heights[:, -1] = 0.0
    elif boundary.kind is BoundaryKind.FIXED:
        heights[:, 0] = boundary.left
        heights[:, -1] = boundary.right
    else:  # free: ordered positive columns
        col = floor[0] + scale * (n - np.arange(n))
        heights[:, 0] = col
        heights[:, -1] = floor[-1] + scale * (n - np.arange(n))
    return heights


@dataclass
class EnsembleState:
    """n ordered discrete paths above a hard floor on a shared grid.

    heights[i, j] is line i+1 at grid point j.  frozen_cols marks columns that
    updates must not touch (boundary columns always; pinned columns for pinned
    ensembles); ties are allowed there and only there.
    """

    grid: GridInterval
    heights: np.ndarray
    boundary: BoundarySpec
    tilt: TiltParams
    floor: np.ndarray = None
    ceiling: np.ndarray = None
    frozen_cols: np.ndarray = None

    def __post_init__(self):
        self.heights = np.ascontiguousarray(self.heights, float)
        if self.heights.ndim != 2 or self.heights.shape[1] != self.grid.npoints:
            raise ModelError(
                f"heights must be (n, {self.grid.npoints}), got {self.heights.shape}")
        if self.floor is None:
            self.floor = np.zeros(self.grid.npoints)
        self.floor = np.ascontiguousarray(self.floor, float)
        if self.ceiling is None:
            self.ceiling = np.full(self.grid.npoints, np.inf)
        self.ceiling = np.ascontiguousarray(self.ceiling, float)
        if self.frozen_cols is None:
            mask = np.zeros(self.grid.npoints, bool)
            mask[0] = mask[-1] = True
            self.frozen_cols = mask
        self.frozen_cols = np.ascontiguousarray(self.frozen_cols, bool)
        for arr, name in ((self.floor, "floor"), (self.ceiling, "ceiling"),
                          (self.frozen_cols, "frozen_cols")):
            if arr.shape != (self.grid.npoints,):
                raise ModelError(f"{name} must have shape ({self.grid.npoints},)")
        if np.any(self.floor > self.ceiling):
            raise ModelError("floor must lie below the ceiling")

    @property
    def n_lines(self) -> int:
        return self.heights.shape[0]

    @classmethod
    def initial(cls, n: int, grid: GridInterval, boundary: BoundarySpec,
                tilt: TiltParams, floor: np.ndarray = None,
                ceiling: np.ndarray = None) -> "EnsembleState":
        floor_arr = np.zeros(grid.npoints) if floor is None else np.asarray(floor, float)
        heights = _default_heights(n, grid, boundary, floor_arr)
        return cls(grid, heights, boundary, tilt, floor_arr, ceiling)

    def copy(self) -> "EnsembleState":
        return EnsembleState(self.grid, self.heights.copy(), self.boundary,
                             self.tilt, self.floor.copy(), self.ceiling.copy(),
                             self.frozen_cols.copy())

    def line(self, i: int) -> np.ndarray:
        """Path of line i (1-based, as in X^i)."""
        return self.heights[i - 1]


@dataclass(frozen=True)
class OrderingReport:
    ok: bool
    line: int = -1
    index: int = -1
    value: float = math.nan
    lower: float = math.nan
    upper: float = math.nan

    def __bool__(self):
        return self.ok


def area_functional(path, grid: GridInterval) -> float:
    """Trapezoidal integral of a grid path; exact for piecewise-linear paths.

    Compensated (exact) summation kicks in above 1e6 points to keep long-grid
    accumulations from drifting.
    """
    path = np.asarray(path, float)
    if path.shape != (grid.npoints,):
        raise ModelError(
            f"path length {path.shape} does not match grid ({grid.npoints},)")
    if not np.all(np.isfinite(path)):
        raise ModelError("path contains non-finite heights")
    dt = grid.dt
    if path.size > 10 ** 6:
        terms = path * dt
        return math.fsum(terms) - 0.5 * dt * (path[0] + path[-1])
    return dt * (path.sum() - 0.5 * (path[0] + path[-1]))


def tilt_log_weight(state: EnsembleState) -> float:
    """Log of the area-tilt factor: -a * sum_i lambda**(i-1) * area(line i)."""
    coef = state.tilt.line_coefficients(state.n_lines)
    total = 0.0
    for i in range(state.n_lines):
        total += coef[i] * area_functional(state.heights[i], state.grid)
    return -total


def gaussian_bridge_mass(x, y, duration: float) -> float:
    """Total mass (2*pi*d)^(-n/2) * exp(-|y-x|^2 / (2d)) of the n-bridge measure."""
    if duration <= 0:
        raise ModelError(f"duration must be positive, got {duration}")
    x = np.atleast_1d(np.asarray(x, float))
    y = np.atleast_1d(np.asarray(y, float))
    if x.shape != y.shape:
        raise ModelError(f"x and y must have equal length, got {x.shape} vs {y.shape}")
    n = x.size
    sq = float(np.dot(y - x, y - x))
    return (2.0 * math.pi * duration) ** (-n / 2.0) * math.exp(-sq / (2.0 * duration))


def check_ordering(state: EnsembleState) -> OrderingReport:
    """Strict interior ordering: X^1 > ... > X^n > floor, below the ceiling.

    Frozen columns (boundary, pins) are exempt; the first violation is
    reported with its location and the violated bound.
    """
    h = state.heights
    n = state.n_lines
    for j in range(state.grid.npoints):
        if state.frozen_cols[j]:
            continue
        for i in range(n):
            upper = state.ceiling[j] if i == 0 else min(h[i - 1, j], state.ceiling[j])
            lower = state.floor[j] if i == n - 1 else max(h[i + 1, j], state.floor[j])
            x = h[i, j]
            if not np.isfinite(x) or not (lower < x < upper):
                return OrderingReport(False, i, j, float(x), float(lower), float(upper))
    return OrderingReport(True)
