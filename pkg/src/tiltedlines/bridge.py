"""Exact Gaussian bridge sampling and log-densities on the grid.

These are the base-measure primitives every tilted sampler builds on: the
discrete Brownian bridge is sampled by sequential conditionals (exact in law,
cache-friendly on long grids) and its density is the product of Gaussian
increments relative to the pinned endpoint mass.
"""

import math

import numpy as np

from . import _kernels as _k
from .model import GridInterval, ModelError
from .rng import RngStream

__all__ = ["sample_bridge", "bridge_point_conditional", "bridge_log_density"]


def sample_bridge(grid: GridInterval, x: float, y: float, rng: RngStream) -> np.ndarray:
    """One Brownian bridge path on the grid with path[0]=x, path[m]=y exactly."""
    out = np.empty(grid.npoints)
    used = _k.bridge_fill(out, float(x), float(y), grid.dt, rng.key, 0,
                          rng.counter)
    rng.counter = int(used)
    return out


def bridge_point_conditional(left_t: float, left_h: float, right_t: float,
                             right_h: float, t: float):
    """(mean, variance) of a Brownian path at t pinned at (left_t, left_h),
    (right_t, right_h)."""
    if not (left_t < t < right_t):
        raise ModelError(f"need left_t < t < right_t, got {left_t}, {t}, {right_t}")
    span = right_t - left_t
    mean = left_h + (t - left_t) * (right_h - left_h) / span
    var = (t - left_t) * (right_t - t) / span
    return mean, var


def _norm_logpdf(x: float, var: float) -> float:
    return -0.5 * math.log(2.0 * math.pi * var) - x * x / (2.0 * var)


def bridge_log_density(path, grid: GridInterval, x: float, y: float) -> float:
    """Log density of the interior of a discrete bridge w.r.t. Lebesgue measure.

    Sum of increment Gaussians minus the pinned-endpoint mass; zero when the
    grid has no interior points.
    """
    path = np.asarray(path, float)
    if path.shape != (grid.npoints,):
        raise ModelError(f"path shape {path.shape} does not match the grid")
    if not (math.isclose(path[0], x, abs_tol=1e-12)
            and math.isclose(path[-1], y, abs_tol=1e-12)):
        raise ModelError("path endpoints do not match (x, y)")
    if grid.steps == 1:
        return 0.0
    dt = grid.dt
    total = 0.0
    for j in range(grid.steps):
        total += _norm_logpdf(path[j + 1] - path[j], dt)
    total -= _norm_logpdf(y - x, grid.r - grid.ell)
    return total
