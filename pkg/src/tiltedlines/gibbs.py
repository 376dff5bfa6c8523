"""MCMC engine targeting the discrete tilted line-ensemble measure.

The target on a grid is the product of Gaussian increments, the trapezoidal
area tilt exp(-a sum_i lambda^{i-1} area_i), and the strict interior ordering
constraints.  The kernel mixes exact single-site heat-bath updates (truncated
Gaussians, the tilt shifts the mean by -a lambda^{i-1} dt * variance), random
Brownian-bridge block proposals accepted on the tilt change, and column-wise
Metropolis moves of free boundary columns.
"""

import math
import os
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import _kernels as _k
from .model import (BoundaryKind, BoundarySpec, EnsembleState, GridInterval,
                    ModelError, TiltParams, check_ordering)
from .rng import RngStream
from . import serialize

__all__ = ["BlockSpec", "ChainConfig", "SampleSet", "InvariantViolation",
           "run_chain", "heat_bath_point", "resample_block",
           "free_endpoint_move", "exact_small_grid_marginal",
           "ExactMarginal"]


class InvariantViolation(RuntimeError):
    def __init__(self, msg, dump_path=None):
        super().__init__(msg + (f" (state dumped to {dump_path})" if dump_path else ""))
        self.dump_path = dump_path


@dataclass(frozen=True)
class BlockSpec:
    """Resampling domain: lines 1..bottom_line on grid window [j_a, j_b]."""

    bottom_line: int
    window: tuple
    top_line: int = 1

    def __post_init__(self):
        if self.top_line != 1:
            raise ModelError("this artifact resamples blocks anchored at the top line")
        ja, jb = self.window
        if jb - ja < 2:
            raise ModelError("block window must contain at least one interior point")
        if self.bottom_line < 1:
            raise ModelError("bottom_line must be >= 1")


@dataclass
class ChainConfig:
    n_lines: int
    grid: GridInterval
    tilt: TiltParams
    boundary: BoundarySpec
    n_samples: int = 1000
    thin: int = 10
    burn_in: Optional[int] = None  # None: adaptive, >= 10^4 sweeps
    sigma_prop: float = 0.25
    blocks_per_sweep: Optional[int] = None  # None: 2 when the grid allows blocks
    seed: int = 0
    chain_id: int = 0
    record_times: Optional[list] = None  # None: the grid midpoint
    record_window: Optional[float] = None  # S: record per-line max over [-S, S]
    floor: Optional[np.ndarray] = None
    checkpoint_path: Optional[str] = None
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.n_lines < 1:
            raise ModelError("n_lines must be >= 1")
        if self.thin < 1 or self.n_samples < 0:
            raise ModelError("thin must be >= 1 and n_samples >= 0")
        if self.sigma_prop <= 0:
            raise ModelError("sigma_prop must be positive")


@dataclass
class SampleSet:
    """Thinned chain observables plus full seed provenance."""

    points: np.ndarray            # (kept, n_lines, n_times)
    point_times: np.ndarray
    window_max: Optional[np.ndarray]   # (kept, n_lines) or None
    window_s: Optional[float]
    meta: dict
    final_state: EnsembleState

    @property
    def n_kept(self) -> int:
        return self.points.shape[0]

    def line_point(self, line: int, t: float = None) -> np.ndarray:
        """Samples of X^line at recorded time t (1-based line index)."""
        if t is None:
            c = 0
        else:
            c = int(np.argmin(np.abs(self.point_times - t)))
            if abs(self.point_times[c] - t) > 1e-9:
                raise ModelError(f"time {t} was not recorded")
        return self.points[:, line - 1, c]


def _kernel_arrays(state: EnsembleState):
    upd = (~state.frozen_cols).astype(np.uint8)
    return (state.heights, np.empty_like(state.heights),
            np.empty(state.n_lines), state.floor, state.ceiling, upd)


def _chain_key(seed: int, chain_id: int) -> np.uint64:
    return RngStream(seed, chain_id).split(0x53574545).key


def _iat(series: np.ndarray, max_lag: int = 2000) -> float:
    """Integrated autocorrelation time with an initial-positive window."""
    x = series - series.mean()
    n = x.size
    if n < 16 or np.allclose(x, 0):
        return 1.0
    var = float(np.dot(x, x)) / n
    if var == 0:
        return 1.0
    tau = 1.0
    for lag in range(1, min(max_lag, n // 4)):
        rho = float(np.dot(x[:-lag], x[lag:])) / ((n - lag) * var)
        if rho < 0.02:
            break
        tau += 2.0 * rho
    return max(tau, 1.0)


def run_chain(config: ChainConfig, observables=None, resume: bool = False):
    """Burn in, then record `n_samples` thinned sweeps; returns a SampleSet.

    One sweep = a full heat-bath pass over all lines and interior points,
    plus scheduled block-bridge moves, plus free-endpoint moves when the
    boundary is free.  Identical config and seed reproduce the SampleSet
    bit-for-bit; with checkpoint_path set, interrupting and resuming is
    bit-identical to an uninterrupted run.
    """
    grid, n = config.grid, config.n_lines
    free = config.boundary.kind is BoundaryKind.FREE
    m = grid.steps
    blocks = config.blocks_per_sweep
    if blocks is None:
        blocks = 2 if m // 4 >= 4 else 0
    tiltc = config.tilt.line_coefficients(n)
    key = _chain_key(config.seed, config.chain_id)

    rec_times = config.record_times
    if rec_times is None:
        rec_times = [grid.ell + 0.5 * (grid.r - grid.ell)]
    rec_cols = np.array(sorted({grid.index_of(t) for t in rec_times}), np.int64)
    rec_times = grid.times()[rec_cols]
    if config.record_window is not None:
        s = config.record_window
        center = grid.ell + 0.5 * (grid.r - grid.ell)
        jlo, jhi = grid.index_of(center - s), grid.index_of(center + s)
    else:
        jlo, jhi = 0, -1

    ckpt = config.checkpoint_path
    if resume and ckpt and os.path.exists(ckpt):
        state, extra = serialize.load_state(ckpt)
        sweep_done = extra["sweep_done"]
        burn_used = extra["burn_in"]
        stats = np.array(extra["stats"], np.int64)
        out_cols = np.array(extra["out_cols"], float).reshape(
            config.n_samples, n, len(rec_cols))
        out_max = np.array(extra["out_max"], float).reshape(config.n_samples, n)
    else:
        state = EnsembleState.initial(n, grid, config.boundary, config.tilt,
                                      floor=config.floor)
        sweep_done = 0
        burn_used = None
        stats = np.zeros(6, np.int64)
        out_cols = np.zeros((config.n_samples, n, len(rec_cols)))
        out_max = np.zeros((config.n_samples, n))

    heights, prop, scratch, floor, ceiling, upd = _kernel_arrays(state)

    def sweeps(nsweeps, thin):
        nonlocal sweep_done
        err, done = _k.run_sweeps(
            heights, prop, scratch, floor, ceiling, upd, tiltc, grid.dt,
            free, free, config.sigma_prop, blocks, n,
            key, sweep_done, nsweeps,
            thin, rec_cols, out_cols, jlo, jhi, out_max, stats)
        sweep_done += done
        if err != _k.ERR_OK:
            path = None
            if ckpt:
                path = ckpt + ".violation"
                serialize.dump_state(state, path, {"sweep": sweep_done})
            raise InvariantViolation(
                f"empty conditional corridor at sweep {sweep_done}", path)

    # ---- burn-in ----
    if burn_used is None:
        if config.burn_in is not None:
            burn_used = int(config.burn_in)
            sweeps(burn_used, 0)
        else:
            # adaptive: 10x the autocorrelation time of X^1(center), >= 1e4
            pilot = 10 ** 4
            save = out_cols[:, :, :].copy()
            probe = np.zeros((pilot, n, len(rec_cols)))
            probe_max = np.zeros((pilot, n))
            pstats = stats.copy()
            pstats[4] = 0
            err, done = _k.run_sweeps(
                heights, prop, scratch, floor, ceiling, upd, tiltc, grid.dt,
                free, free, config.sigma_prop, blocks, n,
                key, sweep_done, pilot, 1, rec_cols, probe, jlo, jhi,
                probe_max, pstats)
            sweep_done += done
            stats[:4] = pstats[:4]
            out_cols[:, :, :] = save
            if err != _k.ERR_OK:
                raise InvariantViolation(f"empty corridor during burn-in")
            tau = _iat(probe[:, 0, 0])
            burn_used = int(max(pilot, min(10 * tau, 10 ** 5)))
            if burn_used > pilot:
                sweeps(burn_used - pilot, 0)

    # ---- sampling ----
    total = config.n_samples * config.thin
    done_kept = int(stats[4])
    while done_kept < config.n_samples:
        remaining = (config.n_samples - done_kept) * config.thin
        chunk = min(remaining, config.checkpoint_every * config.thin
                    if config.checkpoint_every else remaining)
        sweeps(chunk, config.thin)
        done_kept = int(stats[4])
        if ckpt and config.checkpoint_every and done_kept < config.n_samples:
            serialize.dump_state(state, ckpt, {
                "sweep_done": sweep_done, "burn_in": burn_used,
                "stats": [int(v) for v in stats],
                "out_cols": out_cols.ravel().tolist(),
                "out_max": out_max.ravel().tolist()})

    rep = check_ordering(state)
    if not rep:
        path = None
        if ckpt:
            path = ckpt + ".violation"
            serialize.dump_state(state, path, {"sweep": sweep_done})
        raise InvariantViolation(
            f"ordering violated at line {rep.line}, index {rep.index}", path)

    meta = {
        "seed": config.seed, "chain_id": config.chain_id,
        "burn_in": burn_used, "thin": config.thin,
        "sweeps_total": sweep_done,
        "blocks_tried": int(stats[0]), "blocks_accepted": int(stats[1]),
        "endpoint_tried": int(stats[2]), "endpoint_accepted": int(stats[3]),
    }
    wmax = out_max if config.record_window is not None else None
    return SampleSet(out_cols, rec_times, wmax, config.record_window, meta, state)


# ---------------------------------------------------------------------------
# single-move operations (the documented contracts behind the fused kernel)
# ---------------------------------------------------------------------------

def heat_bath_point(state: EnsembleState, line: int, j: int, rng: RngStream):
    """Exact draw of heights[line-1][j] from its full conditional (in place).

    The conditional is the bridge-point Gaussian with the mean shifted by
    -a lambda^{i-1} dt * variance, truncated to the corridor between the
    neighboring lines (or floor/ceiling).
    """
    i = line - 1
    n = state.n_lines
    if not (0 < j < state.grid.steps):
        raise ModelError("heat_bath_point needs an interior grid index")
    if state.frozen_cols[j]:
        raise ModelError(f"column {j} is frozen")
    h = state.heights
    dt = state.grid.dt
    v = 0.5 * dt
    coef = state.tilt.line_coefficients(n)[i]
    mu = 0.5 * (h[i, j - 1] + h[i, j + 1]) - coef * dt * v
    lo = state.floor[j] if i == n - 1 else max(h[i + 1, j], state.floor[j])
    hi = state.ceiling[j] if i == 0 else min(h[i - 1, j], state.ceiling[j])
    if hi <= lo:
        raise InvariantViolation(f"empty corridor at line {line}, index {j}")
    u = rng.uniform()
    h[i, j] = _k._site_draw(u, mu, math.sqrt(v), lo, hi)
    return state


def resample_block(state: EnsembleState, block: BlockSpec, rng: RngStream):
    """One Metropolis-within-Gibbs block update (in place); returns acceptance.

    Proposes independent bridges for lines 1..k between the window endpoints
    and accepts with probability exp(delta tilt log-weight) times the
    ordering indicator.
    """
    from .bridge import sample_bridge

    ja, jb = block.window
    k = block.bottom_line
    n = state.n_lines
    if k > n:
        raise ModelError(f"bottom_line {k} exceeds n={n}")
    if not (0 <= ja < jb <= state.grid.steps):
        raise ModelError(f"window {block.window} outside the grid")
    if np.any(state.frozen_cols[ja + 1:jb]):
        raise ModelError("block window crosses frozen columns")
    dt = state.grid.dt
    sub = GridInterval(0.0, (jb - ja) * dt, jb - ja)
    h = state.heights
    prop = np.array([sample_bridge(sub, h[i, ja], h[i, jb], rng)
                     for i in range(k)])
    # ordering indicator on interior window columns
    cols = slice(1, jb - ja)
    ok = np.all(np.diff(prop[:, cols], axis=0) < 0) if k > 1 else True
    ok = ok and np.all(prop[0, cols] < state.ceiling[ja + 1:jb])
    below = state.floor[ja + 1:jb] if k == n else \
        np.maximum(h[k, ja + 1:jb], state.floor[ja + 1:jb])
    ok = ok and np.all(prop[k - 1, cols] > below)
    u = rng.uniform()
    if not ok:
        return False
    coef = state.tilt.line_coefficients(n)[:k]
    dlog = float(np.sum(coef[:, None] * dt *
                        (h[:k, ja + 1:jb] - prop[:, cols])))
    if math.log(u) < dlog:
        h[:k, ja + 1:jb] = prop[:, cols]
        return True
    return False


def free_endpoint_move(state: EnsembleState, side: str, rng: RngStream,
                       sigma_prop: float = 0.25):
    """Column-wise Metropolis update of a free boundary column (in place)."""
    if state.boundary.kind is not BoundaryKind.FREE:
        raise ModelError("endpoint moves need a free boundary")
    j = 0 if side == "left" else state.grid.npoints - 1
    jn = 1 if side == "left" else state.grid.npoints - 2
    n = state.n_lines
    h = state.heights
    dt = state.grid.dt
    coef = state.tilt.line_coefficients(n)
    z = rng.normal(n)
    xnew = h[:, j] + sigma_prop * np.asarray(z)
    ok = np.all(np.diff(xnew) < 0) and xnew[-1] > state.floor[j]
    logr = float(np.sum(((h[:, jn] - h[:, j]) ** 2 - (h[:, jn] - xnew) ** 2)
                        / (2.0 * dt) - coef * 0.5 * dt * (xnew - h[:, j])))
    u = rng.uniform()
    if ok and math.log(u) < logr:
        h[:, j] = xnew
        return True
    return False


# ---------------------------------------------------------------------------
# exact small-grid oracle
# ---------------------------------------------------------------------------

@dataclass
class ExactMarginal:
    """Quadrature marginals of the n=1 discrete target on a tiny grid."""

    nodes: np.ndarray            # 1-d quadrature nodes shared by all marginals
    weights: np.ndarray
    marginals: np.ndarray        # (n_interior, nodes): normalized densities
    log_norm: float
    cutoff: float
    # bin_masses(edges, point, order) is attached at construction: exact bin
    # probabilities by re-integrating the joint at fresh per-bin nodes.

    def pdf(self, point: int = 0):
        return self.nodes, self.marginals[point]


def exact_small_grid_marginal(grid: GridInterval, tilt: TiltParams,
                              boundary: BoundarySpec = None,
                              positivity: bool = True,
                              nodes: int = 240) -> ExactMarginal:
    """Tensor-product Gauss-Legendre quadrature of the n=1 discrete density.

    Supports at most 3 interior points; the cutoff is placed where the
    single-point profile falls below 1e-12 of its peak.
    """
    d = grid.steps - 1
    if d < 1 or d > 3:
        raise ModelError("exact marginal supports 1..3 interior points")
    if nodes < 200:
        raise ModelError("need at least 200 quadrature nodes per dimension")
    if boundary is None:
        boundary = BoundarySpec.zero()
    if boundary.kind is BoundaryKind.ZERO:
        x0, y0 = 0.0, 0.0
    elif boundary.kind is BoundaryKind.FIXED:
        x0, y0 = float(boundary.left[0]), float(boundary.right[0])
    else:
        raise ModelError("exact marginal needs zero or fixed boundary")
    dt = grid.dt
    a_coef = tilt.a  # n=1: tilt coefficient a * lambda^0

    def logdens_cols(vcols):
        # vcols: list of d arrays broadcastable to a common shape
        s = -(vcols[0] - x0) ** 2 / (2 * dt)
        for i in range(1, d):
            s = s - (vcols[i] - vcols[i - 1]) ** 2 / (2 * dt)
        s = s - (y0 - vcols[d - 1]) ** 2 / (2 * dt)
        for i in range(d):
            s = s - a_coef * dt * vcols[i]
        return s

    # cutoff from the 1-point profile through the straight line
    probe = np.linspace(0.0 if positivity else -8.0, 10.0, 2000)
    prof = np.exp(logdens_cols([probe] * d))
    peak = prof.max()
    above = probe[prof > 1e-12 * peak]
    cutoff = float(above.max()) + 0.5
    lo_edge = 0.0 if positivity else float(above.min()) - 0.5

    xg, wg = np.polynomial.legendre.leggauss(nodes)
    x = 0.5 * (cutoff - lo_edge) * (xg + 1) + lo_edge
    w = 0.5 * (cutoff - lo_edge) * wg

    if d == 1:
        f = np.exp(logdens_cols([x]))
        z = float(np.dot(w, f))
        marg = f[None, :] / z
    elif d == 2:
        v1, v2 = np.meshgrid(x, x, indexing="ij")
        f = np.exp(logdens_cols([v1, v2]))
        z = float(w @ f @ w)
        marg = np.stack([(f @ w) / z, (w @ f) / z])
    else:
        f23 = np.zeros((nodes, nodes))  # joint of (v2, v3) integrated over v1
        f12 = np.zeros((nodes, nodes))  # joint of (v1, v2) integrated over v3
        v2g, v3g = np.meshgrid(x, x, indexing="ij")
        for i1 in range(nodes):
            f = np.exp(logdens_cols([np.full_like(v2g, x[i1]), v2g, v3g]))
            f23 += w[i1] * f
            f12[i1] = f @ w
        m1 = f12 @ w
        z = float(np.dot(w, m1))
        marg = np.stack([m1 / z, (f23 @ w) / z, (w @ f23) / z])

    def marginal_at(point: int, vals: np.ndarray) -> np.ndarray:
        """Unnormalized marginal density of interior point `point` at `vals`."""
        out = np.empty(vals.size)
        for q, vq in enumerate(vals):
            if d == 1:
                out[q] = math.exp(float(logdens_cols([np.array([vq])])[0]))
            elif d == 2:
                cols = ([np.full(nodes, vq), x] if point == 0
                        else [x, np.full(nodes, vq)])
                out[q] = float(np.dot(w, np.exp(logdens_cols(cols))))
            else:
                va, vb = np.meshgrid(x, x, indexing="ij")
                fixed = np.full_like(va, vq)
                cols = {0: [fixed, va, vb], 1: [va, fixed, vb],
                        2: [va, vb, fixed]}[point]
                out[q] = float(w @ np.exp(logdens_cols(cols)) @ w)
        return out

    em = ExactMarginal(x, w, marg, math.log(z), cutoff)

    def bin_masses(edges, point: int = 0, order: int = 32):
        edges = np.asarray(edges, float)
        xg2, wg2 = np.polynomial.legendre.leggauss(order)
        out = np.empty(edges.size - 1)
        for b in range(edges.size - 1):
            aa, bb = edges[b], edges[b + 1]
            xv = 0.5 * (bb - aa) * (xg2 + 1) + aa
            wv = 0.5 * (bb - aa) * wg2
            out[b] = float(np.dot(wv, marginal_at(point, xv))) / z
        return out

    em.bin_masses = bin_masses
    return em
