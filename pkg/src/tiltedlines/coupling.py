"""Order-preserving couplings and the stopping-domain reverse coupling.

The monotone (grand) coupling evolves two states with one shared uniform per
(line, grid index); because each truncated-Gaussian conditional CDF is
stochastically monotone in (neighbors, floor, boundary), pointwise order is
preserved sweep by sweep.  The certificate is re-verified after every sweep,
never assumed.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as _k
from .gibbs import ChainConfig, InvariantViolation, run_chain
from .model import (BoundaryKind, BoundarySpec, EnsembleState, GridInterval,
                    ModelError, TiltParams)
from .rng import RngStream

__all__ = ["CoupledPair", "StoppingDomain", "make_coupled_pair",
           "monotone_coupled_sweep", "detect_stopping_domain",
           "reverse_coupling_experiment", "pinned_ensemble_sample",
           "estimate_pinned_exceedance"]


@dataclass
class CoupledPair:
    low: EnsembleState
    high: EnsembleState
    key: np.uint64
    sweep_done: int = 0
    order_certificate: bool = True
    repairs: int = 0
    violation_at: Optional[tuple] = None


def _pointwise_leq(a: EnsembleState, b: EnsembleState) -> bool:
    return bool(np.all(a.heights <= b.heights))


def make_coupled_pair(low: EnsembleState, high: EnsembleState,
                      seed: int, pair_id: int = 0) -> CoupledPair:
    """Couple two states on the same grid and tilt; low must start below high."""
    if low.grid != high.grid:
        raise ModelError("coupled states must share the grid")
    if low.tilt != high.tilt:
        raise ModelError("coupled states must share the tilt")
    if low.n_lines != high.n_lines:
        raise ModelError("coupled states must have the same number of lines")
    cert = _pointwise_leq(low, high)
    key = RngStream(seed, pair_id).split(0x434F5550).key
    return CoupledPair(low, high, key, 0, cert, 0)


def monotone_coupled_sweep(pair: CoupledPair, nsweeps: int = 1) -> CoupledPair:
    """Run shared-uniform heat-bath sweeps on both states (in place).

    The certificate is set from an explicit low <= high comparison after each
    sweep; float-level midpoint repairs (see the kernel) are accumulated in
    pair.repairs.
    """
    lo, hi = pair.low, pair.high
    stats = np.zeros(6, np.int64)
    err, cert, line, col = _k.coupled_heat_bath_sweeps(
        lo.heights, hi.heights, lo.floor, hi.floor, lo.ceiling, hi.ceiling,
        (~lo.frozen_cols).astype(np.uint8), (~hi.frozen_cols).astype(np.uint8),
        lo.tilt.line_coefficients(lo.n_lines), lo.grid.dt,
        pair.key, pair.sweep_done, nsweeps, stats)
    pair.sweep_done += nsweeps
    pair.repairs += int(stats[5])
    if err != _k.ERR_OK:
        raise InvariantViolation(
            f"empty corridor in coupled sweep at line {line}, col {col}")
    if not cert:
        pair.order_certificate = False
        pair.violation_at = (int(line), int(col))
    return pair


@dataclass(frozen=True)
class StoppingDomain:
    """Random interval [tau_ell, tau_r] where the bottom line clears height u."""

    tau_ell: int
    tau_r: int
    threshold: float
    found: bool


def detect_stopping_domain(state: EnsembleState, u: float) -> StoppingDomain:
    """First/last grid indices where the bottom line is >= u (closed compare)."""
    if u <= 0:
        raise ModelError("threshold u must be positive")
    bottom = state.heights[-1]
    hits = np.nonzero(bottom >= u)[0]
    if hits.size == 0:
        return StoppingDomain(-1, -1, u, False)
    ta, tr = int(hits[0]), int(hits[-1])
    return StoppingDomain(ta, tr, u, ta < tr)


def _window_state(parent: EnsembleState, ja: int, jb: int,
                  interp_heights: np.ndarray) -> EnsembleState:
    t = parent.grid.times()
    sub = GridInterval(float(t[ja]), float(t[jb]), jb - ja)
    boundary = BoundarySpec.fixed(parent.heights[:, ja], parent.heights[:, jb])
    return EnsembleState(sub, interp_heights, boundary, parent.tilt,
                         parent.floor[ja:jb + 1].copy(),
                         parent.ceiling[ja:jb + 1].copy())


def _linear_interp_heights(h: np.ndarray, ja: int, jb: int) -> np.ndarray:
    cols = np.linspace(0.0, 1.0, jb - ja + 1)
    return h[:, ja, None] * (1 - cols) + h[:, jb, None] * cols


def reverse_coupling_experiment(n: int, t_half: float, u: float, seed: int,
                                trial_id: int = 0, dt: float = 0.1,
                                tilt: TiltParams = None, burn_in: int = 1500,
                                window_sweeps: int = 1500,
                                n_samples_probe: int = 1) -> dict:
    """One trial of the stopping-domain reverse coupling.

    Draws independent equilibrated free (X) and zero (Y) samples on
    [-t_half, t_half]; finds the stopping domain from Y's bottom line; checks
    the event A = {X^1 <= u at both stopping times}; on B = A and
    {tau_ell < -T/2 < T/2 < tau_r}, re-equilibrates both ensembles inside the
    window under the monotone coupling with frozen boundary data (free as
    low, zero as high).  Failure of B is a valid outcome, not an error.
    """
    if tilt is None:
        tilt = TiltParams(1.0, 2.0)
    steps = int(round(2 * t_half / dt))
    grid = GridInterval(-t_half, t_half, steps)

    def equilibrated(boundary, sub_id):
        cfg = ChainConfig(n, grid, tilt, boundary, n_samples=n_samples_probe,
                          thin=1, burn_in=burn_in, seed=seed,
                          chain_id=(trial_id << 8) | sub_id)
        return run_chain(cfg).final_state

    x_state = equilibrated(BoundarySpec.free(), 1)
    y_state = equilibrated(BoundarySpec.zero(), 2)

    sd = detect_stopping_domain(y_state, u)
    t = grid.times()
    in_bulk = (sd.found and t[sd.tau_ell] < -t_half / 2.0
               and t[sd.tau_r] > t_half / 2.0)
    event_a = bool(in_bulk
                   and x_state.heights[0, sd.tau_ell] <= u
                   and x_state.heights[0, sd.tau_r] <= u)
    result = {
        "trial_id": trial_id, "t_half": t_half, "n": n, "u": u,
        "found": bool(sd.found), "event_b": event_a, "success": False,
        "tau_ell": float(t[sd.tau_ell]) if sd.found else math.nan,
        "tau_r": float(t[sd.tau_r]) if sd.found else math.nan,
        "repairs": 0,
    }
    if not event_a:
        return result

    ja, jb = sd.tau_ell, sd.tau_r
    low = _window_state(x_state, ja, jb, _linear_interp_heights(x_state.heights, ja, jb))
    high = _window_state(y_state, ja, jb, _linear_interp_heights(y_state.heights, ja, jb))
    pair = make_coupled_pair(low, high, seed, pair_id=(trial_id << 8) | 3)
    monotone_coupled_sweep(pair, window_sweeps)
    x_res = x_state.heights.copy()
    y_res = y_state.heights.copy()
    x_res[:, ja:jb + 1] = pair.low.heights
    y_res[:, ja:jb + 1] = pair.high.heights
    half = slice(grid.index_of(-t_half / 2.0), grid.index_of(t_half / 2.0) + 1)
    ordered = bool(np.all(x_res[:, half] <= y_res[:, half]))
    result["success"] = bool(pair.order_certificate and ordered)
    result["repairs"] = pair.repairs
    return result


def pinned_ensemble_sample(n: int, t_half: float, tilt: TiltParams,
                           seed: int, pin_spacing: float = 2.0,
                           dt: float = 0.05, burn_in: int = 1000,
                           sample_id: int = 0) -> EnsembleState:
    """Sample the ensemble pinned to zero at times -T, -T+spacing, ..., T.

    The blocks between pins are independent zero-boundary ensembles (sampled
    as independent chains); pin columns are frozen at height zero.
    """
    if t_half < pin_spacing:
        raise ModelError("need t_half >= pin_spacing")
    nblocks = int(round(2 * t_half / pin_spacing))
    if abs(nblocks * pin_spacing - 2 * t_half) > 1e-9:
        raise ModelError("pin spacing must divide the interval length")
    steps_per = int(round(pin_spacing / dt))
    grid = GridInterval(-t_half, t_half, steps_per * nblocks)
    heights = np.zeros((n, grid.npoints))
    frozen = np.zeros(grid.npoints, bool)
    for b in range(nblocks + 1):
        frozen[b * steps_per] = True
    for b in range(nblocks):
        sub = GridInterval(-t_half + b * pin_spacing,
                           -t_half + (b + 1) * pin_spacing, steps_per)
        cfg = ChainConfig(n, sub, tilt, BoundarySpec.zero(), n_samples=1,
                          thin=1, burn_in=burn_in, seed=seed,
                          chain_id=(sample_id << 12) | b)
        heights[:, b * steps_per:(b + 1) * steps_per + 1] = \
            run_chain(cfg).final_state.heights
    return EnsembleState(grid, heights, BoundarySpec.zero(), tilt,
                         frozen_cols=frozen)


def estimate_pinned_exceedance(k: int, v: float, trials: int, seed: int,
                               tilt: TiltParams = None, dt: float = 0.02,
                               burn_in: int = 2000, gap: int = 50,
                               n_chains: int = 4) -> dict:
    """Monte Carlo estimate of p_k(v): all k lines of the zero-boundary
    ensemble on [-1, 1] clear v * lambda^{-(i-1)/3} at time 0.

    Draws come from n_chains independent chains thinned by `gap` sweeps
    (>= 10x the measured autocorrelation time at this grid size).
    """
    from scipy.stats import beta as _beta

    if k < 1 or v < 0:
        raise ModelError("need k >= 1 and v >= 0")
    if tilt is None:
        tilt = TiltParams(1.0, 2.0)
    grid = GridInterval(-1.0, 1.0, int(round(2.0 / dt)))
    per = (trials + n_chains - 1) // n_chains
    thresholds = v * tilt.lam ** (-(np.arange(k)) / 3.0)
    collected = []
    for c in range(n_chains):
        cfg = ChainConfig(k, grid, tilt, BoundarySpec.zero(), n_samples=per,
                          thin=gap, burn_in=burn_in, seed=seed, chain_id=c,
                          record_times=[0.0])
        collected.append(run_chain(cfg).points[:, :, 0])  # (kept, k)
    cols = np.concatenate(collected)[:trials]
    hits = int(np.sum(np.all(cols >= thresholds[None, :], axis=1)))
    total = cols.shape[0]
    alpha = 0.05
    lo = _beta.ppf(alpha / 2, hits, total - hits + 1) if hits > 0 else 0.0
    hi = (_beta.ppf(1 - alpha / 2, hits + 1, total - hits)
          if hits < total else 1.0)
    return {"k": k, "v": v, "p_hat": hits / total if total else math.nan,
            "ci_lo": float(lo), "ci_hi": float(hi),
            "hits": hits, "trials": total}
