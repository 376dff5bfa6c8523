"""The Ferrari-Spohn diffusion as an exact reference process.

Stationary density proportional to Ai(2^{1/3} x - omega_1)^2 on x > 0; the
process itself is simulated as the Langevin diffusion with that invariant law
(drift (log phi)', unit diffusion), plus a reflecting guard at a small
eps_wall where the drift blows up.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from .airy import airy_ai, airy_ai_prime, airy_first_zero
from .rng import RngStream

__all__ = ["FSReference", "get_fs", "fs_density", "fs_cdf", "fs_ppf",
           "fs_sample_stationary", "fs_simulate_path", "fs_max_tail",
           "fs_lower_tail", "fs_mean", "EPS_WALL"]

_CBRT2 = 2.0 ** (1.0 / 3.0)
EPS_WALL = 1e-8


def _unnorm_density(x):
    x = np.asarray(x, float)
    out = np.where(x > 0.0, airy_ai(_CBRT2 * x - airy_first_zero()) ** 2, 0.0)
    return out if out.ndim else float(out)


def _adaptive_simpson(f, a, b, tol):
    """Plain adaptive Simpson; tol is absolute on each panel (summed)."""

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm = f(lm)
        frm = f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        if depth <= 0 or abs(left + right - whole) < 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return (rec(a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(m, b, fm, frm, fb, right, tol / 2.0, depth - 1))

    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return rec(a, b, fa, fm, fb, whole, tol, 48)


@dataclass
class FSReference:
    """Normalization, CDF table and samplers for the stationary FS law."""

    cdf_points: int = 8193
    cutoff: float = field(default=None)
    z_const: float = field(default=None)
    xs: np.ndarray = field(default=None, repr=False)
    pdf: np.ndarray = field(default=None, repr=False)
    cdf: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        om1 = airy_first_zero()
        peak = float(np.max(_unnorm_density(np.linspace(1e-4, 4.0, 400))))
        x = 4.0
        while _unnorm_density(x) > 1e-12 * peak:
            x += 0.25
        self.cutoff = x
        self.z_const = _adaptive_simpson(_unnorm_density, 0.0, self.cutoff,
                                         1e-9 * peak)
        self.xs = np.linspace(0.0, self.cutoff, self.cdf_points)
        self.pdf = _unnorm_density(self.xs) / self.z_const
        # cumulative Simpson on the uniform grid (pairs of intervals)
        h = self.xs[1] - self.xs[0]
        cdf = np.empty_like(self.pdf)
        cdf[0] = 0.0
        f = self.pdf
        for i in range(1, self.cdf_points):
            if i % 2 == 0:
                cdf[i] = cdf[i - 2] + h / 3.0 * (f[i - 2] + 4.0 * f[i - 1] + f[i])
            else:
                # trapezoid bootstrap for odd nodes, refined by local Simpson
                cdf[i] = cdf[i - 1] + h / 12.0 * (
                    5.0 * f[i] + 8.0 * f[i - 1] - (f[i - 2] if i >= 2 else f[i - 1]))
        cdf /= cdf[-1]
        np.maximum.accumulate(cdf, out=cdf)
        self.cdf = cdf

    # -- distribution functions ----------------------------------------------

    def density(self, x):
        return _unnorm_density(x) / self.z_const

    def cdf_at(self, x):
        x = np.asarray(x, float)
        out = np.interp(x, self.xs, self.cdf, left=0.0, right=1.0)
        return out if out.ndim else float(out)

    def ppf(self, u):
        u = np.asarray(u, float)
        out = np.interp(u, self.cdf, self.xs)
        return out if out.ndim else float(out)

    def mean(self) -> float:
        f = lambda x: x * _unnorm_density(x)
        return _adaptive_simpson(f, 0.0, self.cutoff, 1e-10) / self.z_const


_FS = None


def get_fs() -> FSReference:
    global _FS
    if _FS is None:
        _FS = FSReference()
    return _FS


def fs_density(x):
    """Stationary FS density: Ai(2^{1/3}x - omega_1)^2 / Z on x>0, else 0."""
    return get_fs().density(x)


def fs_cdf(x):
    return get_fs().cdf_at(x)


def fs_ppf(u):
    return get_fs().ppf(u)


def fs_mean() -> float:
    return get_fs().mean()


def fs_sample_stationary(rng: RngStream, size=None):
    """Stationary draws by inverse CDF on the tabulated distribution."""
    return get_fs().ppf(rng.uniform(size))


def fs_simulate_path(t_half: float, dt: float, rng: RngStream,
                     eps_wall: float = EPS_WALL):
    """Euler-Maruyama path on [-t_half, t_half] from a stationary start.

    Returns (path, n_reflections)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    nsteps = int(round(2.0 * t_half / dt))
    x0 = float(fs_sample_stationary(rng))
    out = np.empty(nsteps + 1)
    key = rng.child().key  # per-path substream for the step noise
    clamps = _k.fs_euler_path(x0, nsteps, dt, airy_first_zero(), eps_wall,
                              key, out)
    return out, int(clamps)


def _binom_ci(successes: int, trials: int, z: float = 1.959964):
    """Wilson interval; adequate for reporting MC tail estimates."""
    if trials == 0:
        return 0.0, 1.0
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials ** 2)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def fs_max_tail(t_half: float, thresholds, trials: int, rng: RngStream,
                dt: float = 1e-3, eps_wall: float = EPS_WALL):
    """MC estimate of P(max over [-t_half, t_half] of Y_FS >= t) with CIs.

    Returns a list of dict rows (threshold, p_hat, ci_lo, ci_hi, trials).
    """
    if t_half < 1.0:
        raise ValueError("t_half must be >= 1")
    thresholds = np.atleast_1d(np.asarray(thresholds, float))
    nsteps = int(round(2.0 * t_half / dt))
    om1 = airy_first_zero()
    maxima = np.empty(trials)
    starts = fs_sample_stationary(rng, trials)
    for i in range(trials):
        key = rng.child().key
        _, mx, _ = _k.fs_euler_max(float(starts[i]), nsteps, dt, om1,
                                   eps_wall, key)
        maxima[i] = mx
    rows = []
    for t in thresholds:
        k = int(np.sum(maxima >= t))
        lo, hi = _binom_ci(k, trials)
        rows.append({"threshold": float(t), "p_hat": k / trials,
                     "ci_lo": lo, "ci_hi": hi, "trials": trials})
    return rows


def fs_lower_tail(eps_list, rng: RngStream = None, trials: int = 0):
    """P(Y_FS(0) <= eps) by deterministic CDF quadrature, with MC cross-check.

    Returns rows (eps, p_quad, p_mc, mc_ci_lo, mc_ci_hi); MC entries are None
    when trials == 0.
    """
    fs = get_fs()
    eps_list = np.atleast_1d(np.asarray(eps_list, float))
    draws = None
    if trials and rng is not None:
        draws = fs_sample_stationary(rng, trials)
    rows = []
    for e in eps_list:
        pq = (_adaptive_simpson(_unnorm_density, 0.0, min(e, fs.cutoff), 1e-13)
              / fs.z_const) if e > 0 else 0.0
        row = {"eps": float(e), "p_quad": min(pq, 1.0), "p_mc": None,
               "mc_ci_lo": None, "mc_ci_hi": None}
        if draws is not None:
            k = int(np.sum(draws <= e))
            lo, hi = _binom_ci(k, trials)
            row.update(p_mc=k / trials, mc_ci_lo=lo, mc_ci_hi=hi)
        rows.append(row)
    return rows
