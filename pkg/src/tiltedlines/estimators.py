"""Statistical reductions from chain samples to the model's quantitative laws.

All reductions are deterministic functions of their input sample arrays; the
few checks that need fresh simulations (scaling, free-vs-zero) orchestrate
chains with explicit seeds and are deterministic given those seeds.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import beta as _beta

from .fs import fs_cdf
from .model import BoundarySpec, GridInterval, ModelError, TiltParams

__all__ = ["TailFit", "InsufficientDataError", "fit_upper_tail",
           "tail_coefficient_ck", "lower_tail_curve", "local_loglog_slope",
           "covariance_lag", "confinement_profile", "scaling_check",
           "pinning_check", "free_vs_zero_convergence", "ks_2sample",
           "integrated_autocorr_time", "batch_means_se", "geweke_z",
           "clopper_pearson"]

C_FS = 2.0 * math.sqrt(2.0) / 3.0


class InsufficientDataError(ValueError):
    pass


# ---------------------------------------------------------------------------
# generic statistics
# ---------------------------------------------------------------------------

def integrated_autocorr_time(series, max_lag: int = 2000) -> float:
    """IAT with an initial-positive window cutoff (rho < 0.02)."""
    x = np.asarray(series, float)
    x = x - x.mean()
    n = x.size
    if n < 16:
        return 1.0
    var = float(np.dot(x, x)) / n
    if var <= 0:
        return 1.0
    tau = 1.0
    for lag in range(1, min(max_lag, n // 4)):
        rho = float(np.dot(x[:-lag], x[lag:])) / ((n - lag) * var)
        if rho < 0.02:
            break
        tau += 2.0 * rho
    return max(tau, 1.0)


def batch_means_se(series, n_batches: int = 20) -> float:
    """Standard error of the mean from batch means (MCMC-safe)."""
    x = np.asarray(series, float)
    nb = min(n_batches, max(2, x.size // 8))
    size = x.size // nb
    if size < 1:
        return float(x.std(ddof=1) / math.sqrt(max(x.size, 2)))
    means = x[:nb * size].reshape(nb, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(nb))


def geweke_z(series, first: float = 0.1, last: float = 0.5) -> float:
    """Geweke convergence diagnostic on a scalar chain trace."""
    x = np.asarray(series, float)
    a = x[:int(first * x.size)]
    b = x[int((1 - last) * x.size):]
    sa, sb = batch_means_se(a), batch_means_se(b)
    return float((a.mean() - b.mean()) / math.sqrt(sa ** 2 + sb ** 2))


def clopper_pearson(hits: int, trials: int, alpha: float = 0.05):
    lo = _beta.ppf(alpha / 2, hits, trials - hits + 1) if hits > 0 else 0.0
    hi = (_beta.ppf(1 - alpha / 2, hits + 1, trials - hits)
          if hits < trials else 1.0)
    return float(lo), float(hi)


def ks_2sample(a, b):
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    a = np.sort(np.asarray(a, float))
    b = np.sort(np.asarray(b, float))
    na, nb = a.size, b.size
    if na == 0 or nb == 0:
        raise InsufficientDataError("both samples must be nonempty")
    allv = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, allv, side="right") / na
    cdf_b = np.searchsorted(b, allv, side="right") / nb
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    ne = na * nb / (na + nb)
    lam = (math.sqrt(ne) + 0.12 + 0.11 / math.sqrt(ne)) * d
    p = 0.0
    for k in range(1, 101):
        term = 2.0 * (-1.0) ** (k - 1) * math.exp(-2.0 * k * k * lam * lam)
        p += term
        if abs(term) < 1e-12:
            break
    return d, float(min(max(p, 0.0), 1.0))


# ---------------------------------------------------------------------------
# upper tail
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailFit:
    """Through-origin fit of -log CCDF against t^{3/2} (exponent fixed)."""

    c_hat: float
    se: float
    r2: float
    window: tuple
    exponent: float = 1.5
    n_points: int = 0
    exceedances: tuple = ()


def fit_upper_tail(samples, window=(1.5, 2.5), n_points: int = 9,
                   min_exceed: int = 50, weights: Optional[np.ndarray] = None,
                   n_eff: Optional[float] = None) -> TailFit:
    """Least-squares slope of -log empirical CCDF on t^{3/2} over the window.

    Points with fewer than `min_exceed` exceedances are dropped (binomial
    noise control); fewer than 3 usable points raises InsufficientDataError.
    `n_eff` (effective sample count) feeds the SE when samples are
    autocorrelated; weights default to uniform.
    """
    x = np.asarray(samples, float)
    n = x.size
    if n_eff is None:
        n_eff = float(n)
    tmin, tmax = window
    if not tmin < tmax:
        raise ModelError("window must satisfy t_min < t_max")
    ts = np.linspace(tmin, tmax, n_points)
    counts = np.array([(x > t).sum() for t in ts])
    keep = counts >= min_exceed
    if keep.sum() < 3:
        raise InsufficientDataError(
            f"only {int(keep.sum())} usable points with >= {min_exceed} exceedances")
    ts = ts[keep]
    counts = counts[keep]
    p = counts / n
    y = -np.log(p)
    xx = ts ** 1.5
    w = np.ones_like(xx) if weights is None else np.asarray(weights, float)[keep]
    c = float(np.sum(w * xx * y) / np.sum(w * xx * xx))
    var_y = (1.0 - p) / (n_eff * p)
    se = float(math.sqrt(np.sum((w * xx) ** 2 * var_y)) / np.sum(w * xx * xx))
    ss_res = float(np.sum((y - c * xx) ** 2))
    ss_tot = float(np.sum(y ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    return TailFit(c, se, r2, (tmin, tmax), 1.5, int(keep.sum()),
                   tuple(int(k) for k in counts))


def tail_coefficient_ck(k, lam: float) -> float:
    """c_k = (2 sqrt 2 / 3) * sum_{i=0..k} lam^{-i/2}; k=None gives c_inf."""
    if not lam > 1:
        raise ModelError(f"lambda must exceed 1, got {lam}")
    if k is None or (isinstance(k, float) and math.isinf(k)):
        return C_FS * math.sqrt(lam) / (math.sqrt(lam) - 1.0)
    k = int(k)
    if k < 0:
        raise ModelError("k must be >= 0")
    return C_FS * float(np.sum(lam ** (-0.5 * np.arange(k + 1))))


# ---------------------------------------------------------------------------
# lower tail
# ---------------------------------------------------------------------------

def lower_tail_curve(samples, eps_list, n_eff: Optional[float] = None):
    """Empirical P(X <= eps) with Clopper-Pearson CIs and the FS baseline.

    Returns rows (eps, p_hat, ci_lo, ci_hi, hits, fs_baseline); the CI uses
    the effective sample count when given.
    """
    x = np.asarray(samples, float)
    n = x.size
    scale = 1.0 if n_eff is None else n_eff / n
    rows = []
    for e in np.atleast_1d(np.asarray(eps_list, float)):
        hits = int((x <= e).sum())
        eff_hits = int(round(hits * scale))
        eff_n = max(int(round(n * scale)), 1)
        lo, hi = clopper_pearson(min(eff_hits, eff_n), eff_n)
        rows.append({"eps": float(e), "p_hat": hits / n, "ci_lo": lo,
                     "ci_hi": hi, "hits": hits,
                     "fs_baseline": float(fs_cdf(e))})
    return rows


def local_loglog_slope(samples, eps: float, factor: float = math.sqrt(2.0),
                       n_eff: Optional[float] = None):
    """Local slope of log P(X <= eps) in log eps, by a symmetric ratio.

    slope = [log p(eps*f) - log p(eps/f)] / (2 log f); the SE uses the nested-
    event covariance, var = (1/p_small - 1/p_big)/n_eff.
    Returns (slope, se, p_small, p_big).
    """
    x = np.asarray(samples, float)
    n = x.size
    if n_eff is None:
        n_eff = float(n)
    p_small = float((x <= eps / factor).mean())
    p_big = float((x <= eps * factor).mean())
    if p_small <= 0 or p_big <= 0:
        raise InsufficientDataError(f"no mass below eps/factor = {eps / factor}")
    slope = (math.log(p_big) - math.log(p_small)) / (2.0 * math.log(factor))
    var = (1.0 / p_small - 1.0 / p_big) / n_eff
    se = math.sqrt(var) / (2.0 * math.log(factor))
    return slope, se, p_small, p_big


# ---------------------------------------------------------------------------
# covariance in ensemble time
# ---------------------------------------------------------------------------

COVARIANCE_CAVEAT = ("covariance is over the spatial separation t of "
                     "equilibrated configurations, not over MCMC time")


def covariance_lag(paths, dt: float, lags):
    """Autocovariance of the top line across spatial lags.

    `paths` is (n_samples, n_times): thinned equilibrated configurations of
    one line on a window.  For each lag L (grid units) the product x(s)x(s+L)
    is averaged over positions and samples; the SE comes from batch means
    across samples.  Rows carry the caveat string.
    """
    p = np.asarray(paths, float)
    if p.ndim != 2:
        raise ModelError("paths must be (n_samples, n_times)")
    nsamp, ntimes = p.shape
    mean = float(p.mean())
    rows = []
    for lag in np.atleast_1d(np.asarray(lags, int)):
        if lag >= ntimes:
            raise ModelError(f"lag {lag} exceeds the window ({ntimes} points)")
        prod = (p[:, :ntimes - lag] * p[:, lag:]).mean(axis=1)  # per sample
        cov = float(prod.mean() - mean ** 2)
        se = batch_means_se(prod)
        rows.append({"lag": int(lag), "t": float(lag * dt), "cov": cov,
                     "se": se, "caveat": COVARIANCE_CAVEAT})
    return rows


# ---------------------------------------------------------------------------
# confinement profile
# ---------------------------------------------------------------------------

def confinement_profile(sampleset, lam: float, k_max: int = None):
    """Per-line means at the center and window maxima, with lam^{k/3} rescaling."""
    pts = sampleset.points[:, :, 0]
    n = pts.shape[1]
    k_max = n - 1 if k_max is None else min(k_max, n - 1)
    rows = []
    for k in range(k_max + 1):
        mean = float(pts[:, k].mean())
        se = batch_means_se(pts[:, k])
        row = {"k": k, "mean": mean, "se": se,
               "rescaled_mean": mean * lam ** (k / 3.0),
               "rescaled_se": se * lam ** (k / 3.0)}
        if sampleset.window_max is not None:
            wm = sampleset.window_max[:, k]
            row["max_mean"] = float(wm.mean())
            row["max_se"] = batch_means_se(wm)
            row["rescaled_max_mean"] = row["max_mean"] * lam ** (k / 3.0)
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# scaling identity
# ---------------------------------------------------------------------------

def scaling_check(n: int, t_half: float, a: float, lam: float,
                  samples_per_side: int, seed: int, dt: float = 0.1,
                  thin: int = 20, burn_in: int = 3000,
                  wrong_exponent: float = 0.5):
    """Two-sample KS between the (a*lam, lam) ensemble on [-T, T] and the
    height-rescaled (a, lam) ensemble on the lam^{2/3}-stretched interval.

    The grids map exactly onto each other (same step count), so the two
    discrete laws coincide; the negative control replaces the lam^{-1/3}
    height map with lam^{-wrong_exponent}.
    """
    from .gibbs import ChainConfig, run_chain

    steps = int(round(2 * t_half / dt))
    grid_a = GridInterval(-t_half, t_half, steps)
    stretch = lam ** (2.0 / 3.0)
    grid_b = GridInterval(-t_half * stretch, t_half * stretch, steps)

    cfg_a = ChainConfig(n, grid_a, TiltParams(a * lam, lam), BoundarySpec.zero(),
                        n_samples=samples_per_side, thin=thin, burn_in=burn_in,
                        seed=seed, chain_id=0, record_times=[0.0])
    cfg_b = ChainConfig(n, grid_b, TiltParams(a, lam), BoundarySpec.zero(),
                        n_samples=samples_per_side, thin=thin, burn_in=burn_in,
                        seed=seed, chain_id=1, record_times=[0.0])
    sa = run_chain(cfg_a).line_point(1, 0.0)
    sb = run_chain(cfg_b).line_point(1, 0.0)
    d, p = ks_2sample(sa, sb * lam ** (-1.0 / 3.0))
    d_bad, p_bad = ks_2sample(sa, sb * lam ** (-wrong_exponent))
    return {"n": n, "t_half": t_half, "a": a, "lam": lam,
            "samples_per_side": samples_per_side,
            "ks_d": d, "ks_p": p,
            "control_ks_d": d_bad, "control_ks_p": p_bad}


# ---------------------------------------------------------------------------
# asymptotic pinning probe
# ---------------------------------------------------------------------------

def pinning_check(sampleset, eps: float):
    """Smallest line index k with P(max over the window of X^k <= eps) >= 1-eps.

    Needs a SampleSet recorded with a window-max observable.  When no k
    qualifies, reports failure with the best achieved probability.
    """
    if sampleset.window_max is None:
        raise ModelError("pinning_check needs window-max recording")
    wm = sampleset.window_max
    n = wm.shape[1]
    best = None
    for k in range(1, n + 1):
        hits = int((wm[:, k - 1] <= eps).sum())
        trials = wm.shape[0]
        p = hits / trials
        lo, hi = clopper_pearson(hits, trials)
        row = {"k": k, "p_hat": p, "ci_lo": lo, "ci_hi": hi, "eps": eps,
               "qualified": p >= 1.0 - eps}
        if best is None or p > best["p_hat"]:
            best = row
        if row["qualified"]:
            return row
    best = dict(best)
    best["qualified"] = False
    return best


# ---------------------------------------------------------------------------
# free vs zero boundary convergence
# ---------------------------------------------------------------------------

def free_vs_zero_convergence(n: int, t_list, tilt: TiltParams, seed: int,
                             n_samples: int = 20000, dt: float = 0.1,
                             thin: int = 5, burn_in: int = 3000):
    """Mean gaps E_f[X^i(0)] - E_0[X^i(0)] and KS distances per interval size.

    Domination makes every gap nonnegative up to MC error; the gap decreases
    along increasing T.  Returns one row per T.
    """
    from .gibbs import ChainConfig, run_chain

    rows = []
    for idx, t_half in enumerate(np.atleast_1d(np.asarray(t_list, float))):
        steps = int(round(2 * t_half / dt))
        grid = GridInterval(-t_half, t_half, steps)
        out = {"t_half": float(t_half), "n": n}
        samples = {}
        for kind_id, boundary in ((0, BoundarySpec.free()), (1, BoundarySpec.zero())):
            cfg = ChainConfig(n, grid, tilt, boundary, n_samples=n_samples,
                              thin=thin, burn_in=burn_in, seed=seed,
                              chain_id=(idx << 4) | kind_id,
                              record_times=[0.0])
            samples[kind_id] = run_chain(cfg)
        for line in range(1, n + 1):
            f = samples[0].line_point(line, 0.0)
            z = samples[1].line_point(line, 0.0)
            gap = float(f.mean() - z.mean())
            se = math.sqrt(batch_means_se(f) ** 2 + batch_means_se(z) ** 2)
            d, p = ks_2sample(f, z)
            out[f"gap_line{line}"] = gap
            out[f"se_line{line}"] = se
            out[f"ks_d_line{line}"] = d
        rows.append(out)
    return rows
