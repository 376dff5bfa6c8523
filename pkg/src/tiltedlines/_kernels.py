"""Compiled inner loops: counter-based RNG, Gaussian quantiles, heat-bath sweeps.

Everything random in the samplers flows through philox2x64: a draw is addressed
by (key, hi, lo) and nothing else, so chains replay bit-identically from
checkpoints and coupled chains share uniforms by sharing addresses.
"""

import math

import numpy as np
from numba import njit

UINT64_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)

_PHILOX_M = np.uint64(0xD2B74407B1CE6E93)
_PHILOX_W = np.uint64(0x9E3779B97F4A7C15)

# error codes returned by sweep kernels
ERR_OK = 0
ERR_EMPTY_CORRIDOR = 1


@njit(cache=True, inline="always")
def _mulhilo(a, b):
    lo = a * b
    a0 = a & np.uint64(0xFFFFFFFF)
    a1 = a >> np.uint64(32)
    b0 = b & np.uint64(0xFFFFFFFF)
    b1 = b >> np.uint64(32)
    t = a1 * b0 + ((a0 * b0) >> np.uint64(32))
    w = a0 * b1 + (t & np.uint64(0xFFFFFFFF))
    hi = a1 * b1 + (t >> np.uint64(32)) + (w >> np.uint64(32))
    return hi, lo


@njit(cache=True)
def splitmix64(z):
    z = (np.uint64(z) + np.uint64(0x9E3779B97F4A7C15)) & UINT64_MASK
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & UINT64_MASK
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & UINT64_MASK
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def philox2x64(hi, lo, key):
    x0 = np.uint64(hi)
    x1 = np.uint64(lo)
    k = np.uint64(key)
    for _ in range(10):
        h, l = _mulhilo(_PHILOX_M, x0)
        x0 = h ^ k ^ x1
        x1 = l
        k = (k + _PHILOX_W) & UINT64_MASK
    return x0, x1


@njit(cache=True, inline="always")
def u01(key, hi, lo):
    """Uniform draw in the open interval (0, 1) addressed by (key, hi, lo)."""
    x0, _ = philox2x64(np.uint64(hi), np.uint64(lo), np.uint64(key))
    return (np.float64(x0 >> np.uint64(11)) + 0.5) * (2.0 ** -53)


@njit(cache=True, nogil=True)
def u01_fill(out, key, hi, lo0):
    for i in range(out.shape[0]):
        out[i] = u01(key, hi, lo0 + i)


_SQRT2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


@njit(cache=True, inline="always")
def norm_cdf(x):
    return 0.5 * math.erfc(-x / _SQRT2)


@njit(cache=True, inline="always")
def norm_sf(x):
    return 0.5 * math.erfc(x / _SQRT2)


@njit(cache=True)
def ndtri(p):
    """Inverse standard normal CDF, ~1e-14 accurate on p in (1e-300, 1-1e-16).

    A closed-form seed refined by Newton; the deep tail iterates on log Phi.
    """
    if p <= 0.0:
        return -np.inf
    if p >= 1.0:
        return np.inf
    neg = p <= 0.5
    q = p if neg else 1.0 - p
    # seed
    if q > 0.02:
        z = math.log(q / (1.0 - q)) / 1.702
    else:
        t = math.sqrt(-2.0 * math.log(q))
        z = -(t - (math.log(t * t) + math.log(2.0 * math.pi)) / (2.0 * t))
    if z > -8.0:
        for _ in range(8):
            f = norm_cdf(z) - q
            pdf = math.exp(-0.5 * z * z) / _SQRT_2PI
            dz = f / pdf
            if dz > 1.0:
                dz = 1.0
            elif dz < -1.0:
                dz = -1.0
            z -= dz
            if abs(dz) < 1e-13 * (1.0 + abs(z)):
                break
    else:
        lq = math.log(q)
        for _ in range(6):
            c = norm_cdf(z)
            if c <= 0.0:
                break
            pdf = math.exp(-0.5 * z * z) / _SQRT_2PI
            dz = (math.log(c) - lq) * c / pdf
            z -= dz
            if abs(dz) < 1e-13 * (1.0 + abs(z)):
                break
    return z if neg else -z


@njit(cache=True, nogil=True)
def ndtri_fill(out, u):
    for i in range(out.shape[0]):
        out[i] = ndtri(u[i])


@njit(cache=True)
def truncnorm_ppf(u, alpha, beta):
    """Quantile of the standard normal truncated to [alpha, beta] at level u.

    Monotone in u, alpha, beta (the coupled sweeps rely on it); output clamped
    to the truncation interval.
    """
    if alpha >= 0.0:
        # work in the upper tail where erfc keeps precision
        sa = norm_sf(alpha)
        sb = norm_sf(beta)
        s = sa * (1.0 - u) + sb * u
        x = -ndtri(s) if s > 0.0 else alpha + u * (beta - alpha)
    elif beta <= 0.0:
        fa = norm_cdf(alpha)
        fb = norm_cdf(beta)
        f = fa * (1.0 - u) + fb * u
        x = ndtri(f) if f > 0.0 else alpha + u * (beta - alpha)
    else:
        fa = norm_cdf(alpha)
        fb = norm_cdf(beta)
        x = ndtri(fa + u * (fb - fa))
    if not np.isfinite(x):
        x = alpha + u * (beta - alpha)
    if x < alpha:
        x = alpha
    elif x > beta:
        x = beta
    return x


@njit(cache=True, inline="always")
def _site_draw(u, mu, sig, lo, hi):
    """Truncated-Gaussian heat-bath draw for one site, strictly inside (lo, hi)."""
    alpha = (lo - mu) / sig
    beta = (hi - mu) / sig
    if beta - alpha < 1e-13:
        x = lo + u * (hi - lo)
    else:
        x = mu + sig * truncnorm_ppf(u, alpha, beta)
    if x <= lo or x >= hi:
        x = lo + u * (hi - lo)
        if x <= lo or x >= hi:
            x = 0.5 * (lo + hi)
    return x


@njit(cache=True, nogil=True)
def heat_bath_pass(heights, floor, ceil, upd, tiltc, dt, key, sweep, serial):
    """One systematic-scan heat-bath pass over all updatable interior columns."""
    n, mp1 = heights.shape
    v = 0.5 * dt
    sig = math.sqrt(v)
    for j in range(1, mp1 - 1):
        if upd[j] == 0:
            serial += n
            continue
        for i in range(n):
            mu = 0.5 * (heights[i, j - 1] + heights[i, j + 1]) - tiltc[i] * dt * v
            lo = floor[j] if i == n - 1 else heights[i + 1, j]
            if floor[j] > lo:
                lo = floor[j]
            hi = ceil[j] if i == 0 else heights[i - 1, j]
            if ceil[j] < hi:
                hi = ceil[j]
            u = u01(key, sweep, serial)
            serial += 1
            if hi <= lo:
                return ERR_EMPTY_CORRIDOR, serial
            heights[i, j] = _site_draw(u, mu, sig, lo, hi)
    return ERR_OK, serial


@njit(cache=True, nogil=True)
def block_move(heights, prop, floor, ceil, tiltc, dt, key, sweep, serial,
               nlines_max, lmin, lmax):
    """One Brownian-bridge block proposal, Metropolis-accepted on the tilt change.

    Resamples lines 0..k-1 on a random window; fresh bridges come from the
    sequential conditional, the acceptance ratio is exp(delta tilt log-weight)
    times the ordering indicator.
    """
    n, mp1 = heights.shape
    m = mp1 - 1
    u = u01(key, sweep, serial); serial += 1
    k = 1 + int(u * nlines_max)
    if k > nlines_max:
        k = nlines_max
    u = u01(key, sweep, serial); serial += 1
    ll = math.log(lmin) + u * (math.log(lmax) - math.log(lmin))
    length = int(round(math.exp(ll)))
    if length < lmin:
        length = lmin
    if length > lmax:
        length = lmax
    u = u01(key, sweep, serial); serial += 1
    ja = int(u * (m - length + 1))
    if ja > m - length:
        ja = m - length
    jb = ja + length

    for i in range(k):
        xprev = heights[i, ja]
        y = heights[i, jb]
        for r in range(1, length):
            rem = length - r + 1
            mean = xprev + (y - xprev) / rem
            var = dt * (rem - 1) / rem
            z = ndtri(u01(key, sweep, serial)); serial += 1
            xprev = mean + math.sqrt(var) * z
            prop[i, ja + r] = xprev

    ok = True
    for j in range(ja + 1, jb):
        top = ceil[j]
        for i in range(k):
            x = prop[i, j]
            if x >= top:
                ok = False
                break
            top = x
        if not ok:
            break
        below = floor[j] if k == n else heights[k, j]
        if floor[j] > below:
            below = floor[j]
        if prop[k - 1, j] <= below:
            ok = False
            break
    accepted = False
    if ok:
        dlog = 0.0
        for i in range(k):
            s = 0.0
            for j in range(ja + 1, jb):
                s += heights[i, j] - prop[i, j]
            dlog += tiltc[i] * dt * s
        u = u01(key, sweep, serial); serial += 1
        if math.log(u) < dlog:
            accepted = True
            for i in range(k):
                for j in range(ja + 1, jb):
                    heights[i, j] = prop[i, j]
    return serial, accepted


@njit(cache=True, nogil=True)
def endpoint_move(heights, scratch, floor, tiltc, dt, sigma_prop, side, key,
                  sweep, serial):
    """Column-wise Metropolis update of a free boundary column."""
    n, mp1 = heights.shape
    j = 0 if side == 0 else mp1 - 1
    jn = 1 if side == 0 else mp1 - 2
    logr = 0.0
    ok = True
    prev = math.inf
    for i in range(n):
        z = ndtri(u01(key, sweep, serial)); serial += 1
        xnew = heights[i, j] + sigma_prop * z
        scratch[i] = xnew
        if xnew >= prev or xnew <= floor[j]:
            ok = False
        prev = xnew
        x1 = heights[i, jn]
        xold = heights[i, j]
        logr += ((x1 - xold) ** 2 - (x1 - xnew) ** 2) / (2.0 * dt)
        logr -= tiltc[i] * 0.5 * dt * (xnew - xold)
    u = u01(key, sweep, serial); serial += 1
    accepted = False
    if ok and math.log(u) < logr:
        accepted = True
        for i in range(n):
            heights[i, j] = scratch[i]
    return serial, accepted


@njit(cache=True, nogil=True)
def check_order_strict(heights, floor, ceil, upd):
    """Return (ok, line, col): strict interior ordering above floor, below ceiling."""
    n, mp1 = heights.shape
    for j in range(1, mp1 - 1):
        if upd[j] == 0:
            continue
        for i in range(n):
            hi = ceil[j] if i == 0 else heights[i - 1, j]
            if ceil[j] < hi:
                hi = ceil[j]
            lo = floor[j] if i == n - 1 else heights[i + 1, j]
            if floor[j] > lo:
                lo = floor[j]
            x = heights[i, j]
            if not (x < hi) or not (x > lo) or not np.isfinite(x):
                return False, i, j
    return True, -1, -1


@njit(cache=True, nogil=True)
def run_sweeps(heights, prop, scratch, floor, ceil, upd, tiltc, dt,
               free_left, free_right, sigma_prop, nblocks, block_lines,
               key, sweep_start, nsweeps,
               thin, rec_cols, out_cols, jlo, jhi, out_max,
               stats):
    """Run `nsweeps` full sweeps; record thinned observables.

    One sweep = heat-bath pass + `nblocks` block moves + free endpoint moves.
    Every `thin`-th sweep records line heights at grid columns `rec_cols` into
    `out_cols` and, when jlo <= jhi, the per-line max over [jlo, jhi] into
    `out_max`.  stats = int64[6]: blocks tried/accepted, endpoint moves
    tried/accepted, records written, (unused).
    Returns (err, sweeps_done).
    """
    n, mp1 = heights.shape
    m = mp1 - 1
    lmax = m // 4
    do_blocks = nblocks > 0 and lmax >= 4
    nrec_cols = rec_cols.shape[0]
    rec_i = stats[4]
    for s in range(nsweeps):
        sweep = sweep_start + s
        err, serial = heat_bath_pass(heights, floor, ceil, upd, tiltc, dt,
                                     key, sweep, 0)
        if err != ERR_OK:
            return err, s
        if do_blocks:
            for _ in range(nblocks):
                serial, acc = block_move(heights, prop, floor, ceil, tiltc, dt,
                                         key, sweep, serial, block_lines, 4, lmax)
                stats[0] += 1
                if acc:
                    stats[1] += 1
        if free_left:
            serial, acc = endpoint_move(heights, scratch, floor, tiltc, dt,
                                        sigma_prop, 0, key, sweep, serial)
            stats[2] += 1
            if acc:
                stats[3] += 1
        if free_right:
            serial, acc = endpoint_move(heights, scratch, floor, tiltc, dt,
                                        sigma_prop, 1, key, sweep, serial)
            stats[2] += 1
            if acc:
                stats[3] += 1
        if thin > 0 and (s + 1) % thin == 0 and rec_i < out_cols.shape[0]:
            for i in range(n):
                for c in range(nrec_cols):
                    out_cols[rec_i, i, c] = heights[i, rec_cols[c]]
            if jhi >= jlo:
                for i in range(n):
                    mx = heights[i, jlo]
                    for j in range(jlo + 1, jhi + 1):
                        if heights[i, j] > mx:
                            mx = heights[i, j]
                    out_max[rec_i, i] = mx
            rec_i += 1
    stats[4] = rec_i
    return ERR_OK, nsweeps


@njit(cache=True, nogil=True)
def coupled_heat_bath_sweeps(hlow, hhigh, floor_l, floor_h, ceil_l, ceil_h,
                             upd_l, upd_h, tiltc, dt, key, sweep_start, nsweeps,
                             stats):
    """Shared-uniform inverse-CDF heat-bath sweeps on an ordered pair of states.

    Each site consumes exactly one uniform regardless of update masks, keeping
    both states aligned on the same draw addresses.  Bitwise-equal site
    conditionals reuse one draw (exact coalescence).  A floating-point-level
    order inversion between two freshly drawn sites (impossible in exact
    arithmetic) is repaired to the midpoint, which is strictly inside both
    corridors; repairs are counted in stats[5].
    Returns (err, certificate_ok, line, col).
    """
    n, mp1 = hlow.shape
    v = 0.5 * dt
    sig = math.sqrt(v)
    for s in range(nsweeps):
        sweep = sweep_start + s
        serial = 0
        for j in range(1, mp1 - 1):
            for i in range(n):
                u = u01(key, sweep, serial)
                serial += 1
                ul = upd_l[j] != 0
                uh = upd_h[j] != 0
                if not ul and not uh:
                    continue
                mu_l = 0.5 * (hlow[i, j - 1] + hlow[i, j + 1]) - tiltc[i] * dt * v
                mu_h = 0.5 * (hhigh[i, j - 1] + hhigh[i, j + 1]) - tiltc[i] * dt * v
                lo_l = floor_l[j] if i == n - 1 else hlow[i + 1, j]
                if floor_l[j] > lo_l:
                    lo_l = floor_l[j]
                lo_h = floor_h[j] if i == n - 1 else hhigh[i + 1, j]
                if floor_h[j] > lo_h:
                    lo_h = floor_h[j]
                hi_l = ceil_l[j] if i == 0 else hlow[i - 1, j]
                if ceil_l[j] < hi_l:
                    hi_l = ceil_l[j]
                hi_h = ceil_h[j] if i == 0 else hhigh[i - 1, j]
                if ceil_h[j] < hi_h:
                    hi_h = ceil_h[j]
                if ul and hi_l <= lo_l:
                    return ERR_EMPTY_CORRIDOR, False, i, j
                if uh and hi_h <= lo_h:
                    return ERR_EMPTY_CORRIDOR, False, i, j
                if ul and uh and mu_l == mu_h and lo_l == lo_h and hi_l == hi_h:
                    x = _site_draw(u, mu_l, sig, lo_l, hi_l)
                    hlow[i, j] = x
                    hhigh[i, j] = x
                    continue
                if ul:
                    hlow[i, j] = _site_draw(u, mu_l, sig, lo_l, hi_l)
                if uh:
                    hhigh[i, j] = _site_draw(u, mu_h, sig, lo_h, hi_h)
                if ul and uh and hlow[i, j] > hhigh[i, j]:
                    mid = 0.5 * (hlow[i, j] + hhigh[i, j])
                    if mid > lo_l and mid < hi_l and mid > lo_h and mid < hi_h:
                        hlow[i, j] = mid
                        hhigh[i, j] = mid
                        stats[5] += 1
        for j in range(mp1):
            for i in range(n):
                if hlow[i, j] > hhigh[i, j]:
                    return ERR_OK, False, i, j
    return ERR_OK, True, -1, -1


@njit(cache=True, nogil=True)
def bridge_fill(out, x, y, dt, key, hi_idx, serial):
    """Fill out[0..m] with a Brownian bridge from x to y by sequential conditionals."""
    m = out.shape[0] - 1
    out[0] = x
    out[m] = y
    xprev = x
    for r in range(1, m):
        rem = m - r + 1
        mean = xprev + (y - xprev) / rem
        var = dt * (rem - 1) / rem
        z = ndtri(u01(key, hi_idx, serial)); serial += 1
        xprev = mean + math.sqrt(var) * z
        out[r] = xprev
    return serial


# ---------------------------------------------------------------------------
# Ferrari-Spohn drift and Euler-Maruyama integration
# ---------------------------------------------------------------------------

_CBRT2 = 2.0 ** (1.0 / 3.0)
_AI0 = 3.0 ** (-2.0 / 3.0) / math.gamma(2.0 / 3.0)
_AIP0 = -(3.0 ** (-1.0 / 3.0)) / math.gamma(1.0 / 3.0)


@njit(cache=True)
def airy_ratio(x):
    """Ai'(x)/Ai(x) from the Maclaurin series (x <= 4.5) or the tail asymptotic."""
    if x > 4.5:
        s = math.sqrt(x)
        return -s - 0.25 / x + 5.0 / (32.0 * x * x * s)
    f = 1.0
    fp = 0.0
    g = x
    gp = 1.0
    x3 = x * x * x
    ta = 1.0
    tb = 1.0  # tb tracks the coefficient of g-series term divided by x
    # iterate term recurrences; fp, gp accumulate the derivatives directly
    tav = 1.0
    tbv = x
    k = 0
    while k < 120:
        tav = tav * x3 / ((3 * k + 2) * (3 * k + 3))
        tbv = tbv * x3 / ((3 * k + 3) * (3 * k + 4))
        f += tav
        g += tbv
        kk = 3 * (k + 1)
        fp += kk * tav / x if x != 0.0 else 0.0
        gp += (kk + 1) * tbv / x if x != 0.0 else 0.0
        k += 1
        if abs(tav) + abs(tbv) < 1e-18 * (abs(f) + abs(g)):
            break
    ai = _AI0 * f + _AIP0 * g
    aip = _AI0 * fp + _AIP0 * gp
    return aip / ai


@njit(cache=True)
def fs_drift(x, om1):
    """Drift of the FS diffusion: 2^{1/3} Ai'(v)/Ai(v) at v = 2^{1/3}x - om1."""
    return _CBRT2 * airy_ratio(_CBRT2 * x - om1)


@njit(cache=True, nogil=True)
def fs_euler_path(x0, nsteps, dt, om1, eps_wall, key, out):
    """Euler-Maruyama path of the FS diffusion with a reflecting wall guard.

    out has length nsteps+1; returns the number of wall reflections.
    """
    sq = math.sqrt(dt)
    x = x0
    out[0] = x
    clamps = 0
    for sstep in range(nsteps):
        z = ndtri(u01(key, 0, sstep))
        x = x + fs_drift(x, om1) * dt + sq * z
        if x < eps_wall:
            x = 2.0 * eps_wall - x
            clamps += 1
        out[sstep + 1] = x
    return clamps


@njit(cache=True, nogil=True)
def fs_euler_max(x0, nsteps, dt, om1, eps_wall, key):
    """Like fs_euler_path but returns only (final, max, reflections)."""
    sq = math.sqrt(dt)
    x = x0
    mx = x
    clamps = 0
    for sstep in range(nsteps):
        z = ndtri(u01(key, 0, sstep))
        x = x + fs_drift(x, om1) * dt + sq * z
        if x < eps_wall:
            x = 2.0 * eps_wall - x
            clamps += 1
        if x > mx:
            mx = x
    return x, mx, clamps
