"""Compiled per-coefficient kernels shared by the likelihood and shrinkage code.

All IMOM quantities are computed in noise-scaled units ``u = d / sigma``,
``a = dhat / sigma``. In those units the stationarity condition of the
Laplace integrand is the quartic ``q(u) = u^4 - a u^3 + (nu+1) u^2 - 2 tau``
with ``L_h'(u) = -q(u) / u^3`` (up to a positive factor).
"""

import math

import numpy as np
from numba import njit

LOG_2PI = math.log(2.0 * math.pi)
NEG_INF = -np.inf
_MAXIT = 200


@njit(cache=True)
def safe_log(x):
    if x <= 0.0:
        return NEG_INF
    return math.log(x)


@njit(cache=True)
def logaddexp3(x, y, z):
    m = max(x, max(y, z))
    if m == NEG_INF:
        return NEG_INF
    acc = 0.0
    if x > NEG_INF:
        acc += math.exp(x - m)
    if y > NEG_INF:
        acc += math.exp(y - m)
    if z > NEG_INF:
        acc += math.exp(z - m)
    return m + math.log(acc)


@njit(cache=True)
def _q(u, a, t, nu):
    return ((u - a) * u + (nu + 1.0)) * u * u - 2.0 * t


@njit(cache=True)
def _dq(u, a, nu):
    return u * ((4.0 * u - 3.0 * a) * u + 2.0 * (nu + 1.0))


@njit(cache=True)
def _bracketed_root(lo, hi, a, t, nu, start):
    """Root of q in (lo, hi) given q(lo) < 0 < q(hi); Newton with bisection guard."""
    u = start
    if not (lo < u < hi):
        u = 0.5 * (lo + hi)
    for _ in range(_MAXIT):
        f = _q(u, a, t, nu)
        if f == 0.0:
            return u
        if f < 0.0:
            lo = u
        else:
            hi = u
        df = _dq(u, a, nu)
        if df != 0.0:
            step = f / df
            if abs(step) <= 1e-14 * abs(u):
                return u - step
            new = u - step
        else:
            new = 0.5 * (lo + hi)
        if not (lo < new < hi):
            new = 0.5 * (lo + hi)
            if hi - lo <= 4e-16 * abs(new):
                return new
        u = new
    return np.nan


@njit(cache=True)
def scaled_log_h(u, a, t, nu):
    """log h in scaled units, without the constant -(nu+1) log sigma."""
    return -(nu + 1.0) * math.log(abs(u)) - 0.5 * (u * u - 2.0 * u * a) - t / (u * u)


@njit(cache=True)
def _best_positive_max(a, t, nu):
    """Best local maximiser of log h on u > 0. Returns (u, log h) or nan."""
    hi = max(a, 0.0) + (2.0 * t) ** 0.25
    disc = 9.0 * a * a - 32.0 * (nu + 1.0)
    if disc <= 0.0:
        u = _bracketed_root(0.0, hi, a, t, nu, hi)
        return u, scaled_log_h(u, a, t, nu)
    sq = math.sqrt(disc)
    c1 = (3.0 * a - sq) / 8.0
    c2 = (3.0 * a + sq) / 8.0
    q1 = _q(c1, a, t, nu)
    q2 = _q(c2, a, t, nu)
    if q1 <= 0.0:
        u = _bracketed_root(c2, hi, a, t, nu, hi)
        return u, scaled_log_h(u, a, t, nu)
    if q2 >= 0.0:
        u = _bracketed_root(0.0, c1, a, t, nu, 0.5 * c1)
        return u, scaled_log_h(u, a, t, nu)
    # three sign changes: maxima in (0, c1) and (c2, hi), minimum between
    ul = _bracketed_root(0.0, c1, a, t, nu, 0.5 * c1)
    ur = _bracketed_root(c2, hi, a, t, nu, hi)
    ll = scaled_log_h(ul, a, t, nu)
    lr = scaled_log_h(ur, a, t, nu)
    if ll > lr:
        return ul, ll
    return ur, lr


@njit(cache=True)
def imom_mode(a, t, nu):
    """Global maximiser of log h in scaled units.

    Returns ``(u_star, scaled_log_h, inv_curv)`` where
    ``inv_curv = sigma_star^2 / sigma^2``. Since
    ``log h(x) - log h(-x) = 2 a x`` the maximiser shares the sign of ``a``;
    at ``a == 0`` the tie resolves to the positive root.
    """
    if a >= 0.0:
        u, lh = _best_positive_max(a, t, nu)
    else:
        x, lh = _best_positive_max(-a, t, nu)
        u = -x
    u2 = u * u
    curv = 1.0 + 6.0 * t / (u2 * u2) - (nu + 1.0) / u2
    return u, lh, 1.0 / curv


@njit(cache=True)
def poly_even(coef, x):
    """sum_i coef[i] x^(2i)."""
    x2 = x * x
    acc = 0.0
    for i in range(coef.size - 1, -1, -1):
        acc = acc * x2 + coef[i]
    return acc


@njit(cache=True)
def poly_odd(coef, x):
    """sum_i coef[i] x^(2i+1)."""
    return x * poly_even(coef, x)


@njit(cache=True)
def level_constants(g1, g2, t1, t2, sigma, r, nu, lgam_half_nu, mom_on, imom_on):
    """Coefficient-independent parts of the three branch log weights, per level.

    Columns: point-mass constant, MOM constant, IMOM constant, 1/(2 v1) with
    ``v1 = sigma^2 (1 + tau1)``, and ``sqrt(tau1 / (1 + tau1)) / sigma``.
    """
    L = g1.size
    out = np.empty((L, 5))
    s2 = sigma * sigma
    log_norm0 = -0.5 * (LOG_2PI + math.log(s2))
    for k in range(L):
        lm1 = safe_log(1.0 - g1[k]) if mom_on else 0.0
        lm2 = safe_log(1.0 - g2[k]) if imom_on else 0.0
        out[k, 0] = lm1 + lm2 + log_norm0
        v = s2 * (1.0 + t1[k])
        if mom_on and g1[k] > 0.0:
            out[k, 1] = (math.log(g1[k]) - r * math.log1p(t1[k])
                         - 0.5 * (LOG_2PI + math.log(v)))
        else:
            out[k, 1] = NEG_INF
        if imom_on and g2[k] > 0.0:
            # sigma powers cancel: nu/2 log(tau s2) - (nu+1) log sigma + log sigma_star
            out[k, 2] = (lm1 + math.log(g2[k]) + 0.5 * nu * math.log(t2[k]) - lgam_half_nu
                         + log_norm0 + 0.5 * LOG_2PI)
        else:
            out[k, 2] = NEG_INF
        out[k, 3] = 0.5 / v
        out[k, 4] = math.sqrt(t1[k] / (1.0 + t1[k])) / sigma
    return out


@njit(cache=True)
def _branches(dh, k, consts, t2k, sigma, nu, c_star):
    """(b1, b2, b0, u_star, inv_curv) for one coefficient at level index k."""
    half_a2 = 0.5 * dh * dh / (sigma * sigma)
    b0 = consts[k, 0] - half_a2
    b1 = NEG_INF
    if consts[k, 1] > NEG_INF:
        x = consts[k, 4] * dh
        b1 = consts[k, 1] + math.log(poly_even(c_star, x)) - consts[k, 3] * dh * dh
    b2 = NEG_INF
    u_star = np.nan
    inv_curv = np.nan
    if consts[k, 2] > NEG_INF:
        u_star, lh, inv_curv = imom_mode(dh / sigma, t2k, nu)
        if not (inv_curv > 0.0):
            return np.nan, np.nan, np.nan, u_star, inv_curv
        b2 = consts[k, 2] - half_a2 + 0.5 * math.log(inv_curv) + lh
    return b1, b2, b0, u_star, inv_curv


@njit(cache=True)
def branch_logs(dh, g1, g2, t1, t2, sigma, r, nu, lgam_half_nu, c_star,
                mom_on, imom_on):
    """Log weights of the MOM, IMOM and point-mass branches of the marginal.

    Returns ``(b1, b2, b0, u_star, inv_curv)``; the last two are nan when the
    IMOM branch is off.
    """
    consts = level_constants(np.array([g1]), np.array([g2]), np.array([t1]),
                             np.array([t2]), sigma, r, nu, lgam_half_nu, mom_on, imom_on)
    return _branches(dh, 0, consts, t2, sigma, nu, c_star)


@njit(cache=True)
def neg_log_marginal_sum(dhat, lev, g1, g2, t1, t2, sigma, r, nu, lgam_half_nu,
                         c_star, mom_on, imom_on):
    """-sum_j log marginal(dhat_j); +inf on any numerical failure."""
    consts = level_constants(g1, g2, t1, t2, sigma, r, nu, lgam_half_nu, mom_on, imom_on)
    total = 0.0
    for j in range(dhat.size):
        k = lev[j]
        b1, b2, b0, _, _ = _branches(dhat[j], k, consts, t2[k], sigma, nu, c_star)
        lm = logaddexp3(b1, b2, b0)
        if not math.isfinite(lm):
            return np.inf
        total -= lm
    return total


@njit(cache=True)
def shrink_all(dhat, lev, g1, g2, t1, t2, sigma, r, nu, lgam_half_nu, c_star,
               c_star2, mom_on, imom_on):
    """Posterior weights, posterior means and IMOM modes per coefficient."""
    consts = level_constants(g1, g2, t1, t2, sigma, r, nu, lgam_half_nu, mom_on, imom_on)
    n = dhat.size
    p1 = np.zeros(n)
    p2 = np.zeros(n)
    mean = np.zeros(n)
    dstar = np.full(n, np.nan)
    ok = True
    for j in range(n):
        k = lev[j]
        dh = dhat[j]
        b1, b2, b0, u_star, _ = _branches(dh, k, consts, t2[k], sigma, nu, c_star)
        lm = logaddexp3(b1, b2, b0)
        if not math.isfinite(lm):
            ok = False
            mean[j] = np.nan
            continue
        w1 = math.exp(b1 - lm)
        w2 = math.exp(b2 - lm)
        p1[j] = w1
        p2[j] = w2
        m = 0.0
        if w1 > 0.0:
            x = consts[k, 4] * dh
            m += w1 * poly_odd(c_star2, x) / poly_even(c_star, x) * (consts[k, 4] * sigma * sigma)
        if consts[k, 2] > NEG_INF:
            dstar[j] = u_star * sigma
            m += w2 * dstar[j]
        mean[j] = m
    return p1, p2, mean, dstar, ok
