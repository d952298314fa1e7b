"""Posterior odds, weights and means of the wavelet coefficients, plus the
end-to-end denoising pipeline."""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .ebayes import estimate_sigma_mad, fit as fit_hyperparameters
from .hyperspec import MethodConfig
from .priors import (
    NumericalError,
    PriorParams,
    _mstar_coefficients,
    _mstarstar_coefficients,
    laplace_fit,
    m_star,
    normal_density,
)
from .transform import dwt, idwt

__all__ = [
    "ShrinkageSummary",
    "PipelineError",
    "log_odds",
    "posterior_probs",
    "posterior_mean_coeff",
    "posterior_density_nonzero",
    "shrink_pyramid",
    "denoise",
]


@dataclass(frozen=True)
class ShrinkageSummary:
    p1: float
    p2: float
    post_mean: float
    d_star: float
    level: int
    index: int

    @property
    def p0(self):
        return 1.0 - self.p1 - self.p2


class PipelineError(RuntimeError):
    """A denoising stage failed; ``stage`` names it and ``__cause__`` holds the error."""

    def __init__(self, stage, cause):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


def log_odds(dhat, p: PriorParams):
    """Log posterior odds of the MOM and IMOM branches against the point mass."""
    if p.gamma1 >= 1.0 or p.gamma2 >= 1.0:
        raise ValueError("a mixture weight of 1 leaves no point mass; odds are undefined")
    dhat = float(dhat)
    lo1 = -math.inf
    if p.gamma1 > 0:
        t = p.tau1
        lo1 = (math.log(p.gamma1) - math.log1p(-p.gamma1) - math.log1p(-p.gamma2)
               - (p.r + 0.5) * math.log1p(t) + math.log(m_star(dhat, t, p.sigma, p.r))
               + t / (1.0 + t) * dhat * dhat / (2.0 * p.sigma2))
    lo2 = -math.inf
    if p.gamma2 > 0:
        lf = laplace_fit(dhat, p.tau2, p.nu, p.sigma2)
        lo2 = (math.log(p.gamma2) - math.log1p(-p.gamma2)
               + 0.5 * p.nu * math.log(p.tau2 * p.sigma2) - math.lgamma(0.5 * p.nu)
               + 0.5 * math.log(2.0 * math.pi) + math.log(lf.sigma_star) + lf.log_h_at_mode)
    return lo1, lo2


def posterior_probs(log_o1, log_o2):
    """``(p1, p2)`` from log odds, normalised with log-sum-exp."""
    lse = _kernels.logaddexp3(0.0, float(log_o1), float(log_o2))
    return math.exp(log_o1 - lse), math.exp(log_o2 - lse)


def _level_arrays_from_params(p):
    return (np.array([p.gamma1]), np.array([p.gamma2]), np.array([p.tau1]),
            np.array([p.tau2]))


def _shrink_arrays(dhat, lev0, g1, g2, t1, t2, sigma, r, nu, mom_on, imom_on):
    p1, p2, mean, dstar, ok = _kernels.shrink_all(
        np.ascontiguousarray(dhat, dtype=float), np.ascontiguousarray(lev0, dtype=np.int64),
        g1, g2, t1, t2, float(sigma), r, nu, math.lgamma(0.5 * nu),
        _mstar_coefficients(r), _mstarstar_coefficients(r), mom_on, imom_on,
    )
    if not ok:
        bad = int(np.flatnonzero(~np.isfinite(mean))[0])
        raise NumericalError("posterior evaluation failed", index=bad, dhat=float(dhat[bad]))
    return p1, p2, mean, dstar


def posterior_mean_coeff(dhat, p: PriorParams, level=1, index=0):
    """Posterior weights and mean of one coefficient.

    The mean is ``p1 * s * M**/M* + p2 * d*`` with ``s = sigma sqrt(tau1/(1+tau1))``.
    """
    g1, g2, t1, t2 = _level_arrays_from_params(p)
    p1, p2, mean, dstar = _shrink_arrays(
        np.array([float(dhat)]), np.zeros(1), g1, g2, t1, t2, p.sigma, p.r, p.nu,
        p.mom_on, p.imom_on,
    )
    return ShrinkageSummary(float(p1[0]), float(p2[0]), float(mean[0]), float(dstar[0]),
                            level, index)


def posterior_density_nonzero(d, dhat, p: PriorParams):
    """Posterior density of a coefficient given it is nonzero.

    The MOM part is exact; the IMOM part is the Laplace Gaussian
    ``N(d*, sigma*^2)``.
    """
    s = posterior_mean_coeff(dhat, p)
    total = s.p1 + s.p2
    if not total > 0:
        raise ValueError("posterior puts no mass on nonzero values")
    d = np.asarray(d, dtype=float)
    out = np.zeros_like(d)
    if s.p1 > 0:
        r = p.r
        shrink = p.tau1 / (1.0 + p.tau1)
        v = p.sigma2 * shrink
        log_mt = -0.5 * math.log(2.0 * math.pi) - math.lgamma(2 * r + 1) + math.lgamma(r + 1) \
            + r * math.log(2.0)
        # normalised by the Gaussian moment E[d^2r] = v^r sqrt(2 pi v) M*(...) (2r-1)!! M~
        norm = math.log(m_star(dhat, p.tau1, p.sigma, r)) + (r + 0.5) * math.log(v)
        with np.errstate(divide="ignore"):
            logd = np.where(d == 0.0, -np.inf, 2 * r * np.log(np.abs(d)))
        out = out + s.p1 / total * np.exp(log_mt - norm + logd - (d - shrink * dhat) ** 2 / (2 * v))
    if s.p2 > 0:
        lf = laplace_fit(dhat, p.tau2, p.nu, p.sigma2)
        out = out + s.p2 / total * normal_density(d, lf.d_star, lf.sigma_star ** 2)
    return out[()] if out.ndim == 0 else out


def shrink_pyramid(pyramid, fit, *, summaries=True):
    """Replace every detail coefficient by its posterior mean.

    Scaling coefficients pass through unchanged. Returns the new pyramid and,
    if requested, one :class:`ShrinkageSummary` per detail coefficient.
    """
    if fit.nlevels != pyramid.nlevels:
        raise ValueError(f"fit has {fit.nlevels} levels, pyramid has {pyramid.nlevels}")
    m = fit.method
    g1, g2, t1, t2 = fit.level_params()
    dhat, lev = pyramid.flat_details()
    p1, p2, mean, dstar = _shrink_arrays(dhat, lev - 1, g1, g2, t1, t2, fit.sigma_hat,
                                         m.r, m.nu, m.mom_on, m.imom_on)
    sizes = [d.size for d in pyramid.details]
    out = pyramid.with_details(np.split(mean, np.cumsum(sizes)[:-1]))
    if not summaries:
        return out, None
    index = np.concatenate([np.arange(s) for s in sizes])
    table = [
        ShrinkageSummary(float(a), float(b), float(c), float(e), int(l), int(j))
        for a, b, c, e, l, j in zip(p1, p2, mean, dstar, lev, index)
    ]
    return out, table


def denoise(signal, method="mixture-logit-polynom", wavelet="sym6", *, nlevels=None,
            starts=5, max_evals=2000, seed=0, summaries=True):
    """dwt -> MAD noise scale -> empirical Bayes fit -> posterior mean -> idwt.

    Returns ``(estimate, fit, summaries)``. An input whose detail
    coefficients all vanish to rounding error (a constant signal, say) is
    returned unchanged with ``fit = None``: there is nothing to shrink and
    the noise scale is zero.
    """
    if isinstance(method, str):
        method = MethodConfig.from_name(method)
    try:
        pyr = dwt(signal, wavelet, nlevels)
    except ValueError as exc:
        raise PipelineError("transform", exc) from exc
    flat, _ = pyr.flat_details()
    scale = max(1.0, float(np.max(np.abs(signal))))
    if np.max(np.abs(flat)) <= 1e-12 * scale:
        return np.asarray(signal, dtype=float).copy(), None, [] if summaries else None
    try:
        sigma_hat = estimate_sigma_mad(pyr)
    except ValueError as exc:
        raise PipelineError("noise estimate", exc) from exc
    try:
        fitted = fit_hyperparameters(pyr, method, sigma_hat=sigma_hat, starts=starts,
                                     max_evals=max_evals, seed=seed)
    except Exception as exc:
        raise PipelineError("fit", exc) from exc
    try:
        shrunk, table = shrink_pyramid(pyr, fitted, summaries=summaries)
    except Exception as exc:
        raise PipelineError("shrinkage", exc) from exc
    return idwt(shrunk), fitted, table
