"""Empirical Bayes estimation of the level-curve hyperparameters.

The noise scale comes from the MAD of the finest detail level and is held
fixed; the hyperparameters then maximise the (Laplace-approximated) marginal
likelihood of all detail coefficients. Scaling coefficients carry no prior
and contribute nothing.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .hyperspec import (
    MethodConfig,
    SpecConfig,
    from_unconstrained,
    level_arrays,
    neutral_theta,
    to_unconstrained,
)
from .priors import NumericalError, PriorParams, _mstar_coefficients

__all__ = [
    "FitResult",
    "FitError",
    "DegenerateNoiseError",
    "MAD_CONSTANT",
    "estimate_sigma_mad",
    "log_marginal_coeff",
    "branch_log_marginals",
    "neg_log_marginal",
    "fit",
]

log = logging.getLogger(__name__)

MAD_CONSTANT = 0.6745


class DegenerateNoiseError(ValueError):
    """The finest level has zero spread, so the noise scale estimate is 0."""


class FitError(RuntimeError):
    def __init__(self, message, starts=()):
        super().__init__(message)
        self.starts = list(starts)


@dataclass
class FitResult:
    method: MethodConfig
    theta_gamma: np.ndarray
    theta_tau: np.ndarray
    sigma_hat: float
    log_marginal: float
    n_evals: int
    converged: bool
    starts: int
    nlevels: int
    start_log: list = field(default_factory=list, repr=False)

    @property
    def spec(self):
        return SpecConfig(self.method, self.theta_gamma, self.theta_tau)

    def level_params(self):
        g1, g2, t1, t2 = level_arrays(self.method, self.theta_gamma, self.theta_tau,
                                      self.nlevels)
        return g1, g2, t1, t2

    def to_dict(self):
        g1, g2, t1, t2 = self.level_params()
        return {
            "method": self.method.name,
            "r": self.method.r,
            "nu": self.method.nu,
            "theta_gamma": self.theta_gamma.tolist(),
            "theta_tau": self.theta_tau.tolist(),
            "sigma_hat": self.sigma_hat,
            "log_marginal": self.log_marginal,
            "n_evals": self.n_evals,
            "converged": self.converged,
            "starts": self.starts,
            "levels": {
                "gamma1": g1.tolist(),
                "gamma2": g2.tolist(),
                "tau1": t1.tolist(),
                "tau2": t2.tolist(),
            },
        }


def estimate_sigma_mad(pyramid):
    """MAD noise scale from the finest detail level: ``median|d - median d| / 0.6745``."""
    finest = np.asarray(pyramid.finest if hasattr(pyramid, "finest") else pyramid, dtype=float)
    if finest.size == 0:
        raise ValueError("finest detail level is empty")
    mad = np.median(np.abs(finest - np.median(finest)))
    sigma = mad / MAD_CONSTANT
    if not sigma > 0:
        raise DegenerateNoiseError("finest-level coefficients have zero spread (sigma_hat = 0)")
    return float(sigma)


def log_marginal_coeff(dhat, p: PriorParams):
    """Log marginal density of one empirical coefficient under level parameters ``p``."""
    b1, b2, b0, _, _ = _kernels.branch_logs(
        float(dhat), p.gamma1, p.gamma2, p.tau1, p.tau2, p.sigma, p.r, p.nu,
        math.lgamma(0.5 * p.nu), _mstar_coefficients(p.r), p.mom_on, p.imom_on,
    )
    out = _kernels.logaddexp3(b1, b2, b0)
    if not math.isfinite(out):
        raise NumericalError("marginal likelihood is not finite", dhat=dhat, params=p)
    return out


def branch_log_marginals(dhat, tau1, tau2, sigma2, r=1, nu=1.0):
    """Unweighted log marginals ``(MOM, IMOM, point mass)`` of one coefficient.

    The MOM and point-mass terms are exact; the IMOM term is the Laplace
    approximation.
    """
    sigma = math.sqrt(sigma2)
    b1, b2, b0, _, _ = _kernels.branch_logs(
        float(dhat), 0.5, 0.5, float(tau1), float(tau2), sigma, r, nu,
        math.lgamma(0.5 * nu), _mstar_coefficients(r), True, True,
    )
    half = math.log(0.5)
    return b1 - half, b2 - 2 * half, b0 - 2 * half


class _Objective:
    """Negative log marginal as a function of the unconstrained hyperparameters."""

    def __init__(self, pyramid, sigma_hat, method):
        self.method = method
        self.sigma = float(sigma_hat)
        self.nlevels = pyramid.nlevels
        dh, lev = pyramid.flat_details()
        self.dhat = np.ascontiguousarray(dh, dtype=float)
        self.lev = np.ascontiguousarray(lev - 1, dtype=np.int64)
        self.c_star = _mstar_coefficients(method.r)
        self.lgam = math.lgamma(0.5 * method.nu)
        self.n_gamma = method.n_gamma
        self.n_evals = 0

    def levels(self, z):
        theta = from_unconstrained(z, self.method)
        return level_arrays(self.method, theta[: self.n_gamma], theta[self.n_gamma:],
                            self.nlevels)

    def __call__(self, z):
        self.n_evals += 1
        with np.errstate(all="ignore"):
            try:
                g1, g2, t1, t2 = self.levels(z)
            except (ValueError, OverflowError, ArithmeticError):
                return np.inf
            if not (np.all(np.isfinite(t1)) and np.all(np.isfinite(t2))
                    and np.all(t1 > 0) and np.all(t2 > 0)):
                return np.inf
            m = self.method
            val = _kernels.neg_log_marginal_sum(
                self.dhat, self.lev, g1, g2, t1, t2, self.sigma, m.r, m.nu, self.lgam,
                self.c_star, m.mom_on, m.imom_on,
            )
        return val if math.isfinite(val) else np.inf


def neg_log_marginal(theta_unconstrained, pyramid, sigma_hat, method):
    """``-sum log marginal`` over every detail coefficient, or ``inf`` on failure.

    ``theta_unconstrained`` is the full ``[theta_gamma, theta_tau]`` vector
    with positive entries on the log scale.
    """
    if isinstance(method, str):
        method = MethodConfig.from_name(method)
    return _Objective(pyramid, sigma_hat, method)(np.asarray(theta_unconstrained, float))


def _simplex_spread(res):
    sim = res.final_simplex[0]
    fv = res.final_simplex[1]
    with np.errstate(invalid="ignore"):
        return float(np.max(np.abs(sim[1:] - sim[0]))), float(np.max(np.abs(fv[1:] - fv[0])))


def fit(pyramid, method, *, sigma_hat=None, starts=5, max_evals=2000, seed=0,
        initial_step=0.5):
    """Estimate hyperparameters by multistart Nelder-Mead.

    Parameters
    ----------
    pyramid : CoefficientPyramid
    method : MethodConfig or str
    sigma_hat : float, optional
        Noise scale; estimated by :func:`estimate_sigma_mad` when omitted.
    starts : int
        Number of restarts. The first starts at the neutral curves, the
        others at a seeded +/-20% multiplicative jitter of them.
    max_evals : int
        Likelihood evaluations allowed per start.
    seed : int
    initial_step : float
        Edge length of the initial simplex in unconstrained units.
    """
    if isinstance(method, str):
        method = MethodConfig.from_name(method)
    if sigma_hat is None:
        sigma_hat = estimate_sigma_mad(pyramid)
    if not sigma_hat > 0:
        raise DegenerateNoiseError("sigma_hat must be positive")
    if starts < 1:
        raise ValueError("starts must be at least 1")

    obj = _Objective(pyramid, sigma_hat, method)
    tg0, tt0 = neutral_theta(method, pyramid.nlevels)
    base = np.concatenate([tg0, tt0])
    active = method.active_mask()
    rng = np.random.default_rng(seed)

    best = None
    records = []
    for k in range(starts):
        theta_start = base if k == 0 else base * rng.uniform(0.8, 1.2, size=base.size)
        z_full = to_unconstrained(theta_start, method)

        def f(za, z_full=z_full):
            z = z_full.copy()
            z[active] = za
            return obj(z)

        x0 = z_full[active]
        simplex = np.vstack([x0, x0 + initial_step * np.eye(x0.size)])
        evals_before = obj.n_evals
        res = minimize(f, x0, method="Nelder-Mead",
                       options={"maxfev": max_evals, "xatol": 1e-6, "fatol": 1e-8,
                                "initial_simplex": simplex, "adaptive": x0.size > 4})
        dx, dfv = _simplex_spread(res)
        rec = {
            "start": k,
            "neg_log_marginal": float(res.fun),
            "evals": obj.n_evals - evals_before,
            "converged": bool(dx < 1e-6 and dfv < 1e-8),
            "message": str(res.message),
        }
        records.append(rec)
        if math.isfinite(res.fun) and (best is None or res.fun < best[0]):
            z = z_full.copy()
            z[active] = res.x
            best = (float(res.fun), z, rec["converged"])
        log.debug("start %d of %s: %s", k, method.name, rec)

    if best is None:
        raise FitError(f"all {starts} starts failed for {method.name}", records)
    theta = from_unconstrained(best[1], method)
    ng = method.n_gamma
    return FitResult(
        method=method,
        theta_gamma=theta[:ng],
        theta_tau=theta[ng:],
        sigma_hat=float(sigma_hat),
        log_marginal=-best[0],
        n_evals=obj.n_evals,
        converged=best[2],
        starts=starts,
        nlevels=pyramid.nlevels,
        start_log=records,
    )
