"""Nonlocal prior densities and the Laplace machinery for the IMOM branch."""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels

__all__ = [
    "PriorParams",
    "LaplaceFit",
    "NumericalError",
    "double_factorial",
    "mom_density",
    "imom_density",
    "mixture_prior_density",
    "m_star",
    "m_star_star",
    "log_h",
    "log_h_derivative",
    "log_h_second_derivative",
    "laplace_fit",
    "normal_density",
]


class NumericalError(ArithmeticError):
    """Raised when a root search or likelihood evaluation breaks down."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


def _check_positive(**kwargs):
    for name, value in kwargs.items():
        if not value > 0:
            raise ValueError(f"{name} must be positive, got {value!r}")


def _check_order(r):
    if int(r) != r or r < 1:
        raise ValueError(f"MOM order r must be a positive integer, got {r!r}")


@dataclass(frozen=True)
class PriorParams:
    """Prior parameters of a single resolution level.

    ``gamma1`` weights the MOM component; ``gamma2`` is the IMOM weight
    among the remaining mass. A weight of exactly zero switches that
    component off (the two-component MOM-only or IMOM-only models).
    """

    gamma1: float
    gamma2: float
    tau1: float
    tau2: float
    sigma2: float
    r: int = 1
    nu: float = 1.0

    def __post_init__(self):
        for name in ("gamma1", "gamma2"):
            g = getattr(self, name)
            if not 0.0 <= g <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {g!r}")
        _check_positive(tau1=self.tau1, tau2=self.tau2, sigma2=self.sigma2, nu=self.nu)
        _check_order(self.r)

    @property
    def nu_below_one(self):
        """True for shapes at or under 1, accepted although unusual."""
        return self.nu <= 1.0

    @property
    def sigma(self):
        return math.sqrt(self.sigma2)

    @property
    def mom_on(self):
        return self.gamma1 > 0.0

    @property
    def imom_on(self):
        return self.gamma2 > 0.0


@dataclass(frozen=True)
class LaplaceFit:
    d_star: float
    sigma_star: float
    log_h_at_mode: float


def double_factorial(k):
    """k!! for odd or even k >= -1."""
    return math.prod(range(k, 0, -2)) if k > 0 else 1


@lru_cache(maxsize=None)
def _mstar_coefficients(r):
    # (2r)! / ((2i)! (r-i)! 2^(r-i)) / (2r-1)!!, built from log-factorials
    ldf = math.lgamma(2 * r + 1) - math.lgamma(r + 1) - r * math.log(2.0)  # log (2r-1)!!
    c = [
        math.exp(math.lgamma(2 * r + 1) - math.lgamma(2 * i + 1) - math.lgamma(r - i + 1)
                 - (r - i) * math.log(2.0) - ldf)
        for i in range(r + 1)
    ]
    arr = np.array(c)
    arr.flags.writeable = False
    return arr


@lru_cache(maxsize=None)
def _mstarstar_coefficients(r):
    ldf = math.lgamma(2 * r + 1) - math.lgamma(r + 1) - r * math.log(2.0)
    c = [
        math.exp(math.lgamma(2 * r + 2) - math.lgamma(2 * i) - math.lgamma(r + 2 - i)
                 - (r + 1 - i) * math.log(2.0) - ldf)
        for i in range(1, r + 2)
    ]
    arr = np.array(c)
    arr.flags.writeable = False
    return arr


def normal_density(x, mean=0.0, var=1.0):
    _check_positive(var=var)
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * (x - mean) ** 2 / var) / math.sqrt(2.0 * math.pi * var)
    return out[()] if out.ndim == 0 else out


def mom_density(d, tau, r=1, sigma2=1.0):
    """Moment prior density ``M_r (tau s2)^(-r-1/2) d^(2r) exp(-d^2 / (2 tau s2))``."""
    _check_positive(tau=tau, sigma2=sigma2)
    _check_order(r)
    d = np.asarray(d, dtype=float)
    v = tau * sigma2
    log_m = -0.5 * math.log(2.0 * math.pi) - math.log(double_factorial(2 * r - 1))
    with np.errstate(divide="ignore"):
        logd = np.where(d == 0.0, -np.inf, 2 * r * np.log(np.abs(d)))
    out = np.exp(log_m - (r + 0.5) * math.log(v) + logd - 0.5 * d * d / v)
    return out[()] if out.ndim == 0 else out


def imom_density(d, tau, nu=1.0, sigma2=1.0):
    """Inverse moment prior density; zero at the origin."""
    _check_positive(tau=tau, sigma2=sigma2, nu=nu)
    d = np.asarray(d, dtype=float)
    v = tau * sigma2
    ad = np.abs(d)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        logp = (0.5 * nu * math.log(v) - math.lgamma(0.5 * nu)
                - (nu + 1.0) * np.log(ad) - v / (d * d))
        out = np.where(ad == 0.0, 0.0, np.exp(logp))
    return out[()] if out.ndim == 0 else out


def mixture_prior_density(d, params):
    """Continuous part of the three-component prior (the point mass is excluded)."""
    p = params
    w1 = p.gamma1
    w2 = (1.0 - p.gamma1) * p.gamma2
    out = np.zeros_like(np.asarray(d, dtype=float))
    if w1 > 0:
        out = out + w1 * mom_density(d, p.tau1, p.r, p.sigma2)
    if w2 > 0:
        out = out + w2 * imom_density(d, p.tau2, p.nu, p.sigma2)
    return out


def _shrink_ratio(tau1, dhat, sigma):
    return np.sqrt(tau1 / (1.0 + tau1)) * np.asarray(dhat, dtype=float) / sigma


def m_star(dhat, tau1, sigma, r=1):
    """Even moment polynomial of the MOM marginal (``1 + x^2`` for r = 1)."""
    _check_positive(tau1=tau1, sigma=sigma)
    _check_order(r)
    x = _shrink_ratio(tau1, dhat, sigma)
    c = _mstar_coefficients(int(r))
    out = np.polynomial.polynomial.polyval(x * x, c)
    return out[()] if np.ndim(out) == 0 else out


def m_star_star(dhat, tau1, sigma, r=1):
    """Odd moment polynomial of the MOM posterior mean (``3x + x^3`` for r = 1)."""
    _check_positive(tau1=tau1, sigma=sigma)
    _check_order(r)
    x = _shrink_ratio(tau1, dhat, sigma)
    c = _mstarstar_coefficients(int(r))
    out = x * np.polynomial.polynomial.polyval(x * x, c)
    return out[()] if np.ndim(out) == 0 else out


def log_h(d, dhat, tau2, nu=1.0, sigma2=1.0):
    """Log of the IMOM Laplace integrand ``|d|^-(nu+1) exp(...)``."""
    d = np.asarray(d, dtype=float)
    if np.any(d == 0.0):
        raise ValueError("log_h is undefined at d = 0")
    out = (-(nu + 1.0) * np.log(np.abs(d)) - (d * d - 2.0 * d * dhat) / (2.0 * sigma2)
           - tau2 * sigma2 / (d * d))
    return out[()] if out.ndim == 0 else out


def log_h_derivative(d, dhat, tau2, nu=1.0, sigma2=1.0):
    return -(nu + 1.0) / d - (d - dhat) / sigma2 + 2.0 * tau2 * sigma2 / d**3


def log_h_second_derivative(d, dhat, tau2, nu=1.0, sigma2=1.0):
    return (nu + 1.0) / d**2 - 1.0 / sigma2 - 6.0 * tau2 * sigma2 / d**4


def laplace_fit(dhat, tau2, nu=1.0, sigma2=1.0):
    """Global maximiser of ``log_h`` over ``d != 0`` and its curvature scale.

    ``log_h(d) - log_h(-d) = 2 d dhat / sigma2``, so the maximiser lies on the
    half-line of ``dhat``; at ``dhat == 0`` the symmetric tie resolves to the
    positive root.
    """
    _check_positive(tau2=tau2, nu=nu, sigma2=sigma2)
    sigma = math.sqrt(sigma2)
    u, lh, inv_curv = _kernels.imom_mode(float(dhat) / sigma, float(tau2), float(nu))
    if not (math.isfinite(u) and inv_curv > 0):
        raise NumericalError(
            "IMOM mode search failed", dhat=dhat, tau2=tau2, nu=nu, sigma2=sigma2, u=u,
            inv_curv=inv_curv,
        )
    return LaplaceFit(u * sigma, sigma * math.sqrt(inv_curv), lh - (nu + 1.0) * math.log(sigma))
