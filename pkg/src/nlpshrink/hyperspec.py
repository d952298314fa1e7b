"""Level-dependent hyperparameter curves for the mixture weights and scales.

Each method is named ``{slab}-{gamma family}-{tau family}``, e.g.
``mixture-gennormal-doubleexp``; 3 x 4 x 2 = 24 methods in all.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .priors import PriorParams

__all__ = [
    "GAMMA_FAMILIES",
    "TAU_FAMILIES",
    "SLAB_FAMILIES",
    "METHOD_NAMES",
    "MethodConfig",
    "SpecConfig",
    "gamma_logit",
    "gamma_genlogit",
    "gamma_hypsec",
    "gamma_gennormal",
    "regularized_lower_gamma",
    "tau_polynom",
    "tau_doubleexp",
    "resolve_levels",
    "level_arrays",
    "positivity_pattern",
    "to_unconstrained",
    "from_unconstrained",
    "neutral_theta",
]

SLAB_FAMILIES = ("mom", "imom", "mixture")
GAMMA_FAMILIES = ("logit", "genlogit", "hypsec", "gennormal")
TAU_FAMILIES = ("polynom", "doubleexp")

# positivity of each parameter of a single component's curve
_GAMMA_PATTERN = {
    "logit": (False, True),
    "genlogit": (False, True, True),
    "hypsec": (False, True),
    "gennormal": (False, True, True),
}
_TAU_PATTERN = {
    "polynom": (True, True),
    "doubleexp": (True, True, True, True),
}

METHOD_NAMES = tuple(
    f"{s}-{g}-{t}" for s, g, t in itertools.product(SLAB_FAMILIES, GAMMA_FAMILIES, TAU_FAMILIES)
)


def _require_positive(name, *values):
    for v in values:
        if not v > 0:
            raise ValueError(f"{name}: parameter must be positive, got {v!r}")


def _as_levels(l):
    return np.asarray(l, dtype=float)


def _scalar(out):
    return out[()] if np.ndim(out) == 0 else out


def _softplus(z):
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def gamma_logit(l, theta):
    t1, t2 = theta
    _require_positive("logit slope", t2)
    z = t1 - t2 * _as_levels(l)
    return _scalar(np.exp(-_softplus(-z)))


def gamma_genlogit(l, theta):
    """Richards curve ``[1 + exp(-(t1 - t2 l))]^(-t3)``."""
    t1, t2, t3 = theta
    _require_positive("genlogit", t2, t3)
    z = t1 - t2 * _as_levels(l)
    return _scalar(np.exp(-t3 * _softplus(-z)))


def gamma_hypsec(l, theta):
    t1, t2 = theta
    _require_positive("hypsec slope", t2)
    z = 0.5 * math.pi * (t1 - t2 * _as_levels(l))
    # arctan(e^z) = pi/2 - arctan(e^-z) keeps the exponent non-positive
    with np.errstate(over="ignore"):
        small = np.arctan(np.exp(-np.abs(z)))
    out = np.where(z <= 0, small, 0.5 * math.pi - small) * (2.0 / math.pi)
    return _scalar(out)


def regularized_lower_gamma(a, x, tol=1e-15, maxiter=10_000):
    """P(a, x) = gamma(a, x) / Gamma(a).

    Power series below ``a + 1``, Lentz continued fraction for the upper
    tail otherwise.
    """
    if not a > 0:
        raise ValueError(f"shape a must be positive, got {a!r}")
    if x < 0:
        raise ValueError(f"x must be non-negative, got {x!r}")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    log_pref = a * math.log(x) - x - math.lgamma(a)
    if x < a + 1.0:
        term = 1.0 / a
        total = term
        ap = a
        for _ in range(maxiter):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * tol:
                return min(total * math.exp(log_pref), 1.0)
        raise ArithmeticError(f"series for P({a}, {x}) did not converge")
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, maxiter):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return max(1.0 - math.exp(log_pref) * h, 0.0)
    raise ArithmeticError(f"continued fraction for P({a}, {x}) did not converge")


def gamma_gennormal(l, theta):
    """Generalized normal CDF curve centred at ``t1`` (exactly 1/2 at ``l == t1``)."""
    t1, t2, t3 = theta
    _require_positive("gennormal", t2, t3)
    levels = np.atleast_1d(_as_levels(l))
    out = np.empty(levels.shape)
    for i, li in enumerate(levels):
        dev = t1 - li
        s = float(np.sign(dev))
        out[i] = 0.5 + 0.5 * s * regularized_lower_gamma(1.0 / t2, abs(dev / t3) ** t2)
    return _scalar(out.reshape(np.shape(l)))


def tau_polynom(l, theta):
    t1, t2 = theta
    _require_positive("polynom", t1, t2)
    levels = _as_levels(l)
    if np.any(levels < 1):
        raise ValueError("polynomial decay is defined for levels >= 1")
    return _scalar(t1 * levels ** (-t2))


def tau_doubleexp(l, theta):
    t1, t2, t3, t4 = theta
    _require_positive("doubleexp", t1, t2, t3, t4)
    levels = _as_levels(l)
    return _scalar(t1 * np.exp(-t2 * levels) + t3 * np.exp(-t4 * levels))


_GAMMA_FUNCS = {
    "logit": gamma_logit,
    "genlogit": gamma_genlogit,
    "hypsec": gamma_hypsec,
    "gennormal": gamma_gennormal,
}
_TAU_FUNCS = {"polynom": tau_polynom, "doubleexp": tau_doubleexp}


@dataclass(frozen=True)
class MethodConfig:
    """One of the 24 analysis methods plus the fixed MOM order and IMOM shape."""

    slab: str = "mixture"
    gamma_family: str = "logit"
    tau_family: str = "polynom"
    r: int = 1
    nu: float = 1.0

    def __post_init__(self):
        if self.slab not in SLAB_FAMILIES:
            raise ValueError(f"unknown slab {self.slab!r}; choose from {', '.join(SLAB_FAMILIES)}")
        if self.gamma_family not in GAMMA_FAMILIES:
            raise ValueError(
                f"unknown gamma specification {self.gamma_family!r}; "
                f"choose from {', '.join(GAMMA_FAMILIES)}")
        if self.tau_family not in TAU_FAMILIES:
            raise ValueError(
                f"unknown tau specification {self.tau_family!r}; "
                f"choose from {', '.join(TAU_FAMILIES)}")

    @classmethod
    def from_name(cls, name, r=1, nu=1.0):
        parts = str(name).split("-")
        if len(parts) != 3:
            raise ValueError(f"method name {name!r} is not of the form slab-gamma-tau")
        return cls(*parts, r=r, nu=nu)

    @property
    def name(self):
        return f"{self.slab}-{self.gamma_family}-{self.tau_family}"

    @property
    def mom_on(self):
        return self.slab in ("mom", "mixture")

    @property
    def imom_on(self):
        return self.slab in ("imom", "mixture")

    @property
    def n_gamma(self):
        return 2 * len(_GAMMA_PATTERN[self.gamma_family])

    @property
    def n_tau(self):
        return 2 * len(_TAU_PATTERN[self.tau_family])

    def active_mask(self):
        """Which entries of ``[theta_gamma, theta_tau]`` the slab actually uses."""
        gh, th = self.n_gamma // 2, self.n_tau // 2
        first = self.mom_on
        second = self.imom_on
        return np.array([first] * gh + [second] * gh + [first] * th + [second] * th)


@dataclass(frozen=True)
class SpecConfig:
    method: MethodConfig
    theta_gamma: np.ndarray = field(repr=True)
    theta_tau: np.ndarray = field(repr=True)

    def __post_init__(self):
        tg = np.asarray(self.theta_gamma, dtype=float)
        tt = np.asarray(self.theta_tau, dtype=float)
        if tg.size != self.method.n_gamma:
            raise ValueError(f"{self.method.gamma_family} needs {self.method.n_gamma} "
                             f"gamma parameters, got {tg.size}")
        if tt.size != self.method.n_tau:
            raise ValueError(f"{self.method.tau_family} needs {self.method.n_tau} "
                             f"tau parameters, got {tt.size}")
        pattern = positivity_pattern(self.method)
        full = np.concatenate([tg, tt])
        if np.any(full[pattern] <= 0):
            raise ValueError(f"positivity constraints violated for {self.method.name}: {full}")
        object.__setattr__(self, "theta_gamma", tg)
        object.__setattr__(self, "theta_tau", tt)


def positivity_pattern(method):
    """Boolean mask of strictly positive entries of ``[theta_gamma, theta_tau]``."""
    g = _GAMMA_PATTERN[method.gamma_family]
    t = _TAU_PATTERN[method.tau_family]
    return np.array(g + g + t + t)


def to_unconstrained(theta, method):
    theta = np.asarray(theta, dtype=float)
    pos = positivity_pattern(method)
    return np.where(pos, np.log(np.where(pos, theta, 1.0)), theta)


def from_unconstrained(z, method):
    z = np.asarray(z, dtype=float)
    pos = positivity_pattern(method)
    with np.errstate(over="ignore"):
        return np.where(pos, np.exp(np.where(pos, z, 0.0)), z)


def level_arrays(method, theta_gamma, theta_tau, nlevels):
    """Per-level ``(gamma1, gamma2, tau1, tau2)`` arrays for levels ``1..nlevels``.

    A component excluded by the slab family gets weight exactly zero.
    """
    levels = np.arange(1, nlevels + 1, dtype=float)
    gh = method.n_gamma // 2
    th = method.n_tau // 2
    gf = _GAMMA_FUNCS[method.gamma_family]
    tf = _TAU_FUNCS[method.tau_family]
    zeros = np.zeros(nlevels)
    g1 = np.atleast_1d(gf(levels, theta_gamma[:gh])) if method.mom_on else zeros
    g2 = np.atleast_1d(gf(levels, theta_gamma[gh:])) if method.imom_on else zeros
    t1 = np.atleast_1d(tf(levels, theta_tau[:th]))
    t2 = np.atleast_1d(tf(levels, theta_tau[th:]))
    return g1, g2, t1, t2


def resolve_levels(config, nlevels, sigma2):
    """List of :class:`PriorParams` for levels ``1..nlevels``."""
    m = config.method
    g1, g2, t1, t2 = level_arrays(m, config.theta_gamma, config.theta_tau, nlevels)
    return [
        PriorParams(float(a), float(b), float(c), float(d), sigma2, m.r, m.nu)
        for a, b, c, d in zip(g1, g2, t1, t2)
    ]


def _neutral_gamma(family, nlevels):
    # curve passing through 0.9 at l = 1 and 0.1 at l = L
    span = max(nlevels - 1, 1)
    if family in ("logit", "genlogit"):
        z = math.log(9.0)
        slope = 2 * z / span
        theta = [z + slope, slope]
        if family == "genlogit":
            theta.append(1.0)
    elif family == "hypsec":
        z = (2.0 / math.pi) * math.log(math.tan(0.45 * math.pi))
        slope = 2 * z / span
        theta = [z + slope, slope]
    else:
        centre = 0.5 * (nlevels + 1)
        half = max(centre - 1.0, 0.5)
        # shape 2 is a normal CDF with sd t3 / sqrt(2); Phi^-1(0.9) = 1.2815516
        theta = [centre, 2.0, math.sqrt(2.0) * half / 1.2815515655446004]
    return theta


def _neutral_tau(family):
    if family == "polynom":
        return [1.0, 1.0]
    # tau(1) = 1 split evenly across a slow and a fast exponential
    return [0.5 * math.exp(0.5), 0.5, 0.5 * math.exp(1.5), 1.5]


def neutral_theta(method, nlevels):
    """Starting hyperparameters: gamma from about 0.9 to 0.1 across levels, tau(1) = 1."""
    g = _neutral_gamma(method.gamma_family, nlevels)
    t = _neutral_tau(method.tau_family)
    return np.array(g + g, dtype=float), np.array(t + t, dtype=float)
