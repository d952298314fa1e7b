import math

import numpy as np
import pytest
from scipy.integrate import quad

from nlpshrink.priors import imom_density, mom_density, normal_density

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def report(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        tr.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def integrate(f, lo=-math.inf, hi=math.inf, points=(), rel=1e-12):
    """Adaptive quadrature split at ``points`` so every peak is seen."""
    cuts = sorted({lo, hi, *[p for p in points if lo < p < hi]})
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        total += quad(f, a, b, limit=500, epsabs=0.0, epsrel=rel)[0]
    return total


def slab_quadrature(dhat, slab, tau, sigma2, r=1, nu=1.0, moment=0):
    """``int d^moment pi(d) N(dhat; d, sigma2) dd`` for one slab, by quadrature."""
    s = math.sqrt(sigma2)
    prior = (lambda d: mom_density(d, tau, r, sigma2)) if slab == "mom" else \
        (lambda d: imom_density(d, tau, nu, sigma2))
    f = lambda d: d**moment * prior(d) * normal_density(dhat, d, sigma2)
    spread = s * (1.0 + math.sqrt(tau))
    pts = (0.0, dhat, -spread, spread, dhat - 3 * s, dhat + 3 * s)
    lim = abs(dhat) + 60.0 * spread
    return integrate(f, -lim, lim, points=pts)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
