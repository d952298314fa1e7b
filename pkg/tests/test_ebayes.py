import json
import math

import numpy as np
import pytest

from conftest import slab_quadrature
from nlpshrink.ebayes import (
    MAD_CONSTANT,
    DegenerateNoiseError,
    FitError,
    branch_log_marginals,
    estimate_sigma_mad,
    fit,
    log_marginal_coeff,
    neg_log_marginal,
)
from nlpshrink.hyperspec import (
    MethodConfig,
    SpecConfig,
    level_arrays,
    neutral_theta,
    resolve_levels,
    to_unconstrained,
)
from nlpshrink.priors import PriorParams, normal_density
from nlpshrink.transform import CoefficientPyramid, dwt


def test_mad_constant_and_estimate(rng):
    assert MAD_CONSTANT == 0.6745
    sigma = 2.5
    pyr = dwt(sigma * rng.standard_normal(4096), "haar")
    assert estimate_sigma_mad(pyr) == pytest.approx(sigma, rel=0.05)


def test_mad_uses_only_finest_level():
    pyr = dwt(np.zeros(64), "haar", 3)
    pyr.details[0][:] = 1e6
    pyr.details[-1][:] = np.arange(32.0)
    # median |x - 15.5| over 0..31 is 8
    assert estimate_sigma_mad(pyr) == pytest.approx(8 / 0.6745)


def test_mad_degenerate():
    with pytest.raises(DegenerateNoiseError):
        estimate_sigma_mad(dwt(np.ones(64)))


@pytest.mark.parametrize("tau1", [0.3, 2.0, 9.0])
@pytest.mark.parametrize("dhat", [-4.0, -0.5, 0.0, 1.2, 6.0])
@pytest.mark.parametrize("r", [1, 2])
def test_mom_branch_is_exact(tau1, dhat, r):
    s2 = 0.8
    lm, _, l0 = branch_log_marginals(dhat, tau1, 1.0, s2, r=r)
    ref = slab_quadrature(dhat, "mom", tau1, s2, r=r)
    assert math.exp(lm) == pytest.approx(ref, rel=1e-10)
    assert math.exp(l0) == pytest.approx(normal_density(dhat, 0.0, s2), rel=1e-13)


def test_imom_branch_is_close_for_large_observations():
    for dhat in (4.0, 6.0, 10.0):
        _, li, _ = branch_log_marginals(dhat, 1.0, 2.0, 1.0)
        ref = slab_quadrature(dhat, "imom", 2.0, 1.0)
        assert math.exp(li) == pytest.approx(ref, rel=0.05)


def test_log_marginal_weights_branches():
    p = PriorParams(0.3, 0.4, 2.0, 1.5, 0.9)
    lm, li, l0 = branch_log_marginals(1.7, 2.0, 1.5, 0.9)
    expect = math.log(0.3 * math.exp(lm) + 0.7 * 0.4 * math.exp(li) + 0.7 * 0.6 * math.exp(l0))
    assert log_marginal_coeff(1.7, p) == pytest.approx(expect, rel=1e-13)


def test_mom_only_marginal_against_full_quadrature():
    p = PriorParams(0.35, 0.0, 3.0, 1.0, 1.0, r=2)
    for dhat in (-3.0, 0.4, 2.5):
        ref = 0.65 * normal_density(dhat) + slab_quadrature(dhat, "mom", 3.0, 1.0, r=2) * 0.35
        assert math.exp(log_marginal_coeff(dhat, p)) == pytest.approx(ref, rel=1e-10)


def _pyramid(rng, n=256, sigma=1.0):
    x = np.zeros(n)
    x[n // 4: n // 2] = 4.0
    return dwt(x + sigma * rng.standard_normal(n), "haar")


@pytest.mark.parametrize("name", ["mixture-logit-polynom", "mom-gennormal-doubleexp",
                                  "imom-hypsec-polynom"])
def test_objective_matches_scalar_sum(name, rng):
    pyr = _pyramid(rng, 64)
    m = MethodConfig.from_name(name)
    tg, tt = neutral_theta(m, pyr.nlevels)
    sigma = estimate_sigma_mad(pyr)
    z = to_unconstrained(np.concatenate([tg, tt]), m)
    total = 0.0
    params = resolve_levels(SpecConfig(m, tg, tt), pyr.nlevels, sigma**2)
    for level, d in enumerate(pyr.details, start=1):
        total += sum(log_marginal_coeff(v, params[level - 1]) for v in d)
    assert neg_log_marginal(z, pyr, sigma, name) == pytest.approx(-total, rel=1e-12)


def test_objective_returns_inf_for_invalid_parameters(rng):
    pyr = _pyramid(rng, 64)
    z = np.array([0.0, 0.0, 0.0, 0.0, 800.0, 0.0, 0.0, 0.0])  # tau scale overflows
    assert neg_log_marginal(z, pyr, 1.0, "mixture-logit-polynom") == math.inf


def test_fit_beats_truth_and_start(rng):
    """The maximiser's log marginal is at least that of the generating parameters."""
    m = MethodConfig.from_name("mom-logit-polynom")
    nlev = 8
    theta_g = np.array([3.0, 0.9, 0.0, 1.0])
    theta_t = np.array([30.0, 1.2, 1.0, 1.0])
    g1, _, t1, _ = level_arrays(m, theta_g, theta_t, nlev)
    details = []
    for l in range(nlev):
        size = 2**l
        nz = rng.random(size) < g1[l]
        # MOM(r=1) draw: |d| = sqrt(tau) * chi_3, random sign
        mag = math.sqrt(t1[l]) * np.sqrt(rng.chisquare(3, size))
        d = np.where(nz, mag * rng.choice([-1.0, 1.0], size), 0.0)
        details.append(d + rng.standard_normal(size))
    pyr = CoefficientPyramid(np.zeros(1), details, 2**nlev, "haar")
    res = fit(pyr, m, sigma_hat=1.0, starts=3, seed=1)
    truth = -neg_log_marginal(to_unconstrained(np.concatenate([theta_g, theta_t]), m), pyr,
                              1.0, m)
    tg0, tt0 = neutral_theta(m, nlev)
    start = -neg_log_marginal(to_unconstrained(np.concatenate([tg0, tt0]), m), pyr, 1.0, m)
    assert res.log_marginal >= truth - 1e-6
    assert res.log_marginal >= start
    assert len(res.start_log) == 3
    assert res.n_evals == sum(r["evals"] for r in res.start_log)


def test_fit_is_deterministic_and_pins_inactive_component(rng):
    pyr = _pyramid(rng)
    a = fit(pyr, "imom-logit-polynom", starts=2, max_evals=400, seed=7)
    b = fit(pyr, "imom-logit-polynom", starts=2, max_evals=400, seed=7)
    np.testing.assert_array_equal(a.theta_gamma, b.theta_gamma)
    assert a.log_marginal == b.log_marginal
    g1, g2, _, _ = a.level_params()
    assert np.all(g1 == 0) and np.all(g2 > 0)
    report = a.to_dict()
    json.dumps(report)
    assert report["method"] == "imom-logit-polynom"
    assert len(report["levels"]["gamma2"]) == pyr.nlevels


def test_fit_argument_errors(rng):
    pyr = _pyramid(rng, 64)
    with pytest.raises(ValueError, match="starts"):
        fit(pyr, "mom-logit-polynom", starts=0)
    with pytest.raises(DegenerateNoiseError):
        fit(pyr, "mom-logit-polynom", sigma_hat=0.0)


def test_fit_error_when_every_start_fails(rng, monkeypatch):
    import nlpshrink.ebayes as eb

    pyr = _pyramid(rng, 64)
    monkeypatch.setattr(eb._Objective, "__call__", lambda self, z: math.inf)
    with pytest.raises(FitError) as info:
        fit(pyr, "mom-logit-polynom", starts=2, max_evals=50)
    assert len(info.value.starts) == 2
