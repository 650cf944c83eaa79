import math

import numpy as np
import pytest
from scipy import stats

from dasp.errors import InvalidParameter, OutOfSupport
from dasp.priors import (
    PriorKind,
    PriorSpec,
    ScaleDraw,
    default_spec,
    log_beta_prime,
    log_dirichlet,
    log_half_cauchy,
    log_half_student_t,
    log_inv_gamma_pdf,
    log_prior_density,
    log_truncated_gamma,
    sample_scales,
    sample_scales_batch,
    sample_sigma,
)

ALL_KINDS = [k.value for k in PriorKind]


def test_kind_parsing():
    assert PriorKind.parse("Horseshoe") is PriorKind.HS
    assert PriorKind.parse("d2") is PriorKind.R2D2
    with pytest.raises(InvalidParameter):
        PriorKind.parse("lasso")


def test_default_spec_data_dependent_values(rng):
    assert default_spec("dl", n=100, p=50)["tau_shape"] == 50.0
    assert default_spec("r2d2", n=100, p=40)["a1"] == 10.0
    rhs = default_spec("rhs", n=100, p=50)
    assert rhs["p0"] == 5.0
    assert rhs["tau0"] == pytest.approx(5.0 / (45.0 * 10.0))
    X = rng.standard_normal((30, 3))
    y = X @ np.array([1.0, -2.0, 0.0]) + 0.1 * rng.standard_normal(30)
    ng = default_spec("ng", n=30, p=3, X=X, y=y)
    assert ng["M"] == pytest.approx(np.mean(np.linalg.lstsq(X, y, rcond=None)[0] ** 2))
    assert ng.sigma_eta == pytest.approx(np.std(y, ddof=1))


def test_overrides_and_round_trip():
    spec = default_spec("bp", n=10, p=5, beta=2, sigma_nu=5)
    assert spec["beta"] == 2.0 and spec.sigma_nu == 5.0
    again = PriorSpec(**spec.to_dict())
    assert again == spec
    with pytest.raises(InvalidParameter):
        PriorSpec("hs", sigma_nu=0.0)


@pytest.mark.parametrize("x", [0.1, 1.0, 7.5])
def test_scalar_densities_match_scipy(x):
    assert log_half_cauchy(x, 2.0) == pytest.approx(stats.halfcauchy.logpdf(x, scale=2.0))
    assert log_half_student_t(x, 3.0, 1.5) == pytest.approx(
        math.log(2.0) + stats.t.logpdf(x, 3.0, scale=1.5))
    assert log_inv_gamma_pdf(x, 2.0, 3.0) == pytest.approx(stats.invgamma.logpdf(x, 2.0, scale=3.0))
    assert log_beta_prime(x, 0.7, 1.3) == pytest.approx(stats.betaprime.logpdf(x, 0.7, 1.3))


def test_dirichlet_density_matches_scipy():
    phi = np.array([0.2, 0.5, 0.3])
    assert log_dirichlet(phi, 0.4) == pytest.approx(stats.dirichlet.logpdf(phi, [0.4] * 3))


def test_truncated_gamma_integrates_to_one():
    from scipy import integrate

    total, _ = integrate.quad(lambda a: math.exp(log_truncated_gamma(a, 1.0, 2.0, 0.5)), 0, 0.5)
    assert total == pytest.approx(1.0, abs=1e-8)
    assert log_truncated_gamma(0.6, 1.0, 2.0, 0.5) == -math.inf


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_batch_shapes_and_positivity(kind, rng):
    spec = default_spec(kind, n=50, p=8)
    lam, tau, aux = sample_scales_batch(spec, 8, 100, rng)
    assert lam.shape == (100, 8) and tau.shape == (100,)
    assert np.all(lam > 0) and np.all(tau > 0)
    for value in aux.values():
        assert value.shape[0] == 100


def test_horseshoe_scales_are_half_cauchy(rng):
    lam, tau, _ = sample_scales_batch(default_spec("hs", 10, 4), 4, 20000, rng)
    assert stats.kstest(lam[:, 0], stats.halfcauchy.cdf).pvalue > 1e-3
    assert stats.kstest(tau, stats.halfcauchy.cdf).pvalue > 1e-3


def test_r2d2_total_variance_is_beta_prime(rng):
    spec = default_spec("r2d2", n=100, p=10)
    lam, _, aux = sample_scales_batch(spec, 10, 20000, rng)
    # the Dirichlet weights sum to one, so sum lambda^2 recovers w2
    assert np.allclose((lam**2).sum(axis=1), aux["omega2"])
    cdf = stats.betaprime(spec["a1"], spec["a2"]).cdf
    assert stats.kstest(aux["omega2"], cdf).pvalue > 1e-3


def test_beta_prime_alpha_stays_truncated(rng):
    spec = default_spec("bp", n=10, p=3)
    _, _, aux = sample_scales_batch(spec, 3, 5000, rng)
    assert np.all(aux["alpha"] <= spec["alpha_max"]) and np.all(aux["alpha"] > 0)


def test_sigma_prior_is_half_student_t(rng):
    spec = PriorSpec("hs", sigma_nu=3.0, sigma_eta=2.0)
    draws = sample_sigma(spec, rng, 20000)
    assert stats.kstest(draws, lambda x: 2 * stats.t.cdf(x, 3.0, scale=2.0) - 1).pvalue > 1e-3


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_log_prior_density_is_finite_on_draws(kind, rng):
    X = rng.standard_normal((40, 6))
    y = rng.standard_normal(40)
    spec = default_spec(kind, n=40, p=6, X=X, y=y)
    for _ in range(20):
        draw = sample_scales(spec, 6, rng)
        if np.any(draw.lam <= 1e-300):
            continue
        assert math.isfinite(log_prior_density(spec, draw, 1.3))


def test_horseshoe_log_density_by_hand():
    spec = PriorSpec("hs", sigma_nu=3.0, sigma_eta=1.0)
    lam = np.array([0.5, 2.0])
    expected = (stats.halfcauchy.logpdf(lam).sum() + stats.halfcauchy.logpdf(0.3)
                + math.log(2.0) + stats.t.logpdf(1.1, 3.0))
    assert log_prior_density(spec, ScaleDraw(lam, 0.3), 1.1) == pytest.approx(expected)


def test_log_density_rejects_out_of_support():
    spec = PriorSpec("hs")
    with pytest.raises(OutOfSupport):
        log_prior_density(spec, ScaleDraw(np.array([1.0, -1.0]), 1.0), 1.0)
    with pytest.raises(OutOfSupport):
        log_prior_density(spec, ScaleDraw(np.array([1.0]), 1.0), 0.0)
