import numpy as np
import pytest

from dasp.corr_structures import StructureSpec, make_structure
from dasp.errors import InsufficientDraws, InvalidParameter, NonPositiveDefinite, RankDeficient
from dasp.prior_analytics import (
    GridSpec,
    ScaleState,
    conditional_posterior,
    conditional_slice,
    diagonal_band_mass,
    effective_parameters,
    kl_curve,
    kl_gaussian,
    kl_prior,
    mc_prior_grid,
    mean_shift,
    prior_coefficient_draws,
    prior_meff_draws,
    shrinkage_matrix,
    spectral_bounds,
)
from dasp.priors import default_spec
from helpers import random_correlation


def test_kl_gaussian_basic_values():
    assert kl_gaussian([1.0, 0.0], np.eye(2), [0.0, 0.0], np.eye(2)) == 0.5
    assert kl_gaussian([0.0], [[1.0]], [0.0], [[np.e]]) == pytest.approx(0.5 * (np.exp(-1.0)))
    with pytest.raises(InvalidParameter):
        kl_gaussian([0.0], np.eye(2), [0.0], np.eye(2))


def test_kl_prior_is_twice_the_gaussian_divergence(rng):
    omega = random_correlation(rng, 6)
    d = rng.uniform(0.2, 3.0, 6)
    D = np.diag(d)
    half = kl_gaussian(np.zeros(6), D @ D, np.zeros(6), D @ omega @ D)
    assert kl_prior(omega) == pytest.approx(2.0 * half, rel=1e-10)


def test_kl_prior_rejects_indefinite():
    with pytest.raises(NonPositiveDefinite):
        kl_prior(np.array([[1.0, 1.2], [1.2, 1.0]]))


def test_kl_curve_marks_non_pd_points_as_nan():
    rows = kl_curve("ma1", [10], [0.3, 0.95])
    assert np.isfinite(rows[0][2]) and np.isnan(rows[1][2])
    rows = kl_curve("ma1", [10], [0.95], ma_form="process")
    assert np.isfinite(rows[0][2])


def test_conditional_posterior_shapes_and_sigma_scaling(rng):
    X = rng.standard_normal((20, 4))
    y = rng.standard_normal(20)
    omega = random_correlation(rng, 4)
    a = conditional_posterior(X, y, ScaleState(np.ones(4), 1.0, 1.0), omega)
    b = conditional_posterior(X, y, ScaleState(np.ones(4), 1.0, 2.0), omega)
    assert np.allclose(a.mean, b.mean)
    assert np.allclose(b.covariance, 4.0 * a.covariance)


def test_printed_two_by_two_numerators_disagree_with_the_exact_mean():
    # the numerators need (1 - rho^2); writing (1 - rho) gives a different answer
    lam1, lam2, rho, y = 1.3, 0.7, 0.5, np.array([2.0, -1.0])
    exact = conditional_posterior(np.eye(2), y, ScaleState([lam1, lam2]),
                                  np.array([[1.0, rho], [rho, 1.0]])).mean
    denom = 1.0 + lam1**2 + lam2**2 + lam1**2 * lam2**2 * (1.0 - rho**2)
    printed = np.array([
        lam1**2 * (1.0 + lam2**2 * (1.0 - rho)) * y[0] + rho * lam1 * lam2 * y[1],
        lam2**2 * (1.0 + lam1**2 * (1.0 - rho)) * y[1] + rho * lam1 * lam2 * y[0],
    ]) / denom
    assert np.max(np.abs(printed - exact)) > 1e-2


def test_mean_shift_is_zero_for_identity(rng):
    X = rng.standard_normal((15, 3))
    shift = mean_shift(X, rng.standard_normal(15), ScaleState(np.ones(3)), np.eye(3))
    assert np.all(shift == 0.0)


def test_spectral_bounds_hold_on_a_known_case():
    X = np.eye(3)
    omega = make_structure(StructureSpec("ar1", 0.6), 3)
    report = spectral_bounds(X, np.array([0.5, 1.0, 2.0]), omega)
    assert report.holds and report.actual > 0


def test_shrinkage_needs_full_rank(rng):
    X = rng.standard_normal((3, 5))
    with pytest.raises(RankDeficient):
        shrinkage_matrix(X, ScaleState(np.ones(5)), np.eye(5))


def test_effective_parameters_for_diagonal_shrinkage():
    kappa = np.diag([0.25, 0.5, 1.0])
    assert effective_parameters(kappa) == pytest.approx(1.25)


def test_meff_draws_agree_with_shrinkage_matrix(rng):
    X = rng.standard_normal((30, 4))
    omega = random_correlation(rng, 4)
    spec = default_spec("hs", n=30, p=4)
    fast = prior_meff_draws(spec, omega, 5, seed=3, X=X)
    from dasp.prior_analytics import _chunk_streams
    from dasp.priors import sample_scales_batch

    (stream, size), = list(_chunk_streams(3, 5, 500))
    lam, tau, _ = sample_scales_batch(spec, 4, size, stream)
    slow = [effective_parameters(shrinkage_matrix(X, ScaleState(lam[i], tau[i]), omega))
            for i in range(size)]
    assert np.allclose(fast, slow, rtol=1e-8)


def test_correlation_never_raises_meff_in_the_normal_means_design(rng):
    # tr(I - kappa) = sum f(mu) with f concave, and the eigenvalues of
    # D Omega D majorize its diagonal, so every draw satisfies m(Omega) <= m(I)
    for _ in range(50):
        p = int(rng.integers(2, 8))
        omega = random_correlation(rng, p)
        state = ScaleState(np.exp(rng.normal(0.0, 1.5, p)), float(np.exp(rng.normal())))
        with_omega = effective_parameters(shrinkage_matrix(np.eye(p), state, omega))
        without = effective_parameters(shrinkage_matrix(np.eye(p), state, np.eye(p)))
        assert with_omega <= without + 1e-10


def test_prior_draws_are_reproducible():
    spec = default_spec("hs", n=10, p=2)
    omega = np.array([[1.0, 0.5], [0.5, 1.0]])
    a = prior_coefficient_draws(spec, omega, 1000, seed=4)
    b = prior_coefficient_draws(spec, omega, 1000, seed=4)
    assert np.array_equal(a, b)


def test_grid_and_conditional_slice():
    spec = default_spec("hs", n=10, p=2)
    omega = np.array([[1.0, 0.9], [0.9, 1.0]])
    grid = mc_prior_grid(spec, omega, 20000, GridSpec(-3.0, 3.0, 30), seed=1)
    assert grid.counts.shape == (30, 30)
    assert grid.counts.sum() <= 20000
    counts = conditional_slice(grid, b2=0.0)
    assert counts.shape == (30,) and counts.sum() > 0
    with pytest.raises(InsufficientDraws):
        conditional_slice(grid, b2=2.9, tol_frac=0.001)


def test_band_mass_grows_with_correlation():
    spec = default_spec("hs", n=10, p=2)
    lo = prior_coefficient_draws(spec, np.eye(2), 50000, seed=2)
    hi = prior_coefficient_draws(spec, np.array([[1.0, 0.9], [0.9, 1.0]]), 50000, seed=2)
    assert diagonal_band_mass(hi) > diagonal_band_mass(lo)


def test_grid_spec_validation():
    with pytest.raises(InvalidParameter):
        GridSpec(1.0, 0.0)
    with pytest.raises(InvalidParameter):
        mc_prior_grid(default_spec("hs", 10, 3), np.eye(3), 10)
