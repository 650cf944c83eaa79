import numpy as np
import pytest

from dasp.corr_structures import StructureSpec, make_structure
from dasp.cov_estimation import (
    OmegaMode,
    OmegaSpec,
    build_omega,
    cor_standardize,
    ledoit_wolf,
    sample_covariance,
    spd_inverse,
)
from dasp.errors import InvalidParameter, NonPositiveDiagonal, NonSymmetric, SingularCovariance


def test_sample_covariance_matches_numpy(rng):
    X = rng.standard_normal((40, 5))
    assert np.allclose(sample_covariance(X), np.cov(X, rowvar=False))


def test_ledoit_wolf_matches_row_by_row_oracle(rng):
    X = rng.standard_normal((30, 12)) @ rng.standard_normal((12, 12))
    n, p = X.shape
    xc = X - X.mean(axis=0)
    S = xc.T @ xc / (n - 1)
    m = np.trace(S) / p
    d2 = np.sum((S - m * np.eye(p)) ** 2) / p
    b2 = min(sum(np.sum((np.outer(x, x) - S) ** 2) / p for x in xc) / n**2, d2)
    expected = (b2 / d2) * m * np.eye(p) + ((d2 - b2) / d2) * S
    res = ledoit_wolf(X)
    assert res.shrinkage == pytest.approx(b2 / d2, rel=1e-10)
    assert np.allclose(res.s_star, expected, rtol=1e-10, atol=1e-12)


def test_ledoit_wolf_weights_are_a_convex_combination(rng):
    res = ledoit_wolf(rng.standard_normal((25, 8)))
    assert 0.0 <= res.shrinkage <= 1.0
    assert res.a_n2 == pytest.approx(res.d_n2 - res.b_n2)


def test_cor_standardize_and_errors():
    theta = np.array([[4.0, 1.0], [1.0, 9.0]])
    c = cor_standardize(theta)
    assert c[0, 1] == pytest.approx(1.0 / 6.0)
    assert np.all(np.diag(c) == 1.0)
    with pytest.raises(NonPositiveDiagonal):
        cor_standardize(np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_spd_inverse_rejects_singular():
    with pytest.raises(SingularCovariance):
        spd_inverse(np.array([[1.0, 1.0], [1.0, 1.0]]))


def test_mode_aliases():
    assert OmegaMode.parse("lw") is OmegaMode.LEDOIT_WOLF
    assert OmegaMode.parse("true") is OmegaMode.KNOWN
    with pytest.raises(InvalidParameter):
        OmegaMode.parse("magic")


def test_known_mode_requires_sigma():
    with pytest.raises(InvalidParameter):
        OmegaSpec("known")
    with pytest.raises(InvalidParameter):
        OmegaSpec("user")


def test_identity_mode(rng):
    assert np.array_equal(build_omega(rng.standard_normal((5, 3)), OmegaSpec()), np.eye(3))


def test_known_ar1_gives_tridiagonal_omega():
    rho = 0.6
    sigma = make_structure(StructureSpec("ar1", rho), 6)
    omega = build_omega(np.zeros((2, 6)), OmegaSpec("known", sigma_x=sigma))
    # AR(1) precision is tridiagonal: only neighbours have a partial correlation
    assert np.max(np.abs(omega[np.triu_indices(6, 2)])) < 1e-12
    assert np.all(np.diag(omega, 1) < 0)


def test_known_mode_shape_and_symmetry_checks():
    with pytest.raises(InvalidParameter):
        build_omega(np.zeros((2, 3)), OmegaSpec("known", sigma_x=np.eye(4)))
    bad = np.array([[1.0, 0.2, 0.0], [0.1, 1.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(InvalidParameter):
        build_omega(np.zeros((2, 3)), OmegaSpec("known", sigma_x=bad))


def test_sample_mode_needs_more_rows_than_columns(rng):
    with pytest.raises(SingularCovariance):
        build_omega(rng.standard_normal((5, 8)), OmegaSpec("sample"))
    omega = build_omega(rng.standard_normal((50, 4)), OmegaSpec("sample"))
    assert np.allclose(np.diag(omega), 1.0)


def test_ledoit_wolf_mode_works_when_p_exceeds_n(rng):
    omega = build_omega(rng.standard_normal((10, 30)), OmegaSpec("ledoit-wolf"))
    assert omega.shape == (30, 30)
    assert np.linalg.eigvalsh(omega)[0] > 0


def test_user_mode_validates():
    with pytest.raises(NonSymmetric):
        build_omega(np.zeros((3, 2)), OmegaSpec("user", omega=np.array([[1.0, 0.3], [0.1, 1.0]])))
    m = np.array([[1.0, 0.3], [0.3, 1.0]])
    assert np.array_equal(build_omega(np.zeros((3, 2)), OmegaSpec("user", omega=m)), m)


def test_estimates_are_invariant_to_column_shifts(rng):
    X = rng.standard_normal((40, 5))
    a = build_omega(X, OmegaSpec("ledoit-wolf"))
    b = build_omega(X + 100.0, OmegaSpec("ledoit-wolf"))
    assert np.allclose(a, b, atol=1e-9)
