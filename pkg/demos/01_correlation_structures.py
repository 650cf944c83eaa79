"""Correlation structures and what they do to the prior.

Run with ``python3 demos/01_correlation_structures.py``.

We build a few correlation matrices, look at when they stop being positive
definite, and measure how far each one moves the coefficient prior away from
independence.
"""

import numpy as np

from dasp.corr_structures import StructureSpec, make_structure
from dasp.cov_estimation import OmegaSpec, build_omega
from dasp.errors import NonPositiveDefinite
from dasp.prior_analytics import kl_prior

np.set_printoptions(precision=3, suppress=True)

print("An AR(1) matrix decays geometrically away from the diagonal:")
print(make_structure(StructureSpec("ar1", 0.5), 4))

# A banded MA(1) matrix with rho written directly into the first
# off-diagonal is only positive definite for small rho. The process form
# uses the autocorrelation of an actual MA(1) series instead, which is
# always valid.
for rho in (0.4, 0.6):
    try:
        make_structure(StructureSpec("ma1", rho), 10)
        print(f"\nbanded MA(1) with rho={rho}: positive definite")
    except NonPositiveDefinite as err:
        print(f"\nbanded MA(1) with rho={rho}: rejected (smallest eigenvalue {err.min_eigenvalue:.3f})")
proc = make_structure(StructureSpec("ma1", 0.6, ma_form="process"), 10)
print(f"process-form MA(1) with rho=0.6 has lag-one correlation {proc[0, 1]:.3f}")

print("\nBlocked structures repeat a small block along the diagonal:")
print(make_structure(StructureSpec("bar1", 0.8, block_size=3), 6))

# kl_prior compares N(0, D Omega D) with N(0, D D). The scales cancel, so the
# number depends only on the correlation matrix. It grows with rho and with
# the dimension.
print("\nDivergence from independence, equicorrelation:")
print("  rho    p=5     p=20")
for rho in (0.0, 0.3, 0.6, 0.9):
    row = [kl_prior(make_structure(StructureSpec("equicorrelation", rho), p)) for p in (5, 20)]
    print(f"  {rho:.1f}  {row[0]:6.3f}  {row[1]:7.3f}")

# In practice the prior correlation comes from the design itself. With a
# known predictor covariance the prior uses the partial correlations, that
# is, the standardized inverse. For AR(1) predictors only neighbours are
# partially correlated, and with a negative sign.
sigma_x = make_structure(StructureSpec("ar1", 0.7), 5)
omega = build_omega(np.zeros((2, 5)), OmegaSpec("known", sigma_x=sigma_x))
print("\nPrior correlation built from AR(1) predictors (rho=0.7):")
print(omega)

# When the covariance is unknown, a Ledoit-Wolf estimate keeps things
# positive definite even with more predictors than rows.
rng = np.random.default_rng(1)
X = rng.standard_normal((15, 30)) @ np.linalg.cholesky(make_structure(StructureSpec("ar1", 0.7), 30)).T
lw = build_omega(X, OmegaSpec("ledoit-wolf"))
print(f"\nLedoit-Wolf with n=15, p=30: smallest eigenvalue {np.linalg.eigvalsh(lw)[0]:.4f}")
