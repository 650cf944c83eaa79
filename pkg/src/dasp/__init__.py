"""Dependency-aware shrinkage priors for high-dimensional linear regression.

Subpackages and modules
-----------------------
corr_structures   parametric correlation matrices
cov_estimation    covariance estimates and the prior correlation matrix Omega
priors            shrinkage prior hierarchies
prior_analytics   closed-form and Monte Carlo prior/posterior analytics
sampler           blocked Gibbs sampler and convergence diagnostics
sim_harness       simulated scenarios, evaluation metrics and exact LOO
cli               command-line entry point
"""

__version__ = "0.1.0"
