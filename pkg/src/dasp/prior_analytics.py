"""Closed-form and Monte Carlo analytics of the dependency-aware prior.

Conditional on the scales, the prior ``b ~ N(0, sigma^2 tau^2 D Omega D)``
with ``D = diag(lambda)`` is conjugate to the Gaussian likelihood, so

* the conditional posterior has precision ``Q / sigma^2`` with
  ``Q = X'X + tau^-2 D^-1 Omega^-1 D^-1`` and mean ``Q^-1 X'y``;
* the matrix shrinkage factor is ``kappa = I - B (B + (X'X)^-1)^-1`` with
  ``B = tau^2 D Omega D``, and the effective number of parameters is
  ``tr(I - kappa)``.

The Monte Carlo helpers draw scales from :mod:`dasp.priors` and are
reproducible for a fixed seed: draws are generated in fixed-size chunks,
each with its own ``SeedSequence`` child, so the stream does not depend on
how the chunks are scheduled.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import corr_structures, priors
from .errors import InsufficientDraws, InvalidParameter, NonPositiveDefinite, NumericalSingularity, RankDeficient

MC_CHUNK = 5000


@dataclass(frozen=True)
class ScaleState:
    """Local scales ``lam``, global scale ``tau`` and residual scale ``sigma``."""

    lam: np.ndarray
    tau: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        if lam.ndim != 1 or not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            raise InvalidParameter("lambda must be a vector of positive finite values")
        for name in ("tau", "sigma"):
            value = float(getattr(self, name))
            if not (np.isfinite(value) and value > 0):
                raise InvalidParameter(f"{name} must be positive and finite")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "lam", lam)


@dataclass
class ConditionalPosterior:
    mean: np.ndarray
    covariance: np.ndarray
    q_matrix: np.ndarray


@dataclass
class SpectralBoundReport:
    """Two-sided bound on ``||Q_Omega^-1 - Q_I^-1||_2`` and its ingredients."""

    lower: float
    actual: float
    upper: float
    lambda_max: float
    lambda_min: float
    nu_max: float
    nu_min: float
    omega_max: float
    omega_min: float

    @property
    def holds(self):
        return self.lower <= self.actual <= self.upper


# -- helpers ----------------------------------------------------------------

def _design(X, y=None):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InvalidParameter(f"X must be 2-D, got shape {X.shape}")
    if y is None:
        return X, None
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != X.shape[0]:
        raise InvalidParameter(f"y has {y.shape[0]} entries but X has {X.shape[0]} rows")
    return X, y


def _check_state(state, p):
    if state.lam.shape[0] != p:
        raise InvalidParameter(f"lambda has length {state.lam.shape[0]}, expected {p}")


def _corr(omega, p):
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (p, p):
        raise InvalidParameter(f"omega has shape {omega.shape}, expected {(p, p)}")
    return omega


def _chol_inverse(A, error=NumericalSingularity, what="matrix"):
    try:
        c = linalg.cho_factor(A, lower=True)
    except linalg.LinAlgError as err:
        raise error(f"{what} is not positive definite: {err}") from None
    inv = linalg.cho_solve(c, np.eye(A.shape[0]))
    return (inv + inv.T) / 2.0


def _omega_inverse(omega):
    return _chol_inverse(omega, NonPositiveDefinite, "omega")


def q_matrix(xtx, lam, tau, omega_inv):
    """``X'X + tau^-2 D^-1 Omega^-1 D^-1`` as a symmetric array."""
    s = 1.0 / (tau * np.asarray(lam, float))
    q = xtx + omega_inv * np.outer(s, s)
    return (q + q.T) / 2.0


# -- conditional posterior --------------------------------------------------

def conditional_posterior(X, y, state, omega):
    """Moments of ``b | y, lambda, tau, sigma`` under the prior correlation ``omega``.

    Returns
    -------
    ConditionalPosterior
        ``mean = Q^-1 X'y`` and ``covariance = sigma^2 Q^-1``.

    Raises
    ------
    NumericalSingularity
        If ``Q`` cannot be Cholesky-factorized.
    """
    X, y = _design(X, y)
    p = X.shape[1]
    _check_state(state, p)
    omega = _corr(omega, p)
    q = q_matrix(X.T @ X, state.lam, state.tau, _omega_inverse(omega))
    try:
        c = linalg.cho_factor(q, lower=True)
    except linalg.LinAlgError as err:
        raise NumericalSingularity(f"posterior precision is not positive definite: {err}") from None
    mean = linalg.cho_solve(c, X.T @ y)
    cov = linalg.cho_solve(c, np.eye(p)) * state.sigma**2
    return ConditionalPosterior(mean, (cov + cov.T) / 2.0, q)


def _prior_block(state, omega):
    d = state.tau * state.lam
    return omega * np.outer(d, d)


def _xtx_inverse(X):
    xtx = X.T @ X
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise RankDeficient(f"X'X is singular (rank {np.linalg.matrix_rank(X)} < p={X.shape[1]})")
    return _chol_inverse(xtx, RankDeficient, "X'X")


def posterior_mean_via_mle(X, y, state, omega):
    """Conditional posterior mean written as a matrix shrinkage of the MLE.

    ``B (B + (X'X)^-1)^-1 b_hat`` with ``B = tau^2 D Omega D`` and
    ``b_hat = (X'X)^-1 X'y``. Needs a full-column-rank ``X``.
    """
    X, y = _design(X, y)
    p = X.shape[1]
    _check_state(state, p)
    xtx_inv = _xtx_inverse(X)
    bhat = xtx_inv @ (X.T @ y)
    B = _prior_block(state, _corr(omega, p))
    # B (B + V)^-1 b = B z where (B + V) z = b
    z = np.linalg.solve(B + xtx_inv, bhat)
    return B @ z


def mean_shift(X, y, state, omega):
    """``(Q_Omega^-1 - Q_I^-1) X'y``: how much the correlation moves the posterior mean."""
    X, y = _design(X, y)
    p = X.shape[1]
    with_omega = conditional_posterior(X, y, state, omega).mean
    without = conditional_posterior(X, y, state, np.eye(p)).mean
    return with_omega - without


def spectral_bounds(X, lam, omega):
    """Spectral-norm sandwich for the difference of conditional precisions' inverses.

    Uses the ``tau = 1`` convention. With ``lambda_1 >= lambda_p`` the extreme
    local scales, ``nu`` the eigenvalues of ``X'X`` and ``omega_i`` those of
    ``Omega``::

        ||Omega^-1 - I|| / (lambda_1^2 (nu_1 + 1/(lambda_p^2 omega_p)) (nu_1 + 1/lambda_p^2))
            <= ||Q_Omega^-1 - Q_I^-1||
            <= ||Omega^-1 - I|| / (lambda_p^2 (nu_p + 1/(lambda_1^2 omega_1)) (nu_p + 1/lambda_1^2))

    ``actual`` is computed by a symmetric eigensolve of the explicit difference.
    """
    X, _ = _design(X)
    p = X.shape[1]
    lam = np.asarray(lam, dtype=float)
    _check_state(ScaleState(lam), p)
    omega = _corr(omega, p)
    xtx = X.T @ X
    omega_inv = _omega_inverse(omega)
    # both inverses go through the same routine so that Omega = I gives an exact 0
    q_omega_inv = _chol_inverse(q_matrix(xtx, lam, 1.0, omega_inv), what="Q_Omega")
    q_id_inv = _chol_inverse(q_matrix(xtx, lam, 1.0, np.eye(p)), what="Q_I")
    actual = float(np.max(np.abs(np.linalg.eigvalsh(q_omega_inv - q_id_inv))))
    gap = float(np.max(np.abs(np.linalg.eigvalsh(omega_inv - np.eye(p)))))

    nu = np.linalg.eigvalsh(xtx)
    om = np.linalg.eigvalsh(omega)
    nu_min, nu_max = max(float(nu[0]), 0.0), float(nu[-1])
    om_min, om_max = float(om[0]), float(om[-1])
    l1, lp = float(lam.max()), float(lam.min())
    lower = gap / (l1**2 * (nu_max + 1.0 / (lp**2 * om_min)) * (nu_max + 1.0 / lp**2))
    upper = gap / (lp**2 * (nu_min + 1.0 / (l1**2 * om_max)) * (nu_min + 1.0 / l1**2))
    return SpectralBoundReport(lower, actual, upper, l1, lp, nu_max, nu_min, om_max, om_min)


# -- KL divergences -----------------------------------------------------------

def _chol_logdet(A, what):
    try:
        c, _ = linalg.cho_factor(A, lower=True)
    except linalg.LinAlgError:
        raise NonPositiveDefinite(f"{what} is not positive definite") from None
    return c, 2.0 * float(np.sum(np.log(np.diag(c))))


def kl_gaussian(mean_p, cov_p, mean_q, cov_q):
    """``KL(N(mean_p, cov_p) || N(mean_q, cov_q))``.

    Examples
    --------
    >>> kl_gaussian([1.0, 0.0], np.eye(2), [0.0, 0.0], np.eye(2))
    0.5
    """
    mean_p, mean_q = np.atleast_1d(np.asarray(mean_p, float)), np.atleast_1d(np.asarray(mean_q, float))
    cov_p, cov_q = np.atleast_2d(np.asarray(cov_p, float)), np.atleast_2d(np.asarray(cov_q, float))
    k = mean_p.shape[0]
    if cov_p.shape != (k, k) or cov_q.shape != (k, k) or mean_q.shape != (k,):
        raise InvalidParameter("means and covariances must share one dimension")
    _, logdet_p = _chol_logdet(cov_p, "cov_p")
    cq, logdet_q = _chol_logdet(cov_q, "cov_q")
    trace_term = float(np.trace(linalg.cho_solve((cq, True), cov_p)))
    d = mean_q - mean_p
    quad = float(d @ linalg.cho_solve((cq, True), d))
    return max(0.5 * (trace_term + quad - k + logdet_q - logdet_p), 0.0)


def kl_prior(omega):
    """Divergence score between the correlated and the independent conditional prior.

    Returns ``tr(Omega^-1) + ln|Omega| - p``. The scales cancel, so the value
    depends on ``Omega`` alone. This is twice the Gaussian KL divergence
    ``KL(N(0, D D) || N(0, D Omega D))`` of the independent prior from the
    correlated one, as returned by :func:`kl_gaussian`.
    """
    omega = np.atleast_2d(np.asarray(omega, float))
    p = omega.shape[0]
    c, logdet = _chol_logdet(omega, "omega")
    inv = linalg.cho_solve((c, True), np.eye(p))
    return max(float(np.trace(inv)) + logdet - p, 0.0)


def kl_curve(kind, dims, rho_grid, block_size=5, ma_form="correlation"):
    """``kl_prior`` over a grid of ``rho`` for one structure at several sizes.

    Returns a list of ``(dim, rho, kl)`` tuples. Grid points where the
    structure is not positive definite are returned with ``kl = nan``.
    """
    rows = []
    for dim in dims:
        for rho in rho_grid:
            spec = corr_structures.StructureSpec(kind, rho, block_size=block_size, ma_form=ma_form)
            try:
                value = kl_prior(corr_structures.make_structure(spec, dim))
            except NonPositiveDefinite:
                value = float("nan")
            rows.append((int(dim), float(rho), value))
    return rows


# -- shrinkage ----------------------------------------------------------------

def shrinkage_matrix(X, state, omega):
    """Matrix shrinkage factor ``I - B (B + (X'X)^-1)^-1`` with ``B = tau^2 D Omega D``.

    Raises
    ------
    RankDeficient
        If ``X'X`` is singular.
    """
    X, _ = _design(X)
    p = X.shape[1]
    _check_state(state, p)
    xtx_inv = _xtx_inverse(X)
    B = _prior_block(state, _corr(omega, p))
    # B (B + V)^-1 = ((B + V)^-1 B)' since both B and V are symmetric
    return np.eye(p) - np.linalg.solve(B + xtx_inv, B).T


def effective_parameters(kappa):
    """``tr(I - kappa)``."""
    kappa = np.atleast_2d(np.asarray(kappa, float))
    return float(kappa.shape[0] - np.trace(kappa))


def _chunk_streams(seed, n_draws, chunk):
    n_chunks = -(-int(n_draws) // chunk)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    for i, child in enumerate(children):
        size = min(chunk, n_draws - i * chunk)
        yield np.random.Generator(np.random.PCG64(child)), size


def _xtx_root(X, p):
    if X is None:
        return None
    X, _ = _design(X)
    if X.shape[1] != p:
        raise InvalidParameter(f"X has {X.shape[1]} columns, expected {p}")
    w, V = np.linalg.eigh(X.T @ X)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def prior_meff_draws(prior, omega, n_draws, seed, X=None, chunk=500):
    """Prior distribution of the effective number of parameters.

    Scales are drawn from ``prior`` and each draw is mapped to
    ``tr(I - kappa) = sum mu / (1 + mu)``, with ``mu`` the eigenvalues of
    ``C B C``, ``C = (X'X)^(1/2)`` and ``B = tau^2 D Omega D``. ``X = None``
    means the normal-means design ``X = I``. The eigenvalue form stays
    defined when ``X'X`` is singular.
    """
    omega = np.asarray(omega, float)
    p = omega.shape[0]
    C = _xtx_root(X, p)
    out = np.empty(int(n_draws))
    pos = 0
    for rng, size in _chunk_streams(seed, n_draws, chunk):
        lam, tau, _ = priors.sample_scales_batch(prior, p, size, rng)
        d = lam * tau[:, None]
        B = omega[None, :, :] * d[:, :, None] * d[:, None, :]
        if C is not None:
            B = C[None] @ B @ C[None]
        mu = np.clip(np.linalg.eigvalsh(B), 0.0, None)
        with np.errstate(over="ignore", invalid="ignore"):
            frac = np.where(np.isfinite(mu), mu / (1.0 + mu), 1.0)
        out[pos:pos + size] = frac.sum(axis=1)
        pos += size
    return out


# -- Monte Carlo prior grids -------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Square histogram grid ``[lo, hi]^2`` with ``bins`` cells per side."""

    lo: float = -6.0
    hi: float = 6.0
    bins: int = 200

    def __post_init__(self):
        if not self.hi > self.lo or int(self.bins) < 1:
            raise InvalidParameter("grid needs hi > lo and at least one bin")

    @property
    def edges(self):
        return np.linspace(self.lo, self.hi, int(self.bins) + 1)

    @property
    def width(self):
        return self.hi - self.lo


@dataclass
class PriorGrid:
    """Histogram counts of ``(b1, b2)`` prior draws plus the raw draws."""

    counts: np.ndarray
    edges: np.ndarray
    draws: np.ndarray
    grid: GridSpec

    @property
    def centers(self):
        return (self.edges[:-1] + self.edges[1:]) / 2.0


def prior_coefficient_draws(prior, omega, n_draws, seed, sigma=1.0):
    """Draws of ``b`` from the marginal prior, integrating the scales by simulation."""
    omega = np.asarray(omega, float)
    p = omega.shape[0]
    L = np.linalg.cholesky(omega)
    out = np.empty((int(n_draws), p))
    pos = 0
    for rng, size in _chunk_streams(seed, n_draws, MC_CHUNK):
        lam, tau, _ = priors.sample_scales_batch(prior, p, size, rng)
        z = rng.standard_normal((size, p)) @ L.T
        out[pos:pos + size] = sigma * tau[:, None] * lam * z
        pos += size
    return out


def mc_prior_grid(prior, omega, n_draws, grid=GridSpec(), seed=0):
    """2-D histogram of the bivariate joint marginal prior of ``(b1, b2)``.

    Draws outside the grid are kept in ``draws`` but not counted.
    """
    omega = np.asarray(omega, float)
    if omega.shape != (2, 2):
        raise InvalidParameter("contour grids need a 2x2 omega")
    draws = prior_coefficient_draws(prior, omega, n_draws, seed)
    edges = grid.edges
    counts, _, _ = np.histogram2d(draws[:, 0], draws[:, 1], bins=[edges, edges])
    return PriorGrid(counts, edges, draws, grid)


def conditional_slice(result, b2=0.0, tol_frac=0.02, min_draws=100):
    """Unnormalized histogram of ``b1`` among draws with ``b2`` near a value.

    The window is ``|b2' - b2| <= tol_frac * (grid range)``.

    Raises
    ------
    InsufficientDraws
        When fewer than ``min_draws`` draws fall in the window.
    """
    half = tol_frac * result.grid.width
    keep = np.abs(result.draws[:, 1] - b2) <= half
    if keep.sum() < min_draws:
        raise InsufficientDraws(f"only {int(keep.sum())} draws within {half:.3g} of b2={b2}")
    counts, _ = np.histogram(result.draws[keep, 0], bins=result.edges)
    return counts


def diagonal_band_mass(draws, width=0.5):
    """Fraction of bivariate draws with ``|b1 - b2| < width``."""
    draws = np.asarray(draws, float)
    return float(np.mean(np.abs(draws[:, 0] - draws[:, 1]) < width))
