"""Covariance estimation for the design matrix and construction of the prior
correlation matrix Omega from it.

Omega is always the standardized precision matrix, ``Cor(Sigma^{-1})``,
where Sigma is the known covariance of the predictors, the sample
covariance, or the Ledoit-Wolf linear shrinkage estimate.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import linalg

from . import corr_structures
from .errors import InvalidParameter, NonPositiveDiagonal, SingularCovariance

DEGENERATE_SPREAD_TOL = 1e-12


def _as_design(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise InvalidParameter(f"design matrix must be 2-D, got shape {X.shape}")
    if X.shape[0] < 2:
        raise InvalidParameter("need at least two rows to estimate a covariance")
    return X


def sample_covariance(X, center=True):
    """Return ``X'X / (n - 1)``, after column-centering when ``center``."""
    X = _as_design(X)
    if center:
        X = X - X.mean(axis=0)
    S = X.T @ X / (X.shape[0] - 1)
    return (S + S.T) / 2.0


@dataclass
class LedoitWolfResult:
    """Ledoit-Wolf estimator and the moments it was built from.

    ``shrinkage`` is the weight on the scaled-identity target,
    ``b_n2 / d_n2``; ``degenerate`` is set when the sample eigenvalues have no
    spread and ``s_star`` falls back to ``m_n * I``.
    """

    m_n: float
    d_n2: float
    b_n2: float
    a_n2: float
    s_star: np.ndarray
    sample_cov: np.ndarray = field(repr=False)
    shrinkage: float = 1.0
    degenerate: bool = False


def _scaled_fro2(A):
    # ||A||_F^2 under the dimension-normalised norm tr(A'A)/p
    return float(np.sum(A * A) / A.shape[0])


def ledoit_wolf(X, center=True):
    """Linear shrinkage of the sample covariance towards ``m_n * I``.

    With ``S`` the sample covariance and ``x_k`` the (centered) rows::

        m_n  = tr(S) / p
        d_n2 = ||S - m_n I||^2
        b_n2 = min(n^-2 sum_k ||x_k x_k' - S||^2, d_n2)
        a_n2 = d_n2 - b_n2
        S*   = (b_n2 / d_n2) m_n I + (a_n2 / d_n2) S

    where ``||A||^2 = tr(A'A) / p``.
    """
    X = _as_design(X)
    n, p = X.shape
    if center:
        X = X - X.mean(axis=0)
    S = X.T @ X / (n - 1)
    S = (S + S.T) / 2.0
    m_n = float(np.trace(S) / p)
    d_n2 = _scaled_fro2(S - m_n * np.eye(p))

    # ||x x' - S||^2 * p = (x'x)^2 - 2 x'Sx + tr(S^2), summed over rows
    row_sq = np.einsum("ij,ij->i", X, X)
    row_quad = np.einsum("ij,jk,ik->i", X, S, X)
    tr_s2 = float(np.sum(S * S))
    bbar = float(np.sum(row_sq**2 - 2.0 * row_quad + tr_s2) / p / n**2)
    b_n2 = min(max(bbar, 0.0), d_n2)
    a_n2 = d_n2 - b_n2

    if d_n2 <= DEGENERATE_SPREAD_TOL * m_n**2 or d_n2 == 0.0:
        return LedoitWolfResult(m_n, d_n2, b_n2, a_n2, m_n * np.eye(p), S, 1.0, True)
    w = b_n2 / d_n2
    s_star = w * m_n * np.eye(p) + (a_n2 / d_n2) * S
    return LedoitWolfResult(m_n, d_n2, b_n2, a_n2, (s_star + s_star.T) / 2.0, S, w, False)


def cor_standardize(theta):
    """Scale a symmetric positive definite matrix to unit diagonal.

    ``out[i, j] = theta[i, j] / sqrt(theta[i, i] * theta[j, j])``.
    """
    theta = np.asarray(theta, dtype=float)
    d = np.diag(theta)
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        raise NonPositiveDiagonal("matrix must have a strictly positive diagonal")
    s = 1.0 / np.sqrt(d)
    out = theta * np.outer(s, s)
    out = (out + out.T) / 2.0
    np.fill_diagonal(out, 1.0)
    return out


def spd_inverse(A, what="matrix"):
    """Inverse of a symmetric positive definite matrix via Cholesky."""
    A = np.asarray(A, dtype=float)
    try:
        c = linalg.cho_factor(A, lower=True)
    except linalg.LinAlgError as err:
        raise SingularCovariance(f"{what} is singular or indefinite: {err}") from None
    diag = np.abs(np.diag(c[0]))
    if diag.min() <= 1e-7 * diag.max():
        raise SingularCovariance(f"{what} is numerically singular (Cholesky pivot ratio {diag.min() / diag.max():.2e})")
    inv = linalg.cho_solve(c, np.eye(A.shape[0]))
    return (inv + inv.T) / 2.0


class OmegaMode(str, Enum):
    IDENTITY = "identity"
    KNOWN = "known"
    SAMPLE = "sample"
    LEDOIT_WOLF = "ledoit-wolf"
    USER = "user"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"lw": "ledoit-wolf", "ledoitwolf": "ledoit-wolf", "samplecov": "sample",
                   "true": "known", "i": "identity", "none": "identity", "usermatrix": "user"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise InvalidParameter(f"unknown omega mode {value!r}") from None


@dataclass(frozen=True)
class OmegaSpec:
    """How to obtain Omega.

    ``sigma_x`` is required by ``known``; ``omega`` by ``user``.
    """

    mode: OmegaMode = OmegaMode.IDENTITY
    sigma_x: np.ndarray = None
    omega: np.ndarray = None
    center: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mode", OmegaMode.parse(self.mode))
        if self.mode == OmegaMode.KNOWN and self.sigma_x is None:
            raise InvalidParameter("mode 'known' needs sigma_x")
        if self.mode == OmegaMode.USER and self.omega is None:
            raise InvalidParameter("mode 'user' needs omega")

    def describe(self):
        return {"mode": self.mode.value, "center": self.center}


def build_omega(X, spec):
    """Prior correlation matrix for the coefficients of a design ``X``."""
    mode = spec.mode
    if mode == OmegaMode.USER:
        return corr_structures.validate(spec.omega, tol=1e-8)
    X = np.asarray(X, dtype=float)
    p = X.shape[1] if X.ndim == 2 else 1
    if mode == OmegaMode.IDENTITY:
        return np.eye(p)
    if mode == OmegaMode.KNOWN:
        sigma = np.asarray(spec.sigma_x, dtype=float)
        if sigma.shape != (p, p):
            raise InvalidParameter(f"sigma_x has shape {sigma.shape}, expected {(p, p)}")
        if np.max(np.abs(sigma - sigma.T)) > 1e-10 * max(1.0, np.abs(sigma).max()):
            raise InvalidParameter("sigma_x must be symmetric")
        theta = spd_inverse(sigma, "sigma_x")
    elif mode == OmegaMode.SAMPLE:
        n = X.shape[0]
        if n <= p:
            raise SingularCovariance(f"sample covariance is singular when n={n} <= p={p}")
        theta = spd_inverse(sample_covariance(X, center=spec.center), "sample covariance")
    elif mode == OmegaMode.LEDOIT_WOLF:
        theta = spd_inverse(ledoit_wolf(X, center=spec.center).s_star, "Ledoit-Wolf estimate")
    else:
        raise InvalidParameter(f"unsupported mode {mode}")
    return corr_structures.validate(cor_standardize(theta), tol=1e-12)
