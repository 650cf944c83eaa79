"""Parametric correlation matrices: AR(1), MA(1), MA(2), their blocked
versions, equicorrelation and the identity.

All constructors return plain ``numpy`` arrays that have passed
:func:`validate`, so callers can rely on symmetry, a unit diagonal and
positive definiteness.

Moving-average structures come in two flavours, selected with
``ma_form``:

``"correlation"`` (default)
    The band entries *are* the correlations: MA(1) has ``rho`` on the first
    off-diagonal, MA(2) has ``rho`` and ``(1 - rho) * rho`` on the first two.
    Only a limited range of ``rho`` gives a positive definite matrix (for
    MA(1), ``|rho| < 1 / (2 cos(pi / (p + 1)))``), and construction raises
    :class:`~dasp.errors.NonPositiveDefinite` outside it.
``"process"``
    ``rho`` (and ``(1 - rho) * rho`` for MA(2)) are the coefficients of a
    moving-average process and the band entries are its autocorrelations,
    e.g. ``rho / (1 + rho**2)`` at lag one for MA(1). This is positive
    definite for every ``|rho| < 1``; it is the form needed to run the
    strongly correlated (``rho = 0.95``) blocked designs.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidParameter, NonPositiveDefinite, NonSymmetric, NonUnitDiagonal

PD_RELATIVE_TOL = 1e-10


class Kind(str, Enum):
    AR1 = "ar1"
    MA1 = "ma1"
    MA2 = "ma2"
    BAR1 = "bar1"
    BMA1 = "bma1"
    BMA2 = "bma2"
    EQUICORRELATION = "equicorrelation"
    IDENTITY = "identity"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"equi": "equicorrelation", "eq": "equicorrelation", "i": "identity"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise InvalidParameter(f"unknown structure kind {value!r}") from None

    @property
    def blocked(self):
        return self in (Kind.BAR1, Kind.BMA1, Kind.BMA2)

    @property
    def base(self):
        """Unblocked counterpart of a blocked kind (identity map otherwise)."""
        return {Kind.BAR1: Kind.AR1, Kind.BMA1: Kind.MA1, Kind.BMA2: Kind.MA2}.get(self, self)


@dataclass(frozen=True)
class StructureSpec:
    """Description of one parametric correlation structure.

    Parameters
    ----------
    kind : Kind or str
    rho : float
        Correlation parameter in (-1, 1).
    block_size : int
        Block size for the blocked kinds (ignored otherwise).
    ma_form : {"correlation", "process"}
        How ``rho`` is read by the moving-average kinds (see module docs).
    strict : bool
        For blocked kinds, refuse dimensions not divisible by ``block_size``
        instead of closing with a smaller trailing block.
    """

    kind: Kind
    rho: float = 0.0
    block_size: int = 5
    ma_form: str = "correlation"
    strict: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind.parse(self.kind))
        object.__setattr__(self, "rho", float(self.rho))
        if not -1.0 < self.rho < 1.0:
            raise InvalidParameter(f"rho must lie in (-1, 1), got {self.rho}")
        if int(self.block_size) < 1:
            raise InvalidParameter("block_size must be a positive integer")
        object.__setattr__(self, "block_size", int(self.block_size))
        if self.ma_form not in ("correlation", "process"):
            raise InvalidParameter(f"ma_form must be 'correlation' or 'process', got {self.ma_form!r}")

    def ma_band(self):
        """Band values (lag 1, lag 2, ...) for the moving-average kinds."""
        base = self.kind.base
        rho = self.rho
        if base == Kind.MA1:
            coefs = [rho]
        elif base == Kind.MA2:
            rho1, rho2 = rho, (1.0 - rho) * rho
            if not (rho1 + rho2 < 1.0 and rho1 - rho2 < 1.0):
                raise InvalidParameter(f"MA2 parameters violate rho1 +/- rho2 < 1 (rho1={rho1}, rho2={rho2})")
            coefs = [rho1, rho2]
        else:
            raise InvalidParameter(f"{self.kind.value} is not a moving-average structure")
        if self.ma_form == "correlation":
            return coefs
        theta = np.array([1.0] + coefs)
        denom = theta @ theta
        return [float(theta[:-k] @ theta[k:] / denom) for k in range(1, len(theta))]


def _toeplitz_band(dim, band):
    m = np.eye(dim)
    for lag, value in enumerate(band, start=1):
        if lag >= dim:
            break
        idx = np.arange(dim - lag)
        m[idx, idx + lag] = value
        m[idx + lag, idx] = value
    return m


def _raw_structure(spec, dim):
    kind = spec.kind.base
    if kind == Kind.IDENTITY:
        return np.eye(dim)
    if kind == Kind.AR1:
        lags = np.abs(np.subtract.outer(np.arange(dim), np.arange(dim)))
        return np.power(spec.rho, lags).astype(float)
    if kind in (Kind.MA1, Kind.MA2):
        return _toeplitz_band(dim, spec.ma_band())
    if kind == Kind.EQUICORRELATION:
        m = np.full((dim, dim), spec.rho)
        np.fill_diagonal(m, 1.0)
        return m
    raise InvalidParameter(f"unsupported kind {spec.kind}")


def _check_pd(m, what):
    eig = np.linalg.eigvalsh(m)
    if eig[0] <= PD_RELATIVE_TOL * max(eig[-1], 0.0) or eig[0] <= 0:
        raise NonPositiveDefinite(
            f"{what} is not positive definite (smallest eigenvalue {eig[0]:.6g})",
            min_eigenvalue=float(eig[0]),
        )


def make_structure(spec, dim):
    """Build the correlation matrix described by ``spec`` at size ``dim``.

    Blocked kinds are forwarded to :func:`make_blocked`.

    Examples
    --------
    >>> make_structure(StructureSpec("ar1", 0.5), 3)
    array([[1.  , 0.5 , 0.25],
           [0.5 , 1.  , 0.5 ],
           [0.25, 0.5 , 1.  ]])
    """
    dim = int(dim)
    if dim < 1:
        raise InvalidParameter("dim must be >= 1")
    if spec.kind.blocked:
        return make_blocked(spec, dim)
    m = _raw_structure(spec, dim)
    _check_pd(m, f"{spec.kind.value}(rho={spec.rho}) at dim={dim}")
    return m


def make_blocked(spec, dim):
    """Block-diagonal matrix of base structures of size ``spec.block_size``.

    Off-block entries are exactly zero. When ``dim`` is not a multiple of the
    block size the last block is the base structure at the remainder size,
    unless ``spec.strict`` is set.
    """
    if not spec.kind.blocked:
        raise InvalidParameter(f"make_blocked needs a blocked kind, got {spec.kind.value}")
    dim = int(dim)
    if dim < 1:
        raise InvalidParameter("dim must be >= 1")
    size = spec.block_size
    if spec.strict and dim % size:
        raise InvalidParameter(f"dim={dim} is not divisible by block_size={size}")
    out = np.zeros((dim, dim))
    for start in range(0, dim, size):
        stop = min(start + size, dim)
        out[start:stop, start:stop] = _raw_structure(spec, stop - start)
    _check_pd(out, f"{spec.kind.value}(rho={spec.rho}, block={size}) at dim={dim}")
    return out


def block_slices(dim, block_size):
    """Index slices of the diagonal blocks used by :func:`make_blocked`."""
    return [slice(s, min(s + block_size, dim)) for s in range(0, dim, block_size)]


def validate(m, tol=1e-10):
    """Check that ``m`` is a correlation matrix and return it symmetrized.

    Raises
    ------
    NonSymmetric, NonUnitDiagonal, NonPositiveDefinite
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidParameter(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidParameter("matrix has non-finite entries")
    asym = np.max(np.abs(m - m.T)) if m.size else 0.0
    if asym > tol:
        raise NonSymmetric(f"max |M - M'| = {asym:.3g} exceeds tol={tol}")
    diag_err = np.max(np.abs(np.diag(m) - 1.0)) if m.size else 0.0
    if diag_err > tol:
        raise NonUnitDiagonal(f"max |diag - 1| = {diag_err:.3g} exceeds tol={tol}")
    sym = (m + m.T) / 2.0
    eig = np.linalg.eigvalsh(sym)
    if eig[0] <= tol:
        raise NonPositiveDefinite(
            f"smallest eigenvalue {eig[0]:.6g} does not exceed tol={tol}", min_eigenvalue=float(eig[0])
        )
    return sym


def equicorrelation_eigenvalues(dim, rho):
    """Closed-form spectrum of the equicorrelation matrix, ascending."""
    vals = np.concatenate([np.full(dim - 1, 1.0 - rho), [1.0 + (dim - 1) * rho]])
    return np.sort(vals)
