"""The regression dataset container shared by the sampler and the harness."""

import hashlib
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidParameter


@dataclass(frozen=True)
class RegressionDataset:
    """Design ``X`` (n x p) and response ``y`` (n).

    The optional fields hold the truth for simulated data: coefficients,
    intercept, residual scale and the covariance of the rows of ``X``.
    """

    X: np.ndarray
    y: np.ndarray
    b_true: np.ndarray = None
    intercept_true: float = None
    sigma_true: float = None
    sigma_x_true: np.ndarray = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise InvalidParameter(f"X {X.shape} and y {y.shape} do not line up")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InvalidParameter("X and y must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.b_true is not None:
            b = np.asarray(self.b_true, dtype=float).ravel()
            if b.shape[0] != X.shape[1]:
                raise InvalidParameter(f"b_true has length {b.shape[0]}, expected {X.shape[1]}")
            object.__setattr__(self, "b_true", b)
        if self.sigma_x_true is not None:
            s = np.asarray(self.sigma_x_true, dtype=float)
            if s.shape != (X.shape[1], X.shape[1]):
                raise InvalidParameter(f"sigma_x_true has shape {s.shape}")
            object.__setattr__(self, "sigma_x_true", s)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    def content_hash(self):
        """SHA-256 of the float64 bytes of ``X`` and ``y``."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.X).tobytes())
        h.update(np.ascontiguousarray(self.y).tobytes())
        return h.hexdigest()

    def subset(self, rows):
        """Dataset restricted to ``rows`` (truth fields are carried over)."""
        rows = np.asarray(rows)
        return replace(self, X=self.X[rows], y=self.y[rows])
