"""Exception hierarchy shared by every module in the package."""

import numpy as np


class DaspError(Exception):
    """Base class for all errors raised by ``dasp``."""


class InvalidParameter(DaspError, ValueError):
    pass


class NonSymmetric(DaspError, ValueError):
    pass


class NonUnitDiagonal(DaspError, ValueError):
    pass


class NonPositiveDefinite(DaspError, np.linalg.LinAlgError):
    """Matrix failed a positive-definiteness check.

    ``min_eigenvalue`` carries the offending eigenvalue when it is known.
    """

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class NonPositiveDiagonal(DaspError, ValueError):
    pass


class SingularCovariance(DaspError, np.linalg.LinAlgError):
    pass


class NumericalSingularity(DaspError, np.linalg.LinAlgError):
    pass


class RankDeficient(DaspError, np.linalg.LinAlgError):
    pass


class OutOfSupport(DaspError, ValueError):
    pass


class InsufficientDraws(DaspError, ValueError):
    pass


class NonFiniteTarget(DaspError, FloatingPointError):
    pass


class FoldFailure(DaspError, RuntimeError):
    pass


class ManifestMismatch(DaspError, ValueError):
    """Two runs that were meant to be paired differ in data, prior or seed."""


class MissingColumns(DaspError, ValueError):
    pass
