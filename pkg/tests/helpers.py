"""Small helpers shared by several test modules."""

import numpy as np


def random_correlation(rng, p, df=None):
    """Random correlation matrix from a Wishart draw."""
    df = p + 2 if df is None else df
    A = rng.standard_normal((df, p))
    S = A.T @ A
    d = 1.0 / np.sqrt(np.diag(S))
    C = S * np.outer(d, d)
    C = (C + C.T) / 2.0
    np.fill_diagonal(C, 1.0)
    return C
