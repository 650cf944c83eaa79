"""Convergence diagnostics: rank-normalized split-R-hat and bulk ESS.

Both functions take a ``(chains, draws)`` array for a single scalar
quantity. Chains are split in half, pooled values are replaced by normal
scores of their ranks, and the classical statistics are computed on the
result. R-hat is the larger of the bulk value and the value for the folded
draws ``|x - median(x)|``. The ESS uses the autocorrelation estimate
truncated by Geyer's initial monotone sequence.

A quantity with no variation (for instance a parameter that is clamped) has
no defined R-hat or ESS; the functions then return ``nan`` and emit a
:class:`DegenerateChainWarning`.
"""

import warnings

import numpy as np
from scipy import stats

from ..errors import InsufficientDraws


class DegenerateChainWarning(UserWarning):
    """A diagnostic was requested for draws with zero variance."""


def _as_chains(draws, min_chains=1):
    arr = np.asarray(draws, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise InsufficientDraws(f"expected a (chains, draws) array, got shape {arr.shape}")
    if arr.shape[0] < min_chains or arr.shape[1] < 4:
        raise InsufficientDraws(f"need at least {min_chains} chains of 4 draws, got {arr.shape}")
    return arr


def _degenerate(arr, what):
    if not np.all(np.isfinite(arr)) or np.ptp(arr) == 0.0:
        warnings.warn(f"{what} undefined: draws are constant or non-finite", DegenerateChainWarning, stacklevel=3)
        return True
    return False


def split_chains(arr):
    half = arr.shape[1] // 2
    return np.vstack((arr[:, :half], arr[:, arr.shape[1] - half:]))


def rank_normalize(arr):
    """Normal scores of the pooled ranks, ``Phi^-1((r - 3/8) / (N + 1/4))``."""
    ranks = stats.rankdata(arr, method="average").reshape(arr.shape)
    return stats.norm.ppf((ranks - 0.375) / (arr.size + 0.25))


def _basic_rhat(arr):
    m, n = arr.shape
    within = float(np.mean(np.var(arr, axis=1, ddof=1)))
    between = n * float(np.var(arr.mean(axis=1), ddof=1))
    if within == 0.0:
        return np.nan
    return float(np.sqrt(((n - 1) / n * within + between / n) / within))


def rhat(draws):
    """Rank-normalized split-R-hat (maximum of bulk and folded versions).

    Examples
    --------
    >>> rng = np.random.default_rng(0)
    >>> rhat(rng.standard_normal((4, 1000))) < 1.01
    True
    """
    arr = _as_chains(draws, min_chains=2)
    if _degenerate(arr, "R-hat"):
        return float("nan")
    bulk = _basic_rhat(rank_normalize(split_chains(arr)))
    folded = np.abs(arr - np.median(arr))
    tail = _basic_rhat(rank_normalize(split_chains(folded))) if np.ptp(folded) > 0 else bulk
    return float(max(bulk, tail))


def _autocovariance(x):
    """Biased autocovariance of a 1-D series at every lag, via FFT."""
    n = x.size
    centered = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(centered, size)
    acov = np.fft.irfft(spec * np.conjugate(spec), size)[:n]
    return acov / n


def ess_basic(draws):
    """Effective sample size of the raw draws (no splitting or ranking)."""
    arr = _as_chains(draws)
    if _degenerate(arr, "ESS"):
        return float("nan")
    return _geyer_ess(arr)


def _geyer_ess(arr):
    m, n = arr.shape
    acov = np.array([_autocovariance(row) for row in arr])
    mean_var = float(acov[:, 0].mean()) * n / (n - 1.0)
    var_plus = mean_var * (n - 1.0) / n
    if m > 1:
        var_plus += float(np.var(arr.mean(axis=1), ddof=1))
    if var_plus <= 0.0:
        return float("nan")
    rho = 1.0 - (mean_var - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0

    # initial positive sequence: sums of adjacent pairs stay positive
    pairs = []
    t = 0
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair < 0.0:
            break
        pairs.append(pair)
        t += 2
    pairs = np.minimum.accumulate(np.asarray(pairs)) if pairs else np.asarray([1.0])
    tau = -1.0 + 2.0 * float(pairs.sum())
    tau = max(tau, 1.0 / np.log10(m * n))
    return float(m * n / tau)


def ess(draws):
    """Bulk effective sample size (split chains, rank-normalized)."""
    arr = _as_chains(draws)
    if _degenerate(arr, "ESS"):
        return float("nan")
    return _geyer_ess(rank_normalize(split_chains(arr)))


ess_bulk = ess


def stuck_chains(draws, rel_tol=1e-10):
    """Indices of chains whose variance is negligible next to the pooled variance.

    This stands in for the divergence count of gradient-based samplers.
    """
    arr = _as_chains(draws)
    pooled = float(np.var(arr))
    if pooled == 0.0:
        return list(range(arr.shape[0]))
    return [i for i, row in enumerate(arr) if float(np.var(row)) <= rel_tol * pooled]


def summarize(posterior, names=("b", "lam", "tau", "sigma", "intercept")):
    """Per-parameter mean, sd, quantiles, R-hat and ESS as a list of dicts."""
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateChainWarning)
        for name in names:
            arr = getattr(posterior, name)
            flat = arr.reshape(arr.shape[0], arr.shape[1], -1)
            for k in range(flat.shape[2]):
                x = flat[:, :, k]
                label = name if arr.ndim == 2 else f"{name}[{k}]"
                r = rhat(x) if x.shape[0] > 1 and x.shape[1] >= 4 else float("nan")
                e = ess(x) if x.shape[1] >= 4 else float("nan")
                q = np.quantile(x, [0.025, 0.5, 0.975])
                rows.append({
                    "parameter": label, "mean": float(x.mean()), "sd": float(x.std(ddof=1)) if x.size > 1 else 0.0,
                    "q2.5": float(q[0]), "q50": float(q[1]), "q97.5": float(q[2]),
                    "rhat": r, "ess_bulk": e, "degenerate": bool(np.ptp(x) == 0.0),
                    "stuck_chains": len(stuck_chains(x)) if x.shape[1] >= 4 else 0,
                })
    return rows
