"""Exact leave-one-out cross-validation by refitting."""

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..cov_estimation import OmegaSpec
from ..data import RegressionDataset
from ..errors import DaspError, FoldFailure, InvalidParameter
from ..priors import PriorSpec, default_spec
from ..sampler import McmcConfig, fit
from .metrics import pointwise_elpd

MAX_LOO_N = 200


@dataclass
class LooResult:
    """Per-fold held-out log predictive densities and their sum.

    Failed folds hold ``nan`` in ``pointwise`` and are excluded from
    ``elpd``; ``flagged`` is then set.
    """

    elpd: float
    pointwise: np.ndarray
    failed: list = field(default_factory=list)
    messages: dict = field(default_factory=dict)

    @property
    def flagged(self):
        return bool(self.failed)


def _fold_prior(prior, train):
    if isinstance(prior, PriorSpec):
        return prior
    # a bare kind: defaults are re-derived from the training fold
    return default_spec(prior, train.n, train.p, y=train.y, X=train.X)


def _fold_omega(omega_spec, train):
    if omega_spec is None or not isinstance(omega_spec, OmegaSpec):
        return omega_spec
    return omega_spec


def _run_fold(args):
    i, dataset, prior, omega_spec, config, fit_kwargs = args
    mask = np.ones(dataset.n, dtype=bool)
    mask[i] = False
    train = RegressionDataset(dataset.X[mask], dataset.y[mask])
    held = RegressionDataset(dataset.X[i:i + 1], dataset.y[i:i + 1])
    try:
        draws = fit(train, _fold_prior(prior, train), _fold_omega(omega_spec, train), config, **fit_kwargs)
        value = float(pointwise_elpd(draws, held)[0])
        if not math.isfinite(value):
            raise FoldFailure(f"fold {i} produced a non-finite predictive density")
        return i, value, None
    except (DaspError, np.linalg.LinAlgError, FloatingPointError) as err:
        return i, float("nan"), f"{type(err).__name__}: {err}"


def fold_seeds(seed, n):
    """Independent per-fold sampler seeds derived from one master seed."""
    return [int(s.generate_state(1, np.uint64)[0] >> np.uint64(1)) for s in np.random.SeedSequence(seed).spawn(n)]


def loo_exact(dataset, prior, omega_spec=None, config=McmcConfig(), *, max_n=MAX_LOO_N, jobs=1, **fit_kwargs):
    """Refit on every ``n - 1`` subset and score the left-out row.

    ``omega_spec`` is applied to each training fold separately, so estimated
    correlation matrices never see the held-out row. ``prior`` may be a
    :class:`PriorSpec` (used unchanged) or a kind name, in which case the
    data-dependent defaults are recomputed on every fold. Extra keyword
    arguments go to :func:`dasp.sampler.fit`.
    """
    if not isinstance(dataset, RegressionDataset):
        raise InvalidParameter("dataset must be a RegressionDataset")
    n = dataset.n
    if n > max_n:
        raise InvalidParameter(f"exact LOO needs n refits; n={n} exceeds max_n={max_n}")
    if n < 3:
        raise InvalidParameter("exact LOO needs at least three rows")
    seeds = fold_seeds(config.seed, n)
    tasks = [(i, dataset, prior, omega_spec, replace(config, seed=seeds[i]), fit_kwargs) for i in range(n)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, os.cpu_count() or 1)) as pool:
            results = list(pool.map(_run_fold, tasks))
    else:
        results = [_run_fold(t) for t in tasks]
    pointwise = np.full(n, np.nan)
    failed, messages = [], {}
    for i, value, message in results:
        pointwise[i] = value
        if message is not None:
            failed.append(i)
            messages[i] = message
    if failed:
        warnings.warn(f"{len(failed)} LOO fold(s) failed and were excluded: {failed}", RuntimeWarning, stacklevel=2)
    return LooResult(float(np.nansum(pointwise)), pointwise, failed, messages)


def compare_loo(a, b):
    """Difference ``elpd(a) - elpd(b)`` with its paired standard error.

    ``se = sqrt(n var(pointwise_a - pointwise_b))`` over folds that
    succeeded in both runs.
    """
    pa = a.pointwise if isinstance(a, LooResult) else np.asarray(a, float)
    pb = b.pointwise if isinstance(b, LooResult) else np.asarray(b, float)
    if pa.shape != pb.shape:
        raise InvalidParameter("LOO results cover different numbers of folds")
    ok = np.isfinite(pa) & np.isfinite(pb)
    diff = pa[ok] - pb[ok]
    se = math.sqrt(diff.size * float(np.var(diff, ddof=1))) if diff.size > 1 else 0.0
    return float(diff.sum()), se
