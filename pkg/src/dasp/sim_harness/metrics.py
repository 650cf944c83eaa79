"""Evaluation metrics for posterior draws of the linear model.

All metrics are pure functions of the draws and the data. Subsets that are
empty (no true zeros, no true nonzeros) produce ``nan`` rather than an error,
so that summary tables keep their shape.
"""

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import logsumexp

from ..errors import InvalidParameter, ManifestMismatch

LOG_2PI = math.log(2.0 * math.pi)
PAIRING_KEYS = ("data_hash", "prior_kind", "seed")


def _flat(draws, name):
    arr = getattr(draws, name)
    return arr.reshape((-1,) + arr.shape[2:])


def predictive_log_density(draws, X, y):
    """``(S, n)`` matrix of ``log N(y_i | alpha_s + x_i'b_s, sigma_s^2)``."""
    b, alpha, sigma = _flat(draws, "b"), _flat(draws, "intercept"), _flat(draws, "sigma")
    X = np.asarray(X, float)
    y = np.asarray(y, float).ravel()
    mu = alpha[:, None] + b @ X.T
    z = (y[None, :] - mu) / sigma[:, None]
    return -0.5 * LOG_2PI - np.log(sigma)[:, None] - 0.5 * z * z


def pointwise_elpd(draws, test):
    """``log((1/S) sum_s p(y_i | theta_s))`` for every held-out row."""
    ll = predictive_log_density(draws, test.X, test.y)
    return logsumexp(ll, axis=0) - math.log(ll.shape[0])


def elpd(draws, test):
    """Expected log pointwise predictive density on a held-out set."""
    return float(pointwise_elpd(draws, test).sum())


@dataclass
class RmseSplit:
    all: float
    zero: float
    nonzero: float


def _per_coef_rmse(b, b_true):
    return np.sqrt(np.mean((b - b_true[None, :]) ** 2, axis=0))


def _mean_or_nan(values):
    return float(np.mean(values)) if values.size else float("nan")


def rmse_split(draws, b_true):
    """Average over coefficients of the posterior RMSE, overall and by truth.

    For coefficient ``k``, ``sqrt(mean_s (b_k^(s) - b_k)^2)``; the three
    returned values average it over all, truly zero and truly nonzero
    coefficients.
    """
    b_true = np.asarray(b_true, float).ravel()
    per = _per_coef_rmse(_flat(draws, "b"), b_true)
    zero = b_true == 0.0
    return RmseSplit(_mean_or_nan(per), _mean_or_nan(per[zero]), _mean_or_nan(per[~zero]))


@dataclass
class CoverageReport:
    coverage: float
    avg_width: float
    sensitivity: float
    specificity: float
    coverage_zero: float
    coverage_nonzero: float


def credible_intervals(b_draws, level):
    """Equal-tailed marginal intervals, shape ``(p, 2)``."""
    if not 0.0 <= level <= 1.0:
        raise InvalidParameter(f"level must lie in [0, 1], got {level}")
    tail = (1.0 - level) / 2.0
    return np.quantile(b_draws, [tail, 1.0 - tail], axis=0).T


def _selection(b_draws, b_true, level):
    iv = credible_intervals(b_draws, level)
    selected = (iv[:, 0] > 0.0) | (iv[:, 1] < 0.0)
    nonzero = b_true != 0.0
    sens = _mean_or_nan(selected[nonzero].astype(float))
    spec = _mean_or_nan((~selected[~nonzero]).astype(float))
    return iv, sens, spec


def coverage_metrics(draws, b_true, level=0.95):
    """Coverage, width and selection accuracy of marginal credible intervals.

    A coefficient counts as selected when its interval excludes zero.
    """
    b_true = np.asarray(b_true, float).ravel()
    b = _flat(draws, "b")
    iv, sens, spec = _selection(b, b_true, level)
    covered = (iv[:, 0] <= b_true) & (b_true <= iv[:, 1])
    nonzero = b_true != 0.0
    return CoverageReport(
        coverage=_mean_or_nan(covered.astype(float)),
        avg_width=float(np.mean(iv[:, 1] - iv[:, 0])),
        sensitivity=sens,
        specificity=spec,
        coverage_zero=_mean_or_nan(covered[~nonzero].astype(float)),
        coverage_nonzero=_mean_or_nan(covered[nonzero].astype(float)),
    )


DEFAULT_ROC_LEVELS = np.concatenate([np.linspace(0.0, 0.99, 100), [0.995, 0.999, 1.0]])


def roc_curve(draws, b_true, levels=None):
    """False and true positive rates as the interval level sweeps.

    Returns
    -------
    fpr, tpr, levels : ndarray
        Sorted by ``fpr`` (ties by ``tpr``).
    """
    b_true = np.asarray(b_true, float).ravel()
    levels = DEFAULT_ROC_LEVELS if levels is None else np.atleast_1d(np.asarray(levels, float))
    b = _flat(draws, "b")
    pts = []
    for lv in levels:
        _, sens, spec = _selection(b, b_true, float(lv))
        pts.append((1.0 - spec, sens, float(lv)))
    pts.sort(key=lambda t: (t[0], t[1]))
    fpr, tpr, lv = (np.array(col) for col in zip(*pts))
    return fpr, tpr, lv


def roc_auc(fpr, tpr):
    """Trapezoidal area under a ROC curve closed at (0, 0) and (1, 1)."""
    x = np.concatenate([[0.0], np.asarray(fpr, float), [1.0]])
    y = np.concatenate([[0.0], np.asarray(tpr, float), [1.0]])
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))


def delta(metric_with_omega, metric_without, manifest_with=None, manifest_without=None):
    """``Q(with Omega) - Q(without)``.

    Positive ELPD differences and negative RMSE differences favour the model
    with Omega. When both manifests are given, the fields that define a
    pair (data hash, prior kind and seed) must agree.
    """
    if manifest_with is not None and manifest_without is not None:
        for key in PAIRING_KEYS:
            if manifest_with.get(key) != manifest_without.get(key):
                raise ManifestMismatch(
                    f"paired runs differ in {key!r}: {manifest_with.get(key)!r} vs {manifest_without.get(key)!r}")
    return float(metric_with_omega) - float(metric_without)


def meff_draws(draws, X, omega, max_draws=400):
    """Posterior draws of ``tr(I - kappa)``, evaluated on up to ``max_draws`` draws.

    ``I - kappa = Q^-1 X'X`` with ``Q = X'X + (D_s Omega D_s)^-1``, which
    needs no inverse of ``X'X``. ``X`` is centered when an intercept is fitted.
    """
    X = np.asarray(X, float)
    xtx = X.T @ X
    omega_inv = np.linalg.inv(np.asarray(omega, float))
    lam, tau = _flat(draws, "lam"), _flat(draws, "tau")
    take = np.unique(np.linspace(0, lam.shape[0] - 1, min(max_draws, lam.shape[0])).astype(int))
    s = np.clip(lam[take] * tau[take, None], 1e-8, 1e8)
    inv_s = 1.0 / s
    Q = xtx[None] + omega_inv[None] * inv_s[:, :, None] * inv_s[:, None, :]
    sol = np.linalg.solve(Q, np.broadcast_to(xtx, Q.shape))
    return np.trace(sol, axis1=1, axis2=2)


@dataclass
class MetricsReport:
    elpd: float
    rmse_all: float
    rmse_zero: float
    rmse_nonzero: float
    coverage: float
    avg_width: float
    sensitivity: float
    specificity: float
    coverage_zero: float
    coverage_nonzero: float
    meff_posterior_mean: float = float("nan")

    def as_dict(self):
        return asdict(self)


def evaluate(draws, train, test, b_true=None, omega=None, level=0.95):
    """Every metric of a fit in one record.

    ``b_true`` defaults to ``train.b_true``. The effective number of
    parameters is computed when ``omega`` is given.
    """
    b_true = train.b_true if b_true is None else b_true
    if b_true is None:
        raise InvalidParameter("evaluate needs the true coefficients")
    r = rmse_split(draws, b_true)
    c = coverage_metrics(draws, b_true, level)
    meff = float("nan")
    if omega is not None:
        Xc = train.X - train.X.mean(axis=0) if draws.manifest.get("intercept", True) else train.X
        meff = float(np.mean(meff_draws(draws, Xc, omega)))
    return MetricsReport(elpd(draws, test), r.all, r.zero, r.nonzero, c.coverage, c.avg_width,
                         c.sensitivity, c.specificity, c.coverage_zero, c.coverage_nonzero, meff)
