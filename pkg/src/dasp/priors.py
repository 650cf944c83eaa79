"""Global-local shrinkage prior hierarchies and their default hyperparameters.

Every kind is expressed through the same two quantities, a vector of local
scales ``lambda`` and a global scale ``tau``, such that the conditional prior
of the coefficients is::

    b | lambda, tau, sigma ~ N(0, sigma^2 tau^2 D_lambda Omega D_lambda)

The kind-specific latent variables that produce ``lambda`` and ``tau`` are
kept in ``ScaleDraw.aux``:

======  =====================================  ==========================
kind    latent ladder                          lambda, tau
======  =====================================  ==========================
hs      lambda_j, tau ~ C+(0, 1)               lambda_j, tau
rhs     lambda_j ~ C+(0, 1), tau ~ C+(0, t0),  c lambda_j /
        c^2 ~ InvGamma(df/2, df s^2/2)         sqrt(c^2 + tau^2 lambda_j^2), tau
dl      psi_j ~ Exp(1/2), phi ~ Dir(a),        sqrt(psi_j) phi_j, tau
        tau ~ Gamma(shape, 1/2)
r2d2    phi ~ Dir(a), w2 ~ BetaPrime(a1, a2)   sqrt(phi_j w2), 1
bp      alpha ~ Gamma(1, 2) on (0, 0.5],       sqrt(v_j), 1
        v_j ~ BetaPrime(alpha, beta)
ng      k ~ Exp(1), nu ~ InvGamma(2, M),       sqrt(v_j), 1
        v_j ~ Gamma(k, k / nu)
======  =====================================  ==========================

Gamma and exponential distributions use the (shape, rate) convention.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import special, stats

from .errors import InvalidParameter, OutOfSupport

LOG_2_OVER_PI = math.log(2.0 / math.pi)
TINY_LOG = math.log(np.finfo(float).tiny)


class PriorKind(str, Enum):
    BP = "bp"
    DL = "dl"
    HS = "hs"
    RHS = "rhs"
    NG = "ng"
    R2D2 = "r2d2"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        key = {"d2": "r2d2", "horseshoe": "hs", "betaprime": "bp"}.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise InvalidParameter(f"unknown prior kind {value!r}") from None


DEFAULTS = {
    PriorKind.BP: {"alpha_shape": 1.0, "alpha_rate": 2.0, "alpha_max": 0.5, "beta": 1.0},
    PriorKind.DL: {"a_pi": 0.5, "tau_rate": 0.5},
    PriorKind.HS: {},
    PriorKind.RHS: {"slab_df": 4.0, "slab_scale": 2.0},
    PriorKind.NG: {"nu_shape": 2.0},
    PriorKind.R2D2: {"a_pi": 0.25, "a2": 0.5},
}


@dataclass(frozen=True)
class PriorSpec:
    """One shrinkage prior plus the Half-Student-t prior on sigma.

    ``params`` holds every effective hyperparameter of the kind; use
    :func:`default_spec` to fill the data-dependent ones.
    """

    kind: PriorKind
    params: dict = field(default_factory=dict)
    sigma_nu: float = 3.0
    sigma_eta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", PriorKind.parse(self.kind))
        object.__setattr__(self, "params", {k: float(v) for k, v in self.params.items()})
        if self.sigma_nu <= 0 or self.sigma_eta <= 0:
            raise InvalidParameter("sigma_nu and sigma_eta must be positive")

    def __getitem__(self, key):
        return self.params[key]

    def with_overrides(self, **overrides):
        """Copy with some hyperparameters replaced (``sigma_nu``/``sigma_eta`` too)."""
        params = dict(self.params)
        nu, eta = self.sigma_nu, self.sigma_eta
        for key, value in overrides.items():
            if key == "sigma_nu":
                nu = float(value)
            elif key == "sigma_eta":
                eta = float(value)
            else:
                params[key] = float(value)
        return PriorSpec(self.kind, params, nu, eta)

    def to_dict(self):
        return {"kind": self.kind.value, "params": dict(self.params),
                "sigma_nu": self.sigma_nu, "sigma_eta": self.sigma_eta}


def min_norm_least_squares(X, y):
    """OLS estimate when X has full column rank, minimum-norm solution otherwise."""
    coef, *_ = np.linalg.lstsq(np.asarray(X, float), np.asarray(y, float), rcond=None)
    return coef


def default_spec(kind, n, p, y=None, X=None, sigma_nu=3.0, **overrides):
    """Fully populated :class:`PriorSpec` with the default hyperparameters.

    ``y`` sets the sigma-prior scale to ``sd(y)``; the Normal-Gamma prior also
    needs ``X`` and ``y`` to compute ``M``, the mean squared least-squares
    coefficient.
    """
    kind = PriorKind.parse(kind)
    n, p = int(n), int(p)
    params = dict(DEFAULTS[kind])
    if kind == PriorKind.DL:
        params["tau_shape"] = n * params["a_pi"]
    elif kind == PriorKind.R2D2:
        params["a1"] = p * params["a_pi"]
    elif kind == PriorKind.RHS:
        p0 = max(1.0, p / 10.0)
        params["p0"] = p0
        params["tau0"] = p0 / ((p - p0) * math.sqrt(n)) if p > p0 else 1.0
    elif kind == PriorKind.NG:
        if X is None or y is None:
            params["M"] = 1.0
        else:
            bhat = min_norm_least_squares(X, y)
            params["M"] = float(np.mean(bhat**2))
    eta = float(np.std(y, ddof=1)) if y is not None and len(y) > 1 else 1.0
    if not eta > 0:
        eta = 1.0
    spec = PriorSpec(kind, params, sigma_nu, eta)
    return spec.with_overrides(**overrides) if overrides else spec


# -- scalar log densities (normalised) ---------------------------------------

def log_half_cauchy(x, scale=1.0):
    return LOG_2_OVER_PI - math.log(scale) - math.log1p((x / scale) ** 2)


def log_half_student_t(x, nu, scale):
    z = x / scale
    return (math.log(2.0) + math.lgamma((nu + 1) / 2) - math.lgamma(nu / 2)
            - 0.5 * math.log(nu * math.pi) - math.log(scale)
            - (nu + 1) / 2 * math.log1p(z * z / nu))


def log_gamma_pdf(x, shape, rate):
    return shape * math.log(rate) - math.lgamma(shape) + (shape - 1) * math.log(x) - rate * x


def log_inv_gamma_pdf(x, shape, scale):
    return shape * math.log(scale) - math.lgamma(shape) - (shape + 1) * math.log(x) - scale / x


def log_exponential(x, rate):
    return math.log(rate) - rate * x


def log_beta_prime(x, a, b):
    return (a - 1) * math.log(x) - (a + b) * math.log1p(x) - special.betaln(a, b)


def log_dirichlet(phi, a):
    phi = np.asarray(phi, float)
    k = phi.size
    return float(math.lgamma(k * a) - k * math.lgamma(a) + (a - 1) * np.sum(np.log(phi)))


def log_truncated_gamma(x, shape, rate, upper):
    if not 0 < x <= upper:
        return -math.inf
    return log_gamma_pdf(x, shape, rate) - math.log(stats.gamma.cdf(upper, shape, scale=1.0 / rate))


# -- draws ------------------------------------------------------------------

@dataclass
class ScaleDraw:
    """One joint draw of the scale parameters.

    ``lam`` and ``tau`` follow the convention in the module docstring;
    ``aux`` holds the kind-specific latent variables.
    """

    lam: np.ndarray
    tau: float
    aux: dict = field(default_factory=dict)


def log_gamma_variates(rng, shape, size):
    """``log`` of Gamma(shape, 1) draws, accurate for very small shapes.

    ``shape`` may be an array broadcastable to ``size``.
    """
    shape = np.asarray(shape, float)
    # G(a) = G(a + 1) * U^(1/a) keeps the log finite when a << 1
    return np.log(rng.gamma(shape + 1.0, 1.0, size)) + np.log(rng.random(size)) / shape


def sample_truncated_gamma(rng, shape, rate, upper, size=None):
    cdf_upper = stats.gamma.cdf(upper, shape, scale=1.0 / rate)
    u = rng.random(size) * cdf_upper
    return np.minimum(stats.gamma.ppf(u, shape, scale=1.0 / rate), upper)


def _exp_floored(logv):
    # small shapes put most of the mass far below the double range; keep the
    # draws strictly positive (the exact logs are returned alongside)
    return np.exp(np.maximum(logv, TINY_LOG))


def _dirichlet_rows(rng, a, n, p):
    logt = log_gamma_variates(rng, a, (n, p))
    logt -= logt.max(axis=1, keepdims=True)
    t = np.exp(logt)
    return t / t.sum(axis=1, keepdims=True)


def sample_scales_batch(spec, p, n, rng):
    """``n`` independent prior draws.

    Returns ``(lam, tau, aux)`` with ``lam`` of shape ``(n, p)``, ``tau`` of
    shape ``(n,)`` and ``aux`` a dict of arrays with leading dimension ``n``.
    """
    kind, q = spec.kind, spec.params
    if kind == PriorKind.HS:
        lam = np.abs(rng.standard_cauchy((n, p)))
        tau = np.abs(rng.standard_cauchy(n))
        return lam, tau, {}
    if kind == PriorKind.RHS:
        raw = np.abs(rng.standard_cauchy((n, p)))
        tau = q["tau0"] * np.abs(rng.standard_cauchy(n))
        c2 = stats.invgamma.rvs(q["slab_df"] / 2, scale=q["slab_df"] * q["slab_scale"] ** 2 / 2,
                                size=n, random_state=rng)
        lam = np.sqrt(c2)[:, None] * raw / np.sqrt(c2[:, None] + tau[:, None] ** 2 * raw**2)
        return lam, tau, {"lambda_raw": raw, "c2": c2}
    if kind == PriorKind.DL:
        psi = rng.exponential(1.0 / 0.5, (n, p))
        phi = _dirichlet_rows(rng, q["a_pi"], n, p)
        tau = rng.gamma(q["tau_shape"], 1.0 / q["tau_rate"], n)
        return np.sqrt(psi) * phi, tau, {"psi": psi, "phi": phi}
    if kind == PriorKind.R2D2:
        phi = _dirichlet_rows(rng, q["a_pi"], n, p)
        w2 = np.exp(log_gamma_variates(rng, q["a1"], n) - log_gamma_variates(rng, q["a2"], n))
        return np.sqrt(phi * w2[:, None]), np.ones(n), {"phi": phi, "omega2": w2}
    if kind == PriorKind.BP:
        alpha = sample_truncated_gamma(rng, q["alpha_shape"], q["alpha_rate"], q["alpha_max"], n)
        logv = log_gamma_variates(rng, alpha[:, None], (n, p)) - log_gamma_variates(rng, q["beta"], (n, p))
        v = _exp_floored(logv)
        return np.sqrt(v), np.ones(n), {"alpha": alpha, "lambda2": v, "log_lambda2": logv}
    if kind == PriorKind.NG:
        shape = rng.exponential(1.0, n)
        nu = stats.invgamma.rvs(q["nu_shape"], scale=q["M"], size=n, random_state=rng)
        logv = log_gamma_variates(rng, shape[:, None], (n, p)) + np.log(nu / shape)[:, None]
        v = _exp_floored(logv)
        return np.sqrt(v), np.ones(n), {"shape": shape, "nu": nu, "psi2": v, "log_psi2": logv}
    raise InvalidParameter(f"unsupported prior kind {kind}")


def sample_scales(spec, p, rng):
    """One exact draw from the prior ladder of ``spec.kind``."""
    lam, tau, aux = sample_scales_batch(spec, p, 1, rng)
    aux = {k: (v[0] if np.ndim(v) > 1 else float(v[0])) for k, v in aux.items()}
    return ScaleDraw(lam[0], float(tau[0]), aux)


def sample_sigma(spec, rng, size=None):
    """Draws from the Half-Student-t(nu, eta) prior on sigma."""
    return np.abs(spec.sigma_eta * rng.standard_t(spec.sigma_nu, size))


def _positive(name, x):
    arr = np.asarray(x, float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise OutOfSupport(f"{name} must be positive and finite")
    return arr


def log_prior_density(spec, draw, sigma):
    """Joint log density of every latent layer of ``draw`` and of ``sigma``."""
    kind, q = spec.kind, spec.params
    total = log_half_student_t(float(_positive("sigma", sigma)), spec.sigma_nu, spec.sigma_eta)
    aux = draw.aux
    if kind == PriorKind.HS:
        lam = _positive("lambda", draw.lam)
        tau = float(_positive("tau", draw.tau))
        total += float(np.sum(LOG_2_OVER_PI - np.log1p(lam**2))) + log_half_cauchy(tau)
    elif kind == PriorKind.RHS:
        raw = _positive("lambda_raw", aux["lambda_raw"])
        tau = float(_positive("tau", draw.tau))
        c2 = float(_positive("c2", aux["c2"]))
        total += float(np.sum(LOG_2_OVER_PI - np.log1p(raw**2)))
        total += log_half_cauchy(tau, q["tau0"])
        total += log_inv_gamma_pdf(c2, q["slab_df"] / 2, q["slab_df"] * q["slab_scale"] ** 2 / 2)
    elif kind == PriorKind.DL:
        psi = _positive("psi", aux["psi"])
        phi = _positive("phi", aux["phi"])
        tau = float(_positive("tau", draw.tau))
        total += float(np.sum(math.log(0.5) - 0.5 * psi))
        total += log_dirichlet(phi, q["a_pi"]) + log_gamma_pdf(tau, q["tau_shape"], q["tau_rate"])
    elif kind == PriorKind.R2D2:
        phi = _positive("phi", aux["phi"])
        w2 = float(_positive("omega2", aux["omega2"]))
        total += log_dirichlet(phi, q["a_pi"]) + log_beta_prime(w2, q["a1"], q["a2"])
    elif kind == PriorKind.BP:
        alpha = float(_positive("alpha", aux["alpha"]))
        v = _positive("lambda2", aux.get("lambda2", np.asarray(draw.lam) ** 2))
        lt = log_truncated_gamma(alpha, q["alpha_shape"], q["alpha_rate"], q["alpha_max"])
        if not math.isfinite(lt):
            raise OutOfSupport("alpha outside (0, alpha_max]")
        total += lt + float(np.sum((alpha - 1) * np.log(v) - (alpha + q["beta"]) * np.log1p(v)))
        total -= v.size * special.betaln(alpha, q["beta"])
    elif kind == PriorKind.NG:
        shape = float(_positive("shape", aux["shape"]))
        nu = float(_positive("nu", aux["nu"]))
        v = _positive("psi2", aux.get("psi2", np.asarray(draw.lam) ** 2))
        rate = shape / nu
        total += log_exponential(shape, 1.0) + log_inv_gamma_pdf(nu, q["nu_shape"], q["M"])
        total += float(np.sum(shape * math.log(rate) - math.lgamma(shape) + (shape - 1) * np.log(v) - rate * v))
    else:
        raise InvalidParameter(f"unsupported prior kind {kind}")
    if not math.isfinite(total):
        raise OutOfSupport("log prior density is not finite")
    return total
