"""Blocked Gibbs sampler for the linear model under a dependency-aware prior.

Model::

    y = alpha + X b + e,             e ~ N(0, sigma^2 I)
    b | scales, sigma ~ N(0, sigma^2 D_s Omega D_s),   s_j = tau lambda_j
    sigma ~ Half-Student-t(nu, eta),   alpha flat

One iteration updates, in order,

1. ``b`` from its Gaussian full conditional (one Cholesky of a p x p matrix);
2. the intercept from its Gaussian full conditional;
3. ``sigma`` by a random-walk Metropolis step on ``log sigma`` whose step
   size adapts towards 44% acceptance during warmup and is frozen after;
4. the scale latents of the prior, one coordinate at a time, by
   stepping-out slice sampling on the log scale.

The latents of every prior are mapped to per-coordinate factors ``l_j`` and
a shared factor ``G`` with ``s_j = G l_j``. Writing ``u = b / l`` and
``P = Omega^-1``, the coefficient prior contributes
``-sum log l_j - p log G - u'Pu / (2 sigma^2 G^2)`` to every latent target.
The sampler tracks ``w = P u`` and ``q = u'w`` so that moving one ``l_j`` costs
O(1) and committing the move costs O(p).

For the Dirichlet-type priors the simplex weights are represented by
unnormalized Gamma variables ``T_j`` with ``phi = T / sum(T)``; the marginal
of ``phi`` is unchanged and every move is a univariate one.
"""

import bisect
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg

from .. import __version__
from ..cov_estimation import OmegaSpec, build_omega
from ..data import RegressionDataset
from ..errors import InvalidParameter, NonFiniteTarget, NumericalSingularity
from ..priors import PriorKind, PriorSpec, log_half_student_t

SCALE_FLOOR = 1e-8
SCALE_CEIL = 1e8
LOG_FLOOR = math.log(SCALE_FLOOR)
LOG_CEIL = math.log(SCALE_CEIL)
LOG_BOUND = 230.0
SLICE_WIDTH = 1.0
SLICE_MAX_STEPS = 50
SIGMA_TARGET_ACCEPT = 0.44
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class McmcConfig:
    chains: int = 4
    warmup: int = 1000
    draws: int = 1000
    seed: int = 0
    thin: int = 1

    def __post_init__(self):
        for name in ("chains", "warmup", "draws", "thin"):
            value = int(getattr(self, name))
            if value < (0 if name == "warmup" else 1):
                raise InvalidParameter(f"{name} must be positive")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "seed", int(self.seed))


@dataclass
class FixedScales:
    """Hold ``lambda``, ``tau`` and ``sigma`` at given values (only ``b`` and the intercept move)."""

    lam: np.ndarray
    tau: float = 1.0
    sigma: float = 1.0


@dataclass
class PosteriorDraws:
    """Per-chain posterior draws.

    Arrays have shape ``(chains, draws, ...)``. ``extras`` holds the scalar
    kind-specific latents (``c2``, ``alpha``, ``omega2`` ...), and
    ``log_lik`` the pointwise log-likelihood of the training rows.
    """

    b: np.ndarray
    lam: np.ndarray
    tau: np.ndarray
    sigma: np.ndarray
    intercept: np.ndarray
    log_lik: np.ndarray
    extras: dict = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)

    @property
    def n_chains(self):
        return self.b.shape[0]

    @property
    def n_draws(self):
        return self.b.shape[1]

    def flat(self, name):
        """Chains concatenated: ``(chains * draws, ...)``."""
        arr = getattr(self, name) if hasattr(self, name) else self.extras[name]
        return arr.reshape((-1,) + arr.shape[2:])


# -- small numerical helpers -------------------------------------------------

def _softplus(x):
    """``log(1 + exp(x))`` without overflow."""
    if x > 35.0:
        return x
    if x < -35.0:
        return math.exp(x)
    return math.log1p(math.exp(x))


def _slice(f, x0, f0, rng, lo=-LOG_BOUND, hi=LOG_BOUND, width=SLICE_WIDTH):
    """One stepping-out and shrinkage slice update of a univariate log target."""
    logy = f0 - rng.standard_exponential()
    left = x0 - width * rng.random()
    right = left + width
    j = int(SLICE_MAX_STEPS * rng.random())
    k = SLICE_MAX_STEPS - 1 - j
    while j > 0 and left > lo and f(left) > logy:
        left -= width
        j -= 1
    while k > 0 and right < hi and f(right) > logy:
        right += width
        k -= 1
    left, right = max(left, lo), min(right, hi)
    while True:
        x1 = left + (right - left) * rng.random()
        f1 = f(x1)
        if f1 > logy:
            return x1, f1
        if x1 < x0:
            left = x1
        else:
            right = x1
        if right - left < 1e-12:
            return x0, f0


# -- one chain ----------------------------------------------------------------

class _Chain:
    """State and update rules of a single chain."""

    def __init__(self, X, y, omega_inv, prior, rng, intercept, fixed):
        self.X = X
        self.y = y
        self.n, self.p = X.shape
        self.P = omega_inv
        self.Pdiag = np.diag(omega_inv).tolist()
        self.prior = prior
        self.kind = prior.kind
        self.rng = rng
        self.use_intercept = intercept
        self.fixed = fixed
        self.xtx = X.T @ X
        self.floor_hits = 0
        self.sigma_accepts = 0
        self.sigma_tries = 0
        self.log_step = math.log(0.3)

        sd_y = float(np.std(y)) if self.n > 1 else 1.0
        self.alpha = float(np.mean(y)) if intercept else 0.0
        self.b = np.zeros(self.p)
        if fixed is not None:
            self.sigma = float(fixed.sigma)
            self.fixed_s = np.clip(float(fixed.tau) * np.asarray(fixed.lam, float), SCALE_FLOOR, SCALE_CEIL)
        else:
            self.sigma = max(sd_y, 1e-3) * math.exp(0.1 * rng.standard_normal()) / 2.0
            self._init_latents()
            self._refresh()

    # latent layout ---------------------------------------------------------
    def _jitter(self, size=None):
        return 0.1 * self.rng.standard_normal(size)

    def _init_latents(self):
        p, q, kind = self.p, self.prior.params, self.kind
        if kind == PriorKind.HS:
            self.loglam = self._jitter(p)
            self.logtau = float(self._jitter())
        elif kind == PriorKind.RHS:
            self.lograw = self._jitter(p)
            self.logtau = float(self._jitter())
            self.logc2 = math.log(q["slab_scale"] ** 2) + float(self._jitter())
        elif kind == PriorKind.DL:
            self.logpsi = math.log(2.0) + self._jitter(p)
            self.logT = self._jitter(p)
            self.logtau = math.log(p) + float(self._jitter())
        elif kind == PriorKind.R2D2:
            self.logT = self._jitter(p)
            self.logw2 = math.log(p) + float(self._jitter())
        elif kind == PriorKind.BP:
            self.logv = self._jitter(p)
            self.bp_alpha = min(0.25 * math.exp(float(self._jitter())), q["alpha_max"])
        elif kind == PriorKind.NG:
            self.logv = self._jitter(p)
            self.logk = float(self._jitter())
            self.nu = q["M"] if q["M"] > 0 else 1.0
        else:
            raise InvalidParameter(f"unsupported prior kind {kind}")

    def _layout(self):
        """Return ``(log l, log G)`` from the kind-specific latents."""
        kind = self.kind
        if kind == PriorKind.HS:
            return self.loglam.copy(), self.logtau
        if kind == PriorKind.RHS:
            return self._rhs_logl(self.logtau, self.logc2), self.logtau
        if kind == PriorKind.DL:
            return 0.5 * self.logpsi + self.logT, self.logtau - _logsumexp(self.logT)
        if kind == PriorKind.R2D2:
            return 0.5 * self.logT, 0.5 * (self.logw2 - _logsumexp(self.logT))
        return 0.5 * self.logv, 0.0

    def _rhs_logl(self, logtau, logc2):
        z = 2.0 * logtau + 2.0 * self.lograw - logc2
        return self.lograw - 0.5 * np.logaddexp(0.0, z)

    @staticmethod
    def _effective(logl, logG):
        """``log l`` after the prior scale ``G l`` is confined to the floor and ceiling."""
        return np.clip(logl + logG, LOG_FLOOR, LOG_CEIL) - logG

    def _refresh(self):
        """Recompute the layout and every tracked quantity from the latents."""
        self.logl, self.logG = self._layout()
        self._sync()

    def _sync(self):
        self.le = self._effective(self.logl, self.logG)
        self.n_clipped = int(np.count_nonzero(self.le != self.logl))
        self.u = self.b * np.exp(-self.le)
        self.w = self.P @ self.u
        self.q = float(self.u @ self.w)
        if self.kind in (PriorKind.DL, PriorKind.R2D2):
            self.T = np.exp(self.logT)
            self.sumT = float(self.T.sum())

    def scales(self):
        """Prior standard deviations of ``b / sigma`` (already floored)."""
        if self.fixed is not None:
            return self.fixed_s
        return np.exp(self.le + self.logG)

    def public_scales(self):
        """``(lambda, tau)`` in the convention of :mod:`dasp.priors`."""
        if self.fixed is not None:
            return np.asarray(self.fixed.lam, float), float(self.fixed.tau)
        if self.kind in (PriorKind.HS, PriorKind.RHS, PriorKind.DL):
            tau = math.exp(self.logtau)
            return np.exp(self.logl + self.logG - self.logtau), tau
        return np.exp(self.logl + self.logG), 1.0

    def extras(self):
        kind = self.kind
        if self.fixed is not None:
            return {}
        if kind == PriorKind.RHS:
            return {"c2": math.exp(self.logc2)}
        if kind == PriorKind.R2D2:
            return {"omega2": math.exp(self.logw2)}
        if kind == PriorKind.BP:
            return {"alpha": self.bp_alpha}
        if kind == PriorKind.NG:
            return {"shape": math.exp(self.logk), "nu": self.nu}
        return {}

    # blocks --------------------------------------------------------------------
    def update_b(self):
        s = self.scales()
        if self.fixed is None:
            self.floor_hits += self.n_clipped
        # b = D_s beta with beta ~ N(M^-1 D_s X'r, sigma^2 M^-1), M = D_s X'X D_s + Omega^-1
        M = self.xtx * np.outer(s, s) + self.P
        try:
            L = linalg.cholesky(M, lower=True, check_finite=False)
        except linalg.LinAlgError as err:
            raise NumericalSingularity(f"posterior precision factorization failed: {err}") from None
        rhs = s * (self.X.T @ (self.y - self.alpha))
        mean = linalg.cho_solve((L, True), rhs, check_finite=False)
        z = self.rng.standard_normal(self.p)
        noise = linalg.solve_triangular(L, z, lower=True, trans="T", check_finite=False)
        self.b = s * (mean + self.sigma * noise)
        if self.fixed is None:
            self.u = self.b * np.exp(-self.le)
            self.w = self.P @ self.u
            self.q = float(self.u @ self.w)

    def update_intercept(self):
        if not self.use_intercept:
            return
        resid_mean = float(np.mean(self.y - self.X @ self.b))
        self.alpha = resid_mean + self.sigma / math.sqrt(self.n) * self.rng.standard_normal()

    def _rss(self):
        r = self.y - self.alpha - self.X @ self.b
        return float(r @ r)

    def _sigma_target(self, log_sigma, rss, prior_quad):
        sigma = math.exp(log_sigma)
        return (-(self.n + self.p) * log_sigma - (rss + prior_quad) / (2.0 * sigma * sigma)
                + log_half_student_t(sigma, self.prior.sigma_nu, self.prior.sigma_eta) + log_sigma)

    def update_sigma(self, adapt, iteration):
        rss = self._rss()
        prior_quad = self.q * math.exp(-2.0 * self.logG)  # (b / s)' Omega^-1 (b / s)
        cur = math.log(self.sigma)
        f0 = self._sigma_target(cur, rss, prior_quad)
        if not math.isfinite(f0):
            raise NonFiniteTarget("sigma target is not finite at the current state")
        prop = cur + math.exp(self.log_step) * self.rng.standard_normal()
        f1 = self._sigma_target(prop, rss, prior_quad)
        accepted = math.log(self.rng.random()) < f1 - f0
        if accepted:
            self.sigma = math.exp(prop)
        self.sigma_tries += 1
        self.sigma_accepts += int(accepted)
        if adapt:
            self.log_step += (float(accepted) - SIGMA_TARGET_ACCEPT) / (iteration + 1.0) ** 0.6

    # latent moves ---------------------------------------------------------------
    def _dq(self, j, new_le):
        """Change in ``q`` when the effective ``log l_j`` moves to ``new_le``."""
        delta = self.b[j] * math.exp(-new_le) - self.u[j]
        return 2.0 * delta * self.w[j] + delta * delta * self.Pdiag[j]

    def _commit(self, j, new_logl, new_le):
        new_u = self.b[j] * math.exp(-new_le)
        delta = new_u - self.u[j]
        self.q += 2.0 * delta * self.w[j] + delta * delta * self.Pdiag[j]
        self.w += self.P[:, j] * delta
        self.u[j] = new_u
        self.n_clipped += int(new_le != new_logl) - int(self.le[j] != self.logl[j])
        self.logl[j] = new_logl
        self.le[j] = new_le

    def _coef_full(self, logl, logG):
        """Coefficient log density (scale-dependent part) from scratch."""
        le = self._effective(logl, logG)
        u = self.b * np.exp(-le)
        quad = float(u @ self.P @ u)
        return -float(le.sum()) - self.p * logG - quad / (2.0 * self.sigma**2 * math.exp(2.0 * logG))

    def _global_coef(self, logG):
        """Coefficient term when only the shared factor moves.

        Uses the tracked ``q`` unless the floor or ceiling binds at the
        current or the proposed value.
        """
        if (self.n_clipped == 0 and self._lmin + logG >= LOG_FLOOR and self._lmax + logG <= LOG_CEIL):
            return -self._sum_le - self.p * logG - self.q / (2.0 * self.sigma**2 * math.exp(2.0 * logG))
        return self._coef_full(self.logl, logG)

    def _prep_global(self):
        self._lmin = float(self.logl.min())
        self._lmax = float(self.logl.max())
        self._sum_le = float(self.le.sum())

    def _move_global(self, log_prior, to_logG, x0):
        """Slice-update a latent whose only effect is on the shared factor."""
        self._prep_global()

        def f(t):
            return log_prior(t) + self._global_coef(to_logG(t))

        x1, _ = _slice(f, x0, f(x0), self.rng)
        self.logG = to_logG(x1)
        self._sync()
        return x1

    def update_latents(self):
        kind = self.kind
        if kind == PriorKind.HS:
            self._sweep_hs()
        elif kind == PriorKind.RHS:
            self._sweep_rhs()
        elif kind == PriorKind.DL:
            self._sweep_dl()
        elif kind == PriorKind.R2D2:
            self._sweep_r2d2()
        elif kind == PriorKind.BP:
            self._sweep_bp()
        else:
            self._sweep_ng()
        self._refresh()

    def _local_sweep(self, values, log_prior, to_logl, width=SLICE_WIDTH):
        """Slice-update every ``values[j]`` whose only effect is on ``l_j``.

        ``log_prior(x)`` is the latent's log density on the log scale
        (Jacobian included); ``to_logl(j, x)`` maps it to ``log l_j``.
        ``width`` may depend on other latents but not on ``values``.
        """
        logG = self.logG
        c = 2.0 * self.sigma**2 * math.exp(2.0 * logG)

        def eff(nl):
            return min(max(nl + logG, LOG_FLOOR), LOG_CEIL) - logG

        for j in range(self.p):
            def f(x, j=j):
                ne = eff(to_logl(j, x))
                return log_prior(x) - ne - self._dq(j, ne) / c
            x0 = float(values[j])
            x1, _ = _slice(f, x0, f(x0), self.rng, width=width)
            values[j] = x1
            nl = to_logl(j, x1)
            self._commit(j, nl, eff(nl))

    def _sweep_hs(self):
        self._local_sweep(self.loglam, lambda x: x - _softplus(2.0 * x), lambda j, x: x)
        self.logtau = self._move_global(lambda t: t - _softplus(2.0 * t), lambda t: t, self.logtau)

    def _sweep_rhs(self):
        pr = self.prior.params
        z_off = 2.0 * self.logtau - self.logc2
        self._local_sweep(self.lograw, lambda x: x - _softplus(2.0 * x),
                          lambda j, x: x - 0.5 * _softplus(z_off + 2.0 * x))
        log_tau0 = math.log(pr["tau0"])
        shape, scale = pr["slab_df"] / 2.0, pr["slab_df"] * pr["slab_scale"] ** 2 / 2.0

        def f_tau(t):
            return t - _softplus(2.0 * (t - log_tau0)) + self._coef_full(self._rhs_logl(t, self.logc2), t)

        self.logtau, _ = _slice(f_tau, self.logtau, f_tau(self.logtau), self.rng)

        def f_c2(t):
            return -shape * t - scale * math.exp(-t) + self._coef_full(self._rhs_logl(self.logtau, t), self.logtau)

        self.logc2, _ = _slice(f_c2, self.logc2, f_c2(self.logc2), self.rng)

    def _sweep_dl(self):
        pr = self.prior.params
        logT = self.logT
        self._local_sweep(self.logpsi, lambda x: x - 0.5 * math.exp(x),
                          lambda j, x: 0.5 * x + logT[j])
        self._simplex_sweep(pr["a_pi"], lambda j, x: 0.5 * self.logpsi[j] + x,
                            lambda log_sum: self.logtau - log_sum)
        shape, rate = pr["tau_shape"], pr["tau_rate"]
        log_sum = math.log(self.sumT)
        self.logtau = self._move_global(lambda t: shape * t - rate * math.exp(t),
                                        lambda t: t - log_sum, self.logtau)

    def _sweep_r2d2(self):
        pr = self.prior.params
        self._simplex_sweep(pr["a_pi"], lambda j, x: 0.5 * x,
                            lambda log_sum: 0.5 * (self.logw2 - log_sum))
        a1, a2 = pr["a1"], pr["a2"]
        log_sum = math.log(self.sumT)
        self.logw2 = self._move_global(lambda t: a1 * t - (a1 + a2) * _softplus(t),
                                       lambda t: 0.5 * (t - log_sum), self.logw2)

    def _simplex_sweep(self, a, to_logl, to_logG):
        """Slice-update the Gamma variables behind a Dirichlet simplex.

        Moving ``T_j`` changes both ``l_j`` and, through ``sum(T)``, the
        shared factor. The shared factor can push other coordinates onto the
        floor or the ceiling; those always form a prefix or a suffix of the
        other coordinates sorted by ``log l``, so each evaluation touches
        only ``j`` and the clipped ends instead of the whole vector.
        """
        p = self.p
        two_s2 = 2.0 * self.sigma**2
        T, b, P = self.T, self.b, self.P
        total = float(T.sum())
        sum_le = float(self.le.sum())
        # log Gamma(a) variables have a left tail like exp(a x)
        width = max(SLICE_WIDTH, 1.0 / a)
        for j in range(p):
            rest = max(total - T[j], 0.0)
            order = np.argsort(self.logl, kind="stable")
            others = order[order != j].tolist()
            m = len(others)
            srt = self.logl[others].tolist()
            g0 = self.logG
            lo0 = bisect.bisect_left(srt, LOG_FLOOR - g0)
            hi0 = m - bisect.bisect_right(srt, LOG_CEIL - g0)
            logl, le, u, w = self.logl, self.le, self.u, self.w
            q0 = self.q

            def changes(x):
                nl = to_logl(j, x)
                lg = to_logG(math.log(rest + math.exp(x)))
                lo = max(lo0, bisect.bisect_left(srt, LOG_FLOOR - lg))
                hi = max(hi0, m - bisect.bisect_right(srt, LOG_CEIL - lg))
                idx = [j] + (others if lo + hi >= m else others[:lo] + others[m - hi:])
                new_le, du, dle = [], [], 0.0
                for k in idx:
                    lk = nl if k == j else logl[k]
                    e = min(max(lk + lg, LOG_FLOOR), LOG_CEIL) - lg
                    new_le.append(e)
                    dle += e - le[k]
                    du.append(b[k] * math.exp(-e) - u[k])
                if len(idx) == 1:
                    dq = 2.0 * du[0] * w[j] + du[0] * du[0] * self.Pdiag[j]
                else:
                    dv = np.array(du)
                    dq = float(2.0 * dv @ w[idx] + dv @ P[np.ix_(idx, idx)] @ dv)
                return nl, lg, idx, new_le, du, dle, dq

            def f(x):
                _, lg, _, _, _, dle, dq = changes(x)
                return a * x - math.exp(x) - (sum_le + dle) - p * lg - (q0 + dq) / (two_s2 * math.exp(2.0 * lg))

            x0 = float(self.logT[j])
            x1, _ = _slice(f, x0, f(x0), self.rng, width=width)
            nl, lg, idx, new_le, du, dle, dq = changes(x1)
            self.logT[j] = x1
            T[j] = math.exp(x1)
            total = rest + T[j]
            logl[j] = nl
            self.logG = lg
            for k, e, d in zip(idx, new_le, du):
                le[k] = e
                u[k] += d
            w += P[:, idx] @ np.asarray(du)
            self.q = q0 + dq
            sum_le += dle
        self.n_clipped = int(np.count_nonzero(self.le != self.logl))
        self.sumT = float(T.sum())

    def _sweep_bp(self):
        pr = self.prior.params
        alpha, beta = self.bp_alpha, pr["beta"]
        # the left tail of log v decays like exp(alpha x): match the slice width to it
        self._local_sweep(self.logv, lambda x: alpha * x - (alpha + beta) * _softplus(x),
                          lambda j, x: 0.5 * x, width=max(SLICE_WIDTH, 1.0 / alpha))
        s1 = float(self.logv.sum())
        s2 = float(np.logaddexp(0.0, self.logv).sum())
        shape, rate, p = pr["alpha_shape"], pr["alpha_rate"], self.p

        def f(t):
            a = math.exp(t)
            return shape * t - rate * a + a * s1 - a * s2 - p * (math.lgamma(a) + math.lgamma(beta) - math.lgamma(a + beta))

        t, _ = _slice(f, math.log(alpha), f(math.log(alpha)), self.rng, lo=-30.0, hi=math.log(pr["alpha_max"]))
        self.bp_alpha = math.exp(t)

    def _sweep_ng(self):
        pr = self.prior.params
        k, nu = math.exp(self.logk), self.nu
        self._local_sweep(self.logv, lambda x: k * x - (k / nu) * math.exp(x), lambda j, x: 0.5 * x,
                          width=max(SLICE_WIDTH, 1.0 / k))
        p = self.p
        s1 = float(self.logv.sum())
        s3 = float(np.exp(self.logv).sum())

        def f(t):
            kk = math.exp(t)
            return -kk + t + p * (kk * (t - math.log(nu)) - math.lgamma(kk)) + kk * s1 - kk / nu * s3

        self.logk, _ = _slice(f, self.logk, f(self.logk), self.rng, lo=-30.0, hi=30.0)
        k = math.exp(self.logk)
        # nu | v, k is conjugate: InvGamma(nu_shape + p k, M + k sum(v))
        self.nu = (pr["M"] + k * s3) / self.rng.gamma(pr["nu_shape"] + p * k)

    # one iteration --------------------------------------------------------------
    def step(self, adapt, iteration):
        self.update_b()
        self.update_intercept()
        if self.fixed is None:
            self.update_sigma(adapt, iteration)
            self.update_latents()

    def log_lik(self):
        r = self.y - self.alpha - self.X @ self.b
        return -0.5 * LOG_2PI - math.log(self.sigma) - r * r / (2.0 * self.sigma**2)


def _logsumexp(x):
    m = float(np.max(x))
    return m + math.log(float(np.sum(np.exp(x - m))))


def _run_chain(args):
    X, y, omega_inv, prior, seed_seq, config, intercept, fixed = args
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    chain = _Chain(X, y, omega_inv, prior, rng, intercept, fixed)
    total = config.warmup + config.draws * config.thin
    n, p = X.shape
    out = {
        "b": np.empty((config.draws, p)),
        "lam": np.empty((config.draws, p)),
        "tau": np.empty(config.draws),
        "sigma": np.empty(config.draws),
        "intercept": np.empty(config.draws),
        "log_lik": np.empty((config.draws, n)),
    }
    extras = {}
    kept = 0
    for it in range(total):
        chain.step(adapt=it < config.warmup, iteration=it)
        if it >= config.warmup and (it - config.warmup) % config.thin == config.thin - 1:
            lam, tau = chain.public_scales()
            out["b"][kept] = chain.b
            out["lam"][kept] = lam
            out["tau"][kept] = tau
            out["sigma"][kept] = chain.sigma
            out["intercept"][kept] = chain.alpha
            out["log_lik"][kept] = chain.log_lik()
            for key, value in chain.extras().items():
                extras.setdefault(key, np.empty(config.draws))[kept] = value
            kept += 1
    stats = {
        "floor_hits": chain.floor_hits,
        "sigma_acceptance": chain.sigma_accepts / max(chain.sigma_tries, 1),
        "sigma_log_step": chain.log_step,
    }
    return out, extras, stats


def resolve_omega(X, omega):
    """Prior correlation matrix from an :class:`OmegaSpec`, an array or ``None``."""
    if omega is None:
        return np.eye(X.shape[1]), {"mode": "identity"}
    if isinstance(omega, OmegaSpec):
        return build_omega(X, omega), omega.describe()
    return build_omega(X, OmegaSpec("user", omega=np.asarray(omega, float))), {"mode": "user"}


def fit(dataset, prior, omega=None, config=McmcConfig(), *, fixed=None, intercept=True, jobs=1):
    """Sample the posterior of ``(b, intercept, sigma, scales)``.

    Parameters
    ----------
    dataset : RegressionDataset
    prior : PriorSpec
    omega : OmegaSpec, array or None
        Prior correlation of the coefficients; ``None`` means the identity.
        It is built once from ``dataset.X`` and held fixed.
    config : McmcConfig
    fixed : FixedScales, optional
        Clamp the scales and ``sigma``; the sampler then draws ``b`` (and
        the intercept) from their exact conditional.
    intercept : bool
        Whether to fit an intercept (flat prior). The design is centered
        internally, which leaves the model unchanged and decorrelates the
        intercept from ``b``; the stored intercept refers to the raw ``X``.
    jobs : int
        Number of worker processes for the chains. Results do not depend on it.

    Returns
    -------
    PosteriorDraws
    """
    if not isinstance(dataset, RegressionDataset):
        raise InvalidParameter("dataset must be a RegressionDataset")
    if not isinstance(prior, PriorSpec):
        raise InvalidParameter("prior must be a PriorSpec")
    X, y = dataset.X, dataset.y
    n, p = X.shape
    if n < 2:
        raise InvalidParameter("need at least two observations")
    omega_mat, omega_desc = resolve_omega(X, omega)
    omega_inv = linalg.cho_solve(linalg.cho_factor(omega_mat, lower=True), np.eye(p))
    omega_inv = (omega_inv + omega_inv.T) / 2.0
    if fixed is not None:
        lam = np.asarray(fixed.lam, float)
        if lam.shape != (p,) or np.any(lam <= 0) or fixed.tau <= 0 or fixed.sigma <= 0:
            raise InvalidParameter("fixed scales must be positive with lambda of length p")

    x_mean = X.mean(axis=0) if intercept else np.zeros(p)
    Xc = X - x_mean
    seeds = np.random.SeedSequence(config.seed).spawn(config.chains)
    tasks = [(Xc, y, omega_inv, prior, s, config, intercept, fixed) for s in seeds]
    if jobs > 1 and config.chains > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, config.chains, os.cpu_count() or 1)) as pool:
            results = list(pool.map(_run_chain, tasks))
    else:
        results = [_run_chain(t) for t in tasks]

    stack = {key: np.stack([r[0][key] for r in results]) for key in results[0][0]}
    # intercept for the raw design: alpha = alpha_c - mean(X)'b
    stack["intercept"] = stack["intercept"] - stack["b"] @ x_mean
    extras = {key: np.stack([r[1][key] for r in results]) for key in results[0][1]}
    manifest = {
        "tool_version": __version__,
        "data_hash": dataset.content_hash(),
        "prior_kind": prior.kind.value,
        "seed": config.seed,
        "prior": prior.to_dict(),
        "omega": omega_desc,
        "mcmc": asdict(config),
        "intercept": bool(intercept),
        "fixed_scales": fixed is not None,
        "n": n,
        "p": p,
        "scale_floor": [SCALE_FLOOR, SCALE_CEIL],
        "scale_floor_hits": int(sum(r[2]["floor_hits"] for r in results)),
        "sigma_acceptance": [r[2]["sigma_acceptance"] for r in results],
    }
    return PosteriorDraws(stack["b"], stack["lam"], stack["tau"], stack["sigma"], stack["intercept"],
                          stack["log_lik"], extras, manifest)
