"""Simulated regression scenarios.

Rows of ``X`` are i.i.d. ``N(0, Sigma_X)`` with ``Sigma_X`` a parametric
correlation matrix. Nonzero coefficients sit in two blocks, the first and
the last ``block_len`` positions:

``fixed``
    every block entry equals ``b_star``;
``random-diag`` / ``random-ar1``
    each block is drawn from ``N(0, 9 I)`` or from ``N(0, 9 AR1(0.8))`` and
    then every block entry is set to zero with probability
    ``sparsity_prob``.

The intercept is ``N(0, 3)`` (variance 3) and the noise variance is set so
that the population R^2 equals ``r2_target``:
``sigma^2 = b' Sigma_X b (1 - R^2) / R^2``.
"""

import json
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ..corr_structures import StructureSpec, make_structure
from ..data import RegressionDataset
from ..errors import InvalidParameter

COEF_SCHEMES = ("fixed", "random-diag", "random-ar1")
RANDOM_BLOCK_VARIANCE = 9.0
RANDOM_BLOCK_RHO = 0.8


@dataclass(frozen=True)
class ScenarioSpec:
    """One simulation scenario.

    Parameters
    ----------
    n, p : int
        Training sample size and number of predictors.
    structure : str
        Correlation structure of the predictors (see :mod:`dasp.corr_structures`).
    rho : float
    r2_target : float
        Population R^2 in (0, 1).
    coef_scheme : {"fixed", "random-diag", "random-ar1"}
    b_star : float
        Block value for the ``fixed`` scheme.
    sparsity_prob : float
        Zeroing probability for the random schemes.
    block_size : int
        Block size of blocked structures.
    block_len : int
        Length of each of the two coefficient blocks.
    ma_form : str
        Moving-average parametrization, ``"correlation"`` or ``"process"``.
    intercept_var : float
    n_test : int or None
        Size of the held-out set (defaults to ``n``).
    seed : int
    test_seed : int or None
        Separate seed for the held-out set; by default it is derived from ``seed``.
    """

    n: int = 100
    p: int = 50
    structure: str = "bma1"
    rho: float = 0.95
    r2_target: float = 0.8
    coef_scheme: str = "fixed"
    b_star: float = 3.0
    sparsity_prob: float = 0.75
    block_size: int = 5
    block_len: int = 5
    ma_form: str = "process"
    intercept_var: float = 3.0
    n_test: int = None
    seed: int = 0
    test_seed: int = None

    def __post_init__(self):
        if int(self.n) < 2 or int(self.p) < 1:
            raise InvalidParameter("need n >= 2 and p >= 1")
        if not 0.0 < float(self.r2_target) < 1.0:
            raise InvalidParameter(f"r2_target must lie in (0, 1), got {self.r2_target}")
        if self.coef_scheme not in COEF_SCHEMES:
            raise InvalidParameter(f"coef_scheme must be one of {COEF_SCHEMES}")
        if not 0.0 <= float(self.sparsity_prob) <= 1.0:
            raise InvalidParameter("sparsity_prob must lie in [0, 1]")
        if int(self.block_len) < 1:
            raise InvalidParameter("block_len must be positive")
        if self.intercept_var < 0:
            raise InvalidParameter("intercept_var must be nonnegative")
        self.structure_spec()  # validates rho and the kind

    def structure_spec(self):
        return StructureSpec(self.structure, self.rho, block_size=self.block_size, ma_form=self.ma_form)

    def sigma_x(self):
        return make_structure(self.structure_spec(), self.p)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidParameter(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class SimulatedData:
    """Training and held-out datasets drawn from one scenario."""

    train: RegressionDataset
    test: RegressionDataset
    scenario: ScenarioSpec
    degenerate: bool = False
    notes: list = field(default_factory=list)


def block_indices(p, block_len):
    """Positions of the two coefficient blocks (they merge when ``p < 2 block_len``)."""
    first = np.arange(min(block_len, p))
    last = np.arange(max(p - block_len, 0), p)
    return np.union1d(first, last)


def draw_coefficients(scenario, rng):
    p, k = scenario.p, scenario.block_len
    b = np.zeros(p)
    idx = block_indices(p, k)
    if scenario.coef_scheme == "fixed":
        b[idx] = scenario.b_star
        return b
    # each block is drawn separately from N(0, Sigma_b)
    for block in (np.arange(min(k, p)), np.arange(max(p - k, 0), p)):
        m = block.size
        if scenario.coef_scheme == "random-diag":
            cov = RANDOM_BLOCK_VARIANCE * np.eye(m)
        else:
            cov = RANDOM_BLOCK_VARIANCE * make_structure(StructureSpec("ar1", RANDOM_BLOCK_RHO), m)
        b[block] = rng.multivariate_normal(np.zeros(m), cov, method="cholesky")
    keep = rng.random(idx.size) >= scenario.sparsity_prob
    b[idx] = np.where(keep, b[idx], 0.0)
    return b


def _draw_rows(rng, chol, m):
    return rng.standard_normal((m, chol.shape[0])) @ chol.T


def generate(scenario):
    """Draw a training set and an independent held-out set.

    Returns
    -------
    SimulatedData
        ``degenerate`` is set when every coefficient is zero; the noise
        standard deviation is then 1, since R^2 is undefined.
    """
    streams = np.random.SeedSequence(int(scenario.seed)).spawn(3)
    coef_rng, train_rng = (np.random.Generator(np.random.PCG64(s)) for s in streams[:2])
    test_seq = streams[2] if scenario.test_seed is None else np.random.SeedSequence(int(scenario.test_seed))
    test_rng = np.random.Generator(np.random.PCG64(test_seq))

    sigma_x = scenario.sigma_x()
    chol = np.linalg.cholesky(sigma_x)
    b = draw_coefficients(scenario, coef_rng)
    alpha = float(np.sqrt(scenario.intercept_var) * coef_rng.standard_normal())
    signal_var = float(b @ sigma_x @ b)
    notes = []
    degenerate = signal_var == 0.0
    if degenerate:
        sigma = 1.0
        notes.append("all coefficients are zero; R^2 calibration skipped and sigma set to 1")
    else:
        r2 = scenario.r2_target
        sigma = float(np.sqrt(signal_var * (1.0 - r2) / r2))

    def make(rng, m):
        X = _draw_rows(rng, chol, m)
        y = alpha + X @ b + sigma * rng.standard_normal(m)
        return RegressionDataset(X, y, b, alpha, sigma, sigma_x)

    train = make(train_rng, scenario.n)
    test = make(test_rng, scenario.n if scenario.n_test is None else int(scenario.n_test))
    return SimulatedData(train, test, scenario, degenerate, notes)
