"""Posterior sampling and convergence diagnostics."""

from .diagnostics import DegenerateChainWarning, ess, ess_basic, ess_bulk, rhat, stuck_chains, summarize
from .gibbs import FixedScales, McmcConfig, PosteriorDraws, fit, resolve_omega

__all__ = [
    "DegenerateChainWarning", "FixedScales", "McmcConfig", "PosteriorDraws",
    "ess", "ess_basic", "ess_bulk", "fit", "resolve_omega", "rhat", "stuck_chains", "summarize",
]
