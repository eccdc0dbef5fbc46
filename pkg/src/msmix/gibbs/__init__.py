"""Gibbs sampler for the factorized multiscale mixture."""

from .alignment import align_samples, best_permutation, permute_levels
from .sampler import adapt_truncation, iterate_chain, run_chain, sweep
from .state import ChainConfig, ChainSample, ChainState, initial_state, log_joint
from .updates import (update_latents, update_loadings, update_noise, update_probit_coeffs, update_rho,
                      update_shrinkage)

__all__ = [
    "ChainConfig", "ChainSample", "ChainState", "adapt_truncation", "align_samples", "best_permutation",
    "initial_state", "iterate_chain", "log_joint", "permute_levels", "run_chain", "sweep",
    "update_latents", "update_loadings", "update_noise", "update_probit_coeffs", "update_rho",
    "update_shrinkage",
]
