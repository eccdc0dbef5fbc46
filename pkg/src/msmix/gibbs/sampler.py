"""Sweep orchestration, adaptive truncation and the chain driver."""

from __future__ import annotations

import logging
import math
from typing import Callable, Iterator

import numpy as np

from .. import prior_model as pm
from ..errors import NumericalError
from ..generative import Dataset
from ..rng import (BLOCK_ADAPT, BLOCK_LAMBDA, BLOCK_LATENT, BLOCK_NOISE, BLOCK_PROBIT, BLOCK_RHO,
                   BLOCK_SHRINK, BLOCK_THETA, substream)
from . import updates as up
from .state import ChainConfig, ChainSample, ChainState, initial_state, log_joint

log = logging.getLogger(__name__)


def sweep(state: ChainState, data: Dataset, hyper: pm.HyperParams, seed: int, workers: int = 1,
          paths: bool = True) -> ChainState:
    """One Gibbs iteration: paths, probit coefficients, latents, level scales,
    location loadings, path loadings, noise.

    Each block draws from its own stream ``(seed, iteration, block)``.
    ``paths=False`` pins the path loadings at zero (a warm-up sweep).
    """
    it = state.iteration
    up.update_rho(state, data, substream(seed, it, BLOCK_RHO), workers)
    up.update_probit_coeffs(state, data, substream(seed, it, BLOCK_PROBIT))
    up.update_latents(state, data, substream(seed, it, BLOCK_LATENT), workers)
    up.update_shrinkage(state, hyper, substream(seed, it, BLOCK_SHRINK))
    up.update_loadings(state, data, substream(seed, it, BLOCK_THETA), substream(seed, it, BLOCK_LAMBDA),
                       paths)
    up.update_noise(state, data, hyper, substream(seed, it, BLOCK_NOISE))
    state.iteration = it + 1
    return state


def adapt_probability(iteration: int, alpha0: float, alpha1: float) -> float:
    return min(1.0, math.exp(alpha0 + alpha1 * iteration))


def _drop_level(state: ChainState):
    P, L = state.params, state.loadings
    for obj, names in ((L, ("Theta", "Lambda", "LambdaTilde", "phi", "psi", "psi_tilde")),
                       (P, ("theta_star", "lambda_star", "lambda_tilde_star"))):
        for name in names:
            setattr(obj, name, np.ascontiguousarray(getattr(obj, name)[:, :-1]))
    L.gamma = L.gamma[:-1].copy()
    P.B = P.B[:-1].copy()
    sh = P.shrinkage
    k_new = sh.nu.size - 1
    sh.nu = sh.nu[:-1].copy()
    sh.zeta = np.minimum(sh.zeta[:-1], k_new)
    state.rho = np.ascontiguousarray(state.rho[:, :-1])
    state.z = np.ascontiguousarray(state.z[:, :-1])
    state.z_tilde = np.ascontiguousarray(state.z_tilde[:, :-1])


def _append_level(state: ChainState, hyper: pm.HyperParams, rng: np.random.Generator):
    P, L = state.params, state.loadings
    p, k = L.Theta.shape
    n = state.rho.shape[0]
    sh = P.shrinkage
    sh.nu = np.append(sh.nu, rng.beta(1.0, hyper.a_nu))
    new_zeta = pm.sample_zeta(sh.nu, rng)[-1]
    sh.zeta = np.append(sh.zeta, new_zeta)
    spike = new_zeta <= k
    g = float(pm.sample_inv_gamma(hyper.a_gamma, hyper.vartheta * hyper.b_gamma if spike else hyper.b_gamma, rng))
    L.gamma = np.append(L.gamma, g)
    sd = math.sqrt(g)

    def add(arr, col):
        return np.hstack([arr, col[:, None]])

    L.phi = add(L.phi, pm.sample_mixture_scales(p, rng))
    L.psi = add(L.psi, pm.sample_mixture_scales(p, rng))
    L.psi_tilde = add(L.psi_tilde, pm.sample_mixture_scales(p, rng))
    P.theta_star = add(P.theta_star, sd * rng.standard_normal(p))
    P.lambda_star = add(P.lambda_star, sd * rng.standard_normal(p))
    P.lambda_tilde_star = add(P.lambda_tilde_star, sd * rng.standard_normal(p))
    P.B = np.vstack([P.B, rng.standard_normal(P.B.shape[1])])
    state.rho = np.hstack([state.rho, np.zeros((n, 1), dtype=state.rho.dtype)])
    state.z = add(state.z, rng.standard_normal(n))
    state.z_tilde = add(state.z_tilde, rng.standard_normal(n))
    state.resync()


def adapt_truncation(state: ChainState, iteration: int, config: ChainConfig, hyper: pm.HyperParams,
                     rng: np.random.Generator) -> bool:
    """Possibly drop or append the trailing level; returns whether ``k`` changed.

    With probability ``exp(alpha0 + alpha1 * iteration)``: the trailing level
    is dropped when it is in the spike and no subject's path uses it;
    otherwise a level drawn from the priors is appended. ``k`` stays within
    ``[k_min, k_max]``.
    """
    if rng.random() >= adapt_probability(iteration, config.alpha0, config.alpha1):
        return False
    k = state.k
    sh = state.params.shrinkage
    trailing_spike = sh.zeta[-1] <= k - 1
    occupied = bool(np.any(state.rho[:, -1] == 1))
    if trailing_spike and not occupied:
        if k > config.k_min:
            _drop_level(state)
            return True
        return False
    if k < config.k_max:
        _append_level(state, hyper, rng)
        return True
    return False


def iterate_chain(config: ChainConfig, data: Dataset, hyper: pm.HyperParams, workers: int = 1,
                  state: ChainState | None = None) -> Iterator[ChainSample]:
    """Yield recorded samples (after burn-in, thinned) of a chain.

    When ``state`` is given the chain resumes from it; ``state.iteration``
    counts completed sweeps. The first ``config.warmup`` sweeps keep the path
    loadings at zero, which steers the chain towards location-driven
    partitions before the factor terms switch on; they fall inside burn-in.
    """
    if config.k_init is not None and config.k_init != hyper.k:
        hyper = hyper.replace(k=config.k_init)
    if hyper.d != data.d:
        hyper = hyper.replace(d=data.d)
    if state is None:
        state = initial_state(hyper, data, config.seed)
    while state.iteration < config.iterations:
        sweep(state, data, hyper, config.seed, workers, paths=state.iteration >= config.warmup)
        it = state.iteration  # 1-based count of completed sweeps
        if config.adaptive:
            if adapt_truncation(state, it, config, hyper, substream(config.seed, it, BLOCK_ADAPT)):
                log.debug("iteration %d: truncation now k=%d", it, state.k)
        if it > config.burn_in and (it - config.burn_in) % config.thin == 0:
            lp = log_joint(state, data, hyper.replace(k=state.k))
            if not math.isfinite(lp):
                raise NumericalError(f"non-finite joint log-density at iteration {it}")
            yield ChainSample(it, state.copy(), lp)


def run_chain(config: ChainConfig, data: Dataset, hyper: pm.HyperParams, workers: int = 1,
              state: ChainState | None = None,
              callback: Callable[[ChainSample], None] | None = None) -> list[ChainSample]:
    out = []
    for sample in iterate_chain(config, data, hyper, workers, state):
        if callback is not None:
            callback(sample)
        out.append(sample)
    return out
