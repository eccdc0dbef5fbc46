"""Conditional updates of one Gibbs sweep.

Every update draws all of its random numbers up front from the generator it
is given, in a fixed order, before any arithmetic is split across worker
threads. Results therefore do not depend on the worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import special

from .. import prior_model as pm
from .. import tree_index as ti
from ..errors import NumericalError
from ..generative import Dataset, observation_mean
from .state import ChainState


def _chunks(n: int, workers: int) -> list[slice]:
    workers = max(1, min(workers, n))
    bounds = np.linspace(0, n, workers + 1).astype(int)
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _run_chunked(fn, n: int, workers: int):
    parts = _chunks(n, workers)
    if len(parts) <= 1:
        for sl in parts:
            fn(sl)
        return
    with ThreadPoolExecutor(len(parts)) as ex:
        list(ex.map(fn, parts))


# -- step 1: paths -------------------------------------------------------------

def rho_log_odds(y, x, rho, z, z_tilde, s: int, params) -> np.ndarray:
    """Log-odds of ``rho[:, s] = 1`` given everything else, for a block of subjects."""
    L = params.loadings
    eta = x @ params.B[s]
    prior = pm.log_probit_cdf(eta) - pm.log_probit_cdf(-eta)
    r1 = rho.copy()
    r1[:, s] = 1
    r0 = rho.copy()
    r0[:, s] = 0
    m1 = observation_mean(r1, z, z_tilde, L)
    m0 = observation_mean(r0, z, z_tilde, L)
    lik = -0.5 * np.sum(((y - m1) ** 2 - (y - m0) ** 2) / L.varsigma, axis=1)
    return prior + lik


def update_rho(state: ChainState, data: Dataset, rng: np.random.Generator, workers: int = 1) -> ChainState:
    """Draw each path bit from its Bernoulli full conditional, level by level."""
    n, k = state.rho.shape
    if n == 0 or k < 2:
        return state
    thresholds = special.logit(rng.random((n, k - 1)))

    def work(sl):
        rho = state.rho[sl]
        for s in range(1, k):
            lo = rho_log_odds(data.Y[sl], data.X[sl], rho, state.z[sl], state.z_tilde[sl], s, state.params)
            rho[:, s] = thresholds[sl, s - 1] < lo

    _run_chunked(work, n, workers)
    return state


# -- step 2: probit coefficients -----------------------------------------------

def sample_truncated_utilities(eta: np.ndarray, positive: np.ndarray, u: np.ndarray) -> np.ndarray:
    """``N(eta, 1)`` draws truncated to ``(0, inf)`` where ``positive``, else ``(-inf, 0)``.

    ``u`` holds the uniforms; inversion is done in log space so extreme
    ``eta`` does not underflow.
    """
    log_u = np.log(u)
    upper = -special.ndtri_exp(log_u + special.log_ndtr(eta))  # x > -eta
    lower = special.ndtri_exp(log_u + special.log_ndtr(-eta))  # x < -eta
    return eta + np.where(positive, upper, lower)


def update_probit_coeffs(state: ChainState, data: Dataset, rng: np.random.Generator) -> ChainState:
    """Latent-utility data augmentation for each level's probit regression.

    Draws utilities given the current coefficients, then coefficients given
    the utilities from their Gaussian conditional. The pair leaves the exact
    probit posterior of ``B[s]`` given ``rho[:, s]`` invariant.
    """
    n, k = state.rho.shape
    if k < 2:
        return state
    d = data.d
    X = data.X
    eta = X @ state.params.B[1:].T  # (n, k-1)
    u = rng.random((n, k - 1))
    eps = rng.standard_normal((d, k - 1))
    util = sample_truncated_utilities(eta, state.rho[:, 1:] == 1, u) if n else np.zeros((0, k - 1))
    prec = np.eye(d) + X.T @ X
    chol = np.linalg.cholesky(prec)
    mean = np.linalg.solve(prec, X.T @ util)
    draw = mean + np.linalg.solve(chol.T, eps)
    state.params.B[1:] = draw.T
    return state


# -- step 3: latent factors ----------------------------------------------------

def latent_design(rho: np.ndarray, Lambda: np.ndarray, LambdaTilde: np.ndarray) -> np.ndarray:
    """``A_i = [Lambda diag(1 - rho_i), Lt diag(rho~_i)]`` stacked as ``(n, p, 2k)``."""
    rho_f = rho.astype(float)
    rt = ti.rho_tilde(rho).astype(float)
    a_z = Lambda[None, :, :] * (1.0 - rho_f)[:, None, :]
    a_zt = LambdaTilde[None, :, :] * rt[:, None, :]
    return np.concatenate([a_z, a_zt], axis=2)


def update_latents(state: ChainState, data: Dataset, rng: np.random.Generator, workers: int = 1) -> ChainState:
    """Joint Gaussian draw of ``(z_i, z~_i)`` for every subject."""
    n, k = state.rho.shape
    if n == 0:
        return state
    L = state.loadings
    eps = rng.standard_normal((n, 2 * k))
    inv_var = 1.0 / L.varsigma

    def work(sl):
        A = latent_design(state.rho[sl], L.Lambda, L.LambdaTilde)
        resid = data.Y[sl] - state.rho[sl].astype(float) @ L.Theta.T
        At = np.swapaxes(A, 1, 2) * inv_var  # (m, 2k, p)
        prec = At @ A + np.eye(2 * k)
        rhs = np.einsum("mkp,mp->mk", At, resid)
        try:
            chol = np.linalg.cholesky(prec)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"latent precision not positive definite: {exc}") from exc
        mean = np.linalg.solve(prec, rhs[..., None])[..., 0]
        noise = np.linalg.solve(np.swapaxes(chol, 1, 2), eps[sl][..., None])[..., 0]
        draw = mean + noise
        state.z[sl] = draw[:, :k]
        state.z_tilde[sl] = draw[:, k:]

    _run_chunked(work, n, workers)
    return state


# -- step 4: level scales ------------------------------------------------------

def level_sums(state: ChainState):
    """Per level: sum of squared scaled loadings and how many values enter it."""
    P = state.params
    x2 = (np.sum(P.theta_star**2, axis=0) + np.sum(P.lambda_tilde_star**2, axis=0)
          + np.sum(P.lambda_star**2, axis=0))
    p, k = P.theta_star.shape
    counts = np.full(k, 3 * p)
    counts[0] = 2 * p  # lambda*_0 is pinned at zero
    return x2, counts


def gamma_conditional(x2: float, count: int, spike: bool, hyper: pm.HyperParams) -> tuple[float, float]:
    """Shape and rate of the gamma full conditional of ``1 / gamma_s``."""
    b = hyper.vartheta * hyper.b_gamma if spike else hyper.b_gamma
    return hyper.a_gamma + 0.5 * count, b + 0.5 * x2


def update_shrinkage(state: ChainState, hyper: pm.HyperParams, rng: np.random.Generator) -> ChainState:
    """Indicators, stick-breaking variables, then level scales."""
    sh = state.params.shrinkage
    k = state.k
    x2, counts = level_sums(state)
    u_zeta = rng.random(k)
    log_w = pm.log_stick_weights(sh.nu)
    t = np.arange(1, k + 1)
    for s in range(k):
        slab = pm.log_inv_gamma_marginal(x2[s], counts[s], hyper.a_gamma, hyper.b_gamma)
        spike = pm.log_inv_gamma_marginal(x2[s], counts[s], hyper.a_gamma, hyper.vartheta * hyper.b_gamma)
        logp = log_w + np.where(t <= s, spike, slab)
        prob = np.exp(logp - logp.max())
        cdf = np.cumsum(prob)
        sh.zeta[s] = min(int(np.searchsorted(cdf, u_zeta[s] * cdf[-1], side="right")), k - 1) + 1

    a = 1.0 + np.array([np.sum(sh.zeta == j) for j in t[:-1]])
    b = hyper.a_nu + np.array([np.sum(sh.zeta > j) for j in t[:-1]])
    nu = np.empty(k)
    nu[:-1] = rng.beta(a, b)
    nu[-1] = rng.beta(1.0, hyper.a_nu)  # does not enter the truncated indicator law
    # keep nu strictly inside (0, 1) so log weights stay finite
    sh.nu = np.clip(nu, 1e-12, 1 - 1e-12)

    spike_mask = sh.spike
    shape = hyper.a_gamma + 0.5 * counts
    rate = np.where(spike_mask, hyper.vartheta * hyper.b_gamma, hyper.b_gamma) + 0.5 * x2
    state.loadings.gamma = 1.0 / rng.gamma(shape, 1.0 / rate)
    return state


# -- steps 5 and 6: expanded loadings -------------------------------------------

def _update_block(resid, Z, star, scale, gamma, varsigma, free, rng):
    """Update ``star`` rows then ``scale`` entries of one loadings block in place.

    The block contributes ``Z @ (scale * star).T`` to the fit; ``resid`` is the
    data minus every other contribution. Columns outside ``free`` stay fixed.
    """
    p, k = star.shape
    cols = np.flatnonzero(free)
    m = cols.size
    if m == 0:
        return
    Zc = Z[:, cols]
    ztz = Zc.T @ Zc
    ztr = Zc.T @ resid  # (m, p)
    eps_star = rng.standard_normal((p, m))
    u_comp = rng.random((m, p))
    eps_scale = rng.standard_normal((m, p))

    sc = scale[:, cols]
    inv_var = 1.0 / varsigma
    prec = (sc[:, :, None] * ztz[None] * sc[:, None, :]) * inv_var[:, None, None]
    prec[:, np.arange(m), np.arange(m)] += 1.0 / gamma[cols]
    rhs = sc * ztr.T * inv_var[:, None]
    chol = np.linalg.cholesky(prec)
    mean = np.linalg.solve(prec, rhs[..., None])[..., 0]
    star[:, cols] = mean + np.linalg.solve(np.swapaxes(chol, 1, 2), eps_star[..., None])[..., 0]

    # scale entries one column at a time; rows are conditionally independent
    coef = scale * star
    fit = Z @ coef.T
    znorm = np.sum(Z * Z, axis=0)
    for idx, s in enumerate(cols):
        partial = resid - fit + np.outer(Z[:, s], coef[:, s])
        a = star[:, s] ** 2 * znorm[s] * inv_var
        b = star[:, s] * (Z[:, s] @ partial) * inv_var
        post_prec = 1.0 + a
        log_wp = (1.0 + b) ** 2 / (2 * post_prec)
        log_wm = (-1.0 + b) ** 2 / (2 * post_prec)
        p_plus = special.expit(log_wp - log_wm)
        centre = np.where(u_comp[idx] < p_plus, 1.0, -1.0)
        new = (centre + b) / post_prec + eps_scale[idx] / np.sqrt(post_prec)
        fit += np.outer(Z[:, s], star[:, s] * (new - scale[:, s]))
        scale[:, s] = new
        coef[:, s] = new * star[:, s]


def block_designs(state: ChainState):
    rho_f = state.rho.astype(float)
    eta = (1.0 - rho_f) * state.z
    eta_t = ti.rho_tilde(state.rho).astype(float) * state.z_tilde
    return rho_f, eta, eta_t


def update_loadings(state: ChainState, data: Dataset, rng_theta: np.random.Generator,
                    rng_lambda: np.random.Generator, paths: bool = True) -> ChainState:
    """Location block, then the two path blocks, via the expanded parameterisation.

    With ``paths=False`` the path loadings are pinned at zero instead, so all
    structure must be carried by the locations (used for warm-up sweeps).
    """
    P, L = state.params, state.loadings
    k = state.k
    if not paths:
        P.lambda_star[:] = 0.0
        P.lambda_tilde_star[:] = 0.0
        state.resync()
    rho_f, eta, eta_t = block_designs(state)
    all_cols = np.ones(k, dtype=bool)

    resid = data.Y - eta_t @ L.LambdaTilde.T - eta @ L.Lambda.T
    _update_block(resid, rho_f, P.theta_star, L.phi, L.gamma, L.varsigma, all_cols, rng_theta)
    state.resync()
    if not paths:
        return state

    free = all_cols.copy()
    free[0] = False
    resid = data.Y - rho_f @ L.Theta.T - eta_t @ L.LambdaTilde.T
    _update_block(resid, eta, P.lambda_star, L.psi, L.gamma, L.varsigma, free, rng_lambda)
    state.resync()
    resid = data.Y - rho_f @ L.Theta.T - eta @ L.Lambda.T
    _update_block(resid, eta_t, P.lambda_tilde_star, L.psi_tilde, L.gamma, L.varsigma, all_cols, rng_lambda)
    state.resync()
    return state


# -- step 7: noise ---------------------------------------------------------------

def noise_conditional(resid: np.ndarray, hyper: pm.HyperParams):
    """Shape and rate vectors of the gamma conditional of each precision."""
    n = resid.shape[0]
    return hyper.a_sigma + 0.5 * n, hyper.b_sigma + 0.5 * np.sum(resid**2, axis=0)


def update_noise(state: ChainState, data: Dataset, hyper: pm.HyperParams, rng: np.random.Generator) -> ChainState:
    L = state.loadings
    resid = data.Y - observation_mean(state.rho, state.z, state.z_tilde, L)
    shape, rate = noise_conditional(resid, hyper)
    L.varsigma = 1.0 / rng.gamma(shape, 1.0 / rate)
    return state
