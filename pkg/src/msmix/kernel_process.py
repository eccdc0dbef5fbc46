"""Kernel locations and scales, and prior collapse of deep kernels.

Columns of every ``p x k`` matrix are tree levels ``0..k-1``. The column
``Lambda[:, 0]`` is identically zero: the root bit is always 1, so that column
would never be active in the factorized covariance.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import prior_model as pm
from . import tree_index as ti
from .errors import DomainError, TruncationError
from .rng import substream


@dataclass
class LoadingsState:
    Theta: np.ndarray
    Lambda: np.ndarray
    LambdaTilde: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    psi_tilde: np.ndarray
    gamma: np.ndarray
    varsigma: np.ndarray

    def __post_init__(self):
        p, k = self.Theta.shape
        for name in ("Lambda", "LambdaTilde", "phi", "psi", "psi_tilde"):
            if getattr(self, name).shape != (p, k):
                raise DomainError(f"{name} has shape {getattr(self, name).shape}, expected {(p, k)}")
        if self.gamma.shape != (k,) or self.varsigma.shape != (p,):
            raise DomainError("gamma must have length k and varsigma length p")
        if np.any(self.Lambda[:, 0] != 0):
            raise DomainError("Lambda column 0 must be identically zero")
        if np.any(self.gamma < 0) or np.any(self.varsigma <= 0):
            raise DomainError("gamma must be >= 0 and varsigma > 0")

    @property
    def p(self) -> int:
        return self.Theta.shape[0]

    @property
    def k(self) -> int:
        return self.Theta.shape[1]


def _check_level(s: int, k: int):
    if s < 0:
        raise DomainError(f"negative level {s}")
    if s >= k:
        raise TruncationError(f"level {s} needs k > {s}, got k={k}")


def mu_node(s: int | None, h: int, Theta: np.ndarray, amended: bool = False) -> np.ndarray:
    """Location of node ``(s, h)``; ``s=None`` is the background (zero)."""
    Theta = np.asarray(Theta, dtype=float)
    if s is None:
        return np.zeros(Theta.shape[0])
    _check_level(s, Theta.shape[1])
    bits = ti.tau_bits(s, h, amended)
    return Theta[:, s] + Theta[:, :s] @ bits


def sigma_infty(Lambda, LambdaTilde, varsigma) -> np.ndarray:
    """Scale of the background kernel."""
    return LambdaTilde @ LambdaTilde.T + Lambda @ Lambda.T + np.diag(varsigma)


def sigma_from_bits(s: int, bits: Sequence[int], Lambda, LambdaTilde, varsigma) -> np.ndarray:
    """Node scale from explicit selection bits ``bits[t]``, ``t < s``."""
    _check_level(s, Lambda.shape[1])
    bits = np.asarray(bits, dtype=float)
    if bits.shape != (s,):
        raise DomainError(f"need {s} selection bits, got {bits.shape}")
    out = sigma_infty(Lambda, LambdaTilde, varsigma)
    Lt, L = LambdaTilde[:, :s], Lambda[:, :s]
    out -= (Lt * (1.0 - bits)) @ Lt.T
    out -= (L * bits) @ L.T
    out -= np.outer(Lambda[:, s], Lambda[:, s])
    return out


def sigma_node(s: int | None, h: int, Lambda, LambdaTilde, varsigma, amended: bool = False) -> np.ndarray:
    """Scale of node ``(s, h)`` by successive subtraction; ``s=None`` is the background."""
    if s is None:
        return sigma_infty(Lambda, LambdaTilde, varsigma)
    _check_level(s, Lambda.shape[1])
    return sigma_from_bits(s, ti.tau_bits(s, h, amended), Lambda, LambdaTilde, varsigma)


def mu_from_rho(rho, Theta) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape[-1] != Theta.shape[1]:
        raise DomainError(f"path length {rho.shape[-1]} != number of columns {Theta.shape[1]}")
    return rho @ Theta.T if rho.ndim > 1 else Theta @ rho


def cov_from_rho(rho, Lambda, LambdaTilde, varsigma) -> np.ndarray:
    """Marginal covariance ``Lt diag(rho~) Lt' + L diag(1-rho) L' + diag(varsigma)``."""
    rho = np.asarray(rho)
    if rho.ndim != 1 or rho.size != Lambda.shape[1]:
        raise DomainError(f"path length {rho.shape} does not match k={Lambda.shape[1]}")
    if rho[0] != 1:
        raise ti.InvalidPathError("path vector must start with 1")
    rt = ti.rho_tilde(rho).astype(float)
    return (LambdaTilde * rt) @ LambdaTilde.T + (Lambda * (1.0 - rho)) @ Lambda.T + np.diag(varsigma)


def spectral_norm_sym(a: np.ndarray) -> np.ndarray:
    """Spectral norm of symmetric matrices stacked on the leading axes."""
    return np.max(np.abs(np.linalg.eigvalsh(a)), axis=-1)


@dataclass
class CollapseEstimate:
    p_mu: float
    p_sigma: float
    se_mu: float
    se_sigma: float
    draws: int


_BLOCK = 1000


def _collapse_block(rho_c, rho_a, schedule, p, k, size, zeta_mu, zeta_sigma, rng):
    gamma = schedule.sample(size, k, rng)  # (size, k)
    sd = np.sqrt(gamma)[:, None, :]
    phi = pm.sample_mixture_scales((size, p, k), rng)
    psi = pm.sample_mixture_scales((size, p, k), rng)
    psi_t = pm.sample_mixture_scales((size, p, k), rng)
    psi[:, :, 0] = 0.0
    Theta = phi * sd * rng.standard_normal((size, p, k))
    Lam = psi * sd * rng.standard_normal((size, p, k))
    LamT = psi_t * sd * rng.standard_normal((size, p, k))

    dmu = Theta @ (rho_c - rho_a).astype(float)
    dt = (ti.rho_tilde(rho_a) - ti.rho_tilde(rho_c)).astype(float)
    dl = (rho_c - rho_a).astype(float)
    dsig = np.einsum("npk,k,nqk->npq", LamT, dt, LamT) + np.einsum("npk,k,nqk->npq", Lam, dl, Lam)
    hit_mu = np.linalg.norm(dmu, axis=1) < zeta_mu
    hit_sigma = spectral_norm_sym(dsig) < zeta_sigma
    return int(hit_mu.sum()), int(hit_sigma.sum())


def collapse_probability(child: Sequence[int], ancestor: Sequence[int], prior, draws: int,
                         zeta_mu: float, zeta_sigma: float, p: int, seed: int = 0,
                         workers: int = 1) -> CollapseEstimate:
    """Monte Carlo estimate of the prior probabilities that ``child`` collapses on ``ancestor``.

    Returns ``pr(||mu_child - mu_anc|| < zeta_mu)`` and
    ``pr(||sigma_anc - sigma_child||_2 < zeta_sigma)`` with binomial standard
    errors. Draws are split into blocks of 1000, each with its own stream
    ``(seed, block)``, so the estimate does not depend on ``workers``.
    """
    child = tuple(child)
    ancestor = tuple(ancestor)
    if not child or ancestor not in set(ti.ancestors(child)):
        raise DomainError(f"{ti.pattern_to_str(ancestor)!r} is not an ancestor of {ti.pattern_to_str(child)!r}")
    if draws < 1000:
        warnings.warn(f"only {draws} draws; collapse estimates will be imprecise", stacklevel=2)
    k = len(child) + 1
    rho_c, rho_a = ti.encode_node(child, k), ti.encode_node(ancestor, k)
    if math.isinf(zeta_mu) and math.isinf(zeta_sigma):
        return CollapseEstimate(1.0, 1.0, 0.0, 0.0, draws)

    sizes = [min(_BLOCK, draws - b) for b in range(0, draws, _BLOCK)]

    def run(b):
        return _collapse_block(rho_c, rho_a, prior, p, k, sizes[b], zeta_mu, zeta_sigma, substream(seed, b))

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            counts = list(ex.map(run, range(len(sizes))))
    else:
        counts = [run(b) for b in range(len(sizes))]
    n_mu = sum(c[0] for c in counts)
    n_sig = sum(c[1] for c in counts)
    p_mu, p_sig = n_mu / draws, n_sig / draws
    return CollapseEstimate(p_mu, p_sig, math.sqrt(p_mu * (1 - p_mu) / draws),
                            math.sqrt(p_sig * (1 - p_sig) / draws), draws)


@dataclass
class TruncationSuggestion:
    level: int
    found: bool
    levels: list[int] = field(default_factory=list)
    p_mu: list[float] = field(default_factory=list)
    p_sigma: list[float] = field(default_factory=list)
    se_mu: list[float] = field(default_factory=list)
    se_sigma: list[float] = field(default_factory=list)
    tail_mean: float = 0.0


def check_summable(prior, max_k: int, rtol: float = 1e-3) -> float:
    """Reject level-scale schedules whose expected values are not summable.

    The check is numerical: the last expected scale up to ``max_k`` must be
    negligible (``<= rtol``) relative to the partial sum. Returns that ratio.
    """
    means = np.asarray(prior.mean(max_k), dtype=float)
    if not np.all(np.isfinite(means)):
        raise DomainError("expected level scales are infinite (inverse-gamma shape <= 1)")
    total = means.sum()
    if total == 0:
        return 0.0
    ratio = float(means[-1] / total)
    if ratio > rtol:
        raise DomainError(
            f"expected level scales do not look summable: last term is {ratio:.3g} of the "
            f"partial sum over {max_k} levels (tolerance {rtol})"
        )
    return ratio


def suggest_truncation(prior, zeta_mu: float, zeta_sigma: float, xi_mu: float = 0.95,
                       xi_sigma: float = 0.95, max_k: int = 20, p: int = 5,
                       draws: int = 10_000, seed: int = 0, workers: int = 1) -> TruncationSuggestion:
    """Smallest level ``L`` beyond which every probed kernel collapses on its parent.

    At each level ``s`` the probed node is the right-most one, ``(1,)*s``, whose
    parent sits one level up; every such child/parent pair shares the same
    collapse law (the location gap is ``theta_s`` and the scale gap
    ``lambda_s lambda_s'``).
    """
    tail = check_summable(prior, max_k)
    out = TruncationSuggestion(level=max_k, found=False, tail_mean=tail)
    ok = []
    for s in range(1, max_k):
        child = (1,) * s
        est = collapse_probability(child, ti.parent(child), prior, draws, zeta_mu, zeta_sigma,
                                   p, seed=seed + s, workers=workers)
        out.levels.append(s)
        out.p_mu.append(est.p_mu)
        out.p_sigma.append(est.p_sigma)
        out.se_mu.append(est.se_mu)
        out.se_sigma.append(est.se_sigma)
        ok.append(est.p_mu > xi_mu and est.p_sigma > xi_sigma)
    # smallest L with every probed level s > L collapsing
    L = max_k
    for idx in range(len(ok) - 1, -1, -1):
        if not ok[idx]:
            break
        L = out.levels[idx] - 1
    if ok and ok[-1]:
        out.level, out.found = max(L, 0), True
    else:
        warnings.warn(f"no collapse level found up to max_k={max_k}", stacklevel=2)
    return out
