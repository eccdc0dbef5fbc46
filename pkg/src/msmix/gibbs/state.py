"""Chain state, configuration, recorded samples and the joint log-density."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy import special

from .. import prior_model as pm
from .. import tree_index as ti
from ..errors import DomainError
from ..generative import Dataset, Params, draw_latents, draw_params, draw_paths, observation_mean
from ..kernel_process import LoadingsState
from ..rng import BLOCK_INIT, substream


@dataclass
class ChainConfig:
    iterations: int = 2000
    burn_in: int | None = None  # defaults to iterations // 2
    thin: int = 1
    seed: int = 0
    adapt: bool = False
    alpha0: float = -1.0
    alpha1: float = -5e-4
    k_init: int | None = None  # defaults to HyperParams.k
    k_min: int = 2
    k_max: int = 12
    fixed_k: bool = False
    warmup: int = 0  # initial sweeps with the path loadings pinned at zero

    def __post_init__(self):
        if self.burn_in is None:
            self.burn_in = self.iterations // 2
        if not self.iterations > self.burn_in >= 0:
            raise DomainError(f"need iterations > burn_in >= 0, got {self.iterations}, {self.burn_in}")
        if not 0 <= self.warmup <= self.burn_in:
            raise DomainError(f"need 0 <= warmup <= burn_in, got {self.warmup}, {self.burn_in}")
        if self.thin < 1:
            raise DomainError(f"thin must be >= 1, got {self.thin}")
        if self.seed < 0:
            raise DomainError("seed must be non-negative")
        if self.alpha1 > 0:
            raise DomainError("alpha1 must be <= 0 so that adaptation fades")
        if not 2 <= self.k_min <= self.k_max:
            raise DomainError(f"need 2 <= k_min <= k_max, got {self.k_min}, {self.k_max}")

    @property
    def adaptive(self) -> bool:
        return self.adapt and not self.fixed_k

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ChainConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


@dataclass
class ChainState:
    params: Params
    rho: np.ndarray  # (n, k) int8
    z: np.ndarray
    z_tilde: np.ndarray
    iteration: int = 0

    @property
    def k(self) -> int:
        return self.rho.shape[1]

    @property
    def loadings(self) -> LoadingsState:
        return self.params.loadings

    def resync(self):
        """Rebuild the loadings from their expanded factors."""
        P, L = self.params, self.params.loadings
        L.Theta = L.phi * P.theta_star
        L.Lambda = L.psi * P.lambda_star
        L.LambdaTilde = L.psi_tilde * P.lambda_tilde_star

    def copy(self) -> "ChainState":
        return ChainState(self.params.copy(), self.rho.copy(), self.z.copy(), self.z_tilde.copy(), self.iteration)


def initial_state(hyper: pm.HyperParams, data: Dataset, seed: int) -> ChainState:
    """Parameters from their priors, paths from the prior given the initial coefficients."""
    rng = substream(seed, 0, BLOCK_INIT)
    params = draw_params(hyper, data.p, rng)
    rho = draw_paths(data.X, params.B, rng)
    z, z_tilde = draw_latents(data.n, hyper.k, rng)
    return ChainState(params, rho, z, z_tilde, 0)


_LOG_HALF = math.log(0.5)


def _log_mixture_scale(x):
    return np.logaddexp(-0.5 * (x - 1.0) ** 2, -0.5 * (x + 1.0) ** 2) + _LOG_HALF - 0.5 * math.log(2 * math.pi)


def _log_normal(x, var):
    return -0.5 * (np.log(2 * math.pi * var) + x * x / var)


def log_joint(state: ChainState, data: Dataset, hyper: pm.HyperParams) -> float:
    """Joint log-density of data, latents and parameters."""
    P, L = state.params, state.params.loadings
    k = state.k
    resid = data.Y - observation_mean(state.rho, state.z, state.z_tilde, L)
    out = float(np.sum(_log_normal(resid, L.varsigma)))
    out += float(np.sum(_log_normal(state.z, 1.0)) + np.sum(_log_normal(state.z_tilde, 1.0)))
    if k > 1:
        eta = data.X @ P.B[1:].T
        sign = np.where(state.rho[:, 1:] == 1, 1.0, -1.0)
        out += float(np.sum(pm.log_probit_cdf(sign * eta)))
        out += float(np.sum(_log_normal(P.B[1:], 1.0)))
    g = L.gamma
    out += float(np.sum(_log_normal(P.theta_star, g)) + np.sum(_log_normal(P.lambda_tilde_star, g))
                 + np.sum(_log_normal(P.lambda_star[:, 1:], g[1:])))
    out += float(np.sum(_log_mixture_scale(L.phi)) + np.sum(_log_mixture_scale(L.psi[:, 1:]))
                 + np.sum(_log_mixture_scale(L.psi_tilde)))
    sh = P.shrinkage
    scale = np.where(sh.spike, hyper.vartheta * hyper.b_gamma, hyper.b_gamma)
    a = hyper.a_gamma
    out += float(np.sum(a * np.log(scale) - special.gammaln(a) - (a + 1) * np.log(g) - scale / g))
    out += float(np.sum(pm.log_stick_weights(sh.nu)[sh.zeta - 1]))
    out += float(np.sum(math.log(hyper.a_nu) + (hyper.a_nu - 1) * np.log1p(-sh.nu)))
    prec = 1.0 / L.varsigma
    out += float(np.sum(hyper.a_sigma * math.log(hyper.b_sigma) - special.gammaln(hyper.a_sigma)
                        + (hyper.a_sigma - 1) * np.log(prec) - hyper.b_sigma * prec))
    return out


@dataclass
class ChainSample:
    """A recorded draw; carries enough state to resume the chain from it."""

    iteration: int
    state: ChainState
    log_density: float
    aligned: bool = True

    @property
    def k(self) -> int:
        return self.state.k

    @property
    def patterns(self) -> list[ti.StopPattern]:
        return ti.decode_rows(self.state.rho)

    def labels(self) -> list[str]:
        return [ti.pattern_to_str(p) for p in self.patterns]
