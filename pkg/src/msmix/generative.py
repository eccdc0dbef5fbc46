"""Forward simulation from the prior and of data given parameters."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import prior_model as pm
from . import tree_index as ti
from .errors import DomainError
from .kernel_process import LoadingsState
from .rng import substream


@dataclass
class Dataset:
    Y: np.ndarray  # (n, p)
    X: np.ndarray  # (n, d)

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=float)
        self.X = np.asarray(self.X, dtype=float)
        if self.Y.ndim != 2 or self.X.ndim != 2:
            raise DomainError("Y and X must be 2-d")
        if self.Y.shape[0] != self.X.shape[0]:
            raise DomainError(f"Y has {self.Y.shape[0]} rows but X has {self.X.shape[0]}")
        if not (np.all(np.isfinite(self.Y)) and np.all(np.isfinite(self.X))):
            raise DomainError("dataset contains missing or non-finite values")

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def p(self) -> int:
        return self.Y.shape[1]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass
class Params:
    """Every model parameter, including the expanded loadings.

    ``Theta == phi * theta_star`` and likewise for the two path matrices.
    """

    loadings: LoadingsState
    theta_star: np.ndarray
    lambda_star: np.ndarray
    lambda_tilde_star: np.ndarray
    B: np.ndarray  # (k, d)
    shrinkage: pm.ShrinkageState

    def copy(self) -> "Params":
        L = self.loadings
        return Params(
            LoadingsState(*(np.array(getattr(L, f)) for f in
                            ("Theta", "Lambda", "LambdaTilde", "phi", "psi", "psi_tilde", "gamma", "varsigma"))),
            self.theta_star.copy(), self.lambda_star.copy(), self.lambda_tilde_star.copy(),
            self.B.copy(), self.shrinkage.copy(),
        )


@dataclass
class GroundTruth:
    params: Params
    rho: np.ndarray  # (n, k)
    z: np.ndarray  # (n, k)
    z_tilde: np.ndarray  # (n, k)

    @property
    def patterns(self) -> list[ti.StopPattern]:
        return ti.decode_rows(self.rho)


def draw_params(hyper: pm.HyperParams, p: int, rng: np.random.Generator) -> Params:
    """One draw of every parameter from its prior."""
    k = hyper.k
    shrink, gamma = pm.sample_gamma_sequence(hyper, rng)
    phi, psi, psi_t = pm.sample_local_scales(p, k, rng)
    sd = np.sqrt(gamma)
    theta_star = rng.standard_normal((p, k)) * sd
    lambda_star = rng.standard_normal((p, k)) * sd
    lambda_tilde_star = rng.standard_normal((p, k)) * sd
    lambda_star[:, 0] = 0.0
    B = pm.sample_probit_coeffs(hyper, rng)
    varsigma = pm.sample_noise_precisions(hyper, p, rng)
    loadings = LoadingsState(phi * theta_star, psi * lambda_star, psi_t * lambda_tilde_star,
                             phi, psi, psi_t, gamma, varsigma)
    return Params(loadings, theta_star, lambda_star, lambda_tilde_star, B, shrink)


def simulate_params(hyper: pm.HyperParams, p: int, seed: int) -> Params:
    return draw_params(hyper, p, substream(seed, 0))


def draw_paths(X: np.ndarray, B: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Path vectors with ``rho[:, s] ~ Bernoulli(Phi(x' B[s]))`` for ``s >= 1``."""
    X = np.asarray(X, dtype=float)
    if X.shape[1] != B.shape[1]:
        raise DomainError(f"X has {X.shape[1]} columns but B has {B.shape[1]}")
    n, k = X.shape[0], B.shape[0]
    prob = pm.probit_cdf(X @ B[1:].T)  # (n, k-1)
    rho = np.ones((n, k), dtype=np.int8)
    rho[:, 1:] = rng.random((n, k - 1)) < prob
    return rho


def simulate_paths(X, B, seed: int) -> np.ndarray:
    return draw_paths(X, B, substream(seed, 1))


def observation_mean(rho, z, z_tilde, loadings: LoadingsState) -> np.ndarray:
    """``Theta rho + Lt (rho~ * z~) + L ((1 - rho) * z)`` row-wise."""
    rho_f = np.asarray(rho, dtype=float)
    eta_t = ti.rho_tilde(np.asarray(rho)).astype(float) * z_tilde
    eta = (1.0 - rho_f) * z
    return rho_f @ loadings.Theta.T + eta_t @ loadings.LambdaTilde.T + eta @ loadings.Lambda.T


def draw_latents(n: int, k: int, rng: np.random.Generator):
    z = rng.standard_normal((n, k))
    z_tilde = rng.standard_normal((n, k))
    return z, z_tilde


def draw_observations(rho, z, z_tilde, loadings: LoadingsState, rng: np.random.Generator) -> np.ndarray:
    mean = observation_mean(rho, z, z_tilde, loadings)
    return mean + rng.standard_normal(mean.shape) * np.sqrt(loadings.varsigma)


def simulate_observations(rho, loadings: LoadingsState, seed: int):
    """``(Y, z, z_tilde)`` given paths and loadings."""
    rng = substream(seed, 2)
    rho = np.asarray(rho)
    z, z_tilde = draw_latents(rho.shape[0], rho.shape[1], rng)
    Y = draw_observations(rho, z, z_tilde, loadings, rng)
    return Y, z, z_tilde


def make_covariates(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Intercept column followed by iid standard normal covariates."""
    X = np.ones((n, d))
    if d > 1:
        X[:, 1:] = rng.standard_normal((n, d - 1))
    return X


def simulate_dataset(hyper: pm.HyperParams, n: int, p: int, d: int, seed: int):
    """Complete synthetic dataset and its ground truth."""
    if min(n, p, d) < 1:
        raise DomainError("n, p and d must all be >= 1")
    if hyper.d != d:
        hyper = hyper.replace(d=d)
    params = simulate_params(hyper, p, seed)
    X = make_covariates(n, d, substream(seed, 3))
    rho = simulate_paths(X, params.B, seed)
    Y, z, z_tilde = simulate_observations(rho, params.loadings, seed)
    return Dataset(Y, X), GroundTruth(params, rho, z, z_tilde)
