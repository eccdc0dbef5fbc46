"""Getting-it-right check of the Gibbs sampler against the prior.

The marginal-conditional simulator draws parameters, latents and data
independently from the model. The successive-conditional simulator alternates
one Gibbs sweep with a fresh draw of the data given the current parameters.
Both target the same joint law, so monitored statistics must agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import prior_model as pm
from .generative import Dataset, draw_latents, draw_observations, draw_params, draw_paths
from .gibbs.sampler import sweep
from .gibbs.state import ChainState
from .rng import BLOCK_GEWEKE_DATA, substream

STAT_NAMES = (
    "log_gamma_1", "log_gamma_2", "B_1", "B_2", "log_sigma2_1", "Theta_00", "Theta_01", "Theta_01_sq",
    "Lambda_01", "LambdaTilde_00", "occupancy_1", "nu_1", "n_active", "mean_Y",
)


def statistics(state: ChainState, Y: np.ndarray) -> np.ndarray:
    P, L = state.params, state.loadings
    return np.array([
        math.log(L.gamma[1]), math.log(L.gamma[2]), P.B[1, 0], P.B[2, 0], math.log(L.varsigma[0]),
        L.Theta[0, 0], L.Theta[0, 1], L.Theta[0, 1] ** 2, L.Lambda[0, 1], L.LambdaTilde[0, 0],
        float(state.rho[:, 1].mean()), P.shrinkage.nu[0], float(P.shrinkage.n_active()), float(Y.mean()),
    ])


def _prior_draw(hyper, X, p, rng):
    params = draw_params(hyper, p, rng)
    rho = draw_paths(X, params.B, rng)
    z, zt = draw_latents(X.shape[0], hyper.k, rng)
    state = ChainState(params, rho, z, zt)
    Y = draw_observations(rho, z, zt, params.loadings, rng)
    return state, Y


def marginal_conditional(hyper: pm.HyperParams, n: int, p: int, draws: int, seed: int) -> np.ndarray:
    X = np.ones((n, hyper.d))
    rng = substream(seed, 1)
    return np.array([statistics(*_prior_draw(hyper, X, p, rng)) for _ in range(draws)])


def successive_conditional(hyper: pm.HyperParams, n: int, p: int, iterations: int, seed: int) -> np.ndarray:
    X = np.ones((n, hyper.d))
    state, Y = _prior_draw(hyper, X, p, substream(seed, 2))
    out = np.empty((iterations, len(STAT_NAMES)))
    for it in range(iterations):
        sweep(state, Dataset(Y, X), hyper, seed)
        Y = draw_observations(state.rho, state.z, state.z_tilde, state.loadings,
                              substream(seed, it, BLOCK_GEWEKE_DATA))
        out[it] = statistics(state, Y)
    return out


def batch_means_se(x: np.ndarray, batches: int = 50) -> np.ndarray:
    """Standard error of column means via non-overlapping batch means."""
    m = x.shape[0] // batches
    means = x[: m * batches].reshape(batches, m, -1).mean(axis=1)
    return means.std(axis=0, ddof=1) / math.sqrt(batches)


@dataclass
class GewekeResult:
    names: tuple[str, ...]
    mean_mc: np.ndarray
    mean_sc: np.ndarray
    se_mc: np.ndarray
    se_sc: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return (self.mean_sc - self.mean_mc) / np.sqrt(self.se_mc**2 + self.se_sc**2)

    def pass_fraction(self, threshold: float = 4.0) -> float:
        return float(np.mean(np.abs(self.z) < threshold))

    def rows(self):
        for i, name in enumerate(self.names):
            yield name, self.mean_mc[i], self.se_mc[i], self.mean_sc[i], self.se_sc[i], self.z[i]


def geweke_test(hyper: pm.HyperParams, n: int = 20, p: int = 5, iterations: int = 10_000,
                seed: int = 0, burn_in: int = 500) -> GewekeResult:
    if hyper.k < 3:
        raise ValueError("the monitored statistics need k >= 3")
    mc = marginal_conditional(hyper, n, p, iterations, seed)
    sc = successive_conditional(hyper, n, p, iterations + burn_in, seed)[burn_in:]
    return GewekeResult(STAT_NAMES, mc.mean(0), sc.mean(0),
                        mc.std(0, ddof=1) / math.sqrt(mc.shape[0]), batch_means_se(sc))


GEWEKE_HYPER = pm.HyperParams(a_gamma=4.0, b_gamma=3.0, vartheta=0.1, a_nu=2.0, a_sigma=4.0, b_sigma=3.0, k=4, d=1)
