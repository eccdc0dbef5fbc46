"""Relabel levels across samples to match a benchmark sample."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .state import ChainSample


def level_cost(theta: np.ndarray, bench: np.ndarray) -> np.ndarray:
    """``cost[a, b] = ||theta[:, a] - bench[:, b]||^2``."""
    diff = theta[:, :, None] - bench[:, None, :]
    return np.sum(diff**2, axis=0)


def best_permutation(theta: np.ndarray, bench: np.ndarray) -> np.ndarray:
    """Permutation ``perm`` of levels ``1..m-1`` minimising the total cost.

    ``perm[b]`` is the source level placed at position ``b``; level 0 is fixed.
    """
    m = min(theta.shape[1], bench.shape[1])
    cost = level_cost(theta[:, 1:m], bench[:, 1:m])
    rows, cols = linear_sum_assignment(cost)
    perm = np.arange(m)
    perm[1 + cols] = 1 + rows
    return perm


def permute_levels(sample: ChainSample, perm: np.ndarray) -> ChainSample:
    """Apply a level permutation to the first ``len(perm)`` levels of a sample."""
    st = sample.state.copy()
    m = perm.size
    P, L = st.params, st.loadings

    def cols(arr):
        arr = arr.copy()
        arr[:, :m] = arr[:, perm]
        return arr

    for name in ("Theta", "Lambda", "LambdaTilde", "phi", "psi", "psi_tilde"):
        setattr(L, name, cols(getattr(L, name)))
    for name in ("theta_star", "lambda_star", "lambda_tilde_star"):
        setattr(P, name, cols(getattr(P, name)))
    L.gamma = L.gamma.copy()
    L.gamma[:m] = sample.state.loadings.gamma[perm]
    P.B = P.B.copy()
    P.B[:m] = sample.state.params.B[perm]
    P.shrinkage.zeta[:m] = sample.state.params.shrinkage.zeta[perm]
    st.rho, st.z, st.z_tilde = cols(st.rho), cols(st.z), cols(st.z_tilde)
    return ChainSample(sample.iteration, st, sample.log_density, sample.aligned)


def align_samples(chain: list[ChainSample]) -> tuple[list[ChainSample], list[np.ndarray]]:
    """Align every sample to the highest log-density sample.

    Returns the aligned chain and the permutation applied to each sample.
    Samples whose ``k`` differs from the benchmark are aligned on the common
    levels only and flagged with ``aligned=False``.
    """
    if not chain:
        raise ValueError("cannot align an empty chain")
    bench = max(chain, key=lambda s: s.log_density)
    bench_theta = bench.state.loadings.Theta
    out, perms = [], []
    for sample in chain:
        perm = best_permutation(sample.state.loadings.Theta, bench_theta)
        aligned = permute_levels(sample, perm)
        aligned.aligned = sample.k == bench.k
        out.append(aligned)
        perms.append(perm)
    return out, perms
