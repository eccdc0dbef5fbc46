"""Branch probabilities and the kernel weights they induce.

A weight sequence ``w`` has ``w[0] == 1`` and ``w[s]`` in (0, 1): the
probability of turning right from level ``s`` to ``s + 1``. Infinite products
over levels are truncated at ``k - 1`` where ``k = len(w)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import tree_index as ti
from .errors import DomainError, TruncationError


def check_weights(w: Sequence[float]) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size < 1:
        raise DomainError("weight sequence must be a non-empty vector")
    if w[0] != 1.0:
        raise DomainError(f"w[0] must be exactly 1, got {w[0]}")
    if np.any((w[1:] <= 0) | (w[1:] >= 1)):
        raise DomainError("w[s] must lie strictly inside (0, 1) for s >= 1")
    return w


@dataclass(frozen=True)
class BetaSpec:
    """Independent ``Beta(a[s], b[s])`` priors on ``w[s]``; index 0 is unused."""

    a: tuple[float, ...]
    b: tuple[float, ...]

    def __post_init__(self):
        if len(self.a) != len(self.b):
            raise DomainError("shape vectors must have equal length")
        if any(x <= 0 for x in self.a[1:] + self.b[1:]):
            raise DomainError("Beta shapes must be positive")

    @property
    def k(self) -> int:
        return len(self.a)

    def means(self) -> np.ndarray:
        a, b = np.asarray(self.a, float), np.asarray(self.b, float)
        m = np.ones(self.k)
        m[1:] = a[1:] / (a[1:] + b[1:])
        return m

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """``(size, k)`` draws with column 0 fixed at 1."""
        out = np.ones((size, self.k))
        out[:, 1:] = rng.beta(self.a[1:], self.b[1:], size=(size, self.k - 1))
        return out

    @classmethod
    def from_shapes(cls, a: Sequence[float], b: Sequence[float]) -> "BetaSpec":
        return cls((1.0,) + tuple(float(x) for x in a), (1.0,) + tuple(float(x) for x in b))


def _w_tilde(s: int, h: int, t: int, w: np.ndarray, amended: bool) -> np.ndarray:
    # same ceiling rule as tree_index.tau, but t runs up to s inclusive here
    even = -(-h // 2 ** (s - t)) % 2 == 0
    if even or s == 0 or (amended and t == 0):
        return w[..., t]
    return 1.0 - w[..., t]


def pi_node_paper(s: int, h: int, w, amended: bool = False):
    """Weight of node ``(s, h)`` from the stopping/turning formulas.

    ``w`` may be a single sequence or an ``(m, k)`` batch. The stopping factor
    is ``w[s+1] * prod_{q=s+2}^{k-1} (1 - w[q])``. With ``amended=False`` the
    level-0 turn factor is ``1 - w[0] = 0`` for every ``s >= 1``, so those
    weights vanish; ``amended=True`` uses ``w[0] = 1`` instead.
    """
    w = np.asarray(w, dtype=float)
    k = w.shape[-1]
    if s < 0 or not 1 <= h <= 2**s:
        raise DomainError(f"invalid node ({s}, {h})")
    if s + 2 > k:
        raise TruncationError(f"level {s} needs k >= {s + 2}, got k={k}")
    val = w[..., s + 1] * np.prod(1.0 - w[..., s + 2 : k], axis=-1)
    for t in range(s + 1):
        val = val * _w_tilde(s, h, t, w, amended)
    return val


def pi_level_paper(s: int, w, amended: bool = False):
    """Total weight ``sum_h pi_node_paper(s, h, w)`` of level ``s``."""
    return sum(pi_node_paper(s, h, w, amended) for h in range(1, 2**s + 1))


def pi_background(w) -> float:
    w = np.asarray(w, dtype=float)
    if w.shape[-1] < 2:
        raise TruncationError("background weight needs k >= 2")
    return np.prod(1.0 - w[..., 1:], axis=-1)


def canonical_pattern_prob(pattern: Sequence[int], w) -> float:
    """Probability of a stop pattern under independent branch Bernoullis."""
    w = np.asarray(w, dtype=float)
    rho = ti.encode_node(pattern, w.shape[-1])
    factors = np.where(rho[1:] == 1, w[..., 1:], 1.0 - w[..., 1:])
    return np.prod(factors, axis=-1)


@lru_cache(maxsize=32)
def _pattern_matrix(k: int) -> np.ndarray:
    rho = np.array([ti.encode_node(p, k) for p in ti.all_patterns(k - 1)])
    rho.setflags(write=False)
    return rho


def all_pattern_probs(w) -> np.ndarray:
    """Probabilities of all ``2**(k-1)`` patterns, ordered as ``all_patterns``."""
    w = check_weights(w)
    rho = _pattern_matrix(w.size)
    factors = np.where(rho[:, 1:] == 1, w[1:], 1.0 - w[1:])
    return np.prod(factors, axis=1)


def normalization_check(w) -> float:
    """``|sum of all pattern probabilities - 1|``."""
    return abs(math.fsum(all_pattern_probs(w)) - 1.0)


def expected_level_weight(s: int, prior: BetaSpec, k: int | None = None, amended: bool = False) -> float:
    """``E(pi_s)`` by plugging Beta means into the level-weight formula.

    Exact because every ``w[t]`` enters each node product at most once and the
    ``w[t]`` are independent.
    """
    k = prior.k if k is None else k
    if k > prior.k:
        raise TruncationError(f"prior defines {prior.k} levels, asked for k={k}")
    if s < 1:
        raise DomainError("expected level weight is defined for s >= 1")
    means = prior.means()[:k]
    return float(pi_level_paper(s, means, amended))


def truncation_tail_bound(prior: BetaSpec, k: int) -> float:
    """``prod_{q >= k} (1 - E w_q)`` over the levels the prior defines beyond k."""
    means = prior.means()
    return float(np.prod(1.0 - means[k:])) if k < prior.k else 1.0


def monte_carlo_level_weight(s: int, prior: BetaSpec, draws: int, rng: np.random.Generator,
                             k: int | None = None, amended: bool = False) -> tuple[float, float]:
    """Monte Carlo estimate of ``E(pi_s)`` and its standard error."""
    k = prior.k if k is None else k
    w = prior.sample(draws, rng)[:, :k]
    vals = pi_level_paper(s, w, amended)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(draws))
