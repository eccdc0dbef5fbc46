"""Prior distributions of the factorized model and samplers for them.

Level ``s`` runs over ``0..k-1``. Stick-breaking variables ``nu_1..nu_k`` are
stored 0-based (``nu[t-1]`` is ``nu_t``). Each level carries an indicator
``zeta_s`` in ``1..k``; level ``s`` is in the spike iff ``zeta_s <= s``, so the
root level is always in the slab.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy import special

from .errors import DomainError

PROBIT_CLAMP = 8.0


@dataclass(frozen=True)
class HyperParams:
    """Fixed hyperparameters of one run.

    Attributes
    ----------
    a_gamma, b_gamma : inverse-gamma shape and scale of the slab.
    vartheta : spike scale factor in (0, 1).
    a_nu : rate of the stick-breaking ``Beta(1, a_nu)`` variables.
    a_sigma, b_sigma : gamma shape and rate of the noise precisions.
    k : truncation level (number of columns).
    c : branching factor; only 2 is supported.
    d : covariate dimension.
    """

    a_gamma: float = 2.0
    b_gamma: float = 2.0
    vartheta: float = 0.05
    a_nu: float = 2.0
    a_sigma: float = 2.0
    b_sigma: float = 1.0
    k: int = 4
    c: int = 2
    d: int = 1

    def __post_init__(self):
        for name in ("a_gamma", "b_gamma", "a_nu", "a_sigma", "b_sigma"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 < self.vartheta < 1:
            raise DomainError(f"vartheta must lie in (0, 1), got {self.vartheta}")
        if self.c != 2:
            raise DomainError(f"only binary trees (c=2) are supported, got c={self.c}")
        if self.k < 2:
            raise DomainError(f"truncation k must be at least 2, got {self.k}")
        if self.d < 1:
            raise DomainError(f"covariate dimension d must be >= 1, got {self.d}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "HyperParams":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})

    def replace(self, **changes) -> "HyperParams":
        return HyperParams(**{**self.to_dict(), **changes})


@dataclass
class ShrinkageState:
    nu: np.ndarray  # (k,) values nu_1..nu_k
    zeta: np.ndarray  # (k,) indicators in 1..k, one per level

    @property
    def varpi(self) -> np.ndarray:
        return np.array([spike_prob(s, self.nu) for s in range(self.nu.size)])

    @property
    def spike(self) -> np.ndarray:
        return self.zeta <= np.arange(self.zeta.size)

    def n_active(self) -> int:
        """Number of slab levels beyond the root."""
        return int(np.sum(~self.spike[1:]))

    def copy(self) -> "ShrinkageState":
        return ShrinkageState(self.nu.copy(), self.zeta.copy())


def spike_prob(s: int, nu, literal: bool = False) -> float:
    """Spike probability of level ``s``: ``sum_{t<=s} nu_t prod_{m<t}(1-nu_m)``.

    ``literal=True`` uses ``prod_{m<=t}`` instead, which double-counts the
    factor ``1 - nu_t``.
    """
    nu = np.asarray(nu, dtype=float)
    if s < 0 or s > nu.size:
        raise DomainError(f"level {s} outside 0..{nu.size}")
    total, remaining = 0.0, 1.0
    for t in range(1, s + 1):
        v = nu[t - 1]
        total += v * (remaining * (1.0 - v) if literal else remaining)
        remaining *= 1.0 - v
    return total


def stick_weights(nu) -> np.ndarray:
    """``pr(zeta = t)`` for ``t = 1..k``; residual mass goes to ``t = k``."""
    nu = np.asarray(nu, dtype=float)
    remaining = np.concatenate([[1.0], np.cumprod(1.0 - nu[:-1])])
    w = nu * remaining
    w[-1] = remaining[-1]
    return w


def log_stick_weights(nu) -> np.ndarray:
    nu = np.asarray(nu, dtype=float)
    log_rem = np.concatenate([[0.0], np.cumsum(np.log1p(-nu[:-1]))])
    out = np.log(nu) + log_rem
    out[-1] = log_rem[-1]
    return out


def sample_nu(a_nu: float, k: int, rng: np.random.Generator) -> np.ndarray:
    return rng.beta(1.0, a_nu, size=k)


def sample_zeta(nu, rng: np.random.Generator) -> np.ndarray:
    w = stick_weights(nu)
    k = w.size
    u = rng.random(k)
    return np.minimum(np.searchsorted(np.cumsum(w), u * w.sum(), side="right"), k - 1) + 1


def sample_inv_gamma(shape, scale, rng: np.random.Generator, size=None):
    """Inverse-gamma draws via reciprocal gamma precisions."""
    return 1.0 / rng.gamma(shape, 1.0 / np.asarray(scale, dtype=float), size=size)


def sample_gamma_sequence(hyper: HyperParams, rng: np.random.Generator):
    """Draw ``(ShrinkageState, gamma)`` from the spike-and-slab level prior."""
    k = hyper.k
    nu = sample_nu(hyper.a_nu, k, rng)
    zeta = sample_zeta(nu, rng)
    state = ShrinkageState(nu, zeta)
    scale = np.where(state.spike, hyper.vartheta * hyper.b_gamma, hyper.b_gamma)
    gamma = sample_inv_gamma(hyper.a_gamma, scale, rng)
    return state, gamma


def sample_mixture_scales(shape, rng: np.random.Generator) -> np.ndarray:
    """Draws from ``0.5 N(1, 1) + 0.5 N(-1, 1)``."""
    sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return sign + rng.standard_normal(shape)


def sample_local_scales(p: int, k: int, rng: np.random.Generator):
    """``(phi, psi, psi_tilde)``, each ``p x k``; ``psi[:, 0]`` is pinned to 0."""
    if p < 1 or k < 1:
        raise DomainError("p and k must be >= 1")
    phi = sample_mixture_scales((p, k), rng)
    psi = sample_mixture_scales((p, k), rng)
    psi_t = sample_mixture_scales((p, k), rng)
    psi[:, 0] = 0.0
    return phi, psi, psi_t


def sample_probit_coeffs(hyper: HyperParams, rng: np.random.Generator) -> np.ndarray:
    """``(k, d)`` coefficients; row ``s`` drives the bit of level ``s``.

    Row 0 is pinned to zero since the root bit is always 1.
    """
    B = rng.standard_normal((hyper.k, hyper.d))
    B[0] = 0.0
    return B


def probit_cdf(eta):
    return special.ndtr(np.clip(eta, -PROBIT_CLAMP, PROBIT_CLAMP))


def log_probit_cdf(eta):
    return special.log_ndtr(np.clip(eta, -PROBIT_CLAMP, PROBIT_CLAMP))


def path_prob(x, B_s) -> np.ndarray:
    """Right-branch probability ``Phi(x' B_s)`` (clamped at +-8)."""
    x = np.asarray(x, dtype=float)
    B_s = np.asarray(B_s, dtype=float).reshape(-1)
    if x.shape[-1] != B_s.size:
        raise DomainError(f"covariate length {x.shape[-1]} != coefficient length {B_s.size}")
    return probit_cdf(x @ B_s)


def sample_noise_precisions(hyper: HyperParams, p: int, rng: np.random.Generator) -> np.ndarray:
    """Noise variances ``varsigma_j`` with ``1/varsigma_j ~ Ga(a_sigma, b_sigma)``."""
    if p < 1:
        raise DomainError("p must be >= 1")
    return 1.0 / rng.gamma(hyper.a_sigma, 1.0 / hyper.b_sigma, size=p)


# Level-scale schedules used by the collapse experiments. Each exposes
# ``mean(k)`` and ``sample(size, k, rng) -> (size, k)``.

@dataclass(frozen=True)
class SpikeSlabScales:
    hyper: HyperParams

    def mean(self, k: int) -> np.ndarray:
        h = self.hyper
        if h.a_gamma <= 1:
            return np.full(k, np.inf)
        r = h.a_nu / (1.0 + h.a_nu)
        spike = 1.0 - r ** np.arange(k)
        return h.b_gamma / (h.a_gamma - 1.0) * (1.0 - spike * (1.0 - h.vartheta))

    def sample(self, size: int, k: int, rng: np.random.Generator) -> np.ndarray:
        hyper = self.hyper.replace(k=k)
        return np.stack([sample_gamma_sequence(hyper, rng)[1] for _ in range(size)])


@dataclass(frozen=True)
class InverseGammaScales:
    """Independent ``gamma_s ~ IG(shape, scales[s])``; zero scale means ``gamma_s = 0``."""

    shape: float
    scales: tuple[float, ...]

    @classmethod
    def geometric(cls, first_mean: float, ratio: float, k: int, shape: float = 3.0):
        return cls(shape, tuple(first_mean * (shape - 1.0) * ratio**s for s in range(k)))

    def _scales(self, k: int) -> np.ndarray:
        if k > len(self.scales):
            raise DomainError(f"schedule defines {len(self.scales)} levels, asked for {k}")
        return np.asarray(self.scales[:k], dtype=float)

    def mean(self, k: int) -> np.ndarray:
        if self.shape <= 1:
            return np.full(k, np.inf)
        return self._scales(k) / (self.shape - 1.0)

    def sample(self, size: int, k: int, rng: np.random.Generator) -> np.ndarray:
        sc = self._scales(k)
        g = rng.gamma(self.shape, 1.0, size=(size, k))
        return sc / g


@dataclass(frozen=True)
class FixedScales:
    values: tuple[float, ...]

    def mean(self, k: int) -> np.ndarray:
        return np.asarray(self.values[:k], dtype=float)

    def sample(self, size: int, k: int, rng: np.random.Generator) -> np.ndarray:
        return np.broadcast_to(self.mean(k), (size, k)).copy()


def expected_slab_levels(a_nu: float, k: int) -> float:
    """Exact prior mean of ``#{s >= 1 : zeta_s > s}`` at truncation ``k``."""
    r = a_nu / (1.0 + a_nu)
    return float(sum(r**s for s in range(1, k)))


def log_inv_gamma_marginal(x2_sum: float, n_vals: int, shape: float, scale: float) -> float:
    """Log marginal density of ``n_vals`` iid ``N(0, g)`` values with ``g ~ IG(shape, scale)``.

    ``x2_sum`` is the sum of squares of the values (a multivariate-t density).
    """
    return (shape * math.log(scale) - (shape + 0.5 * n_vals) * math.log(scale + 0.5 * x2_sum)
            + math.lgamma(shape + 0.5 * n_vals) - math.lgamma(shape)
            - 0.5 * n_vals * math.log(2.0 * math.pi))
