import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from msmix import prior_model as pm
from msmix.errors import DomainError
from msmix.rng import substream

nus = st.lists(st.floats(0.01, 0.99), min_size=2, max_size=10).map(np.array)


def spike_oracle(s, nu):
    return sum(nu[t - 1] * math.prod(1 - nu[m - 1] for m in range(1, t)) for t in range(1, s + 1))


def test_spike_prob_examples():
    assert pm.spike_prob(2, [0.5] * 4) == pytest.approx(0.75)
    assert pm.spike_prob(0, [0.5] * 4) == 0.0
    for s in range(1, 4):
        assert pm.spike_prob(s, [1.0, 0.3, 0.3]) == 1.0
    assert pm.spike_prob(4, [0.5] * 4) < 1.0
    # the literal product double-counts 1 - nu_t
    assert pm.spike_prob(2, [0.5] * 4, literal=True) == pytest.approx(0.5 * 0.5 + 0.5 * 0.25)
    with pytest.raises(DomainError):
        pm.spike_prob(5, [0.5] * 4)


@given(nus)
def test_spike_prob_monotone_and_bounded(nu):
    vals = [pm.spike_prob(s, nu) for s in range(nu.size + 1)]
    assert all(0.0 <= v <= 1.0 + 1e-15 for v in vals)
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert vals == pytest.approx([spike_oracle(s, nu) for s in range(nu.size + 1)], abs=1e-14)


@given(nus)
def test_stick_weights_sum_to_one(nu):
    w = pm.stick_weights(nu)
    assert math.fsum(w) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(np.exp(pm.log_stick_weights(nu)), w, rtol=1e-12)
    # cumulative stick mass up to s is the spike probability at s
    np.testing.assert_allclose(np.cumsum(w)[:-1], [pm.spike_prob(s, nu) for s in range(1, nu.size)], atol=1e-12)


def test_hyperparams_validation():
    for bad in ({"a_gamma": 0}, {"vartheta": 1.0}, {"c": 3}, {"k": 1}, {"d": 0}, {"b_sigma": -1}):
        with pytest.raises(DomainError):
            pm.HyperParams(**bad)
    h = pm.HyperParams(k=6)
    assert pm.HyperParams.from_dict(h.to_dict()) == h
    assert h.replace(a_nu=3.0).a_nu == 3.0


def test_expected_slab_levels_monte_carlo():
    # prior mean of the number of slab levels is about a_nu when a_nu << k
    a_nu, k = 2.0, 30
    hyper = pm.HyperParams(a_nu=a_nu, k=k)
    rng = substream(21)
    counts = np.array([pm.sample_gamma_sequence(hyper, rng)[0].n_active() for _ in range(10_000)])
    se = counts.std(ddof=1) / math.sqrt(counts.size)
    assert abs(counts.mean() - pm.expected_slab_levels(a_nu, k)) < 3 * se
    assert abs(counts.mean() - a_nu) < 3 * se + abs(pm.expected_slab_levels(a_nu, k) - a_nu)
    assert abs(pm.expected_slab_levels(a_nu, k) - a_nu) < 1e-4


def test_marginal_spike_frequency():
    hyper = pm.HyperParams(a_nu=1.5, k=6)
    rng = substream(22)
    draws = [pm.sample_gamma_sequence(hyper, rng)[0] for _ in range(20_000)]
    spikes = np.array([d.spike for d in draws], dtype=float)
    varpi = np.array([d.varpi for d in draws])
    diff = spikes - varpi
    se = diff.std(axis=0, ddof=1) / math.sqrt(len(draws))
    assert np.all(np.abs(diff.mean(axis=0)) < 3 * se + 1e-12)


def test_gamma_decreases_in_expectation():
    hyper = pm.HyperParams(a_gamma=4.0, b_gamma=3.0, vartheta=0.1, a_nu=1.0, k=6)
    rng = substream(23)
    g = np.array([pm.sample_gamma_sequence(hyper, rng)[1] for _ in range(20_000)])
    means = g.mean(axis=0)
    se = g.std(axis=0, ddof=1) / math.sqrt(g.shape[0])
    exact = pm.SpikeSlabScales(hyper).mean(6)
    assert np.all(np.abs(means - exact) < 3 * se)
    assert np.all(np.diff(exact) <= 0)


def test_spike_draws_shrink_with_vartheta():
    hyper = pm.HyperParams(vartheta=1e-8, k=8, a_nu=0.2)
    rng = substream(24)
    state, gamma = pm.sample_gamma_sequence(hyper, rng)
    for _ in range(200):
        state, gamma = pm.sample_gamma_sequence(hyper, rng)
        if state.spike.any():
            break
    assert np.all(gamma[state.spike] < 1e-4)


def test_sample_gamma_sequence_reproducible():
    hyper = pm.HyperParams(k=5)
    a = pm.sample_gamma_sequence(hyper, substream(1, 2))
    b = pm.sample_gamma_sequence(hyper, substream(1, 2))
    np.testing.assert_array_equal(a[1], b[1])
    np.testing.assert_array_equal(a[0].zeta, b[0].zeta)


def test_local_scale_moments():
    phi, psi, psi_t = pm.sample_local_scales(1000, 100, substream(25))
    x = phi.ravel()
    assert abs(x.mean()) < 3 * math.sqrt(2 / x.size)
    assert x.var() == pytest.approx(2.0, rel=0.05)
    assert np.all(psi[:, 0] == 0)
    assert psi_t.var() == pytest.approx(2.0, rel=0.05)
    np.testing.assert_array_equal(pm.sample_local_scales(3, 4, substream(9))[0],
                                  pm.sample_local_scales(3, 4, substream(9))[0])
    with pytest.raises(DomainError):
        pm.sample_local_scales(0, 4, substream(9))


def test_probit_examples():
    assert pm.path_prob([1.0], [0.0]) == 0.5
    assert pm.path_prob([1.0], [1.6448536]) == pytest.approx(0.95, abs=1e-7)
    assert pm.path_prob([1.0, 2.0], [0.3, -0.1]) == pytest.approx(stats.norm.cdf(0.1), abs=1e-12)
    assert 0 < pm.path_prob([1.0], [100.0]) < 1
    assert 0 < pm.path_prob([1.0], [-100.0]) < 1
    with pytest.raises(DomainError):
        pm.path_prob([1.0, 2.0], [1.0])


def test_probit_coeffs_prior():
    hyper = pm.HyperParams(k=5, d=3)
    B = pm.sample_probit_coeffs(hyper, substream(26))
    assert B.shape == (5, 3)
    assert np.all(B[0] == 0)
    assert np.all(np.isfinite(B))


def test_noise_precision_mean():
    hyper = pm.HyperParams(a_sigma=1.0, b_sigma=1.0)
    v = pm.sample_noise_precisions(hyper, 100_000, substream(27))
    prec = 1.0 / v
    assert np.all(np.isfinite(v)) and np.all(v > 0)
    assert abs(prec.mean() - 1.0) < 3 * prec.std(ddof=1) / math.sqrt(prec.size)
    np.testing.assert_array_equal(v[:5], pm.sample_noise_precisions(hyper, 100_000, substream(27))[:5])


def test_log_inv_gamma_marginal_matches_quadrature():
    from scipy import integrate
    x = np.array([0.4, -1.2, 0.7])
    shape, scale = 2.5, 1.3

    def integrand(g):
        return stats.invgamma.pdf(g, shape, scale=scale) * np.prod(stats.norm.pdf(x, scale=math.sqrt(g)))

    val, _ = integrate.quad(integrand, 0, np.inf)
    assert pm.log_inv_gamma_marginal(float(x @ x), 3, shape, scale) == pytest.approx(math.log(val), abs=1e-7)


def test_schedule_means():
    sched = pm.InverseGammaScales.geometric(2.0, 0.5, 5)
    np.testing.assert_allclose(sched.mean(5), 2.0 * 0.5 ** np.arange(5))
    draws = sched.sample(50_000, 5, substream(28))
    assert draws.mean(axis=0)[0] == pytest.approx(2.0, rel=0.05)
    with pytest.raises(DomainError):
        sched.mean(6)
