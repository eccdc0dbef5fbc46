import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from sklearn.metrics import adjusted_rand_score

from msmix import prior_model as pm
from msmix import summary as sm
from msmix import tree_index as ti
from msmix.errors import DomainError
from msmix.generative import Dataset
from msmix.gibbs import initial_state
from msmix.gibbs.state import ChainSample

PARTITIONS_OF_3 = [("", "", ""), ("", "", "1"), ("", "1", ""), ("1", "", ""), ("", "1", "01")]


def pair_count_ari(a, b):
    """Rand-type counts over all pairs, adjusted by the hypergeometric expectation."""
    n = len(a)
    pairs = list(itertools.combinations(range(n), 2))
    both = sum(a[i] == a[j] and b[i] == b[j] for i, j in pairs)
    in_a = sum(a[i] == a[j] for i, j in pairs)
    in_b = sum(b[i] == b[j] for i, j in pairs)
    expected = in_a * in_b / len(pairs)
    top = 0.5 * (in_a + in_b)
    return 1.0 if top == expected else (both - expected) / (top - expected)


labelings = st.integers(2, 12).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 3), min_size=n, max_size=n),
                        st.lists(st.integers(0, 3), min_size=n, max_size=n)))


def test_cocluster_examples():
    psm = sm.cocluster([["", "1", "1"]])
    np.testing.assert_array_equal(psm, [[1, 0, 0], [0, 1, 1], [0, 1, 1]])
    psm = sm.cocluster([["", "1", "1"], ["", "", "1"]])
    assert psm[0, 1] == 0.5 and psm[1, 2] == 0.5 and psm[0, 2] == 0.0
    assert np.all(np.diag(psm) == 1)
    np.testing.assert_array_equal(psm, psm.T)
    with pytest.raises(DomainError):
        sm.cocluster([])


def test_cocluster_relabel_invariant():
    a = [["", "1", "01", "1"], ["1", "1", "", ""]]
    b = [["11", "01", "1", "01"], ["", "", "01", "01"]]
    np.testing.assert_array_equal(sm.cocluster(a), sm.cocluster(b))


def test_binder_loss_enumeration():
    psm = np.array([[1.0, 0.7, 0.2], [0.7, 1.0, 0.4], [0.2, 0.4, 1.0]])
    pairs = [(0, 1), (0, 2), (1, 2)]

    def oracle(part):
        return sum(abs((part[i] == part[j]) - psm[i, j]) for i, j in pairs)

    losses = {p: sm.binder_loss(p, psm) for p in PARTITIONS_OF_3}
    for p, loss in losses.items():
        assert loss == pytest.approx(oracle(p), abs=1e-12)
    est = sm.point_partition(psm, PARTITIONS_OF_3)
    best = min(PARTITIONS_OF_3, key=oracle)
    assert tuple(est.labels) == best
    assert est.loss == pytest.approx(oracle(best))


def test_point_partition_examples():
    same = [["", "1", "1"]] * 3
    est = sm.point_partition(sm.cocluster(same), same)
    assert est.loss == 0 and est.labels == ["", "1", "1"]
    cands = [["1", "1", "01"], ["", "1", "01"]]
    assert sm.point_partition(np.eye(3), cands).labels == ["", "1", "01"]
    # equal loss: fewer clusters wins
    psm = np.array([[1, 0.5, 0], [0.5, 1, 0], [0, 0, 1.0]])
    assert sm.point_partition(psm, [["", "1", "01"], ["1", "1", "01"]]).labels == ["1", "1", "01"]
    with pytest.raises(DomainError):
        sm.point_partition(np.eye(2), [])


@given(st.lists(st.lists(st.sampled_from(["", "1", "01", "11"]), min_size=4, max_size=4), min_size=1, max_size=6))
def test_point_partition_is_minimal(chain):
    psm = sm.cocluster(chain)
    est = sm.point_partition(psm, chain)
    assert all(est.loss <= sm.binder_loss(c, psm) + 1e-12 for c in chain)


def test_ari_examples():
    a = ["x", "x", "y", "y", "z", "z"]
    assert sm.ari(a, a) == 1.0
    assert sm.ari(a, ["b", "b", "c", "c", "a", "a"]) == 1.0
    b = ["x", "y", "y", "y", "z", "x"]
    assert sm.ari(a, b) == pytest.approx(pair_count_ari(a, b), abs=1e-12)
    with pytest.raises(DomainError):
        sm.ari(a, a[:-1])


@given(labelings)
def test_ari_matches_oracles(pair):
    a, b = pair
    val = sm.ari(a, b)
    assert val == pytest.approx(pair_count_ari(a, b), abs=1e-12)
    assert val == pytest.approx(adjusted_rand_score(a, b), abs=1e-12)
    assert val == pytest.approx(sm.ari(b, a), abs=1e-15)


def _chain_with(labels_list, k=3):
    hyper = pm.HyperParams(k=k)
    n = len(labels_list[0])
    data = Dataset(np.zeros((n, 2)), np.ones((n, 1)))
    out = []
    for i, labels in enumerate(labels_list):
        st_ = initial_state(hyper, data, i)
        st_.rho = np.array([ti.encode_node(ti.pattern_from_str(l), k) for l in labels], dtype=np.int8)
        out.append(ChainSample(i, st_, 0.0))
    return out


def test_tree_report_examples():
    chain = _chain_with([["1", "1", "11"], ["1", "11", "11"]])
    est = sm.point_partition(sm.cocluster(chain), chain)
    rep = sm.tree_report(est, chain)
    assert rep["edges"] == [["11", "1"]]
    by = {c["pattern"]: c for c in rep["clusters"]}
    assert by["11"]["parent"] == "1" and by["1"]["occupancy"] == 1.0
    theta0 = chain[0].state.loadings.Theta
    theta1 = chain[1].state.loadings.Theta
    expected = 0.5 * ((theta0[:, 0] + theta0[:, 1]) + (theta1[:, 0] + theta1[:, 1]))
    np.testing.assert_allclose(by["1"]["mean_location"], expected)

    single = _chain_with([["", "", ""]])
    rep = sm.tree_report(sm.point_partition(sm.cocluster(single), single), single)
    assert rep["edges"] == [] and rep["roots"] == [""]
    assert rep["clusters"][0]["pattern"] == "" and rep["levels"] == {"background": [""]}


def test_tree_edges_skip_missing_ancestors():
    assert sm.tree_edges(["", "101"]) == [("101", "")]
    assert sm.tree_edges(["1", "101"]) == [("101", "1")]
