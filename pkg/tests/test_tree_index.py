import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from msmix import tree_index as ti
from msmix.errors import DomainError, InvalidPathError, TruncationError


def rho_tilde_oracle(rho):
    """Direct evaluation of rho_s + prod_{t >= s} (1 - rho_t)."""
    k = len(rho)
    return [rho[s] + math.prod(1 - rho[t] for t in range(s, k)) for s in range(k)]


patterns = st.one_of(
    st.just(()),
    st.lists(st.integers(0, 1), max_size=10).map(lambda b: tuple(b) + (1,)),
)


@pytest.mark.parametrize("s,h,t,expected", [(2, 3, 1, 1), (2, 1, 1, 0), (2, 3, 0, 0)])
def test_tau_examples(s, h, t, expected):
    assert ti.tau(s, h, t) == expected


@pytest.mark.parametrize("args", [(2, 0, 1), (2, 5, 1), (2, 3, 2), (0, 1, 0), (2, 3, -1)])
def test_tau_domain(args):
    with pytest.raises(DomainError):
        ti.tau(*args)


def test_tau_amended_root_bit():
    for s in range(1, 6):
        for h in range(1, 2**s + 1):
            assert ti.tau(s, h, 0) == 0
            assert ti.tau(s, h, 0, amended=True) == 1


def test_tau_sibling_degeneracy():
    for s in range(1, 7):
        for h in range(1, 2**s + 1):
            for h2 in range(1, 2**s + 1):
                if -(-h // 2) == -(-h2 // 2):
                    assert all(ti.tau(s, h, t) == ti.tau(s, h2, t) for t in range(s))


@pytest.mark.parametrize("pattern,k,expected", [
    ((), 4, [1, 0, 0, 0]),
    ((1,), 4, [1, 1, 0, 0]),
    ((0, 1), 5, [1, 0, 1, 0, 0]),
])
def test_encode_examples(pattern, k, expected):
    assert ti.encode_node(pattern, k).tolist() == expected


def test_encode_truncation():
    with pytest.raises(TruncationError):
        ti.encode_node((0, 0, 1), 3)


@pytest.mark.parametrize("rho,expected", [
    ([1, 0, 1, 0, 0], (0, 1)),
    ([1, 0, 0, 0], ()),
    ([1, 1, 1, 1], (1, 1, 1)),
])
def test_decode_examples(rho, expected):
    assert ti.decode(rho) == expected


def test_decode_rejects_missing_root():
    with pytest.raises(InvalidPathError):
        ti.decode([0, 1, 0])


def test_round_trip_exhaustive():
    for k in range(2, 13):
        seen = set()
        for pat in ti.all_patterns(k - 1):
            assert ti.decode(ti.encode_node(pat, k)) == pat
            seen.add(pat)
        assert len(seen) == 2 ** (k - 1)


@pytest.mark.parametrize("rho,expected", [
    ([1, 0, 1, 0, 0], [1, 0, 1, 1, 1]),
    ([1, 0, 0, 0], [1, 1, 1, 1]),
    ([1, 1, 1, 1], [1, 1, 1, 1]),
])
def test_rho_tilde_examples(rho, expected):
    assert rho_tilde_oracle(rho) == expected
    assert ti.rho_tilde(np.array(rho)).tolist() == expected


@given(patterns, st.integers(0, 4))
def test_rho_tilde_properties(pattern, extra):
    k = len(pattern) + 1 + extra
    rho = ti.encode_node(pattern, k)
    rt = ti.rho_tilde(rho)
    assert rt.tolist() == rho_tilde_oracle(rho.tolist())
    assert set(rt.tolist()) <= {0, 1}
    assert np.all(rt >= rho)
    last = len(pattern)  # index of the last 1 (0 for the background)
    assert np.array_equal(rt[:last], rho[:last])
    assert np.all(rt[last:] == 1)


def test_rho_tilde_batched():
    rho = np.array([[1, 0, 1, 0], [1, 1, 0, 0]])
    assert ti.rho_tilde(rho).tolist() == [[1, 0, 1, 1], [1, 1, 1, 1]]


@pytest.mark.parametrize("pattern,expected", [((0, 1), ()), ((1, 0, 1), (1,)), ((1,), ())])
def test_parent_examples(pattern, expected):
    assert ti.parent(pattern) == expected


def test_parent_of_background():
    with pytest.raises(DomainError):
        ti.parent(())


@given(patterns.filter(bool))
def test_parent_descends_to_background(pattern):
    chain = list(ti.ancestors(pattern))
    assert chain[-1] == ()
    assert len(chain) <= len(pattern)
    levels = [ti.node_level(pattern)] + [ti.node_level(p) for p in chain[:-1]]
    assert all(a > b for a, b in zip(levels, levels[1:]))


def test_node_level():
    assert ti.node_level(()) == ti.INF
    assert ti.node_level((1,)) == 1
    assert ti.node_level((0, 1)) == 2


def test_node_address_round_trip():
    for pat in ti.all_patterns(6):
        node = ti.NodeAddress.from_pattern(pat)
        assert node.pattern() == pat
        if pat:
            h = node.index()
            s = node.level
            # the right sibling reproduces the turn bits under the literal rule
            assert [ti.tau(s, h, t) for t in range(1, s)] == list(node.turns)
            assert h % 2 == 0


def test_node_address_invariants():
    with pytest.raises(DomainError):
        ti.NodeAddress(3, (1,))
    with pytest.raises(DomainError):
        ti.NodeAddress(None, (1,))


def test_pattern_strings():
    assert ti.pattern_to_str(()) == ""
    assert ti.pattern_from_str("01") == (0, 1)
    with pytest.raises(DomainError):
        ti.pattern_from_str("10")
