import pytest
from hypothesis import given
from hypothesis import strategies as st

from lpatlift.partitions import from_text, to_text
from lpatlift.port_trees import (
    EnumerationCapError,
    PlaneTree,
    TreeError,
    catalan,
    decode,
    double_factorial,
    encode,
    enumerate_ports,
    port_code,
    port_count,
    port_count_catalan,
    port_from_code,
    restrict_tree,
    sample_lpat,
    sample_lpat_parents,
)


def test_small_enumerations():
    assert [encode(t) for t in enumerate_ports(1)] == ["{1}"]
    assert [encode(t) for t in enumerate_ports(2)] == ["{1}({2})"]
    # the listing order is an implementation choice; compare as a set
    assert {encode(t) for t in enumerate_ports(3)} == {"{1}({2}({3}))", "{1}({2},{3})", "{1}({3},{2})"}


def test_enumeration_on_a_label_set():
    pi = from_text("{1}|{2,5}|{3,4}")
    trees = enumerate_ports(pi)
    assert len(trees) == 3
    assert all(t.label_set() == pi for t in trees)


def test_counts_agree():
    for n in range(1, 12):
        assert port_count(n) == port_count_catalan(n) == double_factorial(2 * n - 3)
    assert [catalan(n) for n in range(6)] == [1, 1, 2, 5, 14, 42]
    assert [len(enumerate_ports(n)) for n in range(1, 7)] == [1, 1, 3, 15, 105, 945]


def test_cap():
    with pytest.raises(EnumerationCapError):
        enumerate_ports(10)
    assert len(enumerate_ports(4, cap=4)) == 15


def test_encoding_round_trip_on_all_small_trees():
    for n in range(1, 6):
        seen = set()
        for t in enumerate_ports(n):
            s = encode(t)
            assert decode(s) == t
            assert port_from_code(port_code(t), n) == t
            seen.add(s)
        assert len(seen) == port_count(n)


def test_decode_rejects_non_increasing():
    with pytest.raises(TreeError):
        decode("{2}({1})")
    with pytest.raises(TreeError):
        decode("{1}({2}")


def test_restrict_tree():
    t = decode("{1}({3}({4}),{2})")
    assert encode(restrict_tree(t, 3)) == "{1}({3},{2})"
    assert encode(restrict_tree(t, 2)) == "{1}({2})"
    assert encode(restrict_tree(t, 1)) == "{1}"


def test_plane_tree_basics():
    t = decode("{1}({2}({4}),{3})")
    assert len(t) == 4
    assert t.out_degree(t.root) == 2
    assert t.is_leaf(t.find(3))
    assert to_text(t.label_set()) == "{1}|{2}|{3}|{4}"
    assert PlaneTree.single((1, 2)).labels[0] == (1, 2)
    t.validate()


def test_deep_trees_encode_without_recursion_limit():
    n = 5000
    t = PlaneTree.from_parents(list(range(-1, n - 1)))
    s = encode(t)
    assert s.startswith("{1}({2}({3}(") and s.endswith(")" * (n - 1))


@given(st.integers(1, 60), st.integers(0, 2**32))
def test_sampled_trees_are_valid_ports(n, seed):
    t = sample_lpat(n, seed)
    t.validate()
    assert len(t) == n
    assert decode(encode(t)) == t
    parents = sample_lpat_parents(n, seed)
    assert parents[0] == -1 and all(0 <= p < i for i, p in enumerate(parents) if i)


def test_sampler_is_deterministic():
    assert encode(sample_lpat(30, 5)) == encode(sample_lpat(30, 5))
