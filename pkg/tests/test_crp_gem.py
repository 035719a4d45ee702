import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lpatlift.crp_gem import (
    StickSequence,
    block_one_jump_log,
    gem_sticks_array,
    jump_log_csv,
    root_partition,
    sample_crp,
    sample_gem_sticks,
    sticks_csv,
)
from lpatlift.lifting import simulate_lift_chain
from lpatlift.partitions import to_text
from lpatlift.port_trees import TreeError, decode, sample_lpat


def test_root_partition_example():
    assert to_text(root_partition(decode("{1}({2}({4}),{3})"))) == "{2,4}|{3}"
    with pytest.raises(TreeError):
        root_partition(decode("{1}"))


@given(st.integers(1, 40), st.integers(0, 2**32))
def test_crp_samples_are_partitions(m, seed):
    pi = sample_crp(m, 0.5, 0.5, seed)
    assert pi.ground_set == tuple(range(1, m + 1))
    assert list(pi.minima()) == sorted(pi.minima())


def test_crp_parameter_checks():
    with pytest.raises(ValueError):
        sample_crp(3, 1.5, 1)
    with pytest.raises(ValueError):
        sample_crp(3, 0.5, -0.6)
    with pytest.raises(ValueError):
        sample_crp(0, 0.5, 0.5)


def test_alpha_one_never_joins_a_table():
    assert len(sample_crp(10, 1, 0, 1)) == 10


@given(st.integers(1, 30), st.integers(0, 2**32))
def test_stick_partial_sums(count, seed):
    s = sample_gem_sticks(count, 0.5, 0.5, seed)
    sums = np.cumsum(s.frequencies)
    assert np.all(np.diff(sums) > 0) and sums[-1] < 1
    assert s.ranked() == tuple(sorted(s.frequencies, reverse=True))


def test_stick_validation():
    with pytest.raises(ValueError):
        StickSequence((0.6, 0.5))
    with pytest.raises(ValueError):
        gem_sticks_array(3, 1.0, 0.5, 1)


def test_gem_array_shape_and_determinism():
    a = gem_sticks_array(4, 0.5, 0.5, 100, 3)
    assert a.shape == (100, 4)
    assert np.array_equal(a, gem_sticks_array(4, 0.5, 0.5, 100, 3))


def test_block_one_log():
    assert block_one_jump_log(simulate_lift_chain(decode("{1}"), 1), 1) == []
    n = 30
    traj = simulate_lift_chain(sample_lpat(n, 4), 5)
    log = block_one_jump_log(traj, n)
    assert log and math.isclose(sum(j for _, j in log), (n - 1) / n)
    assert [t for t, _ in log] == sorted(t for t, _ in log)


def test_csv_emitters():
    s = sticks_csv([(0, StickSequence((0.5, 0.25)))])
    assert s.splitlines() == ["replicate,index,time,value", "0,1,,0.5", "0,2,,0.25"]
    j = jump_log_csv([(3, [(0.5, 0.1)])])
    assert j.splitlines()[1] == "3,1,0.5,0.1"


def _uniform_root_subtree_fraction(n, rng):
    from lpatlift._rng import randbelow
    from lpatlift.port_trees import sample_lpat_parents

    parent = sample_lpat_parents(n, rng)
    size = [1] * n
    for v in range(n - 1, 0, -1):
        size[parent[v]] += size[v]
    kids = [v for v in range(1, n) if parent[v] == 0]
    return size[kids[randbelow(rng, len(kids))]] / n


def test_first_block_one_jump_magnitude_at_large_n():
    # the oracle is a separate simulation of LPAT(n) alone: lifts below the
    # root never change the label sets of the root's subtrees
    from lpatlift._rng import Stream

    n, reps = 1000, 1000
    chain_rng, tree_rng = Stream(2024, (0,)), Stream(2024, (1,))
    jumps = np.array([block_one_jump_log(simulate_lift_chain(sample_lpat(n, chain_rng), chain_rng), n)[0][1] for _ in range(reps)])
    oracle = np.array([_uniform_root_subtree_fraction(n, tree_rng) for _ in range(10 * reps)])
    se = math.sqrt(jumps.var(ddof=1) / len(jumps) + oracle.var(ddof=1) / len(oracle))
    assert abs(jumps.mean() - oracle.mean()) <= 3 * se
