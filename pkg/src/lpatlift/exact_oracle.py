"""Exact ground truth by brute force at small n.

Everything here is computed by enumerating trees and lift events with
rational weights.  Tree counts come from the enumerations themselves, never
from the counting formulas or the rate formulas that these results check.
"""

from __future__ import annotations

from collections import defaultdict
from fractions import Fraction
from functools import lru_cache
from itertools import combinations

from lpatlift.crp_gem import check_crp_parameters, root_partition
from lpatlift.lifting import lift_edge
from lpatlift.partitions import Partition, from_text, relabel, restrict, set_partitions, to_text
from lpatlift.port_trees import decode, encode, enumerate_ports, iter_ports

NULL = "null"

DistributionTable = dict  # canonical key -> Fraction


class OracleRangeError(ValueError):
    pass


def _check(n: int, lo: int, hi: int) -> None:
    if not lo <= n <= hi:
        raise OracleRangeError(f"n must lie in [{lo}, {hi}] for exact enumeration, got {n}")


@lru_cache(maxsize=None)
def enumerated_count(k: int) -> int:
    """Number of PORTs on k nodes, by counting an enumeration."""
    if k == 0:
        return 1
    return sum(1 for _ in iter_ports(k))


def _lift_outcomes(n: int):
    """Yield ``(tree, weight, outcome)`` for every (tree, node, child) choice;
    ``outcome`` is None for a picked leaf, else ``(u, v)``."""
    trees = enumerate_ports(n)
    w_tree = Fraction(1, len(trees))
    for t in trees:
        for u in t.nodes():
            kids = t.children[u]
            w_node = w_tree / n
            if not kids:
                yield t, w_node, None
                continue
            for v in kids:
                yield t, w_node / len(kids), (u, v)


def exact_lift_distribution(n: int) -> DistributionTable:
    """Law of the tree obtained by one lift of an LPAT(n).  Picking a leaf
    changes nothing; that outcome is collected under :data:`NULL`."""
    _check(n, 2, 7)
    table: dict[str, Fraction] = defaultdict(Fraction)
    for t, w, choice in _lift_outcomes(n):
        key = NULL if choice is None else encode(lift_edge(t, *choice))
        table[key] += w
    return dict(sorted(table.items()))


def lift_outcome_check(n: int) -> dict:
    """Every non-null lifted tree whose merged block has k elements should
    have probability ``(1/n) |P_{k-1}| / |P_n|``."""
    table = exact_lift_distribution(n)
    bad = []
    for key, p in table.items():
        if key == NULL:
            continue
        k = max(len(b) for b in decode(key).label_set().blocks)
        expected = Fraction(enumerated_count(k - 1), n * enumerated_count(n))
        if p != expected:
            bad.append({"tree": key, "expected": expected, "actual": p})
    return {"n": n, "outcomes": len(table) - (NULL in table), "mismatches": bad, "passed": not bad}


def verify_lemma1(n: int) -> dict:
    """Conditional law of the lifted tree given its label set.

    For each label set reached by a non-null lift, the conditional law must
    be exactly uniform over all PORTs on that label set.
    """
    _check(n, 2, 6)
    table = exact_lift_distribution(n)
    by_labels: dict[str, dict[str, Fraction]] = defaultdict(dict)
    for key, p in table.items():
        if key == NULL:
            continue
        pi = decode(key).label_set()
        by_labels[to_text(pi)][key] = p
    checks = []
    for pi_text, probs in sorted(by_labels.items()):
        mass = sum(probs.values())
        cond = {k: p / mass for k, p in probs.items()}
        pi = from_text(pi_text)
        all_trees = {encode(t) for t in iter_ports(pi)}
        expected = Fraction(1, len(all_trees))
        ok = set(cond) == all_trees and all(c == expected for c in cond.values())
        checks.append(
            {
                "label_set": pi_text,
                "trees": len(all_trees),
                "expected": expected,
                "conditional": dict(sorted(cond.items())),
                "passed": ok,
            }
        )
    return {"n": n, "label_sets": checks, "passed": all(c["passed"] for c in checks)}


def exact_first_transition(n: int) -> dict:
    """First-transition rates of the label-set process from singletons.

    Events arrive at rate n; the rate of seeing the specific merged block C
    is n times the probability that one lift of an LPAT(n) merges exactly C.
    """
    _check(n, 2, 7)
    per_set: dict[frozenset, Fraction] = defaultdict(Fraction)
    for t, w, choice in _lift_outcomes(n):
        if choice is None:
            continue
        u, v = choice
        merged = frozenset(t.labels[u]).union(x for s in t.subtree(v) for x in t.labels[s])
        per_set[merged] += n * w
    rates: dict[int, Fraction] = {}
    uniform_in_set = True
    for k in range(2, n + 1):
        vals = {per_set.get(frozenset(c), Fraction(0)) for c in combinations(range(1, n + 1), k)}
        if len(vals) != 1:
            uniform_in_set = False
        rates[k] = max(vals)
    trees = enumerate_ports(n)
    internal = Fraction(sum(sum(1 for v in t.nodes() if t.children[v]) for t in trees), len(trees))
    return {
        "n": n,
        "rates": rates,
        "total": sum(per_set.values(), Fraction(0)),
        "expected_internal_nodes": internal,
        "same_rate_for_every_set": uniform_in_set,
    }


def crp_eppf(pi: Partition, alpha, theta):
    """Probability that an (alpha, theta) restaurant seats customers 1..m
    exactly as ``pi``; a Fraction when the parameters are exact."""
    check_crp_parameters(alpha, theta)
    m = pi.size
    if pi.ground_set != tuple(range(1, m + 1)):
        raise ValueError(f"{to_text(pi)} is not a partition of {{1..{m}}}")
    if not isinstance(alpha, float) and not isinstance(theta, float):
        alpha, theta = Fraction(alpha), Fraction(theta)
    block = {x: i for i, b in enumerate(pi.blocks) for x in b}
    sizes = [0] * len(pi.blocks)
    tables = 0
    p = Fraction(1) if isinstance(alpha, Fraction) else 1.0
    for j in range(1, m + 1):
        i = block[j]
        if j > 1:
            if sizes[i] == 0:
                p *= (theta + tables * alpha) / (j - 1 + theta)
            else:
                p *= (sizes[i] - alpha) / (j - 1 + theta)
        if sizes[i] == 0:
            tables += 1
        sizes[i] += 1
    return p


def crp_law(m: int, alpha, theta) -> DistributionTable:
    return {to_text(pi): crp_eppf(pi, alpha, theta) for pi in set_partitions(list(range(1, m + 1)))}


def exact_root_partition_law(n: int) -> DistributionTable:
    """Law of the root partition of an LPAT(n), a partition of {2..n}."""
    _check(n, 2, 7)
    trees = enumerate_ports(n)
    table: dict[str, Fraction] = defaultdict(Fraction)
    w = Fraction(1, len(trees))
    for t in trees:
        table[to_text(root_partition(t))] += w
    return dict(sorted(table.items()))


def root_partition_matches_crp(n: int) -> dict:
    """Compare the root-partition law with the (1/2, 1/2) restaurant on
    n - 1 customers, customer j standing for label j + 1."""
    law = exact_root_partition_law(n)
    shifted = {to_text(relabel(from_text(k), -1)): p for k, p in law.items()}
    crp = crp_law(n - 1, Fraction(1, 2), Fraction(1, 2))
    crp = {k: p for k, p in crp.items() if p != 0}
    return {"n": n, "tree_law": shifted, "crp_law": crp, "passed": shifted == crp}


def root_partition_consistency(n: int) -> dict:
    """Restricting the root partition of an LPAT(n + 1) to {2..n} must give
    the law of the root partition of an LPAT(n)."""
    _check(n, 2, 6)
    big = exact_root_partition_law(n + 1)
    pushed: dict[str, Fraction] = defaultdict(Fraction)
    for k, p in big.items():
        pushed[to_text(restrict(from_text(k), n))] += p
    small = exact_root_partition_law(n)
    return {"n": n, "passed": dict(pushed) == small}


def exact_first_jump_law(n: int) -> dict:
    """Law of the first state change of the continuous-time lifting chain
    started from an LPAT(n).

    Null events leave the tree in place, so given the tree the first merger
    is a uniform internal node followed by a uniform child; the tree itself
    stays uniform.  Returns the partition law, the merger-size law and the
    mean waiting time ``E[1 / #internal nodes]``.
    """
    _check(n, 2, 7)
    trees = enumerate_ports(n)
    w_tree = Fraction(1, len(trees))
    partitions: dict[str, Fraction] = defaultdict(Fraction)
    sizes: dict[int, Fraction] = defaultdict(Fraction)
    wait = Fraction(0)
    for t in trees:
        internal = [u for u in t.nodes() if t.children[u]]
        wait += w_tree / len(internal)
        for u in internal:
            kids = t.children[u]
            for v in kids:
                w = w_tree / (len(internal) * len(kids))
                lifted = lift_edge(t, u, v)
                partitions[to_text(lifted.label_set())] += w
                sizes[len(t.subtree(v)) + 1] += w
    return {
        "n": n,
        "partition_law": dict(sorted(partitions.items())),
        "merger_size_law": dict(sorted(sizes.items())),
        "mean_first_change_time": wait,
    }
