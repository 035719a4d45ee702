"""Edge lifting on plane trees and the continuous-time lifting chain."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from lpatlift._rng import as_rng, exponential, randbelow
from lpatlift.partitions import Partition, merge
from lpatlift.port_trees import NodeRef, PlaneTree, TreeError


@dataclass(frozen=True)
class LiftEvent:
    """One ring of a node clock.

    ``successor`` is None when the picked node was a leaf; such null events
    leave the tree alone and have ``merged_block_count == 0``.
    ``merged_minima`` lists the least elements of the blocks that merged and
    ``absorbed_size`` counts the labels moved into the picked node.
    """

    time: float
    picked: NodeRef
    successor: Optional[NodeRef] = None
    merged_block_count: int = 0
    merged_minima: tuple[int, ...] = ()
    absorbed_size: int = 0

    @property
    def is_null(self) -> bool:
        return self.successor is None


@dataclass
class LiftTrajectory:
    initial: PlaneTree
    events: list[LiftEvent]
    final: PlaneTree
    end_time: float
    absorbed: bool
    _states: Optional[list[tuple[float, Partition]]] = field(default=None, repr=False)

    @property
    def initial_partition(self) -> Partition:
        return self.initial.label_set()

    @property
    def states(self) -> list[tuple[float, Partition]]:
        """``(time, label set)`` after every state change."""
        if self._states is None:
            pi = self.initial_partition
            out = []
            for ev in self.events:
                if ev.is_null:
                    continue
                mins = set(ev.merged_minima)
                pi = merge(pi, [i for i, b in enumerate(pi.blocks) if b[0] in mins])
                out.append((ev.time, pi))
            self._states = out
        return self._states

    def merges(self) -> list[LiftEvent]:
        return [ev for ev in self.events if not ev.is_null]


def label_set(tree: PlaneTree) -> Partition:
    return tree.label_set()


def _lift_inplace(tree: PlaneTree, u: NodeRef, v: NodeRef) -> list[NodeRef]:
    kids = tree.children[u]
    try:
        j = kids.index(v)
    except ValueError:
        raise TreeError(f"node {v} is not a child of node {u}") from None
    removed = tree.subtree(v)
    moved = [x for w in removed for x in tree.labels[w]]
    tree.labels[u] = tuple(sorted(tree.labels[u] + tuple(moved)))
    del kids[j]
    for w in removed:
        tree.labels[w] = None
        tree.children[w] = []
        tree.parent[w] = -1
    return removed


def lift_edge(tree: PlaneTree, u: NodeRef, v: NodeRef) -> PlaneTree:
    """Move every label of the subtree at ``v`` into ``u`` and drop that
    subtree; the rest of the tree keeps its shape and planar order."""
    out = tree.copy()
    _lift_inplace(out, u, v)
    return out


def sample_lift(tree: PlaneTree, rng=None, time: float = 0.0) -> LiftEvent:
    """Pick a node uniformly, then (unless it is a leaf) one of its children
    uniformly.  The tree is not modified."""
    rng = as_rng(rng)
    nodes = tree.nodes()
    u = nodes[randbelow(rng, len(nodes))]
    kids = tree.children[u]
    if not kids:
        return LiftEvent(time, u)
    v = kids[randbelow(rng, len(kids))]
    sub = tree.subtree(v)
    minima = tuple(sorted([tree.labels[u][0]] + [tree.labels[w][0] for w in sub]))
    size = sum(len(tree.labels[w]) for w in sub)
    return LiftEvent(time, u, v, len(minima), minima, size)


def simulate_lift_chain(
    tree: PlaneTree,
    rng=None,
    horizon: Optional[float] = None,
    record_null: bool = False,
    max_merges: Optional[int] = None,
) -> LiftTrajectory:
    """Run the lifting chain from ``tree`` until one node is left, the
    horizon passes, or ``max_merges`` state changes have happened.

    Every node carries a rate-1 clock; equivalently events arrive at rate
    equal to the current node count and hit a uniform node.
    """
    rng = as_rng(rng)
    work = tree.copy()
    alive = work.nodes()
    where = {v: i for i, v in enumerate(alive)}
    labels, children = work.labels, work.children
    events: list[LiftEvent] = []
    t = 0.0
    merges = 0
    while len(alive) > 1:
        if max_merges is not None and merges >= max_merges:
            break
        t_next = t + exponential(rng, len(alive))
        if horizon is not None and t_next > horizon:
            t = horizon
            break
        t = t_next
        u = alive[randbelow(rng, len(alive))]
        kids = children[u]
        if not kids:
            if record_null:
                events.append(LiftEvent(t, u))
            continue
        v = kids[randbelow(rng, len(kids))]
        minima = [labels[u][0]]
        size = 0
        for w in work.subtree(v):
            minima.append(labels[w][0])
            size += len(labels[w])
        removed = _lift_inplace(work, u, v)
        for w in removed:
            i = where.pop(w)
            last = alive.pop()
            if last != w:
                alive[i] = last
                where[last] = i
        minima.sort()
        events.append(LiftEvent(t, u, v, len(minima), tuple(minima), size))
        merges += 1
    return LiftTrajectory(tree, events, work, t, len(alive) == 1)
