"""Plane-oriented recursive trees (PORTs).

A PORT on a partition ``pi`` is a rooted planar tree whose nodes carry the
blocks of ``pi`` and whose block minima increase along every path away from
the root.  A uniformly random PORT is a linear preferential attachment tree
(LPAT).

Nodes live in an indexed pool; a node reference is its integer position in
the pool and stays valid when other parts of the tree are removed.
"""

from __future__ import annotations

import math
import re
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

from lpatlift._rng import as_rng, randbelow
from lpatlift.partitions import Partition, discrete_partition

ENUMERATION_CAP = 9

NodeRef = int


class TreeError(ValueError):
    pass


class EnumerationCapError(TreeError):
    pass


class PlaneTree:
    __slots__ = ("labels", "children", "parent", "root")

    def __init__(
        self,
        labels: list[tuple[int, ...] | None],
        children: list[list[int]],
        parent: list[int],
        root: int = 0,
    ):
        self.labels = labels
        self.children = children
        self.parent = parent  # -1 for the root and for removed nodes
        self.root = root

    @classmethod
    def single(cls, label: Iterable[int] = (1,)) -> PlaneTree:
        return cls([tuple(sorted(label))], [[]], [-1])

    @classmethod
    def from_parents(
        cls, parents: Sequence[int], labels: Sequence[Iterable[int]] | None = None
    ) -> PlaneTree:
        """Build from a parent array (``parents[0] == -1``) listing children
        in order of appearance.  Labels default to singletons ``1..k``."""
        k = len(parents)
        if labels is None:
            labs = [(i + 1,) for i in range(k)]
        else:
            labs = [tuple(sorted(b)) for b in labels]
        children: list[list[int]] = [[] for _ in range(k)]
        for v in range(1, k):
            children[parents[v]].append(v)
        return cls(labs, children, list(parents))

    def copy(self) -> PlaneTree:
        return PlaneTree(list(self.labels), [list(c) for c in self.children], list(self.parent), self.root)

    # -- traversal -------------------------------------------------------

    def nodes(self) -> list[NodeRef]:
        """Live nodes in preorder (planar order)."""
        out = []
        stack = [self.root]
        while stack:
            v = stack.pop()
            out.append(v)
            stack.extend(reversed(self.children[v]))
        return out

    def subtree(self, v: NodeRef) -> list[NodeRef]:
        out = []
        stack = [v]
        while stack:
            w = stack.pop()
            out.append(w)
            stack.extend(reversed(self.children[w]))
        return out

    def __len__(self) -> int:
        return len(self.nodes())

    def out_degree(self, v: NodeRef) -> int:
        return len(self.children[v])

    def is_leaf(self, v: NodeRef) -> bool:
        return not self.children[v]

    def find(self, label_min: int) -> NodeRef:
        """The live node whose label has least element ``label_min``."""
        for v in self.nodes():
            if self.labels[v][0] == label_min:
                return v
        raise KeyError(label_min)

    def label_set(self) -> Partition:
        return Partition.from_blocks(self.labels[v] for v in self.nodes())

    def validate(self) -> None:
        """Raise :class:`TreeError` unless the tree is a PORT on its labels."""
        seen: set[int] = set()
        for v in self.nodes():
            lab = self.labels[v]
            if not lab or list(lab) != sorted(set(lab)):
                raise TreeError(f"node {v} has a malformed label {lab!r}")
            if seen.intersection(lab):
                raise TreeError(f"label of node {v} overlaps another node")
            seen.update(lab)
            for c in self.children[v]:
                if self.parent[c] != v:
                    raise TreeError(f"parent link of node {c} is inconsistent")
                if self.labels[c][0] <= lab[0]:
                    raise TreeError(
                        f"increasing condition violated: {self.labels[c]} below {lab}"
                    )
        if self.parent[self.root] != -1:
            raise TreeError("root has a parent")

    # -- comparison --------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PlaneTree):
            return NotImplemented
        return encode(self) == encode(other)

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"PlaneTree({encode(self)!r})"

    def __str__(self) -> str:
        return encode(self)


# -- counting ----------------------------------------------------------------


def double_factorial(n: int) -> int:
    if n < -1:
        raise ValueError(f"double factorial undefined for {n}")
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def catalan(n: int) -> int:
    if n < 0:
        raise ValueError(f"Catalan number undefined for {n}")
    return math.factorial(2 * n) // (math.factorial(n) * math.factorial(n + 1))


def port_count(n: int) -> int:
    """Number of PORTs on ``n`` labelled nodes, ``(2n - 3)!!``."""
    if n < 1:
        raise ValueError(f"tree size must be positive, got {n}")
    return double_factorial(2 * n - 3)


def port_count_catalan(n: int) -> int:
    """Same count as :func:`port_count`, via ``n! C_{n-1} / 2^{n-1}``."""
    if n < 1:
        raise ValueError(f"tree size must be positive, got {n}")
    num = math.factorial(n) * catalan(n - 1)
    q, r = divmod(num, 2 ** (n - 1))
    assert r == 0
    return q


# -- enumeration and sampling ---------------------------------------------------
#
# Building a tree on k nodes adds node i (i = 1..k-1, 0-based) into one of the
# 2i - 1 slots of the current tree.  Slots are ordered node by node in label
# order and, within a node with c children, by gap 0..c from left to right.
# A tree is thus identified with its slot sequence; enumeration walks these
# sequences lexicographically.


def _slot_to_position(children: list[list[int]], i: int, slot: int) -> tuple[int, int]:
    for v in range(i):
        width = len(children[v]) + 1
        if slot < width:
            return v, slot
        slot -= width
    raise IndexError(slot)


@lru_cache(maxsize=64)
def _singletons(k: int) -> tuple[tuple[int, ...], ...]:
    return discrete_partition(k).blocks


def _blocks(pi: Partition | int) -> tuple[tuple[int, ...], ...]:
    if isinstance(pi, int):
        return _singletons(pi)
    return pi.blocks


def port_from_code(code: Sequence[int], pi: Partition | int | None = None) -> PlaneTree:
    """The PORT with slot sequence ``code`` (``code[j]`` < 2j + 1)."""
    k = len(code) + 1
    blocks = _blocks(pi if pi is not None else k)
    if len(blocks) != k:
        raise TreeError(f"code of length {len(code)} needs {k} blocks, got {len(blocks)}")
    children: list[list[int]] = [[] for _ in range(k)]
    parent = [-1] * k
    for i in range(1, k):
        slot = code[i - 1]
        if not 0 <= slot < 2 * i - 1:
            raise TreeError(f"slot {slot} out of range at step {i}")
        v, gap = _slot_to_position(children, i, slot)
        children[v].insert(gap, i)
        parent[i] = v
    return PlaneTree(list(blocks), children, parent)


def port_code(tree: PlaneTree) -> tuple[int, ...]:
    """Inverse of :func:`port_from_code`."""
    order = sorted(tree.nodes(), key=lambda v: tree.labels[v][0])
    rank = {v: i for i, v in enumerate(order)}
    k = len(order)
    kids = [[rank[c] for c in tree.children[v]] for v in order]
    code = []
    for i in range(k - 1, 0, -1):
        p = next(v for v in range(i) if i in kids[v])
        gap = kids[p].index(i)
        kids[p].pop(gap)
        code.append(sum(len(kids[v]) + 1 for v in range(p)) + gap)
    return tuple(reversed(code))


def iter_ports(pi: Partition | int, cap: int = ENUMERATION_CAP) -> Iterator[PlaneTree]:
    """Yield every PORT on ``pi`` exactly once, in canonical order."""
    blocks = _blocks(pi)
    k = len(blocks)
    if k > cap:
        raise EnumerationCapError(
            f"refusing to enumerate trees on {k} nodes; the cap is {cap} nodes"
        )
    children: list[list[int]] = [[] for _ in range(k)]
    parent = [-1] * k
    labels = list(blocks)

    def rec(i: int) -> Iterator[PlaneTree]:
        if i == k:
            yield PlaneTree(list(labels), [list(c) for c in children], list(parent))
            return
        for v in range(i):
            for gap in range(len(children[v]) + 1):
                children[v].insert(gap, i)
                parent[i] = v
                yield from rec(i + 1)
                children[v].pop(gap)
        parent[i] = -1

    yield from rec(1)


def enumerate_ports(pi: Partition | int, cap: int = ENUMERATION_CAP) -> list[PlaneTree]:
    return list(iter_ports(pi, cap))


def sample_lpat(pi: Partition | int, rng=None) -> PlaneTree:
    """Uniform random PORT on ``pi`` by preferential attachment.

    ``slots`` holds node v exactly ``d+(v) + 1`` times, so a uniform entry is
    a node chosen with probability proportional to ``d+(v) + 1``; the new
    node then takes one of the ``d+(v) + 1`` gaps among v's children.
    """
    rng = as_rng(rng)
    blocks = _blocks(pi)
    k = len(blocks)
    children: list[list[int]] = [[] for _ in range(k)]
    parent = [-1] * k
    slots = [0]
    for i in range(1, k):
        v = slots[randbelow(rng, len(slots))]
        kids = children[v]
        kids.insert(randbelow(rng, len(kids) + 1), i)
        parent[i] = v
        slots.append(v)
        slots.append(i)
    return PlaneTree(list(blocks), children, parent)


def sample_lpat_parents(n: int, rng=None) -> list[int]:
    """Parent array of an LPAT(n) without planar order (cheaper when only
    the unordered shape matters)."""
    rng = as_rng(rng)
    parent = [-1] * n
    slots = [0]
    for i in range(1, n):
        v = slots[randbelow(rng, len(slots))]
        parent[i] = v
        slots.append(v)
        slots.append(i)
    return parent


def restrict_tree(tree: PlaneTree, m: int) -> PlaneTree:
    """Subtree spanned by the nodes whose labels meet {1..m}, with labels
    intersected with {1..m}."""
    if m < 1:
        raise TreeError(f"m must be positive, got {m}")
    if tree.labels[tree.root][0] > m:
        raise TreeError(f"no label meets [1, {m}]")
    new_index: dict[int, int] = {}
    labels: list[tuple[int, ...] | None] = []
    children: list[list[int]] = []
    parent: list[int] = []
    # minima increase away from the root, so the kept nodes form a subtree
    for v in tree.nodes():
        lab = tuple(x for x in tree.labels[v] if x <= m)
        if not lab:
            continue
        new_index[v] = len(labels)
        labels.append(lab)
        children.append([])
        p = tree.parent[v]
        parent.append(new_index[p] if p != -1 else -1)
        if p != -1:
            children[new_index[p]].append(new_index[v])
    return PlaneTree(labels, children, parent)


# -- text form -----------------------------------------------------------------


def _label_text(lab: Sequence[int]) -> str:
    return "{" + ",".join(map(str, lab)) + "}"


def encode(tree: PlaneTree) -> str:
    labels, children = tree.labels, tree.children

    def rec(v: int) -> str:
        lab = "{" + ",".join(map(str, labels[v])) + "}"
        kids = children[v]
        if not kids:
            return lab
        return lab + "(" + ",".join([rec(c) for c in kids]) + ")"

    try:
        return rec(tree.root)
    except RecursionError:
        return _encode_deep(tree)


def _encode_deep(tree: PlaneTree) -> str:
    out: list[str] = []
    stack: list[object] = [tree.root]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            out.append(item)
            continue
        out.append(_label_text(tree.labels[item]))
        kids = tree.children[item]
        if kids:
            out.append("(")
            seq: list[object] = []
            for j, c in enumerate(kids):
                if j:
                    seq.append(",")
                seq.append(c)
            seq.append(")")
            stack.extend(reversed(seq))
    return "".join(out)


_TOKEN = re.compile(r"\{(\d+(?:,\d+)*)\}|([(),])|(\s+)")


def decode(s: str) -> PlaneTree:
    """Parse the canonical text form; validates the increasing condition."""
    labels: list[tuple[int, ...] | None] = []
    children: list[list[int]] = []
    parent: list[int] = []
    open_nodes: list[int] = []
    prev = "start"  # kind of the previous token
    pos = 0
    while pos < len(s):
        m = _TOKEN.match(s, pos)
        if m is None:
            raise TreeError(f"syntax error at offset {pos} in {s!r}")
        pos = m.end()
        if m.group(3):
            continue
        if m.group(1):
            if prev not in ("start", "(", ","):
                raise TreeError(f"unexpected label at offset {m.start()} in {s!r}")
            lab = tuple(int(x) for x in m.group(1).split(","))
            if list(lab) != sorted(set(lab)):
                raise TreeError(f"label {m.group(0)} is not strictly ascending")
            v = len(labels)
            labels.append(lab)
            children.append([])
            if open_nodes:
                parent.append(open_nodes[-1])
                children[open_nodes[-1]].append(v)
            else:
                parent.append(-1)
            prev = "label"
            continue
        tok = m.group(2)
        if tok == "(":
            if prev != "label":
                raise TreeError(f"'(' must follow a label, offset {m.start()} in {s!r}")
            open_nodes.append(len(labels) - 1)
        elif tok == ",":
            if prev not in ("label", ")") or not open_nodes:
                raise TreeError(f"misplaced ',' at offset {m.start()} in {s!r}")
        else:
            if prev not in ("label", ")") or not open_nodes:
                raise TreeError(f"unbalanced ')' at offset {m.start()} in {s!r}")
            open_nodes.pop()
        prev = tok
    if not labels or open_nodes or prev not in ("label", ")"):
        raise TreeError(f"incomplete tree {s!r}")
    tree = PlaneTree(labels, children, parent)
    tree.validate()
    return tree
