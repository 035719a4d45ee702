"""Finite set partitions with blocks kept in order of least elements."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class Partition:
    """An immutable partition of a finite set of positive integers.

    ``blocks`` is a tuple of ascending tuples, ordered by least element.
    Build instances through :meth:`from_blocks` unless the blocks are already
    canonical.
    """

    blocks: tuple[tuple[int, ...], ...]

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]]) -> Partition:
        canon = []
        seen: set[int] = set()
        for block in blocks:
            b = tuple(sorted(set(block)))
            if not b:
                raise PartitionError("empty block")
            for x in b:
                if not isinstance(x, int) or x < 1:
                    raise PartitionError(f"labels must be positive integers, got {x!r}")
                if x in seen:
                    raise PartitionError(f"label {x} appears in two blocks")
                seen.add(x)
            canon.append(b)
        if not canon:
            raise PartitionError("a partition needs at least one block")
        canon.sort(key=lambda b: b[0])
        return cls(tuple(canon))

    @property
    def ground_set(self) -> tuple[int, ...]:
        return tuple(sorted(x for b in self.blocks for x in b))

    @property
    def size(self) -> int:
        """Number of elements of the ground set."""
        return sum(len(b) for b in self.blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        return iter(self.blocks)

    def block_of(self, x: int) -> int:
        for i, b in enumerate(self.blocks):
            if x in b:
                return i
        raise KeyError(x)

    def minima(self) -> tuple[int, ...]:
        return tuple(b[0] for b in self.blocks)

    def __str__(self) -> str:
        return to_text(self)


def discrete_partition(n: int) -> Partition:
    """The partition of {1, ..., n} into singletons."""
    if n < 1:
        raise PartitionError(f"n must be positive, got {n}")
    return Partition(tuple((i,) for i in range(1, n + 1)))


def merge(pi: Partition, which: Iterable[int]) -> Partition:
    """Replace the blocks at positions ``which`` by their union."""
    idx = set(which)
    if len(idx) < 2:
        raise PartitionError("merge needs at least two distinct block indices")
    for i in idx:
        if not 0 <= i < len(pi.blocks):
            raise PartitionError(f"block index {i} out of range for {len(pi.blocks)} blocks")
    union = tuple(sorted(x for i in idx for x in pi.blocks[i]))
    rest = [b for i, b in enumerate(pi.blocks) if i not in idx]
    rest.append(union)
    rest.sort(key=lambda b: b[0])
    return Partition(tuple(rest))


def restrict(pi: Partition, m: int) -> Partition:
    """Restriction to {1, ..., m}: the non-empty intersections B & [m]."""
    if m < 1:
        raise PartitionError(f"m must be positive, got {m}")
    blocks = tuple(c for c in (tuple(x for x in b if x <= m) for b in pi.blocks) if c)
    if not blocks:
        raise PartitionError(f"no element of the ground set is <= {m}")
    # least elements are untouched by the intersection, so the order survives
    return Partition(blocks)


def restrict_to(pi: Partition, subset: Iterable[int]) -> Partition:
    """Restriction to an arbitrary subset of the ground set."""
    keep = set(subset)
    blocks = tuple(c for c in (tuple(x for x in b if x in keep) for b in pi.blocks) if c)
    if not blocks:
        raise PartitionError("restriction is empty")
    return Partition.from_blocks(blocks)


def order_blocks(pi: Partition | Sequence[Iterable[int]]) -> tuple[tuple[int, ...], ...]:
    blocks = pi.blocks if isinstance(pi, Partition) else pi
    return Partition.from_blocks(blocks).blocks


def relabel(pi: Partition, shift: int) -> Partition:
    """Add ``shift`` to every label."""
    return Partition(tuple(tuple(x + shift for x in b) for b in pi.blocks))


def to_text(pi: Partition) -> str:
    return "|".join("{" + ",".join(map(str, b)) + "}" for b in pi.blocks)


_BLOCK = re.compile(r"\{(\d+(?:,\d+)*)\}")


def from_text(s: str) -> Partition:
    """Parse the ``{1,5}|{2}|{3,4}`` form produced by :func:`to_text`."""
    parts = s.strip().split("|")
    blocks = []
    for part in parts:
        m = _BLOCK.fullmatch(part)
        if m is None:
            raise PartitionError(f"malformed block {part!r} in {s!r}")
        blocks.append([int(x) for x in m.group(1).split(",")])
    return Partition.from_blocks(blocks)


def set_partitions(elements: Sequence[int]) -> Iterator[Partition]:
    """All partitions of ``elements`` (Bell-number many), for small sets."""

    def rec(i: int, acc: list[list[int]]) -> Iterator[list[list[int]]]:
        if i == len(elements):
            yield acc
            return
        x = elements[i]
        for b in acc:
            b.append(x)
            yield from rec(i + 1, acc)
            b.pop()
        acc.append([x])
        yield from rec(i + 1, acc)
        acc.pop()

    if not elements:
        return
    for blocks in rec(0, []):
        yield Partition.from_blocks(blocks)
