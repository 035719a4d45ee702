"""Chinese restaurant process, GEM stick breaking, and the partition of a
tree by the subtrees hanging off its root."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from lpatlift._rng import Stream, as_rng
from lpatlift.lifting import LiftTrajectory
from lpatlift.partitions import Partition
from lpatlift.port_trees import PlaneTree, TreeError


def check_crp_parameters(alpha, theta) -> None:
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if not theta > -alpha:
        raise ValueError(f"theta must exceed -alpha, got theta={theta}, alpha={alpha}")


@dataclass
class CrpState:
    """Tables in order of creation, each a list of customers."""

    alpha: float
    theta: float
    tables: list[list[int]]
    m: int = 0

    def seat(self, rng) -> int:
        """Seat customer m + 1 and return the index of its table."""
        self.m += 1
        if self.m == 1:
            self.tables.append([1])
            return 0
        seated = self.m - 1
        u = rng.random() * (seated + self.theta)
        for i, table in enumerate(self.tables):
            u -= len(table) - self.alpha
            if u < 0:
                table.append(self.m)
                return i
        self.tables.append([self.m])
        return len(self.tables) - 1

    def partition(self) -> Partition:
        return Partition(tuple(tuple(t) for t in self.tables))


def sample_crp(m: int, alpha: float, theta: float, rng=None) -> Partition:
    """Partition of {1..m} by tables after m customers of an (alpha, theta)
    restaurant."""
    check_crp_parameters(alpha, theta)
    if m < 1:
        raise ValueError(f"need at least one customer, got {m}")
    rng = as_rng(rng)
    state = CrpState(float(alpha), float(theta), [])
    for _ in range(m):
        state.seat(rng)
    return state.partition()


def root_partition(tree: PlaneTree) -> Partition:
    """Group labels by the subtree of a root child they belong to.

    The root's own label lies in no such subtree and is left out, so for a
    tree on singletons {1..n} the result partitions {2..n}.
    """
    kids = tree.children[tree.root]
    if not kids:
        raise TreeError("root partition needs a tree with at least two nodes")
    blocks = []
    for v in kids:
        blocks.append([x for w in tree.subtree(v) for x in tree.labels[w]])
    return Partition.from_blocks(blocks)


@dataclass(frozen=True)
class StickSequence:
    frequencies: tuple[float, ...]

    def __post_init__(self):
        total = 0.0
        for f in self.frequencies:
            if not 0.0 < f < 1.0:
                raise ValueError(f"stick length {f} outside (0, 1)")
            total += f
        if total >= 1.0:
            raise ValueError("sticks sum to 1 or more")

    def ranked(self) -> tuple[float, ...]:
        """Frequencies in decreasing order."""
        return tuple(sorted(self.frequencies, reverse=True))


def _generator(rng) -> np.random.Generator:
    rng = as_rng(rng)
    if isinstance(rng, Stream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng.getrandbits(64))


def _check_gem(alpha, theta) -> None:
    check_crp_parameters(alpha, theta)
    if alpha >= 1:
        raise ValueError("GEM sticks need alpha < 1")


def gem_sticks_array(count: int, alpha: float, theta: float, size: int, rng=None) -> np.ndarray:
    """``size`` independent GEM(alpha, theta) sequences of ``count`` sticks
    as a ``(size, count)`` array."""
    _check_gem(alpha, theta)
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    gen = _generator(rng)
    i = np.arange(1, count + 1)
    w = gen.beta(1.0 - alpha, theta + i * alpha, size=(size, count))
    left = np.cumprod(1.0 - w, axis=1)
    left = np.hstack([np.ones((size, 1)), left[:, :-1]])
    return left * w


def sample_gem_sticks(count: int, alpha: float, theta: float, rng=None) -> StickSequence:
    """First ``count`` GEM(alpha, theta) frequencies
    ``W_1, (1-W_1) W_2, ...`` with ``W_i ~ beta(1 - alpha, theta + i alpha)``."""
    return StickSequence(tuple(gem_sticks_array(count, alpha, theta, 1, rng)[0].tolist()))


def block_one_jump_log(traj: LiftTrajectory, n: int) -> list[tuple[float, float]]:
    """``(time, jump)`` each time the root's block grows; ``jump`` is the
    number of labels gained divided by ``n``."""
    root = traj.initial.root
    return [
        (ev.time, ev.absorbed_size / n)
        for ev in traj.events
        if ev.picked == root and not ev.is_null
    ]


def sticks_csv(rows: Iterable[tuple[int, StickSequence]]) -> str:
    lines = ["replicate,index,time,value"]
    for rep, sticks in rows:
        for i, f in enumerate(sticks.frequencies, start=1):
            lines.append(f"{rep},{i},,{f!r}")
    return "\n".join(lines) + "\n"


def jump_log_csv(rows: Iterable[tuple[int, list[tuple[float, float]]]]) -> str:
    lines = ["replicate,index,time,value"]
    for rep, log in rows:
        for i, (t, jump) in enumerate(log, start=1):
            lines.append(f"{rep},{i},{t!r},{jump!r}")
    return "\n".join(lines) + "\n"
