"""Time-bucketed forests of AVL trees.

Every seed kind (pheromone, match, confirmation) lives in a
:class:`BucketedStore`: ``k + 1`` AVL trees, one per 0.1 s slice of
timestamps.  Lookups and inserts cost ``O(log N)`` inside one bucket; expiry
throws a whole bucket away at once, which costs ``O(N)`` in that bucket.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, Generic, Iterator, Optional, TypeVar

R = TypeVar("R")

BUCKET_WIDTH = 0.1
# absorbs float error in t / width for values such as 0.3 / 0.1
_TICK_EPS = 1e-9


class StaleTimestamp(LookupError):
    """The timestamp falls outside the store's live window."""


# --------------------------------------------------------------------------
# Records
# --------------------------------------------------------------------------

@dataclass
class PheromoneEntry:
    """Both directions of one seed, kept in a single tree node.

    The ``*0`` fields describe P(0) (travelling from the payer), the ``*1``
    fields P(1) (travelling from the payee).  A sender of ``0`` means the
    direction was originated locally.
    """
    seed: int
    amount: int
    pheromone0: bool = False
    pheromone1: bool = False
    fees0: int = 0
    fees1: int = 0
    counter0: int = 0
    counter1: int = 0
    sender0: int = 0
    sender1: int = 0

    def has(self, direction: int) -> bool:
        return self.pheromone1 if direction else self.pheromone0

    def get(self, direction: int) -> tuple[int, int, int]:
        """(counter, sender, fees) for one direction."""
        if direction:
            return self.counter1, self.sender1, self.fees1
        return self.counter0, self.sender0, self.fees0

    def set(self, direction: int, counter: int, sender: int, fees: int) -> None:
        if direction:
            self.pheromone1 = True
            self.counter1, self.sender1, self.fees1 = counter, sender, fees
        else:
            self.pheromone0 = True
            self.counter0, self.sender0, self.fees0 = counter, sender, fees


@dataclass
class MatchEntry:
    match_id: int
    target: int


@dataclass
class SpecialMatchEntry:
    match_id: int
    target: int
    total_counter: int
    total_fees: int


@dataclass
class ConfirmationEntry:
    match_id: int
    target: int
    check: int


# --------------------------------------------------------------------------
# AVL tree
# --------------------------------------------------------------------------

class AvlNode:
    __slots__ = ("key", "record", "left", "right", "balance")

    def __init__(self, key: int, record) -> None:
        self.key = key
        self.record = record
        self.left: Optional[AvlNode] = None
        self.right: Optional[AvlNode] = None
        # height(right) - height(left), always in {-1, 0, 1} between operations
        self.balance = 0


def _rotate_right(z: AvlNode) -> AvlNode:
    y = z.left
    z.left = y.right
    y.right = z
    return y


def _rotate_left(z: AvlNode) -> AvlNode:
    y = z.right
    z.right = y.left
    y.left = z
    return y


def _rebalance_left_heavy(z: AvlNode) -> AvlNode:
    y = z.left
    if y.balance < 0:
        z.balance = y.balance = 0
        return _rotate_right(z)
    x = y.right
    z.balance = 1 if x.balance < 0 else 0
    y.balance = -1 if x.balance > 0 else 0
    x.balance = 0
    z.left = _rotate_left(y)
    return _rotate_right(z)


def _rebalance_right_heavy(z: AvlNode) -> AvlNode:
    y = z.right
    if y.balance > 0:
        z.balance = y.balance = 0
        return _rotate_left(z)
    x = y.left
    z.balance = -1 if x.balance > 0 else 0
    y.balance = 1 if x.balance < 0 else 0
    x.balance = 0
    z.right = _rotate_right(y)
    return _rotate_left(z)


class AvlTree(Generic[R]):
    """AVL tree mapping unsigned integer keys to records.

    Nodes carry a balance factor rather than a height, so an insertion only
    touches the nodes on its own search path (plus at most three more in a
    rotation).

    Duplicate inserts leave the existing record untouched; callers change
    records through :meth:`update`.  There is no single-key deletion, only
    :meth:`destroy` for the whole tree.
    """

    def __init__(self) -> None:
        self.root: Optional[AvlNode] = None
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def __contains__(self, key: int) -> bool:
        return self._find(key) is not None

    @property
    def height(self) -> int:
        h, node = 0, self.root
        while node is not None:
            h += 1
            node = node.left if node.balance < 0 else node.right
        return h

    def _find(self, key: int) -> Optional[AvlNode]:
        node = self.root
        while node is not None:
            if key < node.key:
                node = node.left
            elif key > node.key:
                node = node.right
            else:
                return node
        return None

    def lookup(self, key: int) -> Optional[R]:
        node = self._find(key)
        return node.record if node is not None else None

    def insert(self, key: int, record: R) -> bool:
        """Insert ``key``; return False (and change nothing) if present."""
        if self.root is None:
            self.root = AvlNode(key, record)
            self.size = 1
            return True
        # iterative descent, then retrace the recorded path
        path: list[AvlNode] = []
        node = self.root
        while True:
            path.append(node)
            if key < node.key:
                if node.left is None:
                    child = node.left = AvlNode(key, record)
                    break
                node = node.left
            elif key > node.key:
                if node.right is None:
                    child = node.right = AvlNode(key, record)
                    break
                node = node.right
            else:
                return False
        self.size += 1

        for i in range(len(path) - 1, -1, -1):
            node = path[i]
            b = node.balance + (-1 if node.left is child else 1)
            if b == 0:
                node.balance = 0
                break
            if b == 1 or b == -1:
                node.balance = b
                child = node
                continue
            # one (single or double) rotation restores the pre-insert height
            sub = _rebalance_left_heavy(node) if b < 0 else _rebalance_right_heavy(node)
            if i == 0:
                self.root = sub
            elif path[i - 1].left is node:
                path[i - 1].left = sub
            else:
                path[i - 1].right = sub
            break
        return True

    def update(self, key: int, mutator: Callable[[R], R]) -> bool:
        node = self._find(key)
        if node is None:
            return False
        node.record = mutator(node.record)
        return True

    def items(self) -> Iterator[tuple[int, R]]:
        """In-order (key, record) pairs."""
        stack: list[AvlNode] = []
        node = self.root
        while stack or node is not None:
            while node is not None:
                stack.append(node)
                node = node.left
            node = stack.pop()
            yield node.key, node.record
            node = node.right

    def keys(self) -> Iterator[int]:
        return (k for k, _ in self.items())

    def destroy(self) -> int:
        """Unlink every node and return how many there were."""
        count = 0
        stack = [self.root] if self.root is not None else []
        while stack:
            node = stack.pop()
            if node.left is not None:
                stack.append(node.left)
            if node.right is not None:
                stack.append(node.right)
            node.left = node.right = node.record = None
            count += 1
        self.root = None
        self.size = 0
        return count

    def check_invariants(self) -> None:
        """Raise AssertionError on any order, balance or height violation."""
        def walk(node, lo, hi) -> tuple[int, int]:
            if node is None:
                return 0, 0
            assert (lo is None or node.key > lo) and (hi is None or node.key < hi), \
                f"order violated at key {node.key}"
            lh, ln = walk(node.left, lo, node.key)
            rh, rn = walk(node.right, node.key, hi)
            assert abs(rh - lh) <= 1, f"unbalanced at key {node.key}"
            assert node.balance == rh - lh, f"stale balance factor at key {node.key}"
            return 1 + max(lh, rh), ln + rn + 1

        _, n = walk(self.root, None, None)
        assert n == self.size, f"size {self.size} != node count {n}"

    @classmethod
    def from_sorted(cls, keys, record_factory: Callable[[int], R] = lambda k: None) -> "AvlTree[R]":
        """Build a perfectly balanced tree from strictly increasing keys in O(N)."""
        keys = list(keys)

        def build(lo: int, hi: int) -> tuple[Optional[AvlNode], int]:
            if lo >= hi:
                return None, 0
            mid = (lo + hi) // 2
            node = AvlNode(keys[mid], record_factory(keys[mid]))
            node.left, lh = build(lo, mid)
            node.right, rh = build(mid + 1, hi)
            node.balance = rh - lh
            return node, 1 + max(lh, rh)

        tree = cls()
        tree.root, _ = build(0, len(keys))
        tree.size = len(keys)
        return tree


# --------------------------------------------------------------------------
# Bucketed forest
# --------------------------------------------------------------------------

def time_to_tick(t: float, width: float = BUCKET_WIDTH) -> int:
    return math.floor(t / width + _TICK_EPS)


class BucketedStore(Generic[R]):
    """``k + 1`` AVL trees, each holding one ``bucket_width`` slice of time.

    Bucket ``i`` holds records whose timestamp lies in
    ``[epoch_start + i*width, epoch_start + (i+1)*width)``.
    """

    def __init__(self, lifetime: float = 2.0, epoch_start: float = 0.0,
                 bucket_width: float = BUCKET_WIDTH) -> None:
        if lifetime <= 0 or bucket_width <= 0:
            raise ValueError("lifetime and bucket_width must be positive")
        self.lifetime = lifetime
        self.bucket_width = bucket_width
        self.k = round(lifetime / bucket_width)
        self.epoch_tick = time_to_tick(epoch_start, bucket_width)
        self.buckets: deque[AvlTree[R]] = deque(AvlTree() for _ in range(self.k + 1))

    @property
    def n_buckets(self) -> int:
        return self.k + 1

    @property
    def epoch_start(self) -> float:
        return self.epoch_tick * self.bucket_width

    @property
    def window(self) -> tuple[float, float]:
        """Live half-open time window ``[start, end)``."""
        return self.epoch_start, (self.epoch_tick + self.n_buckets) * self.bucket_width

    def bucket_index(self, timestamp: float) -> int:
        i = time_to_tick(timestamp, self.bucket_width) - self.epoch_tick
        if not 0 <= i < self.n_buckets:
            lo, hi = self.window
            raise StaleTimestamp(f"timestamp {timestamp:.3f} outside live window [{lo:.3f}, {hi:.3f})")
        return i

    def tree_for(self, timestamp: float) -> AvlTree[R]:
        return self.buckets[self.bucket_index(timestamp)]

    def lookup(self, key: int, timestamp: float) -> Optional[R]:
        return self.tree_for(timestamp).lookup(key)

    def insert(self, key: int, record: R, timestamp: float) -> bool:
        return self.tree_for(timestamp).insert(key, record)

    def update(self, key: int, timestamp: float, mutator: Callable[[R], R]) -> bool:
        return self.tree_for(timestamp).update(key, mutator)

    def rotate(self, now: float) -> int:
        """Expire every bucket that has fallen out of the window ending at ``now``.

        Returns the number of records destroyed.
        """
        now_tick = time_to_tick(now, self.bucket_width)
        due = now_tick - (self.epoch_tick + self.n_buckets) + 1
        if due <= 0:
            return 0
        expired = 0
        for _ in range(min(due, self.n_buckets)):
            expired += self.buckets.popleft().destroy()
            self.buckets.append(AvlTree())
        self.epoch_tick += due
        return expired

    def bucket_sizes(self) -> list[int]:
        return [len(tree) for tree in self.buckets]

    def __len__(self) -> int:
        return sum(len(tree) for tree in self.buckets)

    def check_invariants(self) -> None:
        for tree in self.buckets:
            tree.check_invariants()
