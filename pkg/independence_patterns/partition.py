"""
partition.py

Set-partition combinatorics: canonical restricted-growth representation,
Bell and Stirling numbers, exhaustive enumeration, exact uniform sampling and
the three move neighbourhoods (Gibbs reassignment, merge, two-way split) used
by the samplers.
"""
import math
import threading
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InputError, ResourceGuardError

logger = logging.getLogger("independence_patterns")

BlockKey = Tuple[int, ...]

EXACT_INTEGER_LIMIT = 30
ENUMERATION_LIMIT = 12

_stirling_rows: List[Tuple[int, ...]] = [(1,)]
_stirling_lock = threading.Lock()


def block_key(elements: Iterable[int]) -> BlockKey:
    """Return the sorted, duplicate-free key of a block."""
    key = tuple(sorted({int(e) for e in elements}))
    if not key:
        raise InputError("A block must contain at least one element")
    if key[0] < 0:
        raise InputError(f"Negative element in block {key}")
    return key


@dataclass(frozen=True, order=True)
class Partition:
    """
    A set partition of {0, ..., D-1} stored as a restricted growth string.

    Label of element 0 is 0 and every later label is at most one more than
    the largest label seen before it, so equal partitions have equal rgs and
    ordering is lexicographic on rgs.
    """
    rgs: Tuple[int, ...]

    def __post_init__(self) -> None:
        rgs = self.rgs
        if not isinstance(rgs, tuple):
            rgs = tuple(int(x) for x in rgs)
            object.__setattr__(self, "rgs", rgs)
        if not rgs:
            raise InputError("A partition needs at least one element")
        highest = -1
        for label in rgs:
            if label < 0 or label > highest + 1:
                raise InputError(f"Not a restricted growth string: {rgs}")
            highest = max(highest, label)

    @classmethod
    def _trusted(cls, rgs: Tuple[int, ...]) -> "Partition":
        # rgs already canonical; skips validation in hot loops
        obj = object.__new__(cls)
        object.__setattr__(obj, "rgs", rgs)
        return obj

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]], D: Optional[int] = None) -> "Partition":
        """Build a partition from 0-based blocks; they must cover 0..D-1 exactly."""
        keys = [block_key(b) for b in blocks]
        seen = [e for key in keys for e in key]
        size = D if D is not None else len(seen)
        if len(seen) != len(set(seen)):
            raise InputError("Blocks overlap")
        if sorted(seen) != list(range(size)):
            raise InputError(f"Blocks do not cover 0..{size - 1} exactly")
        labels = [0] * size
        for label, key in enumerate(keys):
            for e in key:
                labels[e] = label
        return canonicalize(labels)

    @property
    def D(self) -> int:
        return len(self.rgs)

    @cached_property
    def K(self) -> int:
        return max(self.rgs) + 1

    @cached_property
    def blocks(self) -> Tuple[BlockKey, ...]:
        """Blocks ordered by their smallest element."""
        members: List[List[int]] = [[] for _ in range(self.K)]
        for element, label in enumerate(self.rgs):
            members[label].append(element)
        return tuple(tuple(m) for m in members)

    def block_of(self, element: int) -> BlockKey:
        return self.blocks[self.rgs[element]]

    def has_block(self, block: BlockKey) -> bool:
        return bool(block) and block[-1] < self.D and self.block_of(block[0]) == block

    def __str__(self) -> str:
        return format_partition(self)


def canonicalize(labels: Sequence) -> Partition:
    """Relabel blocks by order of first occurrence; idempotent."""
    if len(labels) == 0:
        raise InputError("Cannot canonicalize an empty label sequence")
    mapping = {}
    rgs = []
    for label in labels:
        if label not in mapping:
            mapping[label] = len(mapping)
        rgs.append(mapping[label])
    return Partition._trusted(tuple(rgs))


# --- counting ---

def _stirling_row(a: int) -> Tuple[int, ...]:
    """Row a of the Stirling triangle {a, b}, b = 0..a, exact integers."""
    if a < len(_stirling_rows):
        return _stirling_rows[a]
    with _stirling_lock:
        while len(_stirling_rows) <= a:
            prev = _stirling_rows[-1]
            n = len(prev)
            row = [0] * (n + 1)
            for b in range(1, n + 1):
                row[b] = b * (prev[b] if b < n else 0) + prev[b - 1]
            _stirling_rows.append(tuple(row))
    return _stirling_rows[a]


def bell(D: int) -> int:
    """Number of partitions of a D-set, exact for 0 <= D <= 30."""
    if not 0 <= D <= EXACT_INTEGER_LIMIT:
        raise InputError(f"bell() needs 0 <= D <= {EXACT_INTEGER_LIMIT}, got {D}; use log_bell()")
    return sum(_stirling_row(D))


def stirling2(a: int, b: int) -> int:
    """Stirling number of the second kind {a, b}, exact for 0 <= b <= a <= 30."""
    if not 0 <= b <= a <= EXACT_INTEGER_LIMIT:
        raise InputError(f"stirling2() needs 0 <= b <= a <= {EXACT_INTEGER_LIMIT}, got ({a}, {b})")
    return _stirling_row(a)[b]


def log_bell(D: int) -> float:
    if D < 0:
        raise InputError(f"log_bell() needs D >= 0, got {D}")
    return math.log(sum(_stirling_row(D)))


def log_stirling2(a: int, b: int) -> float:
    if not 0 <= b <= a:
        raise InputError(f"log_stirling2() needs 0 <= b <= a, got ({a}, {b})")
    value = _stirling_row(a)[b]
    return math.log(value) if value else -math.inf


def block_count_prior(D: int) -> np.ndarray:
    """
    Probability of each block count K = 1..D under the uniform prior on
    partitions; entry K-1 is {D, K} / bell(D).
    """
    if D < 1:
        raise InputError(f"block_count_prior() needs D >= 1, got {D}")
    row = _stirling_row(D)
    total = sum(row)
    return np.array([row[k] / total for k in range(1, D + 1)])


# --- enumeration and sampling ---

def enumerate_partitions(D: int) -> Iterator[Partition]:
    """Yield every partition of a D-set once, in lexicographic rgs order."""
    if D < 1:
        raise InputError(f"Cannot enumerate partitions of {D} elements")
    if D > ENUMERATION_LIMIT:
        raise ResourceGuardError(
            f"Exhaustive enumeration is limited to D <= {ENUMERATION_LIMIT} "
            f"(got D={D}); use the sampler instead"
        )
    rgs = [0] * D
    running_max = [0] * D
    while True:
        yield Partition._trusted(tuple(rgs))
        i = D - 1
        while i > 0 and rgs[i] > running_max[i - 1]:
            i -= 1
        if i == 0:
            return
        rgs[i] += 1
        running_max[i] = max(running_max[i - 1], rgs[i])
        for j in range(i + 1, D):
            rgs[j] = 0
            running_max[j] = running_max[i]


def sample_uniform(D: int, rng: np.random.Generator) -> Partition:
    """
    Exact uniform draw over all partitions of a D-set.

    Two-stage urn scheme: pick an urn count k with probability
    k^D / (k! e bell(D)), throw every element into one of k urns uniformly,
    then drop empty urns by canonicalizing.
    """
    if D < 1:
        raise InputError(f"Cannot sample a partition of {D} elements")
    log_norm = 1.0 + log_bell(D)
    u = rng.random()
    cumulative = 0.0
    k = 0
    while True:
        k += 1
        term = math.exp(D * math.log(k) - math.lgamma(k + 1) - log_norm)
        cumulative += term
        if cumulative >= u or (k > D and term < 1e-17):
            break
    return canonicalize(rng.integers(0, k, size=D).tolist())


# --- move neighbourhoods ---

def gibbs_neighbors(p: Partition, element: int) -> List[Partition]:
    """
    Partitions reachable by moving `element` to any existing block or to a
    new singleton. Includes p itself; at most K + 1 distinct entries.
    """
    if not 0 <= element < p.D:
        raise InputError(f"Element {element} out of range for D={p.D}")
    labels = list(p.rgs)
    out: List[Partition] = []
    seen = set()
    for target in range(p.K + 1):
        labels[element] = target
        q = canonicalize(labels)
        if q not in seen:
            seen.add(q)
            out.append(q)
    return out


def merge_count(p: Partition) -> int:
    return p.K * (p.K - 1) // 2


def split_count(p: Partition) -> int:
    return sum((1 << (len(b) - 1)) - 1 for b in p.blocks if len(b) >= 2)


def merge_neighbors(p: Partition) -> List[Partition]:
    """All K(K-1)/2 partitions obtained by merging one pair of blocks."""
    out: List[Partition] = []
    for i in range(p.K):
        for j in range(i + 1, p.K):
            out.append(canonicalize([i if label == j else label for label in p.rgs]))
    return out


def split_neighbors(p: Partition) -> List[Partition]:
    """
    All divisions of one block into two. The smallest element of the block
    stays put and a binary mask over the remaining elements selects the new
    block, so each block of size s yields 2^(s-1) - 1 distinct partitions.
    """
    out: List[Partition] = []
    new_label = p.K
    for block in p.blocks:
        rest = block[1:]
        for mask in range(1, 1 << len(rest)):
            labels = list(p.rgs)
            for bit, element in enumerate(rest):
                if mask >> bit & 1:
                    labels[element] = new_label
            out.append(canonicalize(labels))
    return out


def neighbor_at(p: Partition, index: int) -> Partition:
    """
    Entry `index` of merge_neighbors(p) + split_neighbors(p), built on its
    own without listing the others.
    """
    if not 0 <= index < merge_count(p) + split_count(p):
        raise InputError(f"Neighbour index {index} out of range for {format_partition(p)}")
    if index < merge_count(p):
        i, row = 0, p.K - 1
        while index >= row:
            index -= row
            i += 1
            row -= 1
        j = i + 1 + index
        return canonicalize([i if label == j else label for label in p.rgs])
    index -= merge_count(p)
    for block in p.blocks:
        divisions = (1 << (len(block) - 1)) - 1
        if index < divisions:
            mask = index + 1
            labels = list(p.rgs)
            for bit, element in enumerate(block[1:]):
                if mask >> bit & 1:
                    labels[element] = p.K
            return canonicalize(labels)
        index -= divisions
    raise AssertionError("unreachable")


def refines(fine: Partition, coarse: Partition) -> bool:
    """True when every block of `fine` lies inside a block of `coarse`."""
    if fine.D != coarse.D:
        raise InputError(f"Dimension mismatch: {fine.D} vs {coarse.D}")
    return all(len({coarse.rgs[e] for e in block}) == 1 for block in fine.blocks)


# --- text format ---

def format_partition(p: Partition) -> str:
    """Blocks by smallest element, 1-based, '|' separated ('12|356|4')."""
    joiner = "" if p.D <= 9 else ","
    return "|".join(joiner.join(str(e + 1) for e in block) for block in p.blocks)


def parse_partition(text: str, D: Optional[int] = None) -> Partition:
    """
    Parse '12|356|4' (or '1,10|2,3' when D >= 10) into a Partition.
    Without commas, D >= 10 means every '|' chunk is one element
    ('1|2|...|10'); with D unknown, digit reading is tried first.
    Rejects overlapping, missing and out-of-range elements.
    """
    text = text.strip()
    if not text:
        raise InputError("Empty partition string")
    if "," in text or (D is not None and D >= 10):
        return _parse_blocks(text, D, whole_chunks=True)
    try:
        return _parse_blocks(text, D, whole_chunks=False)
    except InputError as digit_error:
        if D is not None:
            raise
        try:
            return _parse_blocks(text, D, whole_chunks=True)
        except InputError:
            raise digit_error from None


def _parse_blocks(text: str, D: Optional[int], whole_chunks: bool) -> Partition:
    blocks = []
    for chunk in text.split("|"):
        chunk = chunk.strip()
        if not chunk:
            raise InputError(f"Empty block in partition '{text}'")
        items = chunk.split(",") if whole_chunks else list(chunk)
        try:
            blocks.append([int(item) - 1 for item in items])
        except ValueError:
            raise InputError(f"Invalid element in partition '{text}'")
    elements = [e for b in blocks for e in b]
    if any(e < 0 for e in elements):
        raise InputError(f"Elements are 1-based in partition '{text}'")
    try:
        return Partition.from_blocks(blocks, D)
    except InputError as e:
        raise InputError(f"Invalid partition '{text}': {e}")
