"""
cache.py

Block-score cache. Scores are additive over blocks, so memoizing per block
turns every partition score into a sum of cached terms. Optional capacity
bound with least-recently-used eviction; optional lock for sharing one cache
between chain threads.
"""
import math
import threading
import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .errors import InputError, NumericalError
from .models import ModelScorer
from .partition import BlockKey, Partition

logger = logging.getLogger("independence_patterns")


@dataclass
class CacheStats:
    hits: int = 0
    misses: int = 0
    evictions: int = 0
    audits: int = 0
    failures: int = 0

    def as_dict(self) -> Dict[str, int]:
        return dict(hits=self.hits, misses=self.misses, evictions=self.evictions,
                    audits=self.audits, failures=self.failures)


class _Failure:
    """Cached marker for a block whose score raised."""
    __slots__ = ("error",)

    def __init__(self, error: NumericalError) -> None:
        self.error = error


class BlockScoreCache:
    """
    BlockKey -> block log-score map in front of a ModelScorer.

    capacity None means unbounded. With `shared`, inserts and LRU updates are
    serialized by a lock so several chains may use one instance.
    `audit_rate` is the probability that a hit is recomputed and compared.
    """
    def __init__(
        self,
        scorer: ModelScorer,
        capacity: Optional[int] = None,
        shared: bool = False,
        audit_rate: float = 0.0,
        audit_seed: int = 0,
    ) -> None:
        if capacity is not None and capacity < 1:
            raise InputError(f"Cache capacity must be >= 1 or None, got {capacity}")
        if not 0.0 <= audit_rate <= 1.0:
            raise InputError(f"Audit rate must be in [0, 1], got {audit_rate}")
        self.scorer = scorer
        self.capacity = capacity
        self.audit_rate = audit_rate
        self.stats = CacheStats()
        self._entries: "OrderedDict[BlockKey, object]" = OrderedDict()
        self._lock: Optional[threading.Lock] = threading.Lock() if shared else None
        # own stream; chain rngs are never touched by audits
        self._audit_rng = np.random.default_rng(audit_seed)

    def __len__(self) -> int:
        return len(self._entries)

    def block_score(self, block: BlockKey) -> float:
        if self._lock is None:
            return self._lookup(block)
        with self._lock:
            return self._lookup(block)

    def _lookup(self, block: BlockKey) -> float:
        entry = self._entries.get(block)
        if entry is None:
            self.stats.misses += 1
            try:
                entry = self.scorer.block_score(block)
            except NumericalError as e:
                self.stats.failures += 1
                entry = _Failure(e)
            self._insert(block, entry)
        else:
            self.stats.hits += 1
            if self.capacity is not None:
                self._entries.move_to_end(block)
            if self.audit_rate and not isinstance(entry, _Failure) and self._audit_rng.random() < self.audit_rate:
                self._audit(block, entry)
        if isinstance(entry, _Failure):
            raise entry.error
        return entry

    def _insert(self, block: BlockKey, entry: object) -> None:
        self._entries[block] = entry
        if self.capacity is not None and len(self._entries) > self.capacity:
            self._entries.popitem(last=False)
            self.stats.evictions += 1

    def _audit(self, block: BlockKey, cached: float) -> None:
        self.stats.audits += 1
        fresh = self.scorer.block_score(block)
        if not math.isclose(fresh, cached, rel_tol=1e-12, abs_tol=1e-12):
            raise NumericalError(f"Cache audit failed for block {block}: cached {cached}, fresh {fresh}")


class CachedScorer(ModelScorer):
    """A ModelScorer whose block scores go through a BlockScoreCache."""

    def __init__(self, cache: BlockScoreCache) -> None:
        super().__init__(cache.scorer.D, cache.scorer.prior)
        self.cache = cache
        self.kind = cache.scorer.kind

    def block_score(self, block: BlockKey) -> float:
        return self.cache.block_score(block)

    def log_prior(self, p: Partition) -> float:
        return self.cache.scorer.log_prior(p)

    def describe(self) -> dict:
        return self.cache.scorer.describe()
