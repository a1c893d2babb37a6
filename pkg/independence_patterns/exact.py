"""
exact.py

Exhaustive posterior over all partitions for small D, and the summary
functionals computed from any posterior table: normalized entropy,
relevance of a block, event probabilities, MAP, rank of a reference
partition and its ratio to the MAP.
"""
import logging
import concurrent.futures
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import entr, logsumexp

from .errors import InputError, NumericalError
from .models import ModelScorer
from .partition import (
    EXACT_INTEGER_LIMIT, Partition, bell, block_key,
    enumerate_partitions, format_partition, log_bell,
)

logger = logging.getLogger("independence_patterns")

EXACT = "exact"
SAMPLED = "sampled"
PROBABILITY_TOLERANCE = 1e-10

Predicate = Callable[[Partition], bool]


@dataclass(eq=False)
class PosteriorTable:
    """
    Probabilities over partitions: all of them in exact mode, the visited
    support in sampled mode.
    """
    partitions: List[Partition]
    probs: np.ndarray
    D: int
    mode: str = EXACT

    def __post_init__(self) -> None:
        self.probs = np.asarray(self.probs, dtype=float)
        if self.mode not in (EXACT, SAMPLED):
            raise InputError(f"Unknown posterior mode '{self.mode}'")
        if len(self.partitions) != self.probs.size or not self.partitions:
            raise InputError("Partitions and probabilities must be non-empty and parallel")
        if np.any(self.probs < 0) or abs(self.probs.sum() - 1.0) > PROBABILITY_TOLERANCE:
            raise InputError("Probabilities must be non-negative and sum to 1")
        if any(p.D != self.D for p in self.partitions):
            raise InputError(f"Every partition must have D={self.D}")
        if len(set(self.partitions)) != len(self.partitions):
            raise InputError("Partitions in a posterior table must be distinct")
        if self.mode == EXACT and self.D <= EXACT_INTEGER_LIMIT and len(self.partitions) != bell(self.D):
            raise InputError(f"Exact table over D={self.D} needs {bell(self.D)} partitions")

    @cached_property
    def _index(self) -> Dict[Partition, int]:
        return {p: i for i, p in enumerate(self.partitions)}

    @cached_property
    def order(self) -> List[int]:
        """Indices by decreasing probability; ties by canonical rgs."""
        return sorted(range(len(self.partitions)), key=lambda i: (-self.probs[i], self.partitions[i].rgs))

    def probability(self, p: Partition) -> float:
        i = self._index.get(p)
        return 0.0 if i is None else float(self.probs[i])

    @property
    def map_partition(self) -> Partition:
        return self.partitions[self.order[0]]

    def to_frame(self) -> pd.DataFrame:
        rows = [(format_partition(self.partitions[i]), float(self.probs[i])) for i in self.order]
        return pd.DataFrame(rows, columns=["partition", "probability"])


@dataclass(frozen=True)
class TruthSummary:
    p_true: float
    rank: int
    ratio_to_map: float
    entropy: Optional[float]

    def as_dict(self) -> dict:
        return dict(p_true=self.p_true, rank=self.rank, ratio_to_map=self.ratio_to_map, entropy=self.entropy)


def _score_chunk(scorer: ModelScorer, chunk: Sequence[Partition]) -> np.ndarray:
    out = np.empty(len(chunk))
    for i, p in enumerate(chunk):
        try:
            out[i] = scorer.score(p)
        except NumericalError as e:
            raise NumericalError(f"Scoring {format_partition(p)} failed: {e}")
    return out


def exact_posterior(scorer: ModelScorer, D: int, workers: int = 1, chunk_size: int = 4096) -> PosteriorTable:
    """
    Score every partition of a D-set and normalize with a max-shifted
    log-sum-exp. The score loop runs in chunks on a thread pool; chunk order
    is preserved so the result does not depend on `workers`.
    """
    if scorer.D != D:
        raise InputError(f"Scorer built for D={scorer.D}, requested D={D}")
    partitions = list(enumerate_partitions(D))
    logger.info(f"Exact posterior over {len(partitions)} partitions (D={D})")
    chunks = [partitions[i:i + chunk_size] for i in range(0, len(partitions), chunk_size)]
    if workers > 1 and len(chunks) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: _score_chunk(scorer, c), chunks))
    else:
        parts = [_score_chunk(scorer, c) for c in chunks]
    scores = np.concatenate(parts)
    log_norm = logsumexp(scores)
    if not np.isfinite(log_norm):
        raise NumericalError("Posterior cannot be normalized: no partition has finite score")
    probs = np.exp(scores - log_norm)
    probs /= probs.sum()
    return PosteriorTable(partitions, probs, D, EXACT)


def entropy_normalized(t: PosteriorTable) -> float:
    """-sum p ln p / ln bell(D): 0 for a point mass, 1 for the uniform posterior."""
    if t.mode != EXACT:
        raise InputError("Entropy needs the full support; sampled posteriors are refused")
    if t.D == 1:
        return 0.0
    return float(entr(t.probs).sum() / log_bell(t.D))


def relevance(t: PosteriorTable, block: Sequence[int]) -> float:
    """Probability that `block` appears exactly as one of the blocks."""
    key = block_key(block)
    if key[-1] >= t.D:
        raise InputError(f"Block {key} out of range for D={t.D}")
    return float(sum(prob for p, prob in zip(t.partitions, t.probs) if p.has_block(key)))


# --- predicates ---

def same_block(subset: Sequence[int]) -> Predicate:
    """True when every element of `subset` sits in one block."""
    key = block_key(subset)

    def predicate(p: Partition) -> bool:
        first = p.rgs[key[0]]
        return all(p.rgs[e] == first for e in key)
    return predicate


def has_block(block: Sequence[int]) -> Predicate:
    key = block_key(block)
    return lambda p: p.has_block(key)


def has_block_count(K: int) -> Predicate:
    return lambda p: p.K == K


def equals(q: Partition) -> Predicate:
    return lambda p: p == q


def event_probability(t: PosteriorTable, predicate: Predicate) -> float:
    return float(sum(prob for p, prob in zip(t.partitions, t.probs) if predicate(p)))


def block_count_posterior(t: PosteriorTable) -> np.ndarray:
    """Posterior probability of K = 1..D blocks."""
    out = np.zeros(t.D)
    for p, prob in zip(t.partitions, t.probs):
        out[p.K - 1] += prob
    return out


def top(t: PosteriorTable, k: int) -> List[Tuple[Partition, float]]:
    return [(t.partitions[i], float(t.probs[i])) for i in t.order[:k]]


def summarize_truth(t: PosteriorTable, truth: Partition) -> TruthSummary:
    """Probability, rank and MAP ratio of the reference partition, plus entropy."""
    if truth.D != t.D:
        raise InputError(f"Truth has D={truth.D}, posterior has D={t.D}")
    p_true = t.probability(truth)
    i = t._index.get(truth)
    if i is None:
        logger.warning(f"Reference partition {format_partition(truth)} is outside the sampled support")
        rank = len(t.partitions) + 1
    else:
        rank = t.order.index(i) + 1
    p_map = float(t.probs[t.order[0]])
    entropy = entropy_normalized(t) if t.mode == EXACT else None
    return TruthSummary(p_true=p_true, rank=rank, ratio_to_map=p_true / p_map, entropy=entropy)
