"""
diagnostics.py

Convergence and reproducibility metrics based on L1 distances:
between-chain heterogeneity and run-to-run distances between estimates.
"""
import math
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import InputError
from .exact import PosteriorTable
from .partition import Partition

logger = logging.getLogger("independence_patterns")


@dataclass(eq=False)
class FrequencyProfile:
    """
    Per-chain (C x Q) and pooled (Q) visit frequencies over the support of
    partitions seen in any chain. Pooled frequencies weight each chain by its
    retained sample count.
    """
    support: List[Partition]
    per_chain: np.ndarray
    pooled: np.ndarray
    sample_counts: np.ndarray

    @property
    def C(self) -> int:
        return self.per_chain.shape[0]

    @property
    def Q(self) -> int:
        return len(self.support)


def frequency_profile(traces: Sequence[Sequence[Partition]]) -> FrequencyProfile:
    """Build the profile from retained (post burn-in) traces, one per chain."""
    if not traces or any(len(t) == 0 for t in traces):
        raise InputError("Every chain needs at least one retained state")
    index: Dict[Partition, int] = {}
    support: List[Partition] = []
    for trace in traces:
        for p in trace:
            if p not in index:
                index[p] = len(support)
                support.append(p)
    counts = np.zeros((len(traces), len(support)))
    for c, trace in enumerate(traces):
        for p in trace:
            counts[c, index[p]] += 1
    sample_counts = counts.sum(axis=1)
    per_chain = counts / sample_counts[:, None]
    pooled = counts.sum(axis=0) / sample_counts.sum()
    return FrequencyProfile(support, per_chain, pooled, sample_counts)


def heterogeneity(profile: FrequencyProfile) -> float:
    """(1/C) sum_c sum_q |f_cq - f_q|; zero only when all chains agree."""
    return float(np.abs(profile.per_chain - profile.pooled[None, :]).sum(axis=1).mean())


def run_distance(a: PosteriorTable, b: PosteriorTable) -> float:
    """L1 distance over the union of supports; 2 when supports are disjoint."""
    if a.D != b.D:
        raise InputError(f"Dimension mismatch: {a.D} vs {b.D}")
    union = set(a.partitions) | set(b.partitions)
    return float(sum(abs(a.probability(p) - b.probability(p)) for p in union))


def log_checkpoints(J: int) -> List[int]:
    """1, 2, 5 x 10^k chain lengths up to J, J included."""
    points = []
    k = 0
    while 10 ** k <= J:
        for m in (1, 2, 5):
            value = m * 10 ** k
            if 2 <= value <= J:
                points.append(value)
        k += 1
    if not points or points[-1] != J:
        points.append(J)
    return points


def heterogeneity_curve(
    traces: Sequence[Sequence[Partition]],
    burn_in_fraction: float = 0.5,
    checkpoints: Optional[Sequence[int]] = None,
) -> List[Tuple[int, float]]:
    """
    Heterogeneity after the first `j` states of every full chain trace, for
    each checkpoint j, discarding the same burn-in fraction each time.
    """
    J = min(len(t) for t in traces)
    points = list(checkpoints) if checkpoints is not None else log_checkpoints(J)
    curve = []
    for j in points:
        if not 1 <= j <= J:
            raise InputError(f"Checkpoint {j} outside 1..{J}")
        start = math.floor(j * burn_in_fraction)
        value = heterogeneity(frequency_profile([t[start:j] for t in traces]))
        logger.debug(f"Heterogeneity at {j} steps: {value:.4f}")
        curve.append((j, value))
    return curve


def distance_matrix(estimates: Sequence[PosteriorTable], labels: Sequence[str]) -> pd.DataFrame:
    """Symmetric matrix of run_distance between every pair of estimates."""
    if len(estimates) != len(labels):
        raise InputError("One label per estimate is required")
    n = len(estimates)
    values = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            values[i, j] = values[j, i] = run_distance(estimates[i], estimates[j])
    return pd.DataFrame(values, index=list(labels), columns=list(labels))


def group_distances(matrix: pd.DataFrame, groups: Sequence[str]) -> pd.DataFrame:
    """
    Mean and standard deviation of pairwise distances for every pair of
    groups (run i and run j distinct, unordered).
    """
    groups = list(groups)
    names = list(dict.fromkeys(groups))
    values = matrix.to_numpy()
    rows = []
    for a_pos, a in enumerate(names):
        for b in names[a_pos:]:
            pairs = [
                values[i, j]
                for i in range(len(groups)) for j in range(i + 1, len(groups))
                if {groups[i], groups[j]} == {a, b} and (a != b or groups[i] == groups[j] == a)
            ]
            if pairs:
                rows.append(dict(group_a=a, group_b=b, mean=float(np.mean(pairs)),
                                 sd=float(np.std(pairs, ddof=1)) if len(pairs) > 1 else 0.0,
                                 pairs=len(pairs)))
    return pd.DataFrame(rows, columns=["group_a", "group_b", "mean", "sd", "pairs"])
