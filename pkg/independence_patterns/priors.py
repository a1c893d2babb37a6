"""
priors.py

Prior probabilities over partitions. A prior enters every score as an
additive log term; the uniform prior contributes nothing.
"""
import math
from abc import ABC, abstractmethod
from typing import Callable, Iterable, Sequence, Tuple

from .errors import InputError
from .partition import BlockKey, Partition, log_stirling2


class PartitionPrior(ABC):
    """Log prior ln Pr(B) up to an additive constant."""
    is_uniform = False

    @abstractmethod
    def log_prior(self, p: Partition) -> float:
        ...


class UniformPrior(PartitionPrior):
    is_uniform = True

    def log_prior(self, p: Partition) -> float:
        return 0.0

    def __repr__(self) -> str:
        return "UniformPrior()"


class BlockCountPrior(PartitionPrior):
    """
    Prior whose induced distribution on the block count K is proportional to
    the given weights; partitions sharing K stay equally likely.
    """
    def __init__(self, weights: Sequence[float]) -> None:
        if not weights or any(w < 0 for w in weights) or not any(w > 0 for w in weights):
            raise InputError("Block-count weights must be non-negative and not all zero")
        self.weights = tuple(float(w) for w in weights)
        self.D = len(self.weights)

    @classmethod
    def flat(cls, D: int) -> "BlockCountPrior":
        """Every block count 1..D equally likely a priori."""
        return cls([1.0] * D)

    def log_prior(self, p: Partition) -> float:
        if p.D != self.D:
            raise InputError(f"Prior built for D={self.D}, partition has D={p.D}")
        w = self.weights[p.K - 1]
        if w == 0.0:
            return -math.inf
        return math.log(w) - log_stirling2(p.D, p.K)

    def __repr__(self) -> str:
        return f"BlockCountPrior({list(self.weights)})"


class ProductPartitionPrior(PartitionPrior):
    """Product partition model: Pr(B) proportional to the product of block cohesions."""
    def __init__(self, log_cohesion: Callable[[BlockKey], float], name: str = "custom") -> None:
        self.log_cohesion = log_cohesion
        self.name = name

    @classmethod
    def dirichlet_process(cls, alpha: float) -> "ProductPartitionPrior":
        if alpha <= 0:
            raise InputError(f"Dirichlet-process concentration must be > 0, got {alpha}")
        log_alpha = math.log(alpha)
        return cls(lambda block: log_alpha + math.lgamma(len(block)), name=f"dp({alpha})")

    def log_prior(self, p: Partition) -> float:
        return sum(self.log_cohesion(block) for block in p.blocks)

    def __repr__(self) -> str:
        return f"ProductPartitionPrior({self.name})"


class ForbiddenPairsPrior(PartitionPrior):
    """Zero prior mass on partitions that put a forbidden pair in one block."""
    def __init__(self, pairs: Iterable[Tuple[int, int]]) -> None:
        self.pairs = tuple((int(a), int(b)) for a, b in pairs)

    def log_prior(self, p: Partition) -> float:
        for a, b in self.pairs:
            if p.rgs[a] == p.rgs[b]:
                return -math.inf
        return 0.0

    def __repr__(self) -> str:
        return f"ForbiddenPairsPrior({list(self.pairs)})"
