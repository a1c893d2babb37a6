"""
synth.py

Synthetic data with a known independence pattern: a random true partition
with K blocks, a random correlation matrix per block (Wishart draw rescaled
to unit diagonal), and mutually independent blocks of Gaussian, Student-t or
categorical observations.
"""
import math
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.stats import wishart

from .errors import InputError, NumericalError
from .models import GaussianSuffStats, MultinomialSuffStats
from .partition import Partition, canonicalize, format_partition, log_stirling2

logger = logging.getLogger("independence_patterns")

GAUSSIAN = "gaussian"
STUDENT = "student"
MULTINOMIAL = "multinomial"
FAMILIES = (GAUSSIAN, STUDENT, MULTINOMIAL)

_CORRELATION_RETRIES = 10


@dataclass(frozen=True)
class SynthSpec:
    """
    Either K (truth drawn uniformly among partitions with K blocks) or an
    explicit truth partition. `zeta` is the Student-t degrees of freedom,
    `arities` the level counts of the multinomial family (all 2 by default).
    """
    D: int
    N: int = 300
    K: Optional[int] = None
    truth: Optional[Partition] = None
    family: str = GAUSSIAN
    zeta: float = 3.0
    arities: Optional[Tuple[int, ...]] = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.D < 1:
            raise InputError(f"D must be >= 1, got {self.D}")
        if self.N < 1:
            raise InputError(f"N must be >= 1, got {self.N}")
        if (self.K is None) == (self.truth is None):
            raise InputError("Give exactly one of K and truth")
        if self.K is not None and not 1 <= self.K <= self.D:
            raise InputError(f"K must be in 1..{self.D}, got {self.K}")
        if self.truth is not None and self.truth.D != self.D:
            raise InputError(f"Truth has D={self.truth.D}, expected {self.D}")
        if self.family not in FAMILIES:
            raise InputError(f"Unknown family '{self.family}', expected one of {FAMILIES}")
        if self.zeta <= 0:
            raise InputError(f"Student-t degrees of freedom must be > 0, got {self.zeta}")
        if self.family == MULTINOMIAL:
            arities = tuple(self.arities) if self.arities is not None else (2,) * self.D
            if len(arities) != self.D or any(a < 2 for a in arities):
                raise InputError(f"Need {self.D} arities, each >= 2, got {arities}")
            object.__setattr__(self, "arities", arities)

    def describe(self) -> dict:
        return dict(
            D=self.D, N=self.N, K=self.K,
            truth=format_partition(self.truth) if self.truth is not None else None,
            family=self.family, zeta=self.zeta if self.family == STUDENT else None,
            arities=list(self.arities) if self.arities is not None else None, seed=self.seed,
        )


@dataclass(eq=False)
class SynthResult:
    """
    `data` holds observations as rows (categorical levels for the
    multinomial family); `table` the contingency table of that family.
    """
    spec: SynthSpec
    truth: Partition
    data: np.ndarray
    block_sigmas: List[np.ndarray] = field(default_factory=list)
    block_probs: List[np.ndarray] = field(default_factory=list)
    table: Optional[np.ndarray] = None

    def gaussian_stats(self, known_mean: bool = False, correlation: bool = False) -> GaussianSuffStats:
        if self.spec.family == MULTINOMIAL:
            raise InputError("Categorical data has no Gaussian statistics")
        return GaussianSuffStats.from_data(self.data, known_mean=known_mean, correlation=correlation)

    def multinomial_stats(self) -> MultinomialSuffStats:
        if self.table is None:
            raise InputError("Only multinomial data has a contingency table")
        return MultinomialSuffStats(self.table)


def random_partition_with_k(D: int, K: int, rng: np.random.Generator) -> Partition:
    """
    Uniform draw among the partitions of a D-set with exactly K blocks.

    Follows {n, k} = {n-1, k-1} + k {n-1, k}: walking down from n = D, the
    last element opens its own block with probability {n-1, k-1} / {n, k},
    otherwise it joins one of the k blocks of the rest uniformly.
    """
    if not 1 <= K <= D:
        raise InputError(f"K must be in 1..{D}, got {K}")
    singleton = [False] * D
    k = K
    for n in range(D, 0, -1):
        p_single = math.exp(log_stirling2(n - 1, k - 1) - log_stirling2(n, k))
        if rng.random() < p_single:
            singleton[n - 1] = True
            k -= 1
    labels: List[int] = []
    blocks = 0
    for element in range(D):
        if singleton[element]:
            labels.append(blocks)
            blocks += 1
        else:
            labels.append(int(rng.integers(blocks)))
    return canonicalize(labels)


def random_block_correlation(size: int, rng: np.random.Generator) -> np.ndarray:
    """
    Wishart(size + 1, identity) draw rescaled to a correlation matrix, which
    makes every pairwise correlation uniform on (-1, 1).
    """
    if size < 1:
        raise InputError(f"Block size must be >= 1, got {size}")
    if size == 1:
        return np.ones((1, 1))
    for _ in range(_CORRELATION_RETRIES):
        W = np.atleast_2d(wishart(df=size + 1, scale=np.eye(size)).rvs(random_state=rng))
        sd = np.sqrt(np.diag(W))
        R = W / np.outer(sd, sd)
        np.fill_diagonal(R, 1.0)
        try:
            np.linalg.cholesky(R)
            return R
        except np.linalg.LinAlgError:
            logger.debug("Wishart draw not positive definite, retrying")
    raise NumericalError(f"Could not draw a positive definite {size}x{size} correlation matrix")


def generate(spec: SynthSpec) -> SynthResult:
    """Deterministic given spec.seed."""
    rng = np.random.default_rng(spec.seed)
    truth = spec.truth if spec.truth is not None else random_partition_with_k(spec.D, spec.K, rng)
    N = spec.N

    if spec.family == MULTINOMIAL:
        data = np.zeros((N, spec.D), dtype=np.int64)
        probs: List[np.ndarray] = []
        for block in truth.blocks:
            shape = tuple(spec.arities[d] for d in block)
            cell_probs = rng.dirichlet(np.ones(int(np.prod(shape))))
            cells = rng.choice(cell_probs.size, size=N, p=cell_probs)
            data[:, list(block)] = np.column_stack(np.unravel_index(cells, shape))
            probs.append(cell_probs.reshape(shape))
        table = MultinomialSuffStats.from_observations(data, spec.arities).counts
        logger.debug(f"Generated {N} categorical rows with truth {format_partition(truth)}")
        return SynthResult(spec, truth, data, block_probs=probs, table=table)

    data = np.zeros((N, spec.D))
    sigmas: List[np.ndarray] = []
    for block in truth.blocks:
        sigma = random_block_correlation(len(block), rng)
        values = rng.multivariate_normal(np.zeros(len(block)), sigma, size=N)
        if spec.family == STUDENT:
            # one mixing variable per observation per block
            mixing = rng.chisquare(spec.zeta, size=N) / spec.zeta
            values = values / np.sqrt(mixing)[:, None]
        data[:, list(block)] = values
        sigmas.append(sigma)
    logger.debug(f"Generated {N} {spec.family} rows with truth {format_partition(truth)}")
    return SynthResult(spec, truth, data, block_sigmas=sigmas)
