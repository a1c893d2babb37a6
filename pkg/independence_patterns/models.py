"""
models.py

Log marginal likelihoods and BIC scores of partitions for the multivariate
normal model (inverse-Wishart prior on each block covariance) and the
cross-classified multinomial model (Dirichlet prior on each block table),
plus the three Gaussian hyperparameter strategies:

- BayesOptim: nu = D, diagonal Lambda maximizing the all-singletons marginal.
- BayesCorr: correlation-matrix input, nu = D + 1, Lambda = identity.
- Bic: asymptotic form, no hyperparameters.

Every score is defined up to an additive constant that does not depend on
the partition, so raw values are only comparable within one scorer.
"""
import math
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import entr, gammaln

from .errors import DegenerateBlockError, InputError, NumericalError
from .partition import BlockKey, Partition, refines
from .priors import PartitionPrior, UniformPrior

logger = logging.getLogger("independence_patterns")

CORRELATION_TOLERANCE = 1e-9


# --- sufficient statistics and hyperparameters ---

@dataclass(frozen=True, eq=False)
class GaussianSuffStats:
    """
    Sum-of-squares matrix S with its effective degrees of freedom
    (N when the mean is known, N - 1 when the sample mean was used).
    """
    S: np.ndarray
    N_eff: float
    is_correlation: bool = False

    def __post_init__(self) -> None:
        S = np.array(self.S, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] < 1:
            raise InputError(f"S must be a non-empty square matrix, got shape {S.shape}")
        if not np.allclose(S, S.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(S).max())):
            raise InputError("S must be symmetric")
        S = (S + S.T) / 2.0
        if self.N_eff < 1:
            raise InputError(f"N_eff must be >= 1, got {self.N_eff}")
        if self.is_correlation:
            diag = np.diag(S) / self.N_eff
            if np.max(np.abs(diag - 1.0)) > CORRELATION_TOLERANCE:
                raise InputError("Correlation input must have S / N_eff with unit diagonal")
        S.setflags(write=False)
        object.__setattr__(self, "S", S)

    @property
    def D(self) -> int:
        return self.S.shape[0]

    @classmethod
    def from_data(
        cls,
        data: np.ndarray,
        known_mean: bool = False,
        mean: Optional[np.ndarray] = None,
        correlation: bool = False,
    ) -> "GaussianSuffStats":
        """Rows are observations. Unknown mean: centre on the sample mean, N_eff = N - 1."""
        X = np.asarray(data, dtype=float)
        if X.ndim != 2:
            raise InputError(f"Data must be a 2-D array, got {X.ndim} dimensions")
        N = X.shape[0]
        if known_mean:
            mu = np.zeros(X.shape[1]) if mean is None else np.asarray(mean, dtype=float)
            centred, n_eff = X - mu, N
        else:
            if N < 2:
                raise InputError("At least two observations are needed when the mean is unknown")
            centred, n_eff = X - X.mean(axis=0), N - 1
        S = centred.T @ centred
        if correlation:
            return cls.from_covariance(S / n_eff, n_eff, correlation=True)
        return cls(S, n_eff)

    @classmethod
    def from_covariance(
        cls,
        matrix: np.ndarray,
        N_eff: float,
        correlation: bool = False,
    ) -> "GaussianSuffStats":
        """
        S = N_eff * matrix. With `correlation`, a covariance matrix is first
        rescaled to a correlation matrix.
        """
        M = np.asarray(matrix, dtype=float)
        if correlation:
            sd = np.sqrt(np.diag(M))
            if np.any(sd <= 0):
                raise DegenerateBlockError("Non-positive variance in covariance input")
            M = M / np.outer(sd, sd)
            np.fill_diagonal(M, 1.0)
        return cls(N_eff * M, N_eff, is_correlation=correlation)


@dataclass(frozen=True, eq=False)
class GaussianHyper:
    """Inverse-Wishart prior: degrees of freedom nu and diagonal scale Lambda."""
    nu: float
    lambda_diag: np.ndarray

    def __post_init__(self) -> None:
        lam = np.array(self.lambda_diag, dtype=float).ravel()
        if lam.size < 1 or np.any(lam <= 0) or not np.all(np.isfinite(lam)):
            raise InputError("lambda_diag must be strictly positive and finite")
        if self.nu < lam.size:
            raise InputError(f"nu must be >= D={lam.size}, got {self.nu}")
        lam.setflags(write=False)
        object.__setattr__(self, "lambda_diag", lam)

    @classmethod
    def bayes_corr(cls, D: int) -> "GaussianHyper":
        return cls(nu=D + 1, lambda_diag=np.ones(D))


@dataclass(frozen=True, eq=False)
class MultinomialSuffStats:
    """Dense D-dimensional contingency table of cell counts."""
    counts: np.ndarray

    def __post_init__(self) -> None:
        raw = np.asarray(self.counts)
        if raw.ndim < 1:
            raise InputError("Contingency table needs at least one dimension")
        if np.any(raw < 0) or not np.all(np.equal(np.mod(raw, 1), 0)):
            raise InputError("Cell counts must be non-negative integers")
        if any(a < 2 for a in raw.shape):
            raise InputError(f"Every variable needs at least 2 levels, got arities {raw.shape}")
        counts = raw.astype(np.int64)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def arities(self) -> tuple:
        return self.counts.shape

    @property
    def D(self) -> int:
        return self.counts.ndim

    @property
    def N(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_observations(cls, data: np.ndarray, arities: Optional[tuple] = None) -> "MultinomialSuffStats":
        """Rows are observations of D categorical variables coded 0..I_d - 1."""
        X = np.asarray(data)
        if X.ndim != 2:
            raise InputError("Categorical data must be a 2-D array")
        if np.any(X < 0) or not np.all(np.equal(np.mod(X, 1), 0)):
            raise InputError("Categorical levels must be non-negative integers")
        X = X.astype(np.int64)
        if arities is None:
            arities = tuple(int(v) for v in np.maximum(X.max(axis=0) + 1, 2))
        if np.any(X >= np.asarray(arities)):
            raise InputError(f"Observed level exceeds declared arities {arities}")
        table = np.zeros(arities, dtype=np.int64)
        np.add.at(table, tuple(X.T), 1)
        return cls(table)


@dataclass(frozen=True)
class DirichletHyper:
    """
    Dirichlet prior on every block table. Rule "per-cell" gives each cell
    `concentration`; rule "total" spreads it as concentration / I_B.
    """
    concentration: float = 1.0
    rule: str = "per-cell"

    def __post_init__(self) -> None:
        if self.concentration <= 0:
            raise InputError(f"Dirichlet concentration must be > 0, got {self.concentration}")
        if self.rule not in ("per-cell", "total"):
            raise InputError(f"Unknown Dirichlet rule '{self.rule}'")

    def cell_prior(self, n_cells: int) -> float:
        if self.rule == "total":
            return self.concentration / n_cells
        return self.concentration


# --- Gaussian scores ---

def log_Z(d: int, n: float) -> float:
    """
    ln Z(d, n) = (nd/2) ln 2 + (d(d-1)/4) ln pi + sum_{d'=1..d} lnGamma((n+1-d')/2).
    """
    if n + 1 - d <= 0:
        raise NumericalError(f"log_Z({d}, {n}): non-positive gamma argument")
    args = (n + 1 - np.arange(1, d + 1)) / 2.0
    return n * d / 2.0 * math.log(2.0) + d * (d - 1) / 4.0 * math.log(math.pi) + float(gammaln(args).sum())


def _logdet(matrix: np.ndarray, block: BlockKey) -> float:
    try:
        L = np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        raise DegenerateBlockError(f"Block {block} matrix is not positive definite", block)
    return 2.0 * float(np.log(np.diag(L)).sum())


def gaussian_block_logml(stats: GaussianSuffStats, hyper: GaussianHyper, block: BlockKey) -> float:
    """
    ln Z(D_k, N+nu_k) - ln Z(D_k, nu_k) + (nu_k/2) ln|Lambda_k|
    - ((N+nu_k)/2) ln|Lambda_k + S_k|, with nu_k = nu - D + D_k.
    """
    if stats.N_eff < stats.D:
        raise InputError(f"N_eff={stats.N_eff} is smaller than D={stats.D}")
    idx = np.asarray(block)
    d_k = idx.size
    nu_k = hyper.nu - stats.D + d_k
    lam = hyper.lambda_diag[idx]
    logdet = _logdet(np.diag(lam) + stats.S[np.ix_(idx, idx)], block)
    n = stats.N_eff
    return (
        log_Z(d_k, n + nu_k) - log_Z(d_k, nu_k)
        + nu_k / 2.0 * float(np.log(lam).sum())
        - (n + nu_k) / 2.0 * logdet
    )


def gaussian_bic_block(stats: GaussianSuffStats, block: BlockKey) -> float:
    idx = np.asarray(block)
    d_k = idx.size
    n = stats.N_eff
    logdet = _logdet(stats.S[np.ix_(idx, idx)] / n, block)
    return -n / 2.0 * logdet - d_k * (d_k + 1) / 4.0 * math.log(n)


def gaussian_bic_score(stats: GaussianSuffStats, p: Partition) -> float:
    """-(N/2) sum_k ln|S_k/N| - (sum_k D_k(D_k+1)/4) ln N."""
    return sum(gaussian_bic_block(stats, block) for block in p.blocks)


def _lambda_objective(lam: float, s: float, n: float, nu: float) -> float:
    return nu / 2.0 * math.log(lam) - (n + nu) / 2.0 * math.log(lam + s)


def optimize_lambda(stats: GaussianSuffStats) -> GaussianHyper:
    """
    BayesOptim hyperparameters: nu = D and, per coordinate, the lambda_d
    maximizing the singleton marginal. The stationary point nu_d S_dd / N is
    used when a local perturbation confirms it, bounded search otherwise.
    """
    D = stats.D
    n = stats.N_eff
    if n < D:
        raise InputError(f"N_eff={n} is smaller than D={D}")
    nu_d = 1.0
    lambdas = np.empty(D)
    for d in range(D):
        s = float(stats.S[d, d])
        if s <= 0:
            raise DegenerateBlockError(f"Non-positive variance for variable {d + 1}", (d,))
        lam = nu_d * s / n
        f0 = _lambda_objective(lam, s, n, nu_d)
        if (_lambda_objective(lam * (1 + 1e-4), s, n, nu_d) > f0
                or _lambda_objective(lam * (1 - 1e-4), s, n, nu_d) > f0):
            logger.warning(f"Stationary lambda rejected for variable {d + 1}; using bounded search")
            res = minimize_scalar(
                lambda t: -_lambda_objective(math.exp(t), s, n, nu_d),
                bounds=(math.log(1e-8 * s / n), math.log(1e8 * s / n)),
                method="bounded",
            )
            lam = math.exp(res.x)
        lambdas[d] = lam
    return GaussianHyper(nu=float(D), lambda_diag=lambdas)


def gaussian_discrimination_statistic(stats: GaussianSuffStats, fine: Partition, coarse: Partition) -> float:
    """
    Likelihood-ratio term of the nested log Bayes factor between `coarse`
    and the finer model `fine`: (N/2)(sum_fine ln|S_k/N| - sum_coarse ln|S_k/N|).
    """
    if not refines(fine, coarse):
        raise InputError(f"{fine} does not refine {coarse}")
    n = stats.N_eff

    def total(p: Partition) -> float:
        return sum(_logdet(stats.S[np.ix_(b, b)] / n, b) for b in p.blocks)

    return n / 2.0 * (total(fine) - total(coarse))


# --- multinomial scores ---

def marginal_counts(stats: MultinomialSuffStats, block: BlockKey) -> np.ndarray:
    """Sum the table over every coordinate outside `block`."""
    inside = set(block)
    others = tuple(d for d in range(stats.D) if d not in inside)
    if not others:
        return stats.counts
    return stats.counts.sum(axis=others)


def multinomial_block_logml(stats: MultinomialSuffStats, hyper: DirichletHyper, block: BlockKey) -> float:
    """lnG(sum a) - sum lnG(a) + sum lnG(N_x + a) - lnG(N + sum a)."""
    cells = marginal_counts(stats, block).ravel()
    n_cells = cells.size
    a = hyper.cell_prior(n_cells)
    return float(
        gammaln(n_cells * a) - n_cells * gammaln(a)
        + gammaln(cells + a).sum() - gammaln(stats.N + n_cells * a)
    )


def _block_entropy(stats: MultinomialSuffStats, block: BlockKey) -> float:
    f = marginal_counts(stats, block).ravel() / stats.N
    return float(entr(f).sum())


def multinomial_bic_block(stats: MultinomialSuffStats, block: BlockKey) -> float:
    n = stats.N
    if n < 1:
        raise InputError("BIC needs at least one observation")
    n_cells = int(np.prod([stats.arities[d] for d in block]))
    return -n * _block_entropy(stats, block) - (n_cells - 1) / 2.0 * math.log(n)


def multinomial_bic_score(stats: MultinomialSuffStats, p: Partition) -> float:
    """sum_k [-N H(f_k) - ((I_Bk - 1)/2) ln N], with 0 ln 0 = 0."""
    return sum(multinomial_bic_block(stats, block) for block in p.blocks)


def multinomial_discrimination_statistic(stats: MultinomialSuffStats, fine: Partition, coarse: Partition) -> float:
    """N times the entropy drop from `fine` to `coarse` (empirical multi-information)."""
    if not refines(fine, coarse):
        raise InputError(f"{fine} does not refine {coarse}")
    fine_h = sum(_block_entropy(stats, b) for b in fine.blocks)
    coarse_h = sum(_block_entropy(stats, b) for b in coarse.blocks)
    return stats.N * (fine_h - coarse_h)


# --- scorers ---

class ModelScorer(ABC):
    """
    Maps a partition to ln phi(B) = sum_k blockscore(B_k) + ln Pr(B), up to
    a constant independent of B. Immutable; safe to share across threads.
    """
    kind = "abstract"

    def __init__(self, D: int, prior: Optional[PartitionPrior] = None) -> None:
        self.D = D
        self.prior = prior or UniformPrior()

    @abstractmethod
    def block_score(self, block: BlockKey) -> float:
        ...

    def log_prior(self, p: Partition) -> float:
        return 0.0 if self.prior.is_uniform else self.prior.log_prior(p)

    def score(self, p: Partition) -> float:
        if p.D != self.D:
            raise InputError(f"Scorer built for D={self.D}, partition has D={p.D}")
        return sum(self.block_score(block) for block in p.blocks) + self.log_prior(p)

    def describe(self) -> dict:
        return {"kind": self.kind, "D": self.D, "prior": repr(self.prior)}


class GaussianScorer(ModelScorer):
    kind = "gaussian"

    def __init__(self, stats: GaussianSuffStats, hyper: GaussianHyper, prior: Optional[PartitionPrior] = None) -> None:
        if stats.N_eff < stats.D:
            raise InputError(f"N_eff={stats.N_eff} is smaller than D={stats.D}")
        if hyper.lambda_diag.size != stats.D:
            raise InputError("Hyperparameter dimension does not match the statistics")
        super().__init__(stats.D, prior)
        self.stats = stats
        self.hyper = hyper

    def block_score(self, block: BlockKey) -> float:
        return gaussian_block_logml(self.stats, self.hyper, block)

    def describe(self) -> dict:
        info = super().describe()
        info.update(nu=self.hyper.nu, lambda_diag=self.hyper.lambda_diag.tolist(), N_eff=self.stats.N_eff)
        return info


class GaussianBicScorer(ModelScorer):
    kind = "gaussian-bic"

    def __init__(self, stats: GaussianSuffStats, prior: Optional[PartitionPrior] = None) -> None:
        super().__init__(stats.D, prior)
        self.stats = stats

    def block_score(self, block: BlockKey) -> float:
        return gaussian_bic_block(self.stats, block)

    def describe(self) -> dict:
        info = super().describe()
        info.update(N_eff=self.stats.N_eff)
        return info


class MultinomialScorer(ModelScorer):
    kind = "multinomial"

    def __init__(self, stats: MultinomialSuffStats, hyper: Optional[DirichletHyper] = None,
                 prior: Optional[PartitionPrior] = None) -> None:
        super().__init__(stats.D, prior)
        self.stats = stats
        self.hyper = hyper or DirichletHyper()

    def block_score(self, block: BlockKey) -> float:
        return multinomial_block_logml(self.stats, self.hyper, block)

    def describe(self) -> dict:
        info = super().describe()
        info.update(N=self.stats.N, arities=list(self.stats.arities),
                    concentration=self.hyper.concentration, rule=self.hyper.rule)
        return info


class MultinomialBicScorer(ModelScorer):
    kind = "multinomial-bic"

    def __init__(self, stats: MultinomialSuffStats, prior: Optional[PartitionPrior] = None) -> None:
        if stats.N < 1:
            raise InputError("BIC needs at least one observation")
        super().__init__(stats.D, prior)
        self.stats = stats

    def block_score(self, block: BlockKey) -> float:
        return multinomial_bic_block(self.stats, block)


class ConstantScorer(ModelScorer):
    """Every partition scores the same; used to check samplers against the prior."""
    kind = "constant"

    def block_score(self, block: BlockKey) -> float:
        return 0.0


def score(scorer: ModelScorer, p: Partition) -> float:
    return scorer.score(p)
