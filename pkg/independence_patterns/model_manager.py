"""
model_manager.py

Contains the ModelManager class, which turns a model name and an input
(embedded dataset, data file or ready-made statistics) into a ModelScorer.

Models:
  bayes-optim      inverse-Wishart marginal, nu = D, optimized diagonal scale
  bayes-corr       inverse-Wishart marginal on the correlation matrix, nu = D + 1, identity scale
  bic              Gaussian BIC approximation
  multinomial      Dirichlet-multinomial marginal
  multinomial-bic  multinomial BIC approximation
  constant         every partition scores the same
"""
import logging
from dataclasses import dataclass
from typing import Optional, Union

from .config import Config
from .data_loader import DataSource, load_gaussian, load_multinomial
from .datasets import SummaryDataset
from .errors import InputError
from .models import (
    ConstantScorer, DirichletHyper, GaussianBicScorer, GaussianHyper,
    GaussianScorer, GaussianSuffStats, ModelScorer, MultinomialBicScorer,
    MultinomialScorer, MultinomialSuffStats, optimize_lambda,
)
from .priors import (
    BlockCountPrior, ForbiddenPairsPrior, PartitionPrior, ProductPartitionPrior, UniformPrior,
)

logger = logging.getLogger("independence_patterns")

GAUSSIAN_MODELS = ("bayes-optim", "bayes-corr", "bic")
MULTINOMIAL_MODELS = ("multinomial", "multinomial-bic")
MODEL_NAMES = GAUSSIAN_MODELS + MULTINOMIAL_MODELS + ("constant",)

Statistics = Union[GaussianSuffStats, MultinomialSuffStats]


@dataclass(frozen=True)
class ModelConfig:
    """
    Model-level settings read from the [Models] section.
    """
    known_mean: bool
    concentration: float
    dirichlet_rule: str


def build_prior(text: Optional[str], D: int) -> PartitionPrior:
    """
    uniform | flat-k | dp:<alpha> | forbid:<a>-<b>,<c>-<d> (1-based elements).
    """
    if text is None or text == "uniform":
        return UniformPrior()
    if text == "flat-k":
        return BlockCountPrior.flat(D)
    kind, _, arg = text.partition(":")
    try:
        if kind == "dp":
            return ProductPartitionPrior.dirichlet_process(float(arg))
        if kind == "forbid":
            pairs = []
            for item in arg.split(","):
                a, b = item.split("-")
                pairs.append((int(a) - 1, int(b) - 1))
            if any(not (0 <= e < D) for pair in pairs for e in pair):
                raise InputError(f"Forbidden pair out of range for D={D}: {arg}")
            return ForbiddenPairsPrior(pairs)
    except ValueError:
        raise InputError(f"Invalid prior '{text}'")
    raise InputError(f"Unknown prior '{text}', expected uniform, flat-k, dp:<alpha> or forbid:<a>-<b>,...")


class ModelManager:
    """
    Builds scorers from configuration plus whichever input was supplied.
    """
    def __init__(self, config: Config, known_mean: Optional[bool] = None) -> None:
        self.config = config
        self.model_config = ModelConfig(
            known_mean=(config.getboolean("Models", "KnownMean") if known_mean is None else known_mean),
            concentration=config.getfloat("Models", "DirichletConcentration"),
            dirichlet_rule=config.get("Models", "DirichletRule"),
        )

    def load_statistics(
        self,
        model: str,
        dataset: Optional[SummaryDataset] = None,
        source: Optional[DataSource] = None,
    ) -> Statistics:
        """Sufficient statistics suited to `model` from a dataset or a file."""
        correlation = model == "bayes-corr"
        if model in MULTINOMIAL_MODELS:
            if source is None:
                raise InputError(f"Model '{model}' needs categorical or contingency input")
            return load_multinomial(source)
        if dataset is not None:
            return dataset.gaussian_stats(self.model_config.known_mean, correlation=correlation)
        if source is not None:
            return load_gaussian(
                DataSource(source.path, source.kind, source.n_obs, self.model_config.known_mean),
                correlation=correlation,
            )
        raise InputError("No input: give a dataset or an input file")

    def build(
        self,
        model: str,
        stats: Optional[Statistics] = None,
        prior: Optional[PartitionPrior] = None,
        D: Optional[int] = None,
    ) -> ModelScorer:
        if model not in MODEL_NAMES:
            raise InputError(f"Unknown model '{model}', expected one of {MODEL_NAMES}")
        if model == "constant":
            size = D if D is not None else (stats.D if stats is not None else None)
            if size is None:
                raise InputError("The constant model needs a dimension")
            return ConstantScorer(size, prior)
        if stats is None:
            raise InputError(f"Model '{model}' needs sufficient statistics")

        if model in GAUSSIAN_MODELS:
            if not isinstance(stats, GaussianSuffStats):
                raise InputError(f"Model '{model}' needs Gaussian statistics")
            if model == "bayes-optim":
                hyper = optimize_lambda(stats)
                logger.info(f"BayesOptim scale: {[f'{v:.6g}' for v in hyper.lambda_diag]}")
                return GaussianScorer(stats, hyper, prior)
            if model == "bayes-corr":
                if not stats.is_correlation:
                    stats = GaussianSuffStats.from_covariance(stats.S / stats.N_eff, stats.N_eff, correlation=True)
                return GaussianScorer(stats, GaussianHyper.bayes_corr(stats.D), prior)
            return GaussianBicScorer(stats, prior)

        if not isinstance(stats, MultinomialSuffStats):
            raise InputError(f"Model '{model}' needs a contingency table")
        if model == "multinomial":
            hyper = DirichletHyper(self.model_config.concentration, self.model_config.dirichlet_rule)
            return MultinomialScorer(stats, hyper, prior)
        return MultinomialBicScorer(stats, prior)
