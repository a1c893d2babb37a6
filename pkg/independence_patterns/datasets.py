"""
datasets.py

Embedded published summary statistics. The HIV study data covers six blood
measurements on 107 children: X1, X2 immunoglobulin G and A, X3 lymphocyte
B, X4 platelet count, X5 lymphocyte T4, X6 T4/T8 lymphocyte ratio. Values
are stored exactly as published (variances, lower-triangle correlations and
upper-triangle partial correlations).
"""
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from .errors import InputError
from .models import GaussianSuffStats


@dataclass(frozen=True)
class SummaryDataset:
    name: str
    variables: Tuple[str, ...]
    variances: Tuple[float, ...]
    correlations: Tuple[Tuple[float, ...], ...]        # lower triangle, row d has d entries
    partial_correlations: Tuple[Tuple[float, ...], ...]  # upper triangle, row d has D-1-d entries
    N: int
    known_mean: bool = False

    @property
    def D(self) -> int:
        return len(self.variables)

    def correlation_matrix(self) -> np.ndarray:
        """Symmetric matrix built from the lower triangle, unit diagonal."""
        R = np.eye(self.D)
        for d, row in enumerate(self.correlations):
            for e, value in enumerate(row):
                R[d, e] = R[e, d] = value
        return R

    def partial_correlation_matrix(self) -> np.ndarray:
        P = np.eye(self.D)
        for d, row in enumerate(self.partial_correlations):
            for offset, value in enumerate(row):
                e = d + 1 + offset
                P[d, e] = P[e, d] = value
        return P

    def covariance_matrix(self) -> np.ndarray:
        sd = np.sqrt(np.asarray(self.variances))
        return self.correlation_matrix() * np.outer(sd, sd)

    def n_eff(self, known_mean: Optional[bool] = None) -> int:
        known = self.known_mean if known_mean is None else known_mean
        return self.N if known else self.N - 1

    def gaussian_stats(self, known_mean: Optional[bool] = None, correlation: bool = False) -> GaussianSuffStats:
        """S = N_eff * covariance (or correlation) with N_eff = N - 1 unless the mean is known."""
        if correlation:
            return GaussianSuffStats.from_covariance(self.correlation_matrix(), self.n_eff(known_mean),
                                                     correlation=True)
        return GaussianSuffStats.from_covariance(self.covariance_matrix(), self.n_eff(known_mean))

    def to_frame(self) -> pd.DataFrame:
        """Published layout: variances on the diagonal, correlations below, partials above."""
        table = self.correlation_matrix()
        table[np.triu_indices(self.D, 1)] = self.partial_correlation_matrix()[np.triu_indices(self.D, 1)]
        np.fill_diagonal(table, self.variances)
        return pd.DataFrame(table, index=list(self.variables), columns=list(self.variables))


HIV = SummaryDataset(
    name="hiv",
    variables=("X1", "X2", "X3", "X4", "X5", "X6"),
    variances=(8.8374, 0.1919, 8924231.9, 20392.4, 1952795.2, 1.378),
    correlations=(
        (),
        (0.483,),
        (0.220, 0.057),
        (-0.040, -0.133, 0.149),
        (0.253, -0.124, 0.523, 0.179),
        (-0.276, -0.314, -0.183, 0.064, 0.213),
    ),
    partial_correlations=(
        (0.479, -0.043, -0.033, 0.356, -0.236),
        (0.068, -0.084, -0.224, -0.110),
        (0.085, 0.552, -0.330),
        (0.091, 0.013),
        (0.384,),
        (),
    ),
    N=107,
    known_mean=False,
)

DATASETS: Dict[str, SummaryDataset] = {HIV.name: HIV}


def get_dataset(name: str) -> SummaryDataset:
    try:
        return DATASETS[name.lower()]
    except KeyError:
        raise InputError(f"Unknown dataset '{name}', available: {sorted(DATASETS)}")
