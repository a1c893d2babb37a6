"""
data_loader.py

Reads analysis inputs from CSV files and writes posterior tables, traces
and reports. Inputs:

- raw: one observation per row, one variable per column (header optional)
- covariance / correlation: a square matrix (header optional)
- contingency: rows "coord_1, ..., coord_D, count" preceded by an
  "# arities: 2,3,2" comment line
- categorical: one observation per row, levels coded 0..I_d - 1
"""
import os
import re
import json
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import InputError
from .exact import PosteriorTable
from .models import GaussianSuffStats, MultinomialSuffStats
from .partition import Partition

logger = logging.getLogger("independence_patterns")

_ARITIES_PATTERN = re.compile(r"^#\s*arities\s*:\s*([\d,\s]+)$", re.IGNORECASE)


class InputKind(Enum):
    RAW = "raw"
    COVARIANCE = "covariance"
    CORRELATION = "correlation"
    CONTINGENCY = "contingency"
    CATEGORICAL = "categorical"


@dataclass(frozen=True)
class DataSource:
    """Where the input comes from and how to turn it into statistics."""
    path: str
    kind: InputKind = InputKind.RAW
    n_obs: Optional[int] = None
    known_mean: bool = False


def _read_numeric(path: str) -> np.ndarray:
    """Numeric CSV with an optional non-numeric header row."""
    if not os.path.exists(path):
        raise InputError(f"Input file not found: {path}")
    try:
        frame = pd.read_csv(path, header=None, comment="#", decimal=".", skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InputError(f"Cannot parse {path}: {e}")
    if frame.empty:
        raise InputError(f"No rows in {path}")
    first = pd.to_numeric(frame.iloc[0], errors="coerce")
    if first.isna().any():
        frame = frame.iloc[1:]
    values = frame.apply(pd.to_numeric, errors="coerce")
    if values.isna().any().any():
        raise InputError(f"Non-numeric or missing values in {path}")
    return values.to_numpy(dtype=float)


def read_arities(path: str) -> Optional[Tuple[int, ...]]:
    with open(path, encoding="utf-8") as f:
        for line in f:
            match = _ARITIES_PATTERN.match(line.strip())
            if match:
                return tuple(int(a) for a in match.group(1).replace(" ", "").split(",") if a)
            if line.strip() and not line.lstrip().startswith("#"):
                break
    return None


def load_raw_data(path: str) -> np.ndarray:
    data = _read_numeric(path)
    logger.info(f"Loaded {data.shape[0]} observations of {data.shape[1]} variables from {path}")
    return data


def load_matrix(path: str) -> np.ndarray:
    matrix = _read_numeric(path)
    if matrix.shape[0] != matrix.shape[1]:
        raise InputError(f"Matrix in {path} is {matrix.shape[0]}x{matrix.shape[1]}, expected square")
    return matrix


def load_contingency(path: str) -> MultinomialSuffStats:
    values = _read_numeric(path)
    if values.shape[1] < 2:
        raise InputError(f"Contingency rows need coordinates and a count: {path}")
    coords = values[:, :-1]
    counts = values[:, -1]
    if np.any(coords < 0) or np.any(coords != np.round(coords)):
        raise InputError(f"Cell coordinates must be non-negative integers: {path}")
    coords = coords.astype(np.int64)
    arities = read_arities(path) or tuple(int(v) for v in np.maximum(coords.max(axis=0) + 1, 2))
    if len(arities) != coords.shape[1]:
        raise InputError(f"Arities {arities} do not match {coords.shape[1]} coordinate columns")
    if np.any(coords >= np.asarray(arities)):
        raise InputError(f"A coordinate exceeds the declared arities {arities}")
    table = np.zeros(arities, dtype=float)
    np.add.at(table, tuple(coords.T), counts)
    return MultinomialSuffStats(table)


def load_categorical(path: str, arities: Optional[Sequence[int]] = None) -> MultinomialSuffStats:
    data = _read_numeric(path)
    declared = tuple(arities) if arities is not None else read_arities(path)
    return MultinomialSuffStats.from_observations(data, declared)


def load_gaussian(source: DataSource, correlation: bool = False) -> GaussianSuffStats:
    """Gaussian sufficient statistics from a raw, covariance or correlation source."""
    if source.kind == InputKind.RAW:
        return GaussianSuffStats.from_data(load_raw_data(source.path), known_mean=source.known_mean,
                                           correlation=correlation)
    if source.kind in (InputKind.COVARIANCE, InputKind.CORRELATION):
        if source.n_obs is None:
            raise InputError("Matrix input needs the number of observations (--n-obs)")
        n_eff = source.n_obs if source.known_mean else source.n_obs - 1
        return GaussianSuffStats.from_covariance(
            load_matrix(source.path), n_eff,
            correlation=correlation or source.kind == InputKind.CORRELATION,
        )
    raise InputError(f"Input kind '{source.kind.value}' has no Gaussian statistics")


def load_multinomial(source: DataSource) -> MultinomialSuffStats:
    if source.kind == InputKind.CONTINGENCY:
        return load_contingency(source.path)
    if source.kind == InputKind.CATEGORICAL:
        return load_categorical(source.path)
    raise InputError(f"Input kind '{source.kind.value}' has no multinomial statistics")


# --- writers ---

def format_probability(value: float) -> str:
    """6 significant digits, scientific notation below 1e-3."""
    if value == 0:
        return "0"
    if abs(value) < 1e-3:
        return f"{value:.5e}"
    return f"{value:.6g}"


def _ensure_dir(path: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)


def write_posterior_csv(table: PosteriorTable, path: str, top: Optional[int] = None) -> str:
    frame = table.to_frame()
    if top is not None:
        frame = frame.head(top)
    frame["probability"] = frame["probability"].map(format_probability)
    _ensure_dir(path)
    frame.to_csv(path, index=False)
    logger.info(f"Posterior table written to {path}")
    return path


def write_frame(frame: pd.DataFrame, path: str, index: bool = False) -> str:
    _ensure_dir(path)
    frame.to_csv(path, index=index, float_format="%.6g")
    logger.info(f"Table written to {path}")
    return path


def write_json(payload: Dict[str, Any], path: str) -> str:
    _ensure_dir(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True, indent=2, default=lambda v: v.tolist() if hasattr(v, "tolist") else str(v))
    logger.info(f"Report written to {path}")
    return path


def write_trace(trace: Sequence[Partition], path: str) -> str:
    """One restricted growth string per line."""
    _ensure_dir(path)
    with open(path, "w", encoding="utf-8") as f:
        for p in trace:
            f.write(",".join(str(label) for label in p.rgs) if p.D > 9 else "".join(map(str, p.rgs)))
            f.write("\n")
    return path


def write_data_csv(data: np.ndarray, path: str) -> str:
    frame = pd.DataFrame(data, columns=[f"X{d + 1}" for d in range(data.shape[1])])
    _ensure_dir(path)
    frame.to_csv(path, index=False)
    return path
