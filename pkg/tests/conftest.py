import numpy as np
import pytest

from independence_patterns.config import Config
from independence_patterns.datasets import HIV
from independence_patterns.model_manager import ModelManager
from independence_patterns.models import GaussianHyper, GaussianScorer, GaussianSuffStats


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow statistical tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running statistical acceptance test")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def config(tmp_path, monkeypatch):
    """Defaults only: no config.ini and no INDEP_* variables leak in."""
    for var in ("INDEP_SEED", "INDEP_WORKERS", "INDEP_OUT_DIR", "INDEP_LOG_FILE"):
        monkeypatch.delenv(var, raising=False)
    monkeypatch.chdir(tmp_path)
    return Config(str(tmp_path / "config.ini"))


@pytest.fixture
def hiv_manager(config):
    return ModelManager(config)


@pytest.fixture
def hiv_optim(hiv_manager):
    stats = hiv_manager.load_statistics("bayes-optim", dataset=HIV)
    return hiv_manager.build("bayes-optim", stats)


@pytest.fixture
def small_gaussian():
    """D=4 scorer with a moderately spread posterior: 12 correlated, 3 and 4 weakly."""
    cov = np.array([
        [1.0, 0.4, 0.1, 0.0],
        [0.4, 1.0, 0.0, 0.1],
        [0.1, 0.0, 1.0, 0.15],
        [0.0, 0.1, 0.15, 1.0],
    ])
    stats = GaussianSuffStats.from_covariance(cov, 40)
    return GaussianScorer(stats, GaussianHyper(nu=4, lambda_diag=np.ones(4)))
