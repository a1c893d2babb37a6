import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from independence_patterns.errors import InputError
from independence_patterns.exact import block_count_posterior, exact_posterior
from independence_patterns.models import ConstantScorer
from independence_patterns.partition import enumerate_partitions, parse_partition
from independence_patterns.priors import (
    BlockCountPrior, ForbiddenPairsPrior, ProductPartitionPrior, UniformPrior,
)


class TestUniformPrior:
    def test_contributes_nothing(self):
        prior = UniformPrior()
        assert prior.is_uniform
        assert all(prior.log_prior(p) == 0.0 for p in enumerate_partitions(4))


class TestBlockCountPrior:
    def test_flat_makes_block_counts_equally_likely(self):
        t = exact_posterior(ConstantScorer(5, BlockCountPrior.flat(5)), 5)
        assert_allclose(block_count_posterior(t), np.full(5, 0.2))

    def test_weights_carry_through(self):
        t = exact_posterior(ConstantScorer(4, BlockCountPrior([1, 2, 3, 4])), 4)
        assert_allclose(block_count_posterior(t), np.array([1, 2, 3, 4]) / 10)

    def test_zero_weight_excludes(self):
        prior = BlockCountPrior([0, 1, 1])
        assert prior.log_prior(parse_partition("123")) == -math.inf

    def test_invalid_weights(self):
        with pytest.raises(InputError):
            BlockCountPrior([])
        with pytest.raises(InputError):
            BlockCountPrior([0, 0])
        with pytest.raises(InputError):
            BlockCountPrior([1, -1])

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            BlockCountPrior.flat(3).log_prior(parse_partition("1234"))


class TestProductPartitionPrior:
    def test_dirichlet_process_cohesion(self):
        prior = ProductPartitionPrior.dirichlet_process(2.0)
        value = prior.log_prior(parse_partition("12|356|4"))
        assert_allclose(value, 3 * math.log(2.0) + math.log(2.0))

    def test_custom_cohesion(self):
        prior = ProductPartitionPrior(lambda block: float(len(block)), name="size")
        assert prior.log_prior(parse_partition("12|3")) == 3.0

    def test_concentration_must_be_positive(self):
        with pytest.raises(InputError):
            ProductPartitionPrior.dirichlet_process(0.0)


class TestForbiddenPairsPrior:
    def test_forbidden_pair_has_no_mass(self):
        t = exact_posterior(ConstantScorer(3, ForbiddenPairsPrior([(0, 1)])), 3)
        assert t.probability(parse_partition("12|3")) == 0.0
        assert t.probability(parse_partition("123")) == 0.0
        for text in ("13|2", "1|23", "1|2|3"):
            assert_allclose(t.probability(parse_partition(text)), 1 / 3)
