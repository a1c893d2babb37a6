import numpy as np
import pytest
from numpy.testing import assert_allclose

from independence_patterns.diagnostics import (
    distance_matrix, frequency_profile, group_distances, heterogeneity, heterogeneity_curve,
    log_checkpoints, run_distance,
)
from independence_patterns.errors import InputError
from independence_patterns.exact import SAMPLED, PosteriorTable
from independence_patterns.partition import enumerate_partitions, format_partition, parse_partition
from independence_patterns.sampler import ChainSet, ChainStats, estimate


def table(entries, D=3):
    return PosteriorTable([parse_partition(k) for k in entries], list(entries.values()), D, SAMPLED)


class TestHeterogeneity:
    def test_identical_chains(self):
        trace = [parse_partition(t) for t in ("12|3", "123", "12|3")]
        assert heterogeneity(frequency_profile([trace, list(trace)])) == 0.0

    @pytest.mark.parametrize("C, expected", [(2, 1.0), (4, 1.5)])
    def test_disjoint_degenerate_chains(self, C, expected):
        states = list(enumerate_partitions(3))[:C]
        traces = [[p] * 10 for p in states]
        assert_allclose(heterogeneity(frequency_profile(traces)), expected)

    def test_pooled_weights_by_sample_count(self):
        a, b = parse_partition("123"), parse_partition("1|2|3")
        profile = frequency_profile([[a] * 3, [b]])
        assert profile.C == 2
        assert profile.Q == 2
        assert_allclose(profile.pooled, [0.75, 0.25])
        assert_allclose(profile.sample_counts, [3, 1])

    def test_empty_trace(self):
        with pytest.raises(InputError):
            frequency_profile([[parse_partition("12")], []])
        with pytest.raises(InputError):
            frequency_profile([])

    def test_invariant_to_chain_and_support_order(self):
        rng = np.random.default_rng(3)
        partitions = list(enumerate_partitions(4))
        traces = [[partitions[i] for i in rng.integers(0, 6 + 3 * c, size=30)] for c in range(4)]
        base = heterogeneity(frequency_profile(traces))
        assert base > 0
        assert_allclose(heterogeneity(frequency_profile(traces[::-1])), base)
        # reversed traces list the support in another order
        reordered = frequency_profile([t[::-1] for t in traces])
        assert reordered.support != frequency_profile(traces).support
        assert_allclose(heterogeneity(reordered), base)

    def test_bounded_by_disjoint_chains(self):
        rng = np.random.default_rng(5)
        partitions = list(enumerate_partitions(4))
        for C in (2, 3, 4):
            traces = [[partitions[i] for i in rng.integers(0, 15, size=20)] for _ in range(C)]
            assert heterogeneity(frequency_profile(traces)) <= 2 * (C - 1) / C + 1e-12


class TestRunDistance:
    def test_disjoint_supports(self):
        assert run_distance(table({"123": 1.0}), table({"1|2|3": 1.0})) == 2.0

    def test_swapped_masses(self):
        a = table({"123": 0.6, "12|3": 0.4})
        b = table({"123": 0.4, "12|3": 0.6})
        assert_allclose(run_distance(a, b), 0.4)
        assert run_distance(a, a) == 0.0

    def test_metric_properties(self):
        rng = np.random.default_rng(6)
        partitions = [format_partition(p) for p in enumerate_partitions(3)]
        tables = []
        for _ in range(6):
            chosen = rng.choice(len(partitions), size=rng.integers(1, 6), replace=False)
            probs = rng.dirichlet(np.ones(chosen.size))
            tables.append(table({partitions[i]: w for i, w in zip(chosen, probs)}))
        for a in tables:
            for b in tables:
                assert_allclose(run_distance(a, b), run_distance(b, a))
                assert 0.0 <= run_distance(a, b) <= 2.0 + 1e-12
                for c in tables:
                    assert run_distance(a, c) <= run_distance(a, b) + run_distance(b, c) + 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            run_distance(table({"123": 1.0}), table({"12": 1.0}, D=2))

    def test_matrix_and_groups(self):
        estimates = [
            table({"123": 1.0}),
            table({"123": 0.5, "12|3": 0.5}),
            table({"1|2|3": 1.0}),
            table({"1|2|3": 1.0}),
        ]
        matrix = distance_matrix(estimates, ["a1", "a2", "b1", "b2"])
        values = matrix.to_numpy()
        assert_allclose(values, values.T)
        assert_allclose(np.diag(values), 0.0)
        assert_allclose(values[0, 1], 1.0)

        groups = group_distances(matrix, ["a", "a", "b", "b"])
        rows = {(r.group_a, r.group_b): r for r in groups.itertuples()}
        assert set(rows) == {("a", "a"), ("a", "b"), ("b", "b")}
        assert_allclose(rows[("a", "a")].mean, 1.0)
        assert rows[("a", "a")].pairs == 1
        assert rows[("a", "a")].sd == 0.0
        assert_allclose(rows[("b", "b")].mean, 0.0)
        assert rows[("a", "b")].pairs == 4
        assert_allclose(rows[("a", "b")].mean, 2.0)

    def test_matrix_needs_labels(self):
        with pytest.raises(InputError):
            distance_matrix([table({"123": 1.0})], ["a", "b"])


class TestCurve:
    def test_checkpoints(self):
        assert log_checkpoints(100) == [2, 5, 10, 20, 50, 100]
        assert log_checkpoints(7) == [2, 5, 7]
        assert log_checkpoints(1) == [1]
        assert log_checkpoints(1000)[-1] == 1000

    def test_identical_chains_give_zero(self):
        rng = np.random.default_rng(2)
        partitions = list(enumerate_partitions(3))
        trace = [partitions[i] for i in rng.integers(len(partitions), size=40)]
        curve = heterogeneity_curve([trace, list(trace)], 0.5)
        assert [j for j, _ in curve] == [2, 5, 10, 20, 40]
        assert all(value == 0.0 for _, value in curve)

    def test_bad_checkpoint(self):
        trace = [parse_partition("12")] * 5
        with pytest.raises(InputError):
            heterogeneity_curve([trace], 0.5, checkpoints=[6])


class TestEstimate:
    def test_two_disjoint_chains(self):
        a, b = parse_partition("12"), parse_partition("1|2")
        chains = ChainSet(D=2, traces=[[b] + [a] * 9, [a] + [b] * 9], final_states=[[a], [b]],
                          stats=[ChainStats(), ChainStats()], burn_in_fraction=0.5)
        posterior, profile = estimate(chains)
        assert posterior.mode == SAMPLED
        assert_allclose(posterior.probability(a), 0.5)
        assert_allclose(posterior.probability(b), 0.5)
        assert_allclose(heterogeneity(profile), 1.0)
