import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import chisquare

from independence_patterns.diagnostics import heterogeneity, heterogeneity_curve, run_distance
from independence_patterns.errors import InputError, ResourceGuardError
from independence_patterns.exact import SAMPLED, exact_posterior
from independence_patterns.models import (
    ConstantScorer, GaussianBicScorer, GaussianScorer, GaussianSuffStats, ModelScorer, optimize_lambda,
)
from independence_patterns.partition import enumerate_partitions, format_partition, parse_partition
from independence_patterns.priors import BlockCountPrior, ForbiddenPairsPrior
from independence_patterns.sampler import (
    PRESETS, SHC_METROPOLIZED, SHC_SOFTMAX, ChainStats, SamplerConfig, _draw, _tempered_probabilities,
    estimate, geometric_ladder, gibbs_candidate_scores, gibbs_candidates, gibbs_sweep,
    gibbs_update_distribution, init_chains,
    metropolized_acceptance, neighbor_count, pt_swap, run, shc_candidate_distribution,
    shc_candidates, swap_acceptance, twoway_shc_step,
)
from independence_patterns.synth import SynthSpec, generate


def quick(preset="gibbs+2wshc+pt", **overrides):
    values = dict(M=50, C=3, J=60, seed=11)
    values.update(overrides)
    return SamplerConfig.from_preset(preset, ladder_size=3, **values)


def stationary_defect(scorer, D, transition):
    """max |pi P - pi| for the exact posterior pi and a kernel built row by row."""
    t = exact_posterior(scorer, D)
    index = {p: i for i, p in enumerate(t.partitions)}
    P = np.zeros((len(index), len(index)))
    for i, p in enumerate(t.partitions):
        for q, prob in transition(p):
            P[i, index[q]] += prob
    assert_allclose(P.sum(axis=1), 1.0)
    return np.abs(t.probs @ P - t.probs).max()


class TestSamplerConfig:
    def test_ladder(self):
        ladder = geometric_ladder(7)
        assert ladder[0] == 1.0
        assert ladder[-1] == 32.0
        assert_allclose(np.diff(np.log(ladder)), math.log(32) / 6)
        assert geometric_ladder(1) == (1.0,)

    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_presets(self, name):
        cfg = SamplerConfig.from_preset(name)
        tempered, alpha1, alpha2 = PRESETS[name]
        assert cfg.L == (7 if tempered else 1)
        assert (cfg.alpha1, cfg.alpha2) == (alpha1, alpha2)
        assert (cfg.M, cfg.C, cfg.J) == (10000, 4, 100000)

    def test_gibbs_pt_alpha_override(self):
        cfg = SamplerConfig.from_preset("gibbs+pt", alpha1=0.3)
        assert_allclose(cfg.alpha2, 0.7)

    @pytest.mark.parametrize("kwargs", [
        dict(M=2, C=3),
        dict(J=1),
        dict(alpha1=0.5, alpha2=0.5),
        dict(temperatures=(2.0, 4.0)),
        dict(temperatures=(1.0, 1.0)),
        dict(alpha1=0.6, alpha2=0.5, temperatures=(1.0, 2.0)),
        dict(burn_in_fraction=1.0),
        dict(shc_mode="greedy"),
        dict(cache_capacity=0),
    ])
    def test_validation(self, kwargs):
        with pytest.raises(InputError):
            SamplerConfig(**kwargs)

    def test_retained_length(self):
        assert SamplerConfig(J=101, burn_in_fraction=0.5).retained_length == 51


class TestGibbs:
    def test_candidates(self):
        p = parse_partition("12|356|4")
        candidates = gibbs_candidates(p, 0)
        assert candidates[0] == p
        assert {format_partition(q) for q in candidates} == {"12|356|4", "1356|2|4", "14|2|356", "1|2|356|4"}
        singleton = gibbs_candidates(p, 3)
        assert len(singleton) == 3
        assert len(set(singleton)) == 3

    def test_infinite_temperature_is_uniform(self, small_gaussian):
        _, probs = gibbs_update_distribution(parse_partition("12|34"), 0, small_gaussian, temperature=1e12)
        assert_allclose(probs, np.full(probs.size, 1 / probs.size))

    def test_tempering_flattens(self, small_gaussian):
        p = parse_partition("12|34")
        candidates, probs = gibbs_update_distribution(p, 1, small_gaussian, temperature=2.0)
        logits = np.array([small_gaussian.score(q) for q in candidates]) / 2.0
        expected = np.exp(logits - logits.max())
        assert_allclose(probs, expected / expected.sum())

    @pytest.mark.parametrize("element", range(4))
    def test_single_site_update_is_stationary(self, small_gaussian, element):
        def kernel(p):
            candidates, probs = gibbs_update_distribution(p, element, small_gaussian)
            return zip(candidates, probs)
        assert stationary_defect(small_gaussian, 4, kernel) < 1e-12

    def test_absorbs_at_dominant_partition(self):
        cov = np.array([[1.0, 0.9, 0.0], [0.9, 1.0, 0.0], [0.0, 0.0, 1.0]])
        scorer = GaussianBicScorer(GaussianSuffStats.from_covariance(cov, 100000))
        rng = np.random.default_rng(3)
        p = parse_partition("1|2|3")
        for _ in range(5):
            p = gibbs_sweep(p, scorer, 1.0, rng)
        assert format_partition(p) == "12|3"

    @pytest.mark.parametrize("prior", [None, BlockCountPrior([1, 2, 3, 4]), ForbiddenPairsPrior([(0, 2)])])
    def test_incremental_scores_match_full_scores(self, small_gaussian, prior):
        scorer = GaussianScorer(small_gaussian.stats, small_gaussian.hyper, prior)
        for p in enumerate_partitions(4):
            for element in range(4):
                candidates, scores = gibbs_candidate_scores(p, element, scorer)
                assert_allclose(scores, [scorer.score(q) for q in candidates], rtol=1e-10)

    def test_draw_skips_zero_probability_entries(self):
        rng = np.random.default_rng(12)
        probs = np.array([0.0, 0.2, 0.0, 0.5, 0.3, 0.0])
        counts = np.bincount([_draw(probs, rng) for _ in range(5000)], minlength=probs.size)
        assert counts[[0, 2, 5]].sum() == 0
        assert chisquare(counts[[1, 3, 4]], 5000 * probs[[1, 3, 4]]).pvalue > 1e-3

    def test_tempered_probabilities_survive_large_scores(self):
        probs = _tempered_probabilities(np.array([-1e6, -1e6 - math.log(3), -math.inf]), 1.0)
        assert_allclose(probs, [0.75, 0.25, 0.0])


class TestTwoWayShc:
    def test_figure_candidate_set(self):
        p = parse_partition("12|356|4")
        candidates = shc_candidates(p)
        assert len(candidates) == 8
        assert candidates[0] == p
        assert neighbor_count(p) == 7

    def test_all_singletons_only_merge(self):
        candidates = shc_candidates(parse_partition("1|2|3"))
        assert {q.K for q in candidates[1:]} == {2}

    def test_guard(self):
        with pytest.raises(ResourceGuardError):
            shc_candidates(parse_partition("1234"), max_candidates=3)

    def test_metropolized_kernel_is_stationary(self, small_gaussian):
        def kernel(p):
            neighbors = shc_candidates(p)[1:]
            score_p = small_gaussian.score(p)
            moves = []
            for q in neighbors:
                prob = metropolized_acceptance(p, q, score_p, small_gaussian.score(q)) / len(neighbors)
                moves.append((q, prob))
            moves.append((p, 1.0 - sum(prob for _, prob in moves)))
            return moves
        assert stationary_defect(small_gaussian, 4, kernel) < 1e-12

    def test_metropolized_acceptance_corrects_neighbourhood_sizes(self):
        p, q = parse_partition("1234"), parse_partition("1|234")
        # |Nbr(1234)| = 7, |Nbr(1|234)| = 1 + 3
        assert_allclose(metropolized_acceptance(p, q, 0.0, 0.0), 1.0)
        assert_allclose(metropolized_acceptance(q, p, 0.0, 0.0), 4 / 7)
        assert metropolized_acceptance(p, q, 0.0, -math.inf) == 0.0

    def test_softmax_mode_draws_from_candidates(self, small_gaussian):
        p = parse_partition("12|34")
        candidates, probs = shc_candidate_distribution(p, small_gaussian)
        assert len(candidates) == 1 + neighbor_count(p)
        assert_allclose(probs.sum(), 1.0)
        rng = np.random.default_rng(5)
        stats = ChainStats()
        q = twoway_shc_step(p, small_gaussian, 1.0, rng, stats=stats)
        assert q in candidates
        assert stats.shc_steps == 1

    def test_single_variable_has_no_moves(self):
        p = parse_partition("1")
        rng = np.random.default_rng(0)
        assert twoway_shc_step(p, ConstantScorer(1), 1.0, rng, mode=SHC_METROPOLIZED) == p

    def test_metropolized_step_proposes_every_neighbour(self):
        p = parse_partition("12|34")
        rng = np.random.default_rng(9)
        stats = ChainStats()
        seen = {twoway_shc_step(p, ConstantScorer(4), 1.0, rng, mode=SHC_METROPOLIZED, stats=stats)
                for _ in range(400)}
        assert seen == set(shc_candidates(p))
        assert stats.shc_proposals == stats.shc_steps == 400

    def test_metropolized_guard(self):
        with pytest.raises(ResourceGuardError):
            twoway_shc_step(parse_partition("1234"), ConstantScorer(4), 1.0, np.random.default_rng(0),
                            mode=SHC_METROPOLIZED, max_candidates=3)

    def test_mode_names(self):
        assert SamplerConfig().shc_mode == SHC_SOFTMAX == "as-paper"
        assert SamplerConfig(shc_mode="softmax").shc_mode == SHC_SOFTMAX
        assert SamplerConfig(shc_mode="Metropolized").shc_mode == SHC_METROPOLIZED


class TestParallelTempering:
    def test_acceptance_values(self):
        assert swap_acceptance(-3.0, -3.0, 1.0, 2.0) == 1.0
        assert swap_acceptance(-5.0, -1.0, 1.0, 2.0) == 1.0
        assert_allclose(swap_acceptance(0.0, -2.0, 1.0, 2.0), math.exp(-1.0))

    def test_detailed_balance_of_swap(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            a, b = rng.normal(scale=5.0, size=2)
            t_low, t_high = 1.0, 1.0 + rng.exponential(3.0)
            forward = math.exp(a / t_low + b / t_high) * swap_acceptance(a, b, t_low, t_high)
            backward = math.exp(b / t_low + a / t_high) * swap_acceptance(b, a, t_low, t_high)
            assert_allclose(forward, backward)

    def test_two_state_swap_frequency(self):
        # 123 scores 0, 1|2|3 scores ln 4 under this prior
        scorer = ConstantScorer(3, BlockCountPrior([1, 2, 4]))
        low, high = parse_partition("1|2|3"), parse_partition("123")
        rng = np.random.default_rng(2024)
        stats = ChainStats()
        trials = 4000
        for _ in range(trials):
            pt_swap([low, high], scorer, (1.0, 2.0), rng, stats)
        rate = stats.swap_accepts / trials
        assert stats.swap_proposals == trials
        assert abs(rate - 0.5) < 3 * math.sqrt(0.25 / trials)
        always = pt_swap([high, low], scorer, (1.0, 2.0), rng)
        assert always == [low, high]

    def test_needs_two_sequences(self):
        with pytest.raises(InputError):
            pt_swap([parse_partition("12")], ConstantScorer(2), (1.0,), np.random.default_rng(0))


class TestInitChains:
    def test_shared_starts_when_few_partitions(self):
        cfg = SamplerConfig(M=5, C=3, J=2)
        starts = init_chains(cfg, ConstantScorer(1), np.random.default_rng(0))
        assert starts == [parse_partition("1")] * 3

    def test_distinct_starts(self, small_gaussian):
        cfg = SamplerConfig(M=4, C=4, J=2)
        starts = init_chains(cfg, small_gaussian, np.random.default_rng(8))
        assert len(set(starts)) == 4

    def test_favours_high_posterior_states(self, hiv_optim):
        exact = exact_posterior(hiv_optim, 6)
        cfg = SamplerConfig(M=2000, C=40, J=2)
        starts = init_chains(cfg, hiv_optim, np.random.default_rng(4))
        assert parse_partition("12356|4") in starts
        assert np.mean([exact.probability(p) for p in starts]) > 1 / len(exact.partitions)


class TestRun:
    def test_shapes_and_counters(self, small_gaussian):
        cfg = quick()
        chains = run(cfg, small_gaussian)
        assert chains.C == 3
        assert all(len(trace) == cfg.J for trace in chains.traces)
        assert all(len(trace) == cfg.retained_length for trace in chains.retained)
        assert all(len(states) == cfg.L for states in chains.final_states)
        for stats in chains.stats:
            assert stats.steps == cfg.J - 1
            # every non-swap step touches each tempered sequence once
            assert stats.swap_proposals + (stats.gibbs_sweeps + stats.shc_steps) // cfg.L == stats.steps
        assert chains.cache_stats["misses"] <= 15 * cfg.C + 15

    def test_same_seed_same_traces(self, small_gaussian):
        assert run(quick(), small_gaussian).traces == run(quick(), small_gaussian).traces

    def test_different_seed_differs(self, small_gaussian):
        assert run(quick(seed=1), small_gaussian).traces != run(quick(seed=2), small_gaussian).traces

    def test_independent_of_workers_and_cache(self, small_gaussian):
        base = run(quick(), small_gaussian).traces
        assert run(quick(workers=3), small_gaussian).traces == base
        assert run(quick(use_cache=False), small_gaussian).traces == base
        assert run(quick(shared_cache=True, workers=3), small_gaussian).traces == base
        assert run(quick(cache_capacity=2, audit_rate=0.5), small_gaussian).traces == base

    def test_cache_totals_include_initialization(self, small_gaussian):
        # identical traces make identical lookups, whichever caches serve them
        private = run(quick(), small_gaussian).cache_stats
        shared = run(quick(shared_cache=True), small_gaussian).cache_stats
        assert private["hits"] + private["misses"] == shared["hits"] + shared["misses"]
        assert private["misses"] >= shared["misses"]

    def test_failing_candidates_are_removed(self):
        stats = GaussianSuffStats(np.array([[10.0, 20.0], [20.0, 10.0]]), 10)
        cfg = SamplerConfig.from_preset("gibbs", M=10, C=2, J=20, seed=0)
        chains = run(cfg, GaussianBicScorer(stats))
        assert chains.removals > 0
        assert all(format_partition(p) == "1|2" for trace in chains.traces for p in trace)

    def test_estimate(self, small_gaussian):
        cfg = quick()
        chains = run(cfg, small_gaussian)
        table, profile = estimate(chains)
        assert table.mode == SAMPLED
        assert_allclose(table.probs.sum(), 1.0)
        assert profile.C == cfg.C
        assert set(table.partitions) <= set(enumerate_partitions(4))
        assert 0.0 <= heterogeneity(profile) <= 2.0
        curve = heterogeneity_curve(chains.traces, cfg.burn_in_fraction)
        assert curve[-1][0] == cfg.J


# blocks of the two equally likely states 1234|5678 and 1357|2468
TWO_MODE_BLOCKS = frozenset({(0, 1, 2, 3), (4, 5, 6, 7), (0, 2, 4, 6), (1, 3, 5, 7)})


class TwoModeScorer(ModelScorer):
    """D=8 target with all its mass on two partitions that share no block."""
    kind = "two-mode"

    def __init__(self) -> None:
        super().__init__(8)

    def block_score(self, block):
        return 12.0 if block in TWO_MODE_BLOCKS else -(len(block) - 1.0)


@pytest.fixture
def synthetic_gaussian():
    result = generate(SynthSpec(D=4, N=30, K=2, seed=21))
    stats = result.gaussian_stats()
    return GaussianScorer(stats, optimize_lambda(stats))


@pytest.mark.slow
class TestSamplerAgainstExact:
    def test_hiv_combined_preset(self, hiv_optim):
        cfg = SamplerConfig.from_preset("gibbs+2wshc+pt", M=10000, C=4, J=100000, seed=7)
        chains = run(cfg, hiv_optim)
        table, profile = estimate(chains)
        assert run_distance(table, exact_posterior(hiv_optim, 6)) <= 0.05
        assert heterogeneity(profile) <= 0.1

    @pytest.mark.parametrize("preset", sorted(PRESETS))
    def test_every_preset_reaches_gaussian_target(self, synthetic_gaussian, preset):
        cfg = SamplerConfig.from_preset(preset, ladder_size=3, max_temperature=4.0, M=1000, C=1,
                                        J=10 ** 6, seed=3, shc_mode=SHC_METROPOLIZED, burn_in_fraction=0.1)
        table, _ = estimate(run(cfg, synthetic_gaussian))
        assert run_distance(table, exact_posterior(synthetic_gaussian, 4)) <= 0.03

    def test_metropolized_uniform_over_five(self):
        cfg = SamplerConfig.from_preset("2wshc", M=100, C=1, J=10 ** 6, seed=5,
                                        shc_mode=SHC_METROPOLIZED, burn_in_fraction=0.0)
        chains = run(cfg, ConstantScorer(5))
        table, _ = estimate(chains)
        observed = np.array([table.probability(p) for p in enumerate_partitions(5)]) * cfg.J
        # thinning to roughly independent draws before the chi-square test
        assert chisquare(observed / 20).pvalue > 1e-3

    def test_tempering_mixes_between_separated_modes(self):
        scorer = TwoModeScorer()
        final = {}
        for preset in ("gibbs", "2wshc", "gibbs+2wshc+pt"):
            cfg = SamplerConfig.from_preset(preset, M=20000, C=4, J=30000, seed=8)
            _, profile = estimate(run(cfg, scorer))
            final[preset] = heterogeneity(profile)
        assert final["gibbs"] > final["gibbs+2wshc+pt"]
        assert final["2wshc"] > final["gibbs+2wshc+pt"]
