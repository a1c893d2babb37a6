"""
sampler.py

MCMC over set partitions. Each of C independent chains runs L tempered
sequences (T_1 = 1 < ... < T_L). At every step a chain either proposes a
swap between two adjacent sequences, applies an element-wise Gibbs sweep to
every sequence, or applies a 2-way stochastic hierarchical clustering
(merge / split) step to every sequence.

Starting states come from importance resampling of M uniform partitions.
"""
import math
import time
import logging
import concurrent.futures
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .cache import BlockScoreCache, CachedScorer
from .diagnostics import FrequencyProfile, frequency_profile
from .errors import InputError, NumericalError, ResourceGuardError, SamplerError
from .exact import SAMPLED, PosteriorTable
from .models import ModelScorer
from .partition import (
    EXACT_INTEGER_LIMIT, Partition, bell, canonicalize, format_partition,
    merge_count, merge_neighbors, neighbor_at, sample_uniform, split_count, split_neighbors,
)

logger = logging.getLogger("independence_patterns")

SHC_SOFTMAX = "as-paper"
SHC_METROPOLIZED = "metropolized"
SHC_MODES = (SHC_SOFTMAX, SHC_METROPOLIZED)
# older spelling of the softmax mode
SHC_ALIASES = {"softmax": SHC_SOFTMAX}


def resolve_shc_mode(mode: str) -> str:
    key = str(mode).strip().lower()
    key = SHC_ALIASES.get(key, key)
    if key not in SHC_MODES:
        raise InputError(f"Unknown 2wSHC mode '{mode}', expected one of {SHC_MODES}")
    return key


DEFAULT_MAX_TEMPERATURE = 32.0
DEFAULT_LADDER_SIZE = 7

# name -> (tempered, alpha1, alpha2)
PRESETS: Dict[str, Tuple[bool, float, float]] = {
    "gibbs": (False, 0.0, 1.0),
    "2wshc": (False, 0.0, 0.0),
    "gibbs+2wshc": (False, 0.0, 0.8),
    "gibbs+pt": (True, 0.5, 0.5),
    "2wshc+pt": (True, 0.5, 0.0),
    "gibbs+2wshc+pt": (True, 0.5, 0.4),
}

_ALPHA_TOLERANCE = 1e-12


def geometric_ladder(L: int, max_temperature: float = DEFAULT_MAX_TEMPERATURE) -> Tuple[float, ...]:
    """T_l = r^(l-1) with r chosen so that T_L = max_temperature."""
    if L < 1:
        raise InputError(f"Ladder size must be >= 1, got {L}")
    if L == 1:
        return (1.0,)
    if max_temperature <= 1.0:
        raise InputError(f"Maximum temperature must exceed 1, got {max_temperature}")
    ratio = max_temperature ** (1.0 / (L - 1))
    return tuple(float(ratio ** l) for l in range(L - 1)) + (float(max_temperature),)


@dataclass(frozen=True)
class SamplerConfig:
    """
    Sampler parameters. alpha1 is the swap probability, alpha2 the Gibbs
    probability; the remaining 1 - alpha1 - alpha2 goes to 2wSHC steps.
    """
    M: int = 10000
    C: int = 4
    J: int = 100000
    temperatures: Tuple[float, ...] = (1.0,)
    alpha1: float = 0.0
    alpha2: float = 1.0
    burn_in_fraction: float = 0.5
    seed: int = 0
    shc_mode: str = SHC_SOFTMAX
    random_scan: bool = False
    use_cache: bool = True
    cache_capacity: Optional[int] = None
    shared_cache: bool = False
    audit_rate: float = 0.0
    max_candidates: int = 1_000_000
    workers: int = 1
    preset: Optional[str] = None

    def __post_init__(self) -> None:
        temps = tuple(float(t) for t in self.temperatures)
        object.__setattr__(self, "temperatures", temps)
        if not 1 <= self.C <= self.M:
            raise InputError(f"Need M >= C >= 1, got M={self.M}, C={self.C}")
        if self.J < 2:
            raise InputError(f"Chains need J >= 2 steps, got {self.J}")
        if not temps or temps[0] != 1.0:
            raise InputError("The first temperature must be exactly 1")
        if any(b <= a for a, b in zip(temps, temps[1:])):
            raise InputError(f"Temperatures must be strictly increasing, got {temps}")
        if not 0.0 <= self.alpha1 < 1.0:
            raise InputError(f"alpha1 must be in [0, 1), got {self.alpha1}")
        if not 0.0 <= self.alpha2 <= 1.0 - self.alpha1 + _ALPHA_TOLERANCE:
            raise InputError(f"alpha2 must be in [0, 1 - alpha1], got {self.alpha2}")
        if self.alpha1 > 0 and len(temps) < 2:
            raise InputError("Swap steps (alpha1 > 0) need at least two temperatures")
        if not 0.0 <= self.burn_in_fraction < 1.0:
            raise InputError(f"Burn-in fraction must be in [0, 1), got {self.burn_in_fraction}")
        object.__setattr__(self, "shc_mode", resolve_shc_mode(self.shc_mode))
        if self.cache_capacity is not None and self.cache_capacity < 1:
            raise InputError(f"Cache capacity must be >= 1, got {self.cache_capacity}")
        if self.max_candidates < 1:
            raise InputError(f"max_candidates must be >= 1, got {self.max_candidates}")
        if self.workers < 1:
            raise InputError(f"workers must be >= 1, got {self.workers}")

    @property
    def L(self) -> int:
        return len(self.temperatures)

    @property
    def retained_length(self) -> int:
        return self.J - math.floor(self.J * self.burn_in_fraction)

    @classmethod
    def from_preset(
        cls,
        name: str,
        ladder_size: int = DEFAULT_LADDER_SIZE,
        max_temperature: float = DEFAULT_MAX_TEMPERATURE,
        **overrides,
    ) -> "SamplerConfig":
        """
        Build a configuration for one of the named sampling families.
        Overrides win over preset values; for gibbs+pt an overridden alpha1
        keeps alpha2 = 1 - alpha1 unless alpha2 is given too.
        """
        key = name.lower()
        if key not in PRESETS:
            raise InputError(f"Unknown preset '{name}', expected one of {sorted(PRESETS)}")
        tempered, alpha1, alpha2 = PRESETS[key]
        values = dict(
            temperatures=geometric_ladder(ladder_size, max_temperature) if tempered else (1.0,),
            alpha1=alpha1,
            alpha2=alpha2,
            preset=key,
        )
        if key == "gibbs+pt" and "alpha1" in overrides and "alpha2" not in overrides:
            values["alpha2"] = 1.0 - overrides["alpha1"]
        values.update(overrides)
        return cls(**values)

    def with_seed(self, seed: int) -> "SamplerConfig":
        return replace(self, seed=seed)

    def as_dict(self) -> dict:
        return dict(
            preset=self.preset, M=self.M, C=self.C, J=self.J, L=self.L,
            temperatures=list(self.temperatures), alpha1=self.alpha1, alpha2=self.alpha2,
            burn_in_fraction=self.burn_in_fraction, seed=self.seed, shc_mode=self.shc_mode,
            random_scan=self.random_scan, use_cache=self.use_cache,
            cache_capacity=self.cache_capacity, shared_cache=self.shared_cache,
            audit_rate=self.audit_rate, max_candidates=self.max_candidates, workers=self.workers,
        )


@dataclass
class ChainStats:
    """Per-chain counters; removals are candidates dropped after a scorer failure."""
    steps: int = 0
    swap_proposals: int = 0
    swap_accepts: int = 0
    gibbs_sweeps: int = 0
    shc_steps: int = 0
    shc_proposals: int = 0
    shc_accepts: int = 0
    removals: int = 0
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return dict(
            steps=self.steps,
            swap_proposals=self.swap_proposals,
            swap_accepts=self.swap_accepts,
            swap_rate=self.swap_accepts / self.swap_proposals if self.swap_proposals else None,
            gibbs_sweeps=self.gibbs_sweeps,
            shc_steps=self.shc_steps,
            shc_acceptance=self.shc_accepts / self.shc_proposals if self.shc_proposals else None,
            removals=self.removals,
            seconds=self.seconds,
            seconds_per_step=self.seconds / self.steps if self.steps else None,
        )


@dataclass(eq=False)
class ChainSet:
    """
    Result of a run: full T = 1 traces (J states each, start included), the
    final state of every tempered sequence and per-chain counters.
    """
    D: int
    traces: List[List[Partition]]
    final_states: List[List[Partition]]
    stats: List[ChainStats]
    burn_in_fraction: float = 0.5
    cache_stats: Dict[str, int] = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def C(self) -> int:
        return len(self.traces)

    @property
    def retained(self) -> List[List[Partition]]:
        """Post burn-in part of each trace."""
        return [t[math.floor(len(t) * self.burn_in_fraction):] for t in self.traces]

    @property
    def removals(self) -> int:
        return sum(s.removals for s in self.stats)

    def summary(self) -> dict:
        return dict(
            chains=[s.as_dict() for s in self.stats],
            removals=self.removals,
            cache=dict(self.cache_stats),
            seconds=self.seconds,
        )


# --- move kernels ---

def _candidate_scores(
    scorer: ModelScorer,
    candidates: Sequence[Partition],
    stats: Optional[ChainStats] = None,
) -> np.ndarray:
    """Scores with failing candidates mapped to -inf and counted."""
    out = np.empty(len(candidates))
    for i, q in enumerate(candidates):
        try:
            out[i] = scorer.score(q)
        except NumericalError as e:
            out[i] = -math.inf
            _record_removal(stats, q, e)
    return out


def _record_removal(stats: Optional[ChainStats], q: Partition, error: NumericalError) -> None:
    if stats is None:
        return
    stats.removals += 1
    if stats.removals == 1:
        logger.warning(f"Candidate {format_partition(q)} removed after scorer failure: {error}")
    else:
        logger.debug(f"Candidate {format_partition(q)} removed: {error}")


def _tempered_probabilities(scores: np.ndarray, temperature: float) -> np.ndarray:
    """Softmax of scores / T; removed (-inf) candidates get probability 0."""
    logits = scores / temperature
    if not np.isfinite(logits).any():
        raise NumericalError("Every candidate was removed or has zero probability")
    weights = np.exp(logits - logits[np.isfinite(logits)].max())
    return weights / weights.sum()


def _draw(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Index drawn from a categorical distribution with one uniform variate."""
    cumulative = np.cumsum(probs)
    index = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))
    if index >= len(probs):
        # u * total rounded up to total
        index = int(np.flatnonzero(probs)[-1])
    return index


def gibbs_candidates(p: Partition, element: int) -> List[Partition]:
    """
    `p` first, then `element` moved into every other block, then into a new
    singleton (skipped when it already is one).
    """
    if not 0 <= element < p.D:
        raise InputError(f"Element {element} out of range for D={p.D}")
    own = p.rgs[element]
    alone = len(p.blocks[own]) == 1
    labels = list(p.rgs)
    out = [p]
    for target in range(p.K + 1):
        if target == own or (target == p.K and alone):
            continue
        labels[element] = target
        out.append(canonicalize(labels))
    return out


def gibbs_update_distribution(
    p: Partition,
    element: int,
    scorer: ModelScorer,
    temperature: float = 1.0,
    stats: Optional[ChainStats] = None,
) -> Tuple[List[Partition], np.ndarray]:
    """Full conditional of the placement of `element` under the tempered target."""
    candidates, scores = gibbs_candidate_scores(p, element, scorer, stats=stats)
    return candidates, _tempered_probabilities(scores, temperature)


def gibbs_candidate_scores(
    p: Partition,
    element: int,
    scorer: ModelScorer,
    score_p: Optional[float] = None,
    stats: Optional[ChainStats] = None,
) -> Tuple[List[Partition], np.ndarray]:
    """
    Scores of gibbs_candidates(p, element). Only the block `element` leaves
    and the block it joins change, so each candidate costs two block scores
    plus its prior instead of a full rescoring.
    """
    candidates = gibbs_candidates(p, element)
    if score_p is None:
        score_p = scorer.score(p)
    if not math.isfinite(score_p):
        return candidates, _candidate_scores(scorer, candidates, stats)
    blocks = p.blocks
    own = p.rgs[element]
    rest = tuple(e for e in blocks[own] if e != element)
    base = score_p - scorer.block_score(blocks[own]) - scorer.log_prior(p)

    scores = np.empty(len(candidates))
    scores[0] = score_p
    targets = [t for t in range(p.K + 1) if t != own and not (t == p.K and not rest)]
    for i, (target, q) in enumerate(zip(targets, candidates[1:]), start=1):
        try:
            gain = scorer.block_score(rest) if rest else 0.0
            if target == p.K:
                gain += scorer.block_score((element,))
            else:
                joined = tuple(sorted(blocks[target] + (element,)))
                gain += scorer.block_score(joined) - scorer.block_score(blocks[target])
            scores[i] = base + gain + scorer.log_prior(q)
        except NumericalError as e:
            scores[i] = -math.inf
            _record_removal(stats, q, e)
    return candidates, scores


def gibbs_sweep(
    p: Partition,
    scorer: ModelScorer,
    temperature: float,
    rng: np.random.Generator,
    random_scan: bool = False,
    stats: Optional[ChainStats] = None,
) -> Partition:
    """Resample the block of every element in turn from its full conditional."""
    order = rng.permutation(p.D) if random_scan else range(p.D)
    score_p = scorer.score(p)
    for element in order:
        candidates, scores = gibbs_candidate_scores(p, int(element), scorer, score_p, stats)
        chosen = _draw(_tempered_probabilities(scores, temperature), rng)
        p, score_p = candidates[chosen], float(scores[chosen])
    if stats is not None:
        stats.gibbs_sweeps += 1
    return p


def neighbor_count(p: Partition) -> int:
    return merge_count(p) + split_count(p)


def shc_candidates(p: Partition, max_candidates: int = 1_000_000) -> List[Partition]:
    """{p} followed by every merge and every two-way split of p."""
    _check_neighborhood(p, max_candidates)
    return [p] + merge_neighbors(p) + split_neighbors(p)


def _check_neighborhood(p: Partition, max_candidates: int) -> int:
    n = neighbor_count(p)
    if n > max_candidates:
        raise ResourceGuardError(
            f"2wSHC neighbourhood of {format_partition(p)} has {n} states, "
            f"above the limit of {max_candidates}"
        )
    return n


def shc_candidate_distribution(
    p: Partition,
    scorer: ModelScorer,
    temperature: float = 1.0,
    max_candidates: int = 1_000_000,
    stats: Optional[ChainStats] = None,
) -> Tuple[List[Partition], np.ndarray]:
    candidates = shc_candidates(p, max_candidates)
    return candidates, _tempered_probabilities(_candidate_scores(scorer, candidates, stats), temperature)


def metropolized_acceptance(
    p: Partition,
    q: Partition,
    score_p: float,
    score_q: float,
    temperature: float = 1.0,
) -> float:
    """min(1, exp[(score_q - score_p)/T] |Nbr(p)| / |Nbr(q)|)."""
    if score_q == -math.inf:
        return 0.0
    log_ratio = (score_q - score_p) / temperature + math.log(neighbor_count(p)) - math.log(neighbor_count(q))
    return 1.0 if log_ratio >= 0 else math.exp(log_ratio)


def twoway_shc_step(
    p: Partition,
    scorer: ModelScorer,
    temperature: float,
    rng: np.random.Generator,
    mode: str = SHC_SOFTMAX,
    max_candidates: int = 1_000_000,
    stats: Optional[ChainStats] = None,
) -> Partition:
    """
    One merge/split move. as-paper draws from the tempered softmax over
    {p} + neighbours; metropolized proposes a neighbour uniformly and applies
    the Hastings correction for unequal neighbourhood sizes.
    """
    mode = resolve_shc_mode(mode)
    if stats is not None:
        stats.shc_steps += 1
    if mode == SHC_SOFTMAX:
        candidates, probs = shc_candidate_distribution(p, scorer, temperature, max_candidates, stats)
        return candidates[_draw(probs, rng)]

    n = _check_neighborhood(p, max_candidates)
    if n == 0:
        return p
    q = neighbor_at(p, int(rng.integers(n)))
    score_q = _candidate_scores(scorer, [q], stats)[0]
    accept = metropolized_acceptance(p, q, scorer.score(p), score_q, temperature)
    if stats is not None:
        stats.shc_proposals += 1
    if rng.random() < accept:
        if stats is not None:
            stats.shc_accepts += 1
        return q
    return p


def swap_acceptance(score_low: float, score_high: float, t_low: float, t_high: float) -> float:
    """
    min(1, exp{[score_high - score_low](1/t_low - 1/t_high)}) for the states
    at the colder (t_low) and hotter (t_high) of two adjacent temperatures.
    """
    if score_high == score_low:
        return 1.0
    exponent = (score_high - score_low) * (1.0 / t_low - 1.0 / t_high)
    return 1.0 if exponent >= 0 else math.exp(exponent)


def pt_swap(
    states: Sequence[Partition],
    scorer: ModelScorer,
    temperatures: Sequence[float],
    rng: np.random.Generator,
    stats: Optional[ChainStats] = None,
) -> List[Partition]:
    """Propose swapping the states of one uniformly chosen adjacent pair."""
    if len(states) < 2 or len(states) != len(temperatures):
        raise InputError("A swap needs at least two sequences, one per temperature")
    states = list(states)
    l0 = int(rng.integers(len(states) - 1))
    accept = swap_acceptance(
        scorer.score(states[l0]), scorer.score(states[l0 + 1]),
        temperatures[l0], temperatures[l0 + 1],
    )
    if stats is not None:
        stats.swap_proposals += 1
    if rng.random() < accept:
        states[l0], states[l0 + 1] = states[l0 + 1], states[l0]
        if stats is not None:
            stats.swap_accepts += 1
    return states


# --- initialization and runs ---

def init_chains(cfg: SamplerConfig, scorer: ModelScorer, rng: np.random.Generator) -> List[Partition]:
    """
    Draw M uniform partitions, collapse duplicates, and pick C of them
    without replacement with probability proportional to exp(score)
    (Gumbel top-k on the log scale). Short pools are refilled with fresh
    uniform draws; when fewer than C partitions exist, starts are shared.
    """
    if cfg.M < cfg.C:
        raise InputError(f"Need M >= C, got M={cfg.M}, C={cfg.C}")
    D = scorer.D
    pool = list(dict.fromkeys(sample_uniform(D, rng) for _ in range(cfg.M)))
    distinct = bell(D) if D <= EXACT_INTEGER_LIMIT else math.inf
    wanted = min(cfg.C, distinct)
    seen = set(pool)
    attempts = 0
    while len(pool) < wanted and attempts < 1000 * cfg.C:
        q = sample_uniform(D, rng)
        attempts += 1
        if q not in seen:
            seen.add(q)
            pool.append(q)

    scores = _candidate_scores(scorer, pool)
    if not np.isfinite(scores).any():
        raise NumericalError("No initial partition has a finite score")
    keys = scores + rng.gumbel(size=len(pool))
    order = np.argsort(-keys, kind="stable")
    chosen = [pool[i] for i in order[:cfg.C] if np.isfinite(keys[i])]
    base = len(chosen)
    while len(chosen) < cfg.C:
        chosen.append(chosen[len(chosen) % base])
    logger.debug(f"Initial states: {[format_partition(p) for p in chosen]}")
    return chosen


def _chain_scorer(cfg: SamplerConfig, scorer: ModelScorer, shared: Optional[BlockScoreCache],
                  audit_seed: int) -> Tuple[ModelScorer, Optional[BlockScoreCache]]:
    if not cfg.use_cache:
        return scorer, None
    cache = shared or BlockScoreCache(scorer, cfg.cache_capacity, audit_rate=cfg.audit_rate, audit_seed=audit_seed)
    return CachedScorer(cache), cache


def _run_chain(
    chain: int,
    cfg: SamplerConfig,
    scorer: ModelScorer,
    start: Partition,
    rng: np.random.Generator,
) -> Tuple[List[Partition], List[Partition], ChainStats]:
    stats = ChainStats()
    temps = cfg.temperatures
    states = [start] * cfg.L
    trace = [start]
    began = time.perf_counter()
    gibbs_threshold = cfg.alpha1 + cfg.alpha2
    for step in range(1, cfg.J):
        u = rng.random()
        try:
            if u < cfg.alpha1:
                states = pt_swap(states, scorer, temps, rng, stats)
            elif u < gibbs_threshold:
                states = [gibbs_sweep(s, scorer, t, rng, cfg.random_scan, stats) for s, t in zip(states, temps)]
            else:
                states = [
                    twoway_shc_step(s, scorer, t, rng, cfg.shc_mode, cfg.max_candidates, stats)
                    for s, t in zip(states, temps)
                ]
        except SamplerError:
            raise
        except NumericalError as e:
            raise SamplerError(str(e), chain, step) from e
        stats.steps += 1
        trace.append(states[0])
    stats.seconds = time.perf_counter() - began
    logger.info(
        f"Chain {chain} finished {cfg.J} states in {stats.seconds:.1f}s "
        f"(swap rate {stats.as_dict()['swap_rate']}, removals {stats.removals})"
    )
    return trace, states, stats


def run(cfg: SamplerConfig, scorer: ModelScorer) -> ChainSet:
    """
    Run C independent chains. Stream 0 of SeedSequence(seed) drives the
    initialization, streams 1..C the chains, so traces are identical for any
    worker count and with or without the cache.
    """
    began = time.perf_counter()
    streams = np.random.SeedSequence(cfg.seed).spawn(2 * cfg.C + 1)
    audit_seeds = [int(s.generate_state(1)[0]) for s in streams[cfg.C + 1:]]
    shared = (
        BlockScoreCache(scorer, cfg.cache_capacity, shared=True, audit_rate=cfg.audit_rate, audit_seed=audit_seeds[0])
        if cfg.use_cache and cfg.shared_cache else None
    )
    init_scorer, init_cache = _chain_scorer(cfg, scorer, shared, audit_seeds[0])
    starts = init_chains(cfg, init_scorer, np.random.default_rng(streams[0]))
    logger.info(
        f"Sampling D={scorer.D} with C={cfg.C}, J={cfg.J}, L={cfg.L}, "
        f"alpha1={cfg.alpha1}, alpha2={cfg.alpha2}, mode={cfg.shc_mode}"
    )

    # initialization lookups count towards the totals
    caches: List[BlockScoreCache] = [init_cache] if init_cache is not None and shared is None else []

    def work(c: int):
        chain_scorer, cache = _chain_scorer(cfg, scorer, shared, audit_seeds[c])
        if cache is not None and cache is not shared:
            caches.append(cache)
        return _run_chain(c, cfg, chain_scorer, starts[c], np.random.default_rng(streams[c + 1]))

    if cfg.workers > 1 and cfg.C > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(work, range(cfg.C)))
    else:
        results = [work(c) for c in range(cfg.C)]

    if shared is not None:
        caches = [shared]
    totals: Dict[str, int] = {}
    for cache in caches:
        for key, value in cache.stats.as_dict().items():
            totals[key] = totals.get(key, 0) + value
    if totals:
        logger.debug(f"Block-score cache: {totals}")

    return ChainSet(
        D=scorer.D,
        traces=[r[0] for r in results],
        final_states=[r[1] for r in results],
        stats=[r[2] for r in results],
        burn_in_fraction=cfg.burn_in_fraction,
        cache_stats=totals,
        seconds=time.perf_counter() - began,
    )


def estimate(chains: ChainSet) -> Tuple[PosteriorTable, FrequencyProfile]:
    """Pooled post burn-in visit frequencies, plus the per-chain profile."""
    profile = frequency_profile(chains.retained)
    return PosteriorTable(profile.support, profile.pooled, chains.D, SAMPLED), profile
