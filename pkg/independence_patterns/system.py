import os
import time
import logging
import concurrent.futures
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config import Config
from .data_loader import (
    DataSource, format_probability, write_data_csv, write_frame, write_json,
    write_posterior_csv, write_trace,
)
from .datasets import SummaryDataset, get_dataset
from .diagnostics import distance_matrix, group_distances, heterogeneity, heterogeneity_curve, run_distance
from .errors import InputError, ResourceGuardError
from .exact import (
    EXACT, PosteriorTable, block_count_posterior, entropy_normalized, event_probability,
    exact_posterior, relevance, same_block, summarize_truth, top,
)
from .manifest import RunManifest
from .model_manager import GAUSSIAN_MODELS, MULTINOMIAL_MODELS, ModelManager, build_prior
from .models import ModelScorer
from .partition import Partition, format_partition
from .sampler import PRESETS, SamplerConfig, estimate, run
from .synth import MULTINOMIAL, FAMILIES, SynthSpec, generate

logger = logging.getLogger("independence_patterns")


@dataclass(frozen=True)
class OutputConfig:
    """
    Where and how results are written.
    """
    out_dir: str
    fmt: str
    top: int


@dataclass(frozen=True)
class Query:
    """Blocks and subsets asked about in a report, 0-based."""
    relevance: Tuple[Tuple[int, ...], ...] = ()
    same_block: Tuple[Tuple[int, ...], ...] = ()


def parse_subset(text: str, D: int) -> Tuple[int, ...]:
    """'356' or '3,5,6' (1-based) -> (2, 4, 5); for D >= 10 '10' is one element."""
    if "," in text:
        items = text.split(",")
    elif D >= 10:
        items = [text]
    else:
        items = list(text.strip())
    try:
        subset = tuple(sorted({int(i) - 1 for i in items if i.strip()}))
    except ValueError:
        raise InputError(f"Invalid subset '{text}'")
    if not subset or subset[0] < 0 or subset[-1] >= D:
        raise InputError(f"Subset '{text}' out of range for D={D}")
    return subset


def _label(subset: Sequence[int]) -> str:
    joiner = "" if max(subset) < 9 else ","
    return joiner.join(str(e + 1) for e in subset)


class AnalysisSystem:
    """
    Orchestrates exact enumeration, sampling, simulation studies and
    repeated-run comparisons, and writes tables, reports and manifests.
    """
    def __init__(
        self,
        config: Optional[Config] = None,
        debug: bool = False,
        out_dir: Optional[str] = None,
        fmt: Optional[str] = None,
        top: Optional[int] = None,
        workers: Optional[int] = None,
    ) -> None:
        self.config = config or Config()
        self.debug = debug or self.config.getboolean("System", "DebugMode")
        self.output = OutputConfig(
            out_dir=out_dir or self.config.get("Output", "OutDir"),
            fmt=fmt or self.config.get("Output", "Format"),
            top=top or self.config.getint("Output", "Top"),
        )
        if self.output.fmt not in ("csv", "json"):
            raise InputError(f"Unknown output format '{self.output.fmt}'")
        self.workers = workers or self.config.workers()
        self.max_dimension = self.config.getint("Exact", "MaxDimension")
        # command-line echo stored in every manifest
        self.invocation: Dict[str, Any] = {}
        if self.debug:
            logger.info(f"Debug mode: workers={self.workers}, out_dir={self.output.out_dir}")

    # --- inputs ---
    def build_scorer(
        self,
        model: str,
        dataset: Optional[str] = None,
        source: Optional[DataSource] = None,
        prior: Optional[str] = None,
        known_mean: Optional[bool] = None,
        D: Optional[int] = None,
    ) -> ModelScorer:
        manager = ModelManager(self.config, known_mean)
        data: Optional[SummaryDataset] = get_dataset(dataset) if dataset else None
        stats = None
        if model != "constant" or data is not None or source is not None:
            stats = manager.load_statistics(model, dataset=data, source=source)
        size = D if stats is None else stats.D
        if size is None:
            raise InputError("No input: give --dataset, --input or --dimension")
        return manager.build(model, stats, build_prior(prior, size), D=size)

    def sampler_config(self, preset: str, **overrides) -> SamplerConfig:
        """
        [Sampler] settings plus CLI overrides. Alpha1 applies to every
        tempered preset and Alpha2 to gibbs+2wshc+pt; the other presets keep
        the alphas that define them.
        """
        key = preset.lower()
        if key not in PRESETS:
            raise InputError(f"Unknown preset '{preset}', expected one of {sorted(PRESETS)}")
        c = self.config
        values: Dict[str, Any] = dict(
            M=c.getint("Sampler", "InitialDraws"),
            C=c.getint("Sampler", "Chains"),
            J=c.getint("Sampler", "Steps"),
            burn_in_fraction=c.getfloat("Sampler", "BurnInFraction"),
            shc_mode=c.get("Sampler", "ShcMode"),
            random_scan=c.getboolean("Sampler", "RandomScan"),
            cache_capacity=c.getint("Sampler", "CacheCapacity"),
            max_candidates=c.getint("Sampler", "MaxCandidates"),
            audit_rate=c.getfloat("Sampler", "AuditRate"),
            seed=c.getint("Sampler", "Seed"),
            workers=self.workers,
        )
        tempered = PRESETS[key][0]
        if tempered:
            values["alpha1"] = c.getfloat("Sampler", "Alpha1")
        if key == "gibbs+2wshc+pt":
            values["alpha2"] = c.getfloat("Sampler", "Alpha2")
        values.update({k: v for k, v in overrides.items() if v is not None})
        if values["cache_capacity"] == 0:
            values["cache_capacity"] = None  # unbounded
        return SamplerConfig.from_preset(
            key,
            ladder_size=values.pop("ladder_size", c.getint("Sampler", "LadderSize")),
            max_temperature=c.getfloat("Sampler", "MaxTemperature"),
            **values,
        )

    # --- reports ---
    def _queries(self, t: PosteriorTable, query: Query) -> Dict[str, Any]:
        report: Dict[str, Any] = {}
        if query.relevance:
            report["relevance"] = {_label(b): relevance(t, b) for b in query.relevance}
        if query.same_block:
            report["same_block"] = {_label(s): event_probability(t, same_block(s)) for s in query.same_block}
        return report

    def _summary(self, t: PosteriorTable, scorer: ModelScorer, query: Query) -> Dict[str, Any]:
        summary: Dict[str, Any] = dict(
            model=scorer.describe(),
            D=t.D,
            mode=t.mode,
            support=len(t.partitions),
            map=format_partition(t.map_partition),
            top=[dict(partition=format_partition(p), probability=prob) for p, prob in top(t, self.output.top)],
            block_count_posterior=block_count_posterior(t).tolist(),
        )
        if t.mode == EXACT:
            summary["entropy"] = entropy_normalized(t)
        summary.update(self._queries(t, query))
        return summary

    def _write_table(self, t: PosteriorTable, directory: str) -> str:
        if self.output.fmt == "csv":
            return write_posterior_csv(t, os.path.join(directory, "posterior.csv"))
        rows = [dict(partition=format_partition(p), probability=prob) for p, prob in top(t, len(t.partitions))]
        return write_json({"posterior": rows}, os.path.join(directory, "posterior.json"))

    def _finish(self, manifest: RunManifest, directory: str, began: float, steps: Optional[int] = None) -> str:
        manifest.config.setdefault("invocation", dict(self.invocation))
        manifest.record_timing(time.perf_counter() - began, steps)
        return manifest.save(os.path.join(directory, "manifest.json"))

    def print_top(self, summary: Dict[str, Any]) -> None:
        for rank, row in enumerate(summary["top"], start=1):
            print(f"#{rank:<3d} {row['partition']:<20s} {format_probability(row['probability'])}")

    # --- commands ---
    def run_exact(
        self,
        scorer: ModelScorer,
        query: Query = Query(),
        truth: Optional[Partition] = None,
        tag: str = "exact",
    ) -> Dict[str, Any]:
        began = time.perf_counter()
        if scorer.D > self.max_dimension:
            raise ResourceGuardError(
                f"Exact enumeration is limited to D <= {self.max_dimension} (got D={scorer.D}); "
                f"use the 'sample' command instead"
            )
        t = exact_posterior(scorer, scorer.D, workers=self.workers)
        summary = self._summary(t, scorer, query)
        if truth is not None:
            summary["truth"] = dict(partition=format_partition(truth), **summarize_truth(t, truth).as_dict())
        directory = os.path.join(self.output.out_dir, tag)
        outputs = [self._write_table(t, directory), write_json(summary, os.path.join(directory, "summary.json"))]
        manifest = RunManifest(command="exact", config=dict(model=scorer.describe(), queries=self._query_echo(query)),
                               outputs=outputs)
        self._finish(manifest, directory, began)
        logger.info(f"Exact posterior: MAP {summary['map']}, entropy {summary['entropy']:.4f}")
        return summary

    def run_sample(
        self,
        scorer: ModelScorer,
        cfg: SamplerConfig,
        query: Query = Query(),
        compare_exact: bool = False,
        trace_dir: Optional[str] = None,
        tag: str = "sample",
    ) -> Dict[str, Any]:
        began = time.perf_counter()
        chains = run(cfg, scorer)
        t, profile = estimate(chains)
        summary = self._summary(t, scorer, query)
        curve = heterogeneity_curve(chains.traces, cfg.burn_in_fraction)
        summary["sampler"] = cfg.as_dict()
        summary["heterogeneity"] = heterogeneity(profile)
        summary["heterogeneity_curve"] = [dict(steps=j, heterogeneity=h) for j, h in curve]
        if compare_exact and scorer.D <= self.max_dimension:
            summary["l1_to_exact"] = run_distance(t, exact_posterior(scorer, scorer.D, workers=self.workers))

        directory = os.path.join(self.output.out_dir, tag)
        outputs = [
            self._write_table(t, directory),
            write_frame(pd.DataFrame(curve, columns=["steps", "heterogeneity"]),
                        os.path.join(directory, "heterogeneity.csv")),
            write_json(summary, os.path.join(directory, "summary.json")),
        ]
        if trace_dir:
            outputs += [write_trace(trace, os.path.join(trace_dir, f"chain_{c}.txt"))
                        for c, trace in enumerate(chains.traces)]
        manifest = RunManifest(
            command="sample",
            config=dict(sampler=cfg.as_dict(), model=scorer.describe(), queries=self._query_echo(query)),
            seed=cfg.seed,
            cache=chains.cache_stats,
            counters=dict(chains=chains.summary()["chains"], removals=chains.removals),
            outputs=outputs,
        )
        self._finish(manifest, directory, began, steps=cfg.C * (cfg.J - 1))
        logger.info(
            f"Sampled {len(t.partitions)} distinct partitions; MAP {summary['map']}, "
            f"heterogeneity {summary['heterogeneity']:.4f}"
        )
        return summary

    def run_simulate(
        self,
        D: int,
        ks: Sequence[int],
        replicates: int,
        N: int,
        family: str,
        model: str,
        seed: int = 0,
        zeta: float = 3.0,
        known_mean: Optional[bool] = None,
        save_data: bool = False,
        tag: str = "simulate",
    ) -> Tuple[pd.DataFrame, pd.DataFrame]:
        """One exact analysis per replicate; returns per-replicate rows and per-K quartiles."""
        began = time.perf_counter()
        if family not in FAMILIES:
            raise InputError(f"Unknown family '{family}', expected one of {FAMILIES}")
        if (family == MULTINOMIAL) != (model in MULTINOMIAL_MODELS) or model not in GAUSSIAN_MODELS + MULTINOMIAL_MODELS:
            raise InputError(f"Model '{model}' cannot analyse {family} data")
        if D > self.max_dimension:
            raise ResourceGuardError(f"Simulation uses exact enumeration, limited to D <= {self.max_dimension}")
        manager = ModelManager(self.config, known_mean)
        directory = os.path.join(self.output.out_dir, tag)
        jobs = [(K, r) for K in ks for r in range(replicates)]

        def replicate(job: Tuple[int, int]) -> Dict[str, Any]:
            K, r = job
            rep_seed = int(np.random.SeedSequence([seed, K, r]).generate_state(1)[0])
            result = generate(SynthSpec(D=D, N=N, K=K, family=family, zeta=zeta, seed=rep_seed))
            if family == MULTINOMIAL:
                stats = result.multinomial_stats()
            else:
                stats = result.gaussian_stats(manager.model_config.known_mean, correlation=model == "bayes-corr")
            t = exact_posterior(manager.build(model, stats), D)
            truth = summarize_truth(t, result.truth)
            if save_data:
                write_data_csv(result.data, os.path.join(directory, "data", f"K{K}_r{r}.csv"))
            return dict(K=K, replicate=r, seed=rep_seed, truth=format_partition(result.truth),
                        map=format_partition(t.map_partition), **truth.as_dict())

        if self.workers > 1:
            with concurrent.futures.ThreadPoolExecutor(max_workers=self.workers) as pool:
                rows = list(pool.map(replicate, jobs))
        else:
            rows = [replicate(job) for job in jobs]

        per_replicate = pd.DataFrame(rows)
        metrics = ["p_true", "rank", "ratio_to_map", "entropy"]
        grouped = per_replicate.groupby("K")[metrics]
        aggregate = pd.concat(
            {"q25": grouped.quantile(0.25), "median": grouped.median(), "q75": grouped.quantile(0.75)},
            axis=1,
        )
        aggregate.columns = [f"{metric}_{stat}" for stat, metric in aggregate.columns]
        outputs = [
            write_frame(per_replicate, os.path.join(directory, "replicates.csv")),
            write_frame(aggregate.reset_index(), os.path.join(directory, "aggregate.csv")),
        ]
        manifest = RunManifest(
            command="simulate",
            config=dict(D=D, K=list(ks), replicates=replicates, N=N, family=family, model=model,
                        zeta=zeta, known_mean=manager.model_config.known_mean),
            seed=seed,
            outputs=outputs,
        )
        self._finish(manifest, directory, began)
        logger.info(f"Simulation finished: {len(rows)} replicates over K={list(ks)}")
        return per_replicate, aggregate

    def run_compare(
        self,
        scorer: ModelScorer,
        presets: Sequence[str],
        repeats: int,
        seed: int = 0,
        tag: str = "compare",
        **overrides,
    ) -> Tuple[pd.DataFrame, pd.DataFrame]:
        """Repeat sampling per preset with derived seeds and compare the estimates pairwise."""
        began = time.perf_counter()
        if repeats < 1:
            raise InputError(f"repeats must be >= 1, got {repeats}")
        estimates: List[PosteriorTable] = []
        labels: List[str] = []
        groups: List[str] = []
        final_heterogeneity: Dict[str, float] = {}
        for p_index, preset in enumerate(presets):
            for r in range(repeats):
                run_seed = int(np.random.SeedSequence([seed, p_index, r]).generate_state(1)[0])
                cfg = self.sampler_config(preset, seed=run_seed, **overrides)
                t, profile = estimate(run(cfg, scorer))
                estimates.append(t)
                labels.append(f"{preset}#{r}")
                groups.append(preset)
                final_heterogeneity[labels[-1]] = heterogeneity(profile)
        matrix = distance_matrix(estimates, labels)
        grouped = group_distances(matrix, groups)
        directory = os.path.join(self.output.out_dir, tag)
        outputs = [
            write_frame(matrix, os.path.join(directory, "distances.csv"), index=True),
            write_frame(grouped, os.path.join(directory, "grouped.csv")),
            write_json(final_heterogeneity, os.path.join(directory, "heterogeneity.json")),
        ]
        manifest = RunManifest(
            command="compare",
            config=dict(presets=list(presets), repeats=repeats, model=scorer.describe(),
                        overrides={k: v for k, v in overrides.items() if v is not None}),
            seed=seed,
            outputs=outputs,
        )
        self._finish(manifest, directory, began)
        return matrix, grouped

    def dataset_report(self, name: str, tag: str = "dataset") -> pd.DataFrame:
        data = get_dataset(name)
        frame = data.to_frame()
        write_frame(frame, os.path.join(self.output.out_dir, tag, f"{data.name}.csv"), index=True)
        return frame

    @staticmethod
    def _query_echo(query: Query) -> Dict[str, List[str]]:
        return dict(relevance=[_label(b) for b in query.relevance],
                    same_block=[_label(s) for s in query.same_block])

