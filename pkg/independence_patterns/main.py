import sys
import json
import argparse
import logging
from typing import List, Optional, Sequence

from . import __version__
from .config import Config
from .data_loader import DataSource, InputKind, format_probability
from .errors import IndependencePatternsError, InputError
from .logging_setup import setup_logging
from .model_manager import MODEL_NAMES
from .partition import parse_partition
from .sampler import PRESETS, SHC_ALIASES, SHC_MODES
from .synth import FAMILIES
from .system import AnalysisSystem, Query, parse_subset

logger = logging.getLogger("independence_patterns")


def _add_input_args(parser: argparse.ArgumentParser, default_model: str = "bayes-optim") -> None:
    group = parser.add_argument_group("input")
    group.add_argument("--dataset", help="Embedded dataset name (e.g. hiv)")
    group.add_argument("--input", help="CSV input file")
    group.add_argument("--input-kind", choices=[k.value for k in InputKind], default=InputKind.RAW.value,
                       help="How to read --input")
    group.add_argument("--n-obs", type=int, help="Number of observations behind a matrix input")
    group.add_argument("--model", choices=MODEL_NAMES, default=default_model)
    group.add_argument("--known-mean", action="store_true", default=None,
                       help="Treat the mean as known (N_eff = N instead of N - 1)")
    group.add_argument("--prior", default="uniform",
                       help="uniform | flat-k | dp:<alpha> | forbid:<a>-<b>,...")
    group.add_argument("--dimension", type=int, help="Dimension for the constant model without input")


def _add_query_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--relevance", action="append", default=[], metavar="BLOCK",
                        help="Report the relevance of a block, e.g. 4 or 12356 (repeatable)")
    parser.add_argument("--same-block", action="append", default=[], metavar="SUBSET",
                        help="Report P(subset in one block), e.g. 356 (repeatable)")
    parser.add_argument("--top", type=int, help="Number of top partitions to report")


def _add_sampler_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("sampler")
    group.add_argument("--steps", type=int, help="States per chain (J)")
    group.add_argument("--chains", type=int, help="Independent chains (C)")
    group.add_argument("--initial-draws", type=int, help="Uniform draws for importance resampling (M)")
    group.add_argument("--ladder", type=int, help="Tempering ladder size (L) for tempered presets")
    group.add_argument("--alpha1", type=float, help="Swap probability")
    group.add_argument("--alpha2", type=float, help="Gibbs probability")
    group.add_argument("--burn-in", type=float, help="Fraction of every chain discarded")
    group.add_argument("--seed", type=int, help="Master seed")
    group.add_argument("--shc-mode", choices=SHC_MODES + tuple(SHC_ALIASES))
    group.add_argument("--random-scan", action="store_true", default=None, help="Random Gibbs scan order")
    group.add_argument("--cache-capacity", type=int, help="Block-score cache entries (0 = unbounded)")
    group.add_argument("--no-cache", action="store_true", help="Disable the block-score cache")
    group.add_argument("--shared-cache", action="store_true", help="One cache shared by all chains")
    group.add_argument("--max-candidates", type=int, help="Largest 2wSHC neighbourhood allowed")


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """
    Parse command-line arguments and subcommands.
    """
    parser = argparse.ArgumentParser(
        prog="independence_patterns",
        description="Bayesian posteriors over patterns of mutual independence"
    )
    parser.add_argument(
        "--version", action="version", version=__version__,
        help="Show program version and exit"
    )
    parser.add_argument("--debug", action="store_true", help="Enable debug mode")
    parser.add_argument("--config", default="config.ini", help="Configuration overlay file")
    parser.add_argument("--workers", type=int, help="Worker threads (default: available cores)")
    parser.add_argument("--out-dir", help="Output directory")
    parser.add_argument("--format", choices=("csv", "json"), help="Posterior table format")
    parser.add_argument("--log-file", help="Log file path")

    subparsers = parser.add_subparsers(dest="command", required=True)

    exact = subparsers.add_parser("exact", help="Exact posterior by enumeration (D <= 12)")
    _add_input_args(exact)
    _add_query_args(exact)
    exact.add_argument("--truth", help="Reference partition to rank, e.g. 12|356|4")

    sample = subparsers.add_parser("sample", help="MCMC estimate of the posterior")
    _add_input_args(sample)
    _add_query_args(sample)
    sample.add_argument("--preset", choices=sorted(PRESETS), default="gibbs+2wshc+pt")
    _add_sampler_args(sample)
    sample.add_argument("--compare-exact", action="store_true",
                        help="Also report the L1 distance to the exact posterior")
    sample.add_argument("--trace-dir", help="Write one restricted growth string per step and chain")

    simulate = subparsers.add_parser("simulate", help="Simulation study on synthetic data")
    simulate.add_argument("--dimension", type=int, help="Number of variables (D)")
    simulate.add_argument("--k", default="1-6", help="Block counts, e.g. 1-6 or 1,3,6")
    simulate.add_argument("--replicates", type=int)
    simulate.add_argument("--samples", type=int, help="Observations per replicate (N)")
    simulate.add_argument("--family", choices=FAMILIES, default="gaussian")
    simulate.add_argument("--zeta", type=float, default=3.0, help="Student-t degrees of freedom")
    simulate.add_argument("--model", choices=MODEL_NAMES, default="bayes-optim")
    simulate.add_argument("--known-mean", action="store_true", default=None)
    simulate.add_argument("--seed", type=int)
    simulate.add_argument("--save-data", action="store_true", help="Write every synthetic data set")

    compare = subparsers.add_parser("compare", help="Run-to-run distances between repeated samplings")
    _add_input_args(compare)
    compare.add_argument("--presets", default="gibbs,2wshc,gibbs+2wshc,gibbs+pt,2wshc+pt,gibbs+2wshc+pt",
                         help="Comma-separated preset names")
    compare.add_argument("--repeats", type=int, default=5)
    _add_sampler_args(compare)

    dataset = subparsers.add_parser("dataset", help="Print an embedded dataset")
    dataset.add_argument("name", nargs="?", default="hiv")

    check = subparsers.add_parser("check-config", help="Validate configuration file and exit")
    check.add_argument("--write", action="store_true", help="Write the merged configuration back")

    return parser.parse_args(argv)


def _parse_ks(text: str, D: int) -> List[int]:
    try:
        if "-" in text:
            low, high = (int(v) for v in text.split("-"))
            ks = list(range(low, high + 1))
        else:
            ks = [int(v) for v in text.split(",")]
    except ValueError:
        raise InputError(f"Invalid block-count list '{text}'")
    if not ks or any(not 1 <= k <= D for k in ks):
        raise InputError(f"Block counts must lie in 1..{D}, got '{text}'")
    return ks


def _source(args: argparse.Namespace) -> Optional[DataSource]:
    if not args.input:
        return None
    return DataSource(args.input, InputKind(args.input_kind), args.n_obs, bool(args.known_mean))


def _sampler_overrides(args: argparse.Namespace) -> dict:
    overrides = dict(
        J=args.steps, C=args.chains, M=args.initial_draws, ladder_size=args.ladder,
        alpha1=args.alpha1, alpha2=args.alpha2, burn_in_fraction=args.burn_in, seed=args.seed,
        shc_mode=args.shc_mode, random_scan=args.random_scan, cache_capacity=args.cache_capacity,
        max_candidates=args.max_candidates,
    )
    if args.no_cache:
        overrides["use_cache"] = False
    if args.shared_cache:
        overrides["shared_cache"] = True
    return overrides


def _query(args: argparse.Namespace, D: int) -> Query:
    return Query(
        relevance=tuple(parse_subset(b, D) for b in args.relevance),
        same_block=tuple(parse_subset(s, D) for s in args.same_block),
    )


def _print_report(system: AnalysisSystem, summary: dict) -> None:
    system.print_top(summary)
    for key in ("entropy", "heterogeneity", "l1_to_exact"):
        if key in summary:
            print(f"{key}: {summary[key]:.6g}")
    for key in ("relevance", "same_block"):
        for subset, value in summary.get(key, {}).items():
            print(f"{key}({subset}): {format_probability(value)}")
    if "truth" in summary:
        print(f"truth: {json.dumps(summary['truth'])}")


def dispatch(args: argparse.Namespace, config: Config) -> int:
    if args.command == "check-config":
        if args.write:
            config.save()
        logger.info("Configuration file parsed successfully.")
        return 0

    system = AnalysisSystem(config, debug=args.debug, out_dir=args.out_dir, fmt=args.format,
                            top=getattr(args, "top", None), workers=args.workers)
    system.invocation = {k: v for k, v in vars(args).items() if v is not None}

    if args.command == "dataset":
        frame = system.dataset_report(args.name)
        print(frame.to_string())
        return 0

    if args.command == "simulate":
        D = args.dimension or config.getint("Simulation", "Dimension")
        per_replicate, aggregate = system.run_simulate(
            D=D,
            ks=_parse_ks(args.k, D),
            replicates=args.replicates or config.getint("Simulation", "Replicates"),
            N=args.samples or config.getint("Simulation", "Samples"),
            family=args.family,
            model=args.model,
            seed=args.seed if args.seed is not None else config.getint("Sampler", "Seed"),
            zeta=args.zeta,
            known_mean=args.known_mean,
            save_data=args.save_data,
        )
        print(aggregate.to_string())
        return 0

    scorer = system.build_scorer(args.model, dataset=args.dataset, source=_source(args),
                                 prior=args.prior, known_mean=args.known_mean, D=args.dimension)

    if args.command == "exact":
        truth = parse_partition(args.truth, scorer.D) if args.truth else None
        _print_report(system, system.run_exact(scorer, _query(args, scorer.D), truth=truth))
        return 0

    if args.command == "sample":
        cfg = system.sampler_config(args.preset, **_sampler_overrides(args))
        summary = system.run_sample(scorer, cfg, _query(args, scorer.D),
                                    compare_exact=args.compare_exact, trace_dir=args.trace_dir)
        _print_report(system, summary)
        return 0

    if args.command == "compare":
        presets = [p.strip() for p in args.presets.split(",") if p.strip()]
        overrides = _sampler_overrides(args)
        seed = overrides.pop("seed")
        _, grouped = system.run_compare(scorer, presets, args.repeats,
                                        seed=seed if seed is not None else config.getint("Sampler", "Seed"),
                                        **overrides)
        print(grouped.to_string(index=False))
        return 0

    raise InputError(f"Unknown command '{args.command}'")


def main(argv: Optional[Sequence[str]] = None) -> None:
    """
    Main entry point: parses arguments, sets up logging, and dispatches commands.
    Exit codes: 0 success, 2 input error, 3 resource guard, 4 numerical failure.
    """
    args = parse_args(argv)
    try:
        config = Config(args.config)
        setup_logging(log_file=args.log_file, level="DEBUG" if args.debug else None, config=config)
        code = dispatch(args, config)
    except IndependencePatternsError as e:
        logger.error(f"{type(e).__name__}: {e}")
        code = e.exit_code
    except (KeyError, ValueError) as e:
        logger.error(f"Configuration error: {e}")
        code = InputError.exit_code
    except Exception as e:
        logger.error(f"Fatal error in main: {e}", exc_info=True)
        code = 1
    sys.exit(code)


if __name__ == "__main__":
    main()
