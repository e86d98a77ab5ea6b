"""
matchci command line: error rates and confidence intervals for matching tasks.

    matchci estimate  --scores s.csv --threshold 0.5
    matchci ci        --scores s.csv --threshold 0.5 --methods wilson,vertex --b 1000
    matchci roc       --scores s.csv --target-far 0.01 --method bootstrap --scheme vertex
    matchci protocol  --counts counts.csv --metric far --budget 100
    matchci simulate  --g 50 --m 5 --target far=1e-2 --methods wilson,naive-wilson --r 500
"""

import argparse
import logging
import sys
from typing import Callable, Dict, List, Optional, Tuple

from pydantic import ValidationError

from matchci.config.settings import (
    BOOTSTRAP_CONFIG, COVERAGE_CONFIG, EXIT_CODES, INTERVAL_CONFIG, METHOD_TAGS, ROC_CONFIG, SYNTHETIC_CONFIG,
    SYSTEM_CONFIG,
)
from matchci.data.dataset import aggregate_at_threshold
from matchci.estimators.point_estimators import estimate, naive_pair_count
from matchci.intervals.base_method import EvaluationContext
from matchci.intervals.method_manager import IntervalManager
from matchci.io.csv_io import (
    read_counts_csv, read_embedding_csv, read_score_csv, write_coverage_csv, write_plan_csv,
    write_replication_log, write_roc_csv,
)
from matchci.io.results import result_envelope, write_result_json
from matchci.models.match_models import CoverageTruth, MatchDataset, Metric, RunConfig, SyntheticConfig
from matchci.protocol.protocol_design import plan_far_protocol, plan_frr_protocol
from matchci.roc.roc_analysis import empirical_roc, roc_interval_bootstrap, roc_interval_parametric
from matchci.simulation.coverage import run_coverage_experiment
from matchci.simulation.synthetic import calibrate_threshold
from matchci.utils.errors import InvalidInputError, MatchCIError
from matchci.utils.parallel import resolve_threads
from matchci.utils.rng import resolve_seed

logger = logging.getLogger(__name__)


def _method_list(value: str) -> List[str]:
    return [tag.strip() for tag in value.split(",") if tag.strip()]


def _metric(value: str) -> str:
    return value.upper()


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--seed", type=int, default=None,
                        help=f"random seed (default: ${SYSTEM_CONFIG['seed_env_var']}, else {SYSTEM_CONFIG['default_seed']})")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    parser.add_argument("--output", default=None, help="write the JSON result here instead of stdout")
    parser.add_argument("--log-level", default=SYSTEM_CONFIG["log_level"],
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])


def _add_input(parser: argparse.ArgumentParser, threshold: bool = True):
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--scores", help="pairwise score CSV: id_a,instance_a,id_b,instance_b,score")
    source.add_argument("--embeddings", help="embedding CSV: id,instance,v0..v{d-1}")
    parser.add_argument("--dissimilarity", choices=["euclidean", "cosine"], default="euclidean",
                        help="distance used for embeddings")
    parser.add_argument("--similarity", action="store_true",
                        help="scores are similarities (larger means more alike); they are negated on input")
    if threshold:
        parser.add_argument("--threshold", type=float, required=True,
                            help="decision threshold on the dissimilarity scale")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="matchci", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {SYSTEM_CONFIG['version']}")
    sub = parser.add_subparsers(dest="command", required=True)

    estimate_p = sub.add_parser("estimate", help="FRR and FAR point estimates")
    _add_input(estimate_p)
    _add_common(estimate_p)

    ci_p = sub.add_parser("ci", help="confidence intervals for FRR or FAR")
    _add_input(ci_p)
    ci_p.add_argument("--metric", type=_metric, choices=["FRR", "FAR", "BOTH"], default="FAR")
    ci_p.add_argument("--methods", type=_method_list, default=["wilson"],
                      help=f"comma-separated, from {','.join(METHOD_TAGS)}")
    ci_p.add_argument("--alpha", type=float, default=INTERVAL_CONFIG["alpha"])
    ci_p.add_argument("--b", type=int, default=BOOTSTRAP_CONFIG["default_b"], help="bootstrap replicates")
    ci_p.add_argument("--frr-mode", choices=["delta_independent", "delta_full"], default=None,
                      help="unbalanced FRR variance variant")
    _add_common(ci_p)

    roc_p = sub.add_parser("roc", help="empirical ROC and an FRR interval at a target FAR")
    _add_input(roc_p, threshold=False)
    roc_p.add_argument("--target-far", type=float, required=True)
    roc_p.add_argument("--method", choices=["parametric", "bootstrap"], default="parametric")
    roc_p.add_argument("--scheme", choices=ROC_CONFIG["bootstrap_schemes"], default=ROC_CONFIG["default_scheme"])
    roc_p.add_argument("--alpha", type=float, default=INTERVAL_CONFIG["alpha"])
    roc_p.add_argument("--alpha-far", type=float, default=None, help="level of the FAR interval (default: alpha)")
    roc_p.add_argument("--b", type=int, default=BOOTSTRAP_CONFIG["default_b"])
    roc_p.add_argument("--roc-csv", default=None, help="write the ROC curve here")
    _add_common(roc_p)

    protocol_p = sub.add_parser("protocol", help="choose comparisons under a budget")
    counts = protocol_p.add_mutually_exclusive_group(required=True)
    counts.add_argument("--counts", help="CSV of id,instances")
    counts.add_argument("--g", type=int, help="number of identities (with --m)")
    protocol_p.add_argument("--m", type=int, default=1, help="instances per identity with --g")
    protocol_p.add_argument("--metric", type=_metric, choices=["FRR", "FAR"], default="FAR")
    protocol_p.add_argument("--budget", type=int, required=True)
    _add_common(protocol_p)

    simulate_p = sub.add_parser("simulate", help="Monte Carlo coverage on synthetic data")
    simulate_p.add_argument("--g", type=int, required=True)
    simulate_p.add_argument("--m", type=int, default=5)
    simulate_p.add_argument("--m-min", type=int, default=None, help="unbalanced: smallest instance count")
    simulate_p.add_argument("--m-max", type=int, default=None, help="unbalanced: largest instance count")
    simulate_p.add_argument("--dim", type=int, default=SYNTHETIC_CONFIG["dim"])
    simulate_p.add_argument("--noise", type=float, default=SYNTHETIC_CONFIG["noise_second_param"])
    simulate_p.add_argument("--noise-mode", choices=["variance", "stddev"], default=SYNTHETIC_CONFIG["noise_mode"])
    simulate_p.add_argument("--target", required=True, help="metric=value, e.g. far=1e-2")
    simulate_p.add_argument("--methods", type=_method_list, default=["wilson", "naive-wilson"])
    simulate_p.add_argument("--alpha", type=float, default=INTERVAL_CONFIG["alpha"])
    simulate_p.add_argument("--b", type=int, default=BOOTSTRAP_CONFIG["default_b"])
    simulate_p.add_argument("--r", type=int, default=COVERAGE_CONFIG["replications"], help="replications")
    simulate_p.add_argument("--calibration-g", type=int, default=None)
    simulate_p.add_argument("--calibration-m", type=int, default=None)
    simulate_p.add_argument("--csv", default=None, help="also write the per-method summary as CSV")
    simulate_p.add_argument("--log-csv", default=None, help="write every replication's intervals as CSV")
    _add_common(simulate_p)

    return parser


def _load_dataset(config: RunConfig) -> MatchDataset:
    if config.scores_path:
        return read_score_csv(config.scores_path, similarity=config.similarity)
    return read_embedding_csv(config.embeddings_path, dissimilarity=config.dissimilarity)


def _input_fields(args) -> Dict:
    return {
        "scores_path": args.scores,
        "embeddings_path": args.embeddings,
        "dissimilarity": args.dissimilarity,
        "similarity": args.similarity,
    }


def _emit(config: RunConfig, results) -> int:
    write_result_json(result_envelope(config.reproducibility_dump(), config.seed, results), config.output)
    return EXIT_CODES["success"]


def cmd_estimate(args, seed: int) -> int:
    config = RunConfig(command="estimate", threshold=args.threshold, seed=seed, output=args.output,
                       threads=args.threads, **_input_fields(args))
    dataset = _load_dataset(config)
    agg = aggregate_at_threshold(dataset, config.threshold)
    values: Dict[str, Optional[float]] = {}
    notes = []
    for metric in ("FRR", "FAR"):
        try:
            values[metric] = estimate(agg, metric).value
        except InvalidInputError as e:
            logger.warning(f"{metric} not estimable: {e}")
            values[metric] = None
            notes.append(f"{metric}: {e}")
    if all(v is None for v in values.values()):
        raise InvalidInputError("; ".join(notes))

    results = {
        "frr": values["FRR"],
        "far": values["FAR"],
        "counts": {
            "identities": dataset.g,
            "instances": dataset.n_instances,
            "genuine_pairs": naive_pair_count(agg, "FRR"),
            "impostor_pairs": naive_pair_count(agg, "FAR"),
        },
        "setting": agg.setting,
        "notes": notes,
    }
    return _emit(config, results)


def cmd_ci(args, seed: int) -> int:
    config = RunConfig(command="ci", threshold=args.threshold, metric=None if args.metric == "BOTH" else args.metric,
                       methods=args.methods, alpha=args.alpha, b=args.b, seed=seed, output=args.output,
                       threads=args.threads, options={"frr_mode": args.frr_mode} if args.frr_mode else {},
                       **_input_fields(args))
    if not config.methods:
        raise InvalidInputError("no interval methods selected")
    dataset = _load_dataset(config)
    context = EvaluationContext(dataset, config.threshold, alpha=config.alpha, b=config.b, seed=config.seed,
                                threads=resolve_threads(config.threads), frr_mode=args.frr_mode)

    manager = IntervalManager()
    metrics: List[Metric] = [config.metric] if config.metric else ["FRR", "FAR"]
    entries = []
    for metric in metrics:
        entries.extend(manager.compute_all(context, metric, config.methods))
    _emit(config, entries)

    failures = [e for e in entries if e["status"] == "error"]
    if len(failures) < len(entries):
        return EXIT_CODES["success"]
    if any(e["exit_code"] == EXIT_CODES["resampling"] for e in failures):
        return EXIT_CODES["resampling"]
    return EXIT_CODES["precondition"]


def cmd_roc(args, seed: int) -> int:
    config = RunConfig(command="roc", target_metric="FAR", target_value=args.target_far, roc_method=args.method,
                       scheme=args.scheme if args.method == "bootstrap" else None, alpha=args.alpha,
                       alpha_far=args.alpha_far, b=args.b, seed=seed, output=args.output, threads=args.threads,
                       **_input_fields(args))
    dataset = _load_dataset(config)
    if args.roc_csv:
        write_roc_csv(empirical_roc(dataset), args.roc_csv)
        logger.info(f"ROC curve written to {args.roc_csv}")

    if config.roc_method == "bootstrap":
        result = roc_interval_bootstrap(dataset, config.target_value, alpha=config.alpha, scheme=config.scheme,
                                        b=config.b, seed=config.seed, threads=resolve_threads(config.threads))
    else:
        result = roc_interval_parametric(dataset, config.target_value, alpha=config.alpha,
                                         alpha_far=config.alpha_far)
    return _emit(config, result)


def cmd_protocol(args, seed: int) -> int:
    config = RunConfig(command="protocol", counts_path=args.counts, metric=args.metric, seed=seed,
                       output=args.output, threads=args.threads, options={"budget": args.budget})
    if config.counts_path:
        counts = read_counts_csv(config.counts_path)
    else:
        if args.g < 1 or args.m < 1:
            raise InvalidInputError("--g and --m must be positive")
        counts = {str(i + 1): args.m for i in range(args.g)}

    planner = plan_far_protocol if config.metric == "FAR" else plan_frr_protocol
    plan = planner(counts, args.budget)
    logger.info(f"{plan.metric} plan: {len(plan.selections)} comparisons, sharing objective {plan.objective_value}")
    write_plan_csv(plan, config.output if config.output else sys.stdout)
    return EXIT_CODES["success"]


def _parse_target(text: str) -> Tuple[str, float]:
    metric, sep, value = text.partition("=")
    metric = metric.strip().upper()
    if not sep or metric not in ("FRR", "FAR"):
        raise InvalidInputError(f"target must look like far=1e-2 or frr=1e-3, got '{text}'")
    try:
        rate = float(value)
    except ValueError:
        raise InvalidInputError(f"target rate '{value}' is not a number")
    if not 0.0 < rate < 1.0:
        raise InvalidInputError(f"target rate must lie in (0, 1), got {rate}")
    return metric, rate


def cmd_simulate(args, seed: int) -> int:
    target_metric, target_value = _parse_target(args.target)
    synthetic = SyntheticConfig(g=args.g, m=args.m, dim=args.dim, noise_second_param=args.noise,
                                noise_mode=args.noise_mode, m_min=args.m_min, m_max=args.m_max, seed=seed)
    config = RunConfig(command="simulate", target_metric=target_metric, target_value=target_value,
                       methods=args.methods, alpha=args.alpha, b=args.b, seed=seed, output=args.output,
                       threads=args.threads,
                       options={"synthetic": synthetic.model_dump(), "replications": args.r,
                                "calibration_g": args.calibration_g, "calibration_m": args.calibration_m})
    if not config.methods:
        raise InvalidInputError("no interval methods selected")

    calibration = calibrate_threshold(synthetic, target_metric, target_value,
                                      calibration_g=args.calibration_g, calibration_m=args.calibration_m)
    truth = CoverageTruth(metric=target_metric, value=calibration.achieved_rate)
    report = run_coverage_experiment(synthetic, calibration.threshold, truth, config.methods, alpha=config.alpha,
                                     replications=args.r, b=config.b, seed=seed,
                                     threads=resolve_threads(config.threads), keep_log=bool(args.log_csv))

    if args.csv:
        write_coverage_csv(report, args.csv)
    if args.log_csv:
        write_replication_log(report.replication_log, args.log_csv)
    return _emit(config, {"calibration": calibration, "coverage": report.model_copy(update={"replication_log": None})})


COMMANDS: Dict[str, Callable] = {
    "estimate": cmd_estimate,
    "ci": cmd_ci,
    "roc": cmd_roc,
    "protocol": cmd_protocol,
    "simulate": cmd_simulate,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        seed = resolve_seed(args.seed)
        return COMMANDS[args.command](args, seed)
    except ValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CODES["precondition"]
    except MatchCIError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
