"""Command-line front end.

Subcommands: ``rerank`` runs a strategy over a TREC run file, ``synth``
emits the synthetic in-window study grid, ``eval`` scores runs (or synthetic
windows) and can test two runs for equivalence, and ``bound`` prints the
predicted inference count for a plan. Identical flags and seeds always
produce byte-identical output files.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import IO, Mapping

from .core import (
    JudgmentSet,
    PartitionPlan,
    PlanError,
    Query,
    RankedList,
    RankingError,
    make_ranked_list,
)
from .evalmetrics import METRIC_CUTOFFS, evaluate_run, ndcg_at_k, paired_tost
from .partition import (
    DEFAULT_MAX_PARALLEL,
    rerank,
    sequential_dispatch,
    sliding_inference_count,
    threaded_dispatch,
    worst_case_inferences,
)
from .permute import OraclePermuter, RemotePermuter, ScriptedPermuter
from .synthgen import SyntheticSpec, filter_eligible_queries, generate_grid, read_grid, write_grid
from .trecio import parse_corpus, parse_qrels, parse_queries, parse_run, write_run

logger = logging.getLogger(__name__)

ENDPOINT_ENV = "PIVOTRANK_ENDPOINT"
MAX_PARALLEL_ENV = "PIVOTRANK_MAX_PARALLEL"


def _add_plan_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mode", required=True, choices=("single", "sliding", "tdpart"))
    parser.add_argument("--window", type=int, default=20, help="window size w (default 20)")
    parser.add_argument("--stride", type=int, default=10, help="sliding stride s (default 10)")
    parser.add_argument("--cutoff", type=int, default=None, help="pivot rank k (default w // 2)")
    parser.add_argument("--budget", type=int, default=None, help="candidate budget b (default w)")
    parser.add_argument("--depth", type=int, default=100, help="re-ranking depth D (default 100)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pivotrank", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_rerank = sub.add_parser("rerank", help="re-rank a TREC run file")
    _add_plan_flags(p_rerank)
    p_rerank.add_argument("--run", required=True, help="input TREC run file")
    p_rerank.add_argument("--backend", default="oracle",
                          help="oracle | scripted:PATH | remote[:URL] (default oracle)")
    p_rerank.add_argument("--qrels", help="qrels file (required by the oracle backend)")
    p_rerank.add_argument("--corpus", help="JSONL corpus (required by the remote backend)")
    p_rerank.add_argument("--queries", help="TSV of query texts (sent to the remote backend)")
    p_rerank.add_argument("--endpoint", help=f"remote endpoint URL (or ${ENDPOINT_ENV})")
    p_rerank.add_argument("--timeout", type=float, default=30.0, help="remote request timeout seconds")
    p_rerank.add_argument("--retries", type=int, default=2, help="remote retry count")
    p_rerank.add_argument("--max-parallel", type=int, default=None,
                          help=f"stage dispatch width (or ${MAX_PARALLEL_ENV}, default {DEFAULT_MAX_PARALLEL})")
    p_rerank.add_argument("--seed", type=int, default=0, help="accepted for interface uniformity")
    p_rerank.add_argument("--out", help="output run file (default stdout)")
    p_rerank.add_argument("--ledger-out", help="per-query inference ledger JSONL")

    p_synth = sub.add_parser("synth", help="generate the synthetic in-window study grid")
    p_synth.add_argument("--qrels", required=True)
    p_synth.add_argument("--window", type=int, action="append",
                         help="window size, repeatable (default 5 and 20)")
    p_synth.add_argument("--threshold", type=int, default=2, help="grade >= threshold is relevant (default 2)")
    p_synth.add_argument("--seeds", type=int, default=5, help="independent windows per setting (default 5)")
    p_synth.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p_synth.add_argument("--out", help="output JSONL (default stdout)")

    p_eval = sub.add_parser("eval", help="score runs, or synthetic windows, against judgments")
    p_eval.add_argument("--run", action="append", default=[], help="TREC run file, repeatable")
    p_eval.add_argument("--qrels")
    p_eval.add_argument("--windows", help="synthetic windows JSONL: emit per-row ndcg@10 CSV instead")
    p_eval.add_argument("--threshold", type=int, default=2, help="relevance threshold for P@k (default 2)")
    p_eval.add_argument("--tost", action="store_true",
                        help="paired equivalence test of the first run against the second (baseline)")
    p_eval.add_argument("--metric", default="ndcg@10", help="metric used by --tost (default ndcg@10)")
    p_eval.add_argument("--out", help="summary CSV path")
    p_eval.add_argument("--per-query-out", help="per-query values as JSON lines")

    p_bound = sub.add_parser("bound", help="print the predicted inference count for a plan")
    _add_plan_flags(p_bound)

    return parser


def _build_plan(args: argparse.Namespace) -> PartitionPlan:
    if args.mode == "single":
        return PartitionPlan.single(args.window, max(args.depth, args.window))
    if args.mode == "sliding":
        return PartitionPlan.sliding(args.window, args.stride, args.depth)
    return PartitionPlan.tdpart(args.window, args.depth, cutoff=args.cutoff, budget=args.budget)


def _read(path: str, parser) -> object:
    with open(path, "r", encoding="utf-8", errors="replace") as handle:
        return parser(handle)


def _resolve_max_parallel(value: int | None) -> int:
    if value is not None:
        resolved = value
    elif os.environ.get(MAX_PARALLEL_ENV):
        try:
            resolved = int(os.environ[MAX_PARALLEL_ENV])
        except ValueError:
            raise PlanError(f"${MAX_PARALLEL_ENV} must be an integer, got {os.environ[MAX_PARALLEL_ENV]!r}")
    else:
        resolved = DEFAULT_MAX_PARALLEL
    if resolved < 1:
        raise PlanError(f"max parallel must be positive, got {resolved}")
    return resolved


def _build_backend(args: argparse.Namespace, judgments, corpus):
    spec = args.backend
    name, _, detail = spec.partition(":")
    if name == "oracle":
        if judgments is None:
            raise PlanError("the oracle backend requires --qrels")
        return OraclePermuter(judgments)
    if name == "scripted":
        if not detail:
            raise PlanError("the scripted backend needs a path: scripted:PATH")
        with open(detail, "r", encoding="utf-8") as handle:
            script = json.load(handle)
        if not isinstance(script, dict):
            raise PlanError(f"scripted backend file {detail} must hold a JSON object")
        return ScriptedPermuter(script=script)
    if name == "remote":
        endpoint = detail or args.endpoint or os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            raise PlanError(f"the remote backend needs an endpoint: remote:URL, --endpoint, or ${ENDPOINT_ENV}")
        if corpus is None:
            raise PlanError("the remote backend requires --corpus")
        return RemotePermuter(endpoint=endpoint, timeout=args.timeout, retries=args.retries)
    raise PlanError(f"unknown backend {spec!r}, expected oracle, scripted:PATH, or remote[:URL]")


def _with_query_text(run: dict[str, RankedList], queries: Mapping[str, Query] | None) -> dict[str, RankedList]:
    if not queries:
        return run
    out = {}
    for query_id, ranking in run.items():
        query = queries.get(query_id)
        out[query_id] = RankedList(query=query, entries=ranking.entries) if query else ranking
    return out


def _open_out(path: str | None) -> IO[str]:
    if path is None:
        return sys.stdout
    return open(path, "w", encoding="utf-8", newline="\n")


def _close_out(handle: IO[str]) -> None:
    if handle is not sys.stdout:
        handle.close()


def cmd_rerank(args: argparse.Namespace) -> int:
    plan = _build_plan(args)
    run = _read(args.run, parse_run)
    judgments = _read(args.qrels, parse_qrels) if args.qrels else None
    corpus = _read(args.corpus, parse_corpus) if args.corpus else None
    queries = _read(args.queries, parse_queries) if args.queries else None
    permuter = _build_backend(args, judgments, corpus)
    max_parallel = _resolve_max_parallel(args.max_parallel)
    dispatch = threaded_dispatch(max_parallel) if isinstance(permuter, RemotePermuter) else sequential_dispatch
    run = _with_query_text(run, queries)

    results: dict[str, RankedList] = {}
    ledger_rows: list[dict] = []
    for query_id in sorted(run):
        reranked, ledger = rerank(
            run[query_id], plan, permuter, corpus=corpus, dispatch=dispatch, max_parallel=max_parallel
        )
        results[query_id] = reranked
        ledger_rows.append({"query_id": query_id, **ledger.to_dict()})

    out = _open_out(args.out)
    try:
        write_run(results, plan.mode, out)
    finally:
        _close_out(out)
    if args.ledger_out:
        with open(args.ledger_out, "w", encoding="utf-8", newline="\n") as handle:
            for row in ledger_rows:
                handle.write(json.dumps(row) + "\n")
    logger.info("re-ranked %d queries with %s", len(results), plan.mode)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    judgments = _read(args.qrels, parse_qrels)
    windows = tuple(args.window) if args.window else (5, 20)
    spec = SyntheticSpec(window_sizes=windows, seeds=args.seeds, threshold=args.threshold)
    eligible = filter_eligible_queries(judgments, max(spec.window_sizes), spec.threshold)
    logger.info(
        "eligible queries: %d (need %d judged docs in each pool at window %d)",
        len(eligible), max(spec.window_sizes) - 1, max(spec.window_sizes),
    )
    out = _open_out(args.out)
    try:
        count = write_grid(generate_grid(judgments, spec, master_seed=args.seed), out)
    finally:
        _close_out(out)
    logger.info("wrote %d window rows", count)
    return 0


def _eval_windows(args: argparse.Namespace) -> int:
    rows = _read(args.windows, read_grid)
    judgments = _read(args.qrels, parse_qrels) if args.qrels else None
    out = _open_out(args.out)
    try:
        out.write("query_id,window_size,ratio,ordering,seed,ndcg@10\n")
        for row in rows:
            query = Query(id=str(row["query_id"]))
            ranking = make_ranked_list(query, row["doc_ids"])
            judged = judgments or JudgmentSet({query.id: dict(zip(row["doc_ids"], row["grades"]))})
            value = ndcg_at_k(ranking, judged, 10)
            out.write(
                f"{row['query_id']},{row['window_size']},{row['ratio']},{row['ordering']},{row['seed']},{value:.6f}\n"
            )
    finally:
        _close_out(out)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    if args.windows:
        return _eval_windows(args)
    if not args.run:
        raise PlanError("eval needs at least one --run (or --windows)")
    if not args.qrels:
        raise PlanError("eval needs --qrels to score runs")
    if args.tost and len(args.run) != 2:
        raise PlanError(f"--tost compares exactly two runs, got {len(args.run)}")
    judgments = _read(args.qrels, parse_qrels)
    systems: dict[str, dict[str, object]] = {}
    for path in args.run:
        run = _read(path, parse_run)
        systems[path] = evaluate_run(run, judgments, threshold=args.threshold)

    metric_names = [f"{metric}@{cutoff}" for metric, cutoff in METRIC_CUTOFFS]
    width = max(len(path) for path in systems)
    header = "system".ljust(width) + "".join(f"  {name:>8}" for name in metric_names)
    print(header)
    for path, reports in systems.items():
        print(path.ljust(width) + "".join(f"  {reports[name].mean:8.4f}" for name in metric_names))

    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as handle:
            handle.write("system," + ",".join(metric_names) + "\n")
            for path, reports in systems.items():
                handle.write(path + "," + ",".join(f"{reports[name].mean:.6f}" for name in metric_names) + "\n")
    if args.per_query_out:
        with open(args.per_query_out, "w", encoding="utf-8", newline="\n") as handle:
            for path, reports in systems.items():
                for name in metric_names:
                    for query_id, value in sorted(reports[name].per_query.items()):
                        handle.write(json.dumps(
                            {"system": path, "metric": name, "query_id": query_id, "value": value}
                        ) + "\n")

    if args.tost:
        first, second = args.run
        if args.metric not in metric_names:
            raise PlanError(f"unknown --tost metric {args.metric!r}, expected one of {metric_names}")
        result = paired_tost(
            dict(systems[first][args.metric].per_query),
            dict(systems[second][args.metric].per_query),
        )
        verdict = "equivalent" if result.equivalent else "not equivalent"
        if result.degenerate:
            verdict += " (degenerate: zero-variance differences)"
        print(
            f"tost {args.metric}: p_lower={result.p_lower:.6g} p_upper={result.p_upper:.6g} "
            f"bound={result.bound:.6g} -> {verdict}"
        )
    return 0


def cmd_bound(args: argparse.Namespace) -> int:
    plan = _build_plan(args)
    if plan.mode == "single":
        count = 1
    elif plan.mode == "sliding":
        count = sliding_inference_count(plan.depth, plan.window, plan.stride)
    else:
        count = worst_case_inferences(plan.depth, plan)
    print(count)
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"rerank": cmd_rerank, "synth": cmd_synth, "eval": cmd_eval, "bound": cmd_bound}
    try:
        return handlers[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RankingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
