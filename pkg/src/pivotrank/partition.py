"""Re-ranking strategies built on the shared permuter contract.

Three strategies cover the orchestration space:

* single window: one permuter call over the top of the list;
* sliding window: overlapping windows walked bottom-up, one call each;
* top-down partitioning: the first window elects a pivot, every tail
  partition is compared against that pivot, and documents that beat it are
  re-ranked recursively. Pivot comparisons depend only on the pivot, so a
  whole sweep can be dispatched as one parallel stage.

Every strategy returns the re-ranked list together with an InferenceLedger
describing the calls it made. Closed-form call-count predictions live next
to the strategies so ledgers can be checked against them.

The strategies permute document orderings only; the score column is
positional, meaning the document moved to rank i receives the score the
input list carried at rank i. That keeps scores strictly decreasing and
makes the identity permutation a true fixed point.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .core import (
    CallRecord,
    DocEntry,
    InferenceLedger,
    PartitionPlan,
    PlanError,
    Query,
    RankedList,
    RankEntry,
    ValidationError,
)
from .permute import BackendError, PermutationResult, PermuteRequest, Permuter

DEFAULT_MAX_PARALLEL = 8

Dispatch = Callable[[Sequence[PermuteRequest], Permuter], "list[PermutationResult]"]


def sequential_dispatch(requests: Sequence[PermuteRequest], permuter: Permuter) -> list[PermutationResult]:
    """Run a stage's calls one after another, in request order."""
    return [permuter(request) for request in requests]


def threaded_dispatch(max_workers: int) -> Dispatch:
    """Build a dispatcher that runs each stage on a thread pool.

    Results always come back in request order regardless of completion
    order, which is what keeps concurrent runs deterministic.
    """
    if max_workers < 1:
        raise PlanError(f"max_workers must be positive, got {max_workers}")

    def dispatch(requests: Sequence[PermuteRequest], permuter: Permuter) -> list[PermutationResult]:
        if len(requests) <= 1 or max_workers == 1:
            return sequential_dispatch(requests, permuter)
        with ThreadPoolExecutor(max_workers=min(max_workers, len(requests))) as pool:
            return list(pool.map(permuter, requests))

    return dispatch


def sliding_inference_count(n: int, window: int, stride: int) -> int:
    """Number of windows a bottom-up sliding pass makes over n documents.

    The bottom window is followed by one window per upward shift of
    ``stride``, with the last window clamped to start at rank 1, giving
    1 + ceil((n - window) / stride) calls. Lists no longer than the window
    take a single call.
    """
    if n < 1:
        raise PlanError(f"n must be positive, got {n}")
    if stride < 1 or stride >= window:
        raise PlanError(f"stride must satisfy 1 <= stride < window, got stride={stride} window={window}")
    if n <= window:
        return 1
    return 1 + math.ceil((n - window) / stride)


def worst_case_inferences(n: int, plan: PartitionPlan) -> int:
    """Worst-case permuter calls for a top-down partitioning run over n docs.

    For budget == window the closed form is 2 + ceil((n - w) / (w - 1)) when
    n > w (pivot stage, full sweep, one final permute) and 1 otherwise. For
    budget > window the cost is summed over iterations of a recurrence in
    which each full sweep of m docs costs 1 + ceil((m - w) / (w - 1)) calls
    and hands at most min(budget + w - 2, cutoff - 1 + (m - w)) candidates
    to the next iteration; the budget + w - 2 term is the largest candidate
    set a per-partition budget check can admit.
    """
    if plan.mode != "tdpart":
        raise PlanError(f"worst_case_inferences applies to tdpart plans, got mode {plan.mode!r}")
    if n < 1:
        raise PlanError(f"n must be positive, got {n}")
    window, cutoff, budget = plan.window, plan.cutoff, plan.budget
    if budget == window:
        if n <= window:
            return 1
        return 2 + math.ceil((n - window) / (window - 1))
    return _iterated_worst_case(n, window, cutoff, budget)


def _iterated_worst_case(n: int, window: int, cutoff: int, budget: int) -> int:
    total = 0
    m = n
    while m > window:
        total += 1 + math.ceil((m - window) / (window - 1))
        m = min(budget + window - 2, cutoff - 1 + (m - window))
    return total + 1


def select_pivot(ordered_window: Sequence[str], cutoff: int) -> tuple[list[str], str, list[str]]:
    """Split an ordered window at 1-based position ``cutoff``.

    Returns (docs above the pivot, the pivot, docs below the pivot).
    """
    if cutoff < 1 or cutoff > len(ordered_window):
        raise PlanError(f"pivot cutoff {cutoff} is outside a window of {len(ordered_window)} documents")
    items = list(ordered_window)
    return items[: cutoff - 1], items[cutoff - 1], items[cutoff:]


def compare_partition(
    pivot: DocEntry,
    partition: Sequence[DocEntry],
    query: Query,
    permuter: Permuter,
) -> tuple[list[str], list[str]]:
    """Permute [pivot] + partition and split the result at the pivot.

    Returns (ids placed above the pivot, ids placed below it), each in the
    permuter's output order.
    """
    if any(doc.doc_id == pivot.doc_id for doc in partition):
        raise ValidationError(f"pivot {pivot.doc_id} may not appear in the partition")
    request = PermuteRequest(query=query, window=(pivot, *partition))
    result = permuter(request)
    order = _checked_order(result, request.window_ids, query.id)
    position = order.index(pivot.doc_id)
    return order[:position], order[position + 1 :]


def _checked_order(result: PermutationResult, window_ids: Sequence[str], query_id: str) -> list[str]:
    if sorted(result.order) != sorted(window_ids):
        raise BackendError(
            f"query {query_id}: backend returned a non-permutation for a window of {len(window_ids)} documents"
        )
    return list(result.order)


@dataclass
class TdpState:
    """Bookkeeping for one level of top-down partitioning."""

    pivot: str
    candidates: list[str]
    backfill: list[str]
    iteration: int = 0


@dataclass
class _Engine:
    """Shared plumbing: resolves documents, dispatches stages, fills the ledger."""

    query: Query
    permuter: Permuter
    corpus: Mapping[str, DocEntry] | None
    dispatch: Dispatch
    ledger: InferenceLedger = field(default_factory=InferenceLedger)

    def entry(self, doc_id: str) -> DocEntry:
        if self.corpus is not None:
            found = self.corpus.get(doc_id)
            if found is not None:
                return found
        return DocEntry(doc_id=doc_id)

    def permute_stage(self, windows: Sequence[Sequence[str]], contains_pivot: bool) -> list[list[str]]:
        """Dispatch one stage of independent calls; results keep window order."""
        requests = [
            PermuteRequest(query=self.query, window=tuple(self.entry(doc_id) for doc_id in ids))
            for ids in windows
        ]
        try:
            results = self.dispatch(requests, self.permuter)
        except BackendError as exc:
            raise type(exc)(f"query {self.query.id}: {exc}") from exc
        orders = [
            _checked_order(result, request.window_ids, self.query.id)
            for request, result in zip(requests, results)
        ]
        self.ledger.add_stage(
            (CallRecord(window_size=len(ids), contains_pivot=contains_pivot) for ids in windows),
            parallel=len(windows) > 1,
        )
        return orders


def _reordered(ranking: RankedList, ordered_doc_ids: Sequence[str]) -> RankedList:
    """Rebuild the list with documents in a new order, scores kept by position."""
    if sorted(ordered_doc_ids) != sorted(entry.doc_id for entry in ranking.entries):
        raise ValidationError(f"query {ranking.query.id}: reordering is not a permutation of the input list")
    entries = tuple(
        RankEntry(doc_id=doc_id, rank=entry.rank, score=entry.score)
        for doc_id, entry in zip(ordered_doc_ids, ranking.entries)
    )
    return RankedList(query=ranking.query, entries=entries)


def single_window_rerank(
    ranking: RankedList,
    window: int,
    permuter: Permuter,
    *,
    corpus: Mapping[str, DocEntry] | None = None,
    dispatch: Dispatch = sequential_dispatch,
) -> tuple[RankedList, InferenceLedger]:
    """Re-rank the top min(window, n) documents with one permuter call."""
    if window < 1:
        raise PlanError(f"window must be positive, got {window}")
    if not ranking.entries:
        raise ValidationError(f"query {ranking.query.id}: cannot re-rank an empty list")
    engine = _Engine(ranking.query, permuter, corpus, dispatch)
    ids = ranking.doc_ids()
    head = ids[: min(window, len(ids))]
    [ordered] = engine.permute_stage([head], contains_pivot=False)
    return _reordered(ranking, ordered + ids[len(head) :]), engine.ledger


def sliding_window_rerank(
    ranking: RankedList,
    window: int,
    stride: int,
    depth: int,
    permuter: Permuter,
    *,
    corpus: Mapping[str, DocEntry] | None = None,
    dispatch: Dispatch = sequential_dispatch,
) -> tuple[RankedList, InferenceLedger]:
    """Walk overlapping windows from the bottom of the list to the top.

    The first window covers the deepest ``window`` documents, each later
    window starts ``stride`` ranks higher (the topmost window clamps to rank
    1), and every window is permuted in place before the next one is formed,
    so a strong document can bubble up across windows. Each window is its
    own sequential stage.
    """
    if stride < 1 or stride >= window:
        raise PlanError(f"stride must satisfy 1 <= stride < window, got stride={stride} window={window}")
    if depth < window:
        raise PlanError(f"depth must be at least the window size, got depth={depth} window={window}")
    if not ranking.entries:
        raise ValidationError(f"query {ranking.query.id}: cannot re-rank an empty list")
    engine = _Engine(ranking.query, permuter, corpus, dispatch)
    ids = ranking.doc_ids()
    m = min(depth, len(ids))
    working = ids[:m]
    if m <= window:
        [working] = engine.permute_stage([working], contains_pivot=False)
    else:
        start = m - window
        while True:
            [ordered] = engine.permute_stage([working[start : start + window]], contains_pivot=False)
            working[start : start + window] = ordered
            if start == 0:
                break
            start = max(0, start - stride)
    return _reordered(ranking, working + ids[m:]), engine.ledger


def tdpart_rerank(
    ranking: RankedList,
    plan: PartitionPlan,
    permuter: Permuter,
    *,
    corpus: Mapping[str, DocEntry] | None = None,
    dispatch: Dispatch = sequential_dispatch,
    max_parallel: int = DEFAULT_MAX_PARALLEL,
) -> tuple[RankedList, InferenceLedger]:
    """Top-down pivot partitioning over the top min(depth, n) documents.

    The first window is permuted once and the document at rank ``cutoff``
    becomes the pivot: better-ranked documents seed the candidate set A,
    worse-ranked ones the backfill B. The remainder is cut into partitions
    of window - 1 documents, each permuted together with the pivot; whatever
    lands above the pivot joins A, the rest extends B. With budget == window
    the whole sweep is one parallel stage, otherwise sweeps go out in waves
    of ``max_parallel`` with the budget re-checked between waves. The budget
    is also checked before each partition's results are folded into A, so A
    never grows past budget + window - 2; partitions past that point keep
    their original order at the tail of the output. Unless no partition beat
    the pivot, A is then ordered recursively (a single permute once
    |A| <= window) and the output is ordered(A) + pivot + B + tail.
    """
    if plan.mode != "tdpart":
        raise PlanError(f"tdpart_rerank requires a tdpart plan, got mode {plan.mode!r}")
    if max_parallel < 1:
        raise PlanError(f"max_parallel must be positive, got {max_parallel}")
    if not ranking.entries:
        raise ValidationError(f"query {ranking.query.id}: cannot re-rank an empty list")
    engine = _Engine(ranking.query, permuter, corpus, dispatch)
    ids = ranking.doc_ids()
    m = min(plan.depth, len(ids))
    ordered = _tdpart_level(engine, ids[:m], plan, max_parallel)
    return _reordered(ranking, ordered + ids[m:]), engine.ledger


def _tdpart_level(engine: _Engine, ids: list[str], plan: PartitionPlan, max_parallel: int) -> list[str]:
    window, cutoff, budget = plan.window, plan.cutoff, plan.budget
    if len(ids) <= window:
        [ordered] = engine.permute_stage([ids], contains_pivot=False)
        return ordered
    [first] = engine.permute_stage([ids[:window]], contains_pivot=False)
    above, pivot, below = select_pivot(first, cutoff)
    state = TdpState(pivot=pivot, candidates=above, backfill=below)
    rest = ids[window:]
    size = window - 1
    partitions = [rest[i : i + size] for i in range(0, len(rest), size)]
    unprocessed: list[str] = []
    index = 0
    while index < len(partitions) and len(state.candidates) < budget:
        state.iteration += 1
        if budget == window:
            wave = partitions[index:]
        else:
            wave = partitions[index : index + max_parallel]
        orders = engine.permute_stage([[pivot, *partition] for partition in wave], contains_pivot=True)
        for partition, order in zip(wave, orders):
            index += 1
            if len(state.candidates) >= budget:
                unprocessed.extend(partition)
                continue
            position = order.index(pivot)
            state.candidates.extend(order[:position])
            state.backfill.extend(order[position + 1 :])
    for partition in partitions[index:]:
        unprocessed.extend(partition)
    if len(state.candidates) == cutoff - 1:
        ordered_candidates = state.candidates
    else:
        ordered_candidates = _tdpart_level(engine, state.candidates, plan, max_parallel)
    return ordered_candidates + [pivot] + state.backfill + unprocessed


def rerank(
    ranking: RankedList,
    plan: PartitionPlan,
    permuter: Permuter,
    *,
    corpus: Mapping[str, DocEntry] | None = None,
    dispatch: Dispatch = sequential_dispatch,
    max_parallel: int = DEFAULT_MAX_PARALLEL,
) -> tuple[RankedList, InferenceLedger]:
    """Run whichever strategy ``plan.mode`` selects."""
    if plan.mode == "single":
        return single_window_rerank(ranking, plan.window, permuter, corpus=corpus, dispatch=dispatch)
    if plan.mode == "sliding":
        return sliding_window_rerank(
            ranking, plan.window, plan.stride, plan.depth, permuter, corpus=corpus, dispatch=dispatch
        )
    return tdpart_rerank(
        ranking, plan, permuter, corpus=corpus, dispatch=dispatch, max_parallel=max_parallel
    )
