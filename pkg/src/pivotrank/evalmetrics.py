"""Ranking quality metrics and the paired equivalence test.

nDCG@k with linear gains, precision@k over a grade threshold, per-query
aggregation with query alignment, and a paired TOST whose equivalence band
is a fraction of the baseline mean.
"""

from __future__ import annotations

import json
import logging
import math
import statistics
from dataclasses import dataclass
from typing import IO, Mapping, Sequence

from scipy import stats

from .core import JudgmentSet, RankedList, ValidationError

logger = logging.getLogger(__name__)

METRIC_CUTOFFS = (("ndcg", 1), ("ndcg", 5), ("ndcg", 10), ("p", 10))


@dataclass(frozen=True)
class MetricReport:
    """Per-query values for one metric at one cutoff."""

    metric: str
    cutoff: int
    per_query: Mapping[str, float]

    @property
    def name(self) -> str:
        return f"{self.metric}@{self.cutoff}"

    @property
    def mean(self) -> float:
        if not self.per_query:
            return 0.0
        return statistics.fmean(self.per_query.values())


def dcg(gains: Sequence[float]) -> float:
    """Discounted cumulative gain of gains listed in rank order."""
    return sum(gain / math.log2(position + 1) for position, gain in enumerate(gains, start=1))


def ndcg_at_k(ranking: RankedList, judgments: JudgmentSet, k: int) -> float:
    """nDCG@k with linear gains (gain = grade) and log2(rank + 1) discounts.

    The ideal ranking draws on every judged document for the query, not just
    those present in the list. A query with no positive judgment scores 0.
    """
    if k < 1:
        raise ValidationError(f"k must be positive, got {k}")
    query_id = ranking.query.id
    gains = [float(judgments.grade(query_id, entry.doc_id)) for entry in ranking.entries[:k]]
    ideal = sorted(judgments.docs_for(query_id).values(), reverse=True)[:k]
    ideal_dcg = dcg([float(grade) for grade in ideal])
    if ideal_dcg == 0.0:
        return 0.0
    return dcg(gains) / ideal_dcg


def precision_at_k(ranking: RankedList, judgments: JudgmentSet, k: int, threshold: int) -> float:
    """Fraction of the top k ranks holding a doc with grade >= threshold.

    The denominator is k even when the list is shorter.
    """
    if k < 1:
        raise ValidationError(f"k must be positive, got {k}")
    query_id = ranking.query.id
    hits = sum(1 for entry in ranking.entries[:k] if judgments.grade(query_id, entry.doc_id) >= threshold)
    return hits / k


def evaluate_run(
    run: Mapping[str, RankedList], judgments: JudgmentSet, threshold: int = 2
) -> dict[str, MetricReport]:
    """Standard report card for one run: nDCG@1/5/10 and P@10."""
    reports: dict[str, MetricReport] = {}
    for metric, cutoff in METRIC_CUTOFFS:
        per_query: dict[str, float] = {}
        for query_id in sorted(run):
            ranking = run[query_id]
            if metric == "ndcg":
                per_query[query_id] = ndcg_at_k(ranking, judgments, cutoff)
            else:
                per_query[query_id] = precision_at_k(ranking, judgments, cutoff, threshold)
        report = MetricReport(metric=metric, cutoff=cutoff, per_query=per_query)
        reports[report.name] = report
    return reports


@dataclass(frozen=True)
class TostResult:
    """Outcome of a paired two one-sided equivalence test."""

    bound_fraction: float
    alpha: float
    bound: float
    p_lower: float
    p_upper: float
    equivalent: bool
    degenerate: bool = False


def paired_tost(
    a: Mapping[str, float],
    b: Mapping[str, float],
    bound_fraction: float = 0.05,
    alpha: float = 0.05,
) -> TostResult:
    """Paired TOST of per-query values a against baseline b.

    The equivalence band is +/- bound_fraction * mean(b), so the test is
    relative to the baseline's own level and is not symmetric in its
    arguments unless the two means coincide. Two one-sided paired t-tests
    are run on the differences a - b and the systems are declared
    equivalent iff max(p_lower, p_upper) < alpha.

    Zero-variance differences make the t statistic undefined; in that case
    the result is flagged degenerate and decided by whether the mean
    difference lies strictly inside the band.

    Raises:
        ValidationError: when the query sets differ or fewer than two
            queries are paired.
    """
    if set(a) != set(b):
        raise ValidationError("paired TOST requires identical query sets on both sides")
    if len(a) < 2:
        raise ValidationError(f"paired TOST requires at least two queries, got {len(a)}")
    keys = sorted(a)
    diffs = [a[key] - b[key] for key in keys]
    mean_diff = statistics.fmean(diffs)
    bound = bound_fraction * statistics.fmean(b[key] for key in keys)
    sd = statistics.stdev(diffs)
    if sd == 0.0:
        equivalent = abs(mean_diff) < bound
        p = 0.0 if equivalent else 1.0
        return TostResult(
            bound_fraction=bound_fraction, alpha=alpha, bound=bound,
            p_lower=p, p_upper=p, equivalent=equivalent, degenerate=True,
        )
    n = len(diffs)
    standard_error = sd / math.sqrt(n)
    dof = n - 1
    p_lower = float(stats.t.sf((mean_diff + bound) / standard_error, dof))
    p_upper = float(stats.t.cdf((mean_diff - bound) / standard_error, dof))
    equivalent = max(p_lower, p_upper) < alpha
    return TostResult(
        bound_fraction=bound_fraction, alpha=alpha, bound=bound,
        p_lower=p_lower, p_upper=p_upper, equivalent=equivalent, degenerate=False,
    )


@dataclass(frozen=True)
class AggregateSummary:
    """Labelled per-query values aligned on a shared query set, with means."""

    labels: tuple[str, ...]
    query_ids: tuple[str, ...]
    values: Mapping[str, Mapping[str, float]]
    means: Mapping[str, float]

    def to_csv(self, stream: IO[str]) -> None:
        stream.write("label,mean\n")
        for label in self.labels:
            stream.write(f"{label},{self.means[label]:.6f}\n")

    def to_text(self) -> str:
        width = max((len(label) for label in self.labels), default=5)
        lines = [f"{'label'.ljust(width)}  mean"]
        lines += [f"{label.ljust(width)}  {self.means[label]:.4f}" for label in self.labels]
        return "\n".join(lines)

    def write_per_query(self, stream: IO[str]) -> int:
        count = 0
        for label in self.labels:
            for query_id in self.query_ids:
                record = {"label": label, "query_id": query_id, "value": self.values[label][query_id]}
                stream.write(json.dumps(record) + "\n")
                count += 1
        return count


def aggregate(reports: Mapping[str, Mapping[str, float]]) -> AggregateSummary:
    """Align labelled per-query maps on the union of their queries.

    A label missing a query scores 0 for it, with a warning, so means stay
    comparable across labels.
    """
    labels = tuple(reports)
    query_ids = tuple(sorted({query_id for values in reports.values() for query_id in values}))
    aligned: dict[str, dict[str, float]] = {}
    for label, values in reports.items():
        missing = [query_id for query_id in query_ids if query_id not in values]
        if missing:
            logger.warning("label %s: %d queries missing, scored 0: %s", label, len(missing), ", ".join(missing[:5]))
        aligned[label] = {query_id: float(values.get(query_id, 0.0)) for query_id in query_ids}
    means = {
        label: (statistics.fmean(aligned[label].values()) if query_ids else 0.0)
        for label in labels
    }
    return AggregateSummary(labels=labels, query_ids=query_ids, values=aligned, means=means)
