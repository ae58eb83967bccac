"""Shared domain types for list-wise re-ranking.

Queries, documents, ranked lists, graded relevance judgments, strategy
plans, and the per-query ledger that accounts for every permuter call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

_WHITESPACE = " \t\r\n\x0b\x0c"

MODES = ("single", "sliding", "tdpart")


class RankingError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(RankingError):
    """A domain object or input violates a structural invariant."""


class PlanError(RankingError):
    """Invalid strategy parameters or an invalid parameter combination."""


def ensure_token(value: str, what: str) -> str:
    """Require a non-empty string with no ASCII whitespace and return it."""
    if not isinstance(value, str) or not value or any(c in _WHITESPACE for c in value):
        raise ValidationError(f"{what} must be a non-empty token without whitespace, got {value!r}")
    return value


@dataclass(frozen=True)
class Query:
    """A search request. ``text`` may be empty when only the id matters."""

    id: str
    text: str = ""

    def __post_init__(self) -> None:
        ensure_token(self.id, "query id")


@dataclass(frozen=True)
class DocEntry:
    """A retrievable document. ``text`` may be empty outside remote calls."""

    doc_id: str
    text: str = ""

    def __post_init__(self) -> None:
        ensure_token(self.doc_id, "doc_id")


@dataclass(frozen=True)
class RankEntry:
    doc_id: str
    rank: int
    score: float


@dataclass(frozen=True)
class RankedList:
    """An ordered result list for one query.

    Well-formed lists carry ranks exactly 1..n, unique doc_ids, and strictly
    decreasing finite scores; ``validate`` reports any violations.
    """

    query: Query
    entries: tuple[RankEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[RankEntry]:
        return iter(self.entries)

    def doc_ids(self) -> list[str]:
        return [entry.doc_id for entry in self.entries]


def make_ranked_list(query: Query, ordered_doc_ids: Sequence[str]) -> RankedList:
    """Build a RankedList from a bare ordering.

    Scores are synthesized as n - rank + 1 so the TREC score column exists
    and decreases strictly.

    Raises:
        ValidationError: on an empty sequence or a duplicate doc_id.
    """
    if not ordered_doc_ids:
        raise ValidationError(f"query {query.id}: cannot build a ranking from an empty document sequence")
    seen: set[str] = set()
    n = len(ordered_doc_ids)
    entries = []
    for position, doc_id in enumerate(ordered_doc_ids, start=1):
        ensure_token(doc_id, "doc_id")
        if doc_id in seen:
            raise ValidationError(f"duplicate doc_id {doc_id}")
        seen.add(doc_id)
        entries.append(RankEntry(doc_id=doc_id, rank=position, score=float(n - position + 1)))
    return RankedList(query=query, entries=tuple(entries))


def truncate_to_depth(ranking: RankedList, depth: int) -> RankedList:
    """Keep the first ``depth`` entries; a prefix preserves all invariants."""
    if depth < 1:
        raise ValidationError(f"depth must be positive, got {depth}")
    return RankedList(query=ranking.query, entries=ranking.entries[:depth])


def validate(ranking: RankedList) -> list[str]:
    """Check structural invariants; an empty list means the ranking is ok."""
    violations: list[str] = []
    seen: set[str] = set()
    previous_rank: int | None = None
    previous_score: float | None = None
    for entry in ranking.entries:
        if previous_rank is None:
            if entry.rank != 1:
                violations.append(f"ranks start at {entry.rank}, expected 1")
        elif entry.rank == previous_rank:
            violations.append(f"duplicate rank {entry.rank}")
        elif entry.rank != previous_rank + 1:
            violations.append(f"gap after rank {previous_rank}")
        previous_rank = entry.rank
        if entry.doc_id in seen:
            violations.append(f"duplicate doc_id {entry.doc_id}")
        seen.add(entry.doc_id)
        if not math.isfinite(entry.score):
            violations.append(f"non-finite score at rank {entry.rank}")
        elif previous_score is not None and entry.score >= previous_score:
            violations.append(f"non-strict score order at rank {entry.rank}")
        previous_score = entry.score
    return violations


class JudgmentSet:
    """Graded relevance labels keyed by (query_id, doc_id).

    Grades are non-negative integers; looking up an unjudged pair yields 0.
    """

    def __init__(self, grades: Mapping[str, Mapping[str, int]] | None = None) -> None:
        store: dict[str, dict[str, int]] = {}
        for query_id, docs in (grades or {}).items():
            ensure_token(query_id, "query id")
            per_query: dict[str, int] = {}
            for doc_id, grade in docs.items():
                ensure_token(doc_id, "doc_id")
                if not isinstance(grade, int) or grade < 0:
                    raise ValidationError(f"grade for ({query_id}, {doc_id}) must be a non-negative integer, got {grade!r}")
                per_query[doc_id] = grade
            store[query_id] = per_query
        self._grades = store

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str, int]]) -> "JudgmentSet":
        """Build from (query_id, doc_id, grade) triples; duplicates are an error."""
        store: dict[str, dict[str, int]] = {}
        for query_id, doc_id, grade in pairs:
            per_query = store.setdefault(query_id, {})
            if doc_id in per_query:
                raise ValidationError(f"duplicate judgment for ({query_id}, {doc_id})")
            per_query[doc_id] = grade
        return cls(store)

    def grade(self, query_id: str, doc_id: str) -> int:
        return self._grades.get(query_id, {}).get(doc_id, 0)

    def docs_for(self, query_id: str) -> dict[str, int]:
        """All judged documents for a query as a doc_id -> grade copy."""
        return dict(self._grades.get(query_id, {}))

    def query_ids(self) -> list[str]:
        return sorted(self._grades)

    def __len__(self) -> int:
        return sum(len(docs) for docs in self._grades.values())

    def __bool__(self) -> bool:
        return bool(self._grades)


@dataclass(frozen=True)
class PartitionPlan:
    """Strategy selection plus the parameters the strategies share.

    ``cutoff`` (pivot rank) and ``budget`` apply to tdpart only and default
    to window // 2 and window respectively.  ``stride`` applies to sliding.
    ``depth`` bounds how far down the list any strategy reaches.
    """

    mode: str
    window: int
    depth: int
    stride: int | None = None
    cutoff: int | None = None
    budget: int | None = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise PlanError(f"unknown mode {self.mode!r}, expected one of {MODES}")
        if self.window < 1:
            raise PlanError(f"window must be positive, got {self.window}")
        if self.depth < self.window:
            raise PlanError(f"depth must be at least the window size, got depth={self.depth} window={self.window}")
        if self.mode == "sliding":
            if self.stride is None:
                raise PlanError("sliding mode requires a stride")
            if not 1 <= self.stride < self.window:
                raise PlanError(f"stride must satisfy 1 <= stride < window, got stride={self.stride} window={self.window}")
        if self.mode == "tdpart":
            if self.cutoff is None:
                object.__setattr__(self, "cutoff", self.window // 2)
            if self.budget is None:
                object.__setattr__(self, "budget", self.window)
            if not 1 <= self.cutoff < self.window:
                raise PlanError(f"pivot cutoff must satisfy 1 <= cutoff < window, got cutoff={self.cutoff} window={self.window}")
            if self.budget < self.cutoff:
                raise PlanError(f"budget must be at least the cutoff, got budget={self.budget} cutoff={self.cutoff}")

    @classmethod
    def single(cls, window: int, depth: int) -> "PartitionPlan":
        return cls(mode="single", window=window, depth=depth)

    @classmethod
    def sliding(cls, window: int, stride: int, depth: int) -> "PartitionPlan":
        return cls(mode="sliding", window=window, stride=stride, depth=depth)

    @classmethod
    def tdpart(cls, window: int, depth: int, cutoff: int | None = None, budget: int | None = None) -> "PartitionPlan":
        return cls(mode="tdpart", window=window, depth=depth, cutoff=cutoff, budget=budget)


@dataclass(frozen=True)
class CallRecord:
    """One permuter call: how many documents it saw and whether one was a pivot."""

    window_size: int
    contains_pivot: bool = False


@dataclass(frozen=True)
class Stage:
    """A group of calls separated from the next group by a scheduling barrier."""

    calls: tuple[CallRecord, ...]
    parallel: bool


class InferenceLedger:
    """Per-query record of permuter calls grouped into sequential stages.

    Calls within a stage are mutually independent and may run concurrently;
    stages execute one after another, so ``sequential_depth`` is the number
    of stages and ``total_inferences`` the number of calls.
    """

    def __init__(self) -> None:
        self._stages: list[Stage] = []

    def add_stage(self, calls: Iterable[CallRecord], parallel: bool) -> None:
        records = tuple(calls)
        if not records:
            raise ValidationError("a ledger stage must contain at least one call")
        self._stages.append(Stage(calls=records, parallel=parallel))

    @property
    def stages(self) -> tuple[Stage, ...]:
        return tuple(self._stages)

    @property
    def total_inferences(self) -> int:
        return sum(len(stage.calls) for stage in self._stages)

    @property
    def sequential_depth(self) -> int:
        return len(self._stages)

    @property
    def max_stage_width(self) -> int:
        return max((len(stage.calls) for stage in self._stages), default=0)

    @property
    def stage_sizes(self) -> list[int]:
        return [len(stage.calls) for stage in self._stages]

    def to_dict(self) -> dict:
        return {
            "total_inferences": self.total_inferences,
            "sequential_depth": self.sequential_depth,
            "max_stage_width": self.max_stage_width,
            "stage_sizes": self.stage_sizes,
        }
