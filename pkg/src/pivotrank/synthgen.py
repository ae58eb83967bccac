"""Synthetic in-window ranking generator for order-sensitivity studies.

Windows of judged documents are assembled at controlled relevant to
non-relevant ratios, the relevant membership persists as the ratio grows,
and each window is emitted in ascending, descending, and random grade
order. All randomness flows from explicit seeds, so identical inputs give
bit-identical output.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Mapping, Sequence

from .core import JudgmentSet, RankingError, ValidationError

ORDERINGS = ("ASC", "DESC", "RANDOM")


class EligibilityError(RankingError):
    """A query's judged pools cannot support the requested window or ratio."""


@dataclass(frozen=True)
class SyntheticSpec:
    """Grid description: window sizes, ratio ladder, orderings, seed count."""

    window_sizes: tuple[int, ...] = (5, 20)
    ratios: tuple[float, ...] = (0.2, 0.4, 0.6, 0.8)
    orderings: tuple[str, ...] = ORDERINGS
    seeds: int = 5
    threshold: int = 2

    def __post_init__(self) -> None:
        if not self.window_sizes or any(size < 2 for size in self.window_sizes):
            raise ValidationError("window sizes must all be at least 2")
        if not self.ratios or any(not 0.0 < ratio < 1.0 for ratio in self.ratios):
            raise ValidationError("ratios must lie strictly between 0 and 1")
        if any(b <= a for a, b in zip(self.ratios, self.ratios[1:])):
            raise ValidationError("ratios must be strictly increasing")
        if not self.orderings or any(ordering not in ORDERINGS for ordering in self.orderings):
            raise ValidationError(f"orderings must be drawn from {ORDERINGS}")
        if self.seeds < 1:
            raise ValidationError("at least one seed is required")
        if self.threshold < 1:
            raise ValidationError("relevance threshold must be at least 1")


@dataclass(frozen=True)
class JudgedPools:
    """One query's judged documents split at the relevance threshold."""

    query_id: str
    relevant: tuple[str, ...]
    nonrelevant: tuple[str, ...]
    grades: Mapping[str, int]


def round_half_up(value: float) -> int:
    """Round to the nearest integer with exact halves going up."""
    return math.floor(value + 0.5)


def build_pools(judgments: JudgmentSet, threshold: int) -> dict[str, JudgedPools]:
    """Split every query's judged docs into relevant/non-relevant pools.

    Pool members are sorted by doc_id so sampling is independent of
    judgment file order.
    """
    pools: dict[str, JudgedPools] = {}
    for query_id in judgments.query_ids():
        docs = judgments.docs_for(query_id)
        relevant = tuple(sorted(doc_id for doc_id, grade in docs.items() if grade >= threshold))
        nonrelevant = tuple(sorted(doc_id for doc_id, grade in docs.items() if grade < threshold))
        pools[query_id] = JudgedPools(query_id=query_id, relevant=relevant, nonrelevant=nonrelevant, grades=docs)
    return pools


def filter_eligible_queries(judgments: JudgmentSet, window_size: int, threshold: int) -> set[str]:
    """Queries with at least window_size - 1 docs in each judged pool."""
    need = window_size - 1
    return {
        query_id
        for query_id, pools in build_pools(judgments, threshold).items()
        if len(pools.relevant) >= need and len(pools.nonrelevant) >= need
    }


def generate_initial_ranking(
    pools: JudgedPools, window_size: int, ratio: float, seed: int
) -> list[tuple[str, int]]:
    """Sample a fresh window at the given relevant ratio.

    round_half_up(window_size * ratio) docs come from the relevant pool and
    the rest from the non-relevant pool, both drawn without replacement by a
    seeded RNG. Returns (doc_id, grade) pairs; membership, not order, is the
    contract here.
    """
    n_relevant = round_half_up(window_size * ratio)
    n_nonrelevant = window_size - n_relevant
    if n_relevant > len(pools.relevant) or n_nonrelevant > len(pools.nonrelevant):
        raise EligibilityError(
            f"query {pools.query_id}: judged pools cannot fill a window of {window_size} at ratio {ratio}"
        )
    rng = random.Random(seed)
    chosen = rng.sample(pools.relevant, n_relevant) + rng.sample(pools.nonrelevant, n_nonrelevant)
    return [(doc_id, pools.grades[doc_id]) for doc_id in chosen]


def evolve_ranking(
    current: Sequence[tuple[str, int]],
    pools: JudgedPools,
    ratio_from: float,
    ratio_to: float,
    seed: int,
) -> list[tuple[str, int]]:
    """Raise a window's relevant ratio while keeping every relevant member.

    Enough non-relevant members are swapped for unused relevant docs to move
    the relevant count from round_half_up(k * ratio_from) to
    round_half_up(k * ratio_to); a zero-swap evolution returns the window
    unchanged.
    """
    if ratio_to < ratio_from:
        raise ValidationError(f"ratios must be non-decreasing, got {ratio_from} -> {ratio_to}")
    window_size = len(current)
    swaps = round_half_up(window_size * ratio_to) - round_half_up(window_size * ratio_from)
    if swaps == 0:
        return list(current)
    relevant_ids = set(pools.relevant)
    members = {doc_id for doc_id, _ in current}
    current_nonrelevant = [doc_id for doc_id, _ in current if doc_id not in relevant_ids]
    unused_relevant = [doc_id for doc_id in pools.relevant if doc_id not in members]
    if swaps > len(unused_relevant):
        raise EligibilityError(
            f"query {pools.query_id}: only {len(unused_relevant)} unused relevant docs, need {swaps}"
        )
    if swaps > len(current_nonrelevant):
        raise EligibilityError(
            f"query {pools.query_id}: only {len(current_nonrelevant)} non-relevant members, need to remove {swaps}"
        )
    rng = random.Random(seed)
    removed = set(rng.sample(current_nonrelevant, swaps))
    added = rng.sample(unused_relevant, swaps)
    evolved = [(doc_id, grade) for doc_id, grade in current if doc_id not in removed]
    evolved.extend((doc_id, pools.grades[doc_id]) for doc_id in added)
    return evolved


def order_ranking(
    docs: Sequence[tuple[str, int]], ordering: str, seed: int
) -> list[tuple[str, int]]:
    """Arrange a window by grade direction or at random.

    DESC sorts grades non-increasing with ties broken by a seeded shuffle,
    ASC is the exact reverse of DESC for the same seed, and RANDOM is the
    seeded shuffle itself.
    """
    if ordering not in ORDERINGS:
        raise ValidationError(f"unknown ordering {ordering!r}, expected one of {ORDERINGS}")
    shuffled = sorted(docs)
    rng = random.Random(seed)
    rng.shuffle(shuffled)
    if ordering == "RANDOM":
        return shuffled
    descending = sorted(shuffled, key=lambda item: -item[1])
    return descending if ordering == "DESC" else list(reversed(descending))


def derive_seed(*parts: object) -> int:
    """Deterministically fold identifying parts into an RNG seed."""
    digest = hashlib.sha256(":".join(str(part) for part in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def generate_grid(
    judgments: JudgmentSet, spec: SyntheticSpec, master_seed: int = 0
) -> Iterator[dict]:
    """Yield one row per (query, window size, ratio, ordering, seed index).

    Eligibility is decided once at the largest window size so every window
    size draws from the same query set. Within one (query, window, seed)
    chain the window evolves through the ratio ladder, which is what makes
    relevant membership persist across ratios.
    """
    pools = build_pools(judgments, spec.threshold)
    probe = max(spec.window_sizes)
    eligible = sorted(filter_eligible_queries(judgments, probe, spec.threshold))
    if not eligible:
        raise EligibilityError(
            f"no query has at least {probe - 1} judged documents in both the relevant and non-relevant pools"
        )
    for query_id in eligible:
        pool = pools[query_id]
        for window_size in spec.window_sizes:
            for seed_index in range(spec.seeds):
                window = generate_initial_ranking(
                    pool, window_size, spec.ratios[0],
                    derive_seed(master_seed, query_id, window_size, seed_index, "init"),
                )
                for step, ratio in enumerate(spec.ratios):
                    if step:
                        window = evolve_ranking(
                            window, pool, spec.ratios[step - 1], ratio,
                            derive_seed(master_seed, query_id, window_size, seed_index, "evolve", step),
                        )
                    order_seed = derive_seed(master_seed, query_id, window_size, seed_index, "order", step)
                    for ordering in spec.orderings:
                        ordered = order_ranking(window, ordering, order_seed)
                        yield {
                            "query_id": query_id,
                            "window_size": window_size,
                            "ratio": ratio,
                            "ordering": ordering,
                            "seed": seed_index,
                            "doc_ids": [doc_id for doc_id, _ in ordered],
                            "grades": [grade for _, grade in ordered],
                        }


def write_grid(rows: Iterable[dict], stream: IO[str]) -> int:
    """Write grid rows as JSON lines; returns the number written."""
    count = 0
    for row in rows:
        stream.write(json.dumps(row) + "\n")
        count += 1
    return count


def read_grid(stream: Iterable) -> list[dict]:
    """Read grid rows back from JSON lines, checking the row shape."""
    from .trecio import ParseError, _lines

    rows: list[dict] = []
    required = {"query_id", "window_size", "ratio", "ordering", "seed", "doc_ids", "grades"}
    for number, line in _lines(stream):
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", number)
        if not isinstance(row, dict) or not required.issubset(row):
            raise ParseError(f"window row must contain fields {sorted(required)}", number)
        if len(row["doc_ids"]) != len(row["grades"]):
            raise ParseError("doc_ids and grades must have equal length", number)
        rows.append(row)
    return rows
