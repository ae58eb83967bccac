"""Readers and writers for the standard evaluation file formats.

Run files and qrels use whitespace-separated TREC columns, the corpus is
JSONL with "id" and "text" fields, and queries are a two-column TSV. Every
parser failure is a located error rather than a crash, whatever bytes come
in.
"""

from __future__ import annotations

import json
import logging
import math
from typing import IO, Iterable, Iterator, Mapping

from .core import (
    DocEntry,
    JudgmentSet,
    Query,
    RankedList,
    RankEntry,
    RankingError,
    ValidationError,
    ensure_token,
)

logger = logging.getLogger(__name__)


class ParseError(RankingError):
    """Malformed input; carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None) -> None:
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


def _lines(stream: Iterable) -> Iterator[tuple[int, str]]:
    """Yield (line number, stripped text), decoding bytes leniently."""
    for number, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8", errors="replace")
        elif not isinstance(raw, str):
            raise ParseError(f"expected text or bytes, got {type(raw).__name__}", number)
        line = raw.strip()
        if line:
            yield number, line


def parse_run(stream: Iterable) -> dict[str, RankedList]:
    """Parse a TREC run file into one RankedList per query.

    Lines are ``query_id Q0 doc_id rank score tag``. Entries are sorted by
    rank on load; ranks must then be exactly 1..n per query, doc_ids unique,
    and scores non-increasing (ties draw a warning, increases are an error).
    """
    rows: dict[str, list[tuple[int, float, str, int]]] = {}
    for number, line in _lines(stream):
        parts = line.split()
        if len(parts) != 6:
            raise ParseError(f"expected 6 whitespace-separated fields, got {len(parts)}", number)
        query_id, _, doc_id, rank_text, score_text, _tag = parts
        try:
            rank = int(rank_text)
        except ValueError:
            raise ParseError(f"rank is not an integer: {rank_text!r}", number)
        try:
            score = float(score_text)
        except ValueError:
            raise ParseError(f"score is not a number: {score_text!r}", number)
        if not math.isfinite(score):
            raise ParseError(f"score is not finite: {score_text!r}", number)
        rows.setdefault(query_id, []).append((rank, score, doc_id, number))
    out: dict[str, RankedList] = {}
    for query_id, items in rows.items():
        items.sort(key=lambda item: item[0])
        seen: set[str] = set()
        entries = []
        tied = False
        for position, (rank, score, doc_id, number) in enumerate(items, start=1):
            if rank != position:
                raise ParseError(f"query {query_id}: ranks are not exactly 1..{len(items)} (problem near rank {rank})", number)
            if doc_id in seen:
                raise ParseError(f"query {query_id}: duplicate doc_id {doc_id}", number)
            seen.add(doc_id)
            if entries:
                if score > entries[-1].score:
                    raise ParseError(f"query {query_id}: score increases at rank {rank}", number)
                if score == entries[-1].score:
                    tied = True
            entries.append(RankEntry(doc_id=doc_id, rank=rank, score=score))
        if tied:
            logger.warning("query %s: tied scores in run file", query_id)
        out[query_id] = RankedList(query=Query(id=query_id), entries=tuple(entries))
    return out


def write_run(rankings: Mapping[str, RankedList], tag: str, stream: IO[str]) -> int:
    """Write rankings as TREC run lines, queries sorted, scores to 6 digits."""
    ensure_token(tag, "run tag")
    count = 0
    for query_id in sorted(rankings):
        for entry in rankings[query_id].entries:
            stream.write(f"{query_id} Q0 {entry.doc_id} {entry.rank} {entry.score:.6g} {tag}\n")
            count += 1
    return count


def parse_qrels(stream: Iterable) -> JudgmentSet:
    """Parse qrels lines ``query_id iteration doc_id grade``.

    Grades must be non-negative integers; a duplicated (query, doc) pair is
    an error. The iteration column is not interpreted.
    """
    grades: dict[str, dict[str, int]] = {}
    for number, line in _lines(stream):
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(f"expected 4 whitespace-separated fields, got {len(parts)}", number)
        query_id, _, doc_id, grade_text = parts
        try:
            grade = int(grade_text)
        except ValueError:
            raise ParseError(f"grade is not an integer: {grade_text!r}", number)
        if grade < 0:
            raise ParseError(f"grade is negative: {grade}", number)
        per_query = grades.setdefault(query_id, {})
        if doc_id in per_query:
            raise ParseError(f"duplicate judgment for ({query_id}, {doc_id})", number)
        per_query[doc_id] = grade
    return JudgmentSet(grades)


def write_qrels(judgments: JudgmentSet, stream: IO[str]) -> int:
    """Write a JudgmentSet back out as qrels lines, sorted for stable bytes."""
    count = 0
    for query_id in judgments.query_ids():
        for doc_id, grade in sorted(judgments.docs_for(query_id).items()):
            stream.write(f"{query_id} 0 {doc_id} {grade}\n")
            count += 1
    return count


def parse_corpus(stream: Iterable) -> dict[str, DocEntry]:
    """Parse a JSONL corpus of {"id": ..., "text": ...} objects."""
    docs: dict[str, DocEntry] = {}
    for number, line in _lines(stream):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", number)
        if not isinstance(obj, dict) or not isinstance(obj.get("id"), str) or not isinstance(obj.get("text"), str):
            raise ParseError('each corpus line must be an object with string "id" and "text" fields', number)
        if obj["id"] in docs:
            raise ParseError(f"duplicate document id {obj['id']}", number)
        try:
            docs[obj["id"]] = DocEntry(doc_id=obj["id"], text=obj["text"])
        except ValidationError as exc:
            raise ParseError(str(exc), number)
    return docs


def parse_queries(stream: Iterable) -> dict[str, Query]:
    """Parse a TSV of ``query_id <tab> query text`` lines."""
    queries: dict[str, Query] = {}
    for number, line in _lines(stream):
        parts = line.split("\t", 1)
        if len(parts) != 2:
            raise ParseError("expected two tab-separated fields", number)
        query_id, text = parts[0].strip(), parts[1].strip()
        if query_id in queries:
            raise ParseError(f"duplicate query id {query_id}", number)
        try:
            queries[query_id] = Query(id=query_id, text=text)
        except ValidationError as exc:
            raise ParseError(str(exc), number)
    return queries
