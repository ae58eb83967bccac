"""Permuter backends: a window of documents goes in, an ordering comes out.

Three interchangeable backends share one contract. The oracle sorts each
window by relevance judgments, the scripted backend replays fixed orderings
keyed by a window fingerprint, and the remote backend speaks a small
JSON-over-HTTP protocol. Raw backend output is always repaired into an
exact permutation of the requested window before anything downstream sees
it, so orchestration never has to reason about malformed responses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import ClassVar, Mapping, Protocol, Sequence

import requests

from .core import DocEntry, JudgmentSet, Query, RankingError, ValidationError

DUPLICATE_REMOVED = "duplicate_removed"
MISSING_APPENDED = "missing_appended"
UNKNOWN_DROPPED = "unknown_dropped"


class BackendError(RankingError):
    """A permuter backend failed to produce a usable ordering."""


class ProtocolError(BackendError):
    """The remote service answered with a malformed or unexpected body."""


class ScriptError(RankingError):
    """A scripted permuter has no entry for a window and fallback is disabled."""


@dataclass(frozen=True)
class PermuteRequest:
    """One window of documents to order for one query."""

    query: Query
    window: tuple[DocEntry, ...]

    def __post_init__(self) -> None:
        if not self.window:
            raise ValidationError("a permute window must contain at least one document")
        ids = [doc.doc_id for doc in self.window]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"query {self.query.id}: permute window contains duplicate doc_ids")

    @property
    def window_ids(self) -> tuple[str, ...]:
        return tuple(doc.doc_id for doc in self.window)


@dataclass(frozen=True)
class RepairEvent:
    kind: str
    doc_id: str


@dataclass(frozen=True)
class PermutationResult:
    """An exact permutation of the requested window ids, plus any repairs applied."""

    order: tuple[str, ...]
    repairs: tuple[RepairEvent, ...] = ()


class Permuter(Protocol):
    """Stateless callable contract every backend satisfies."""

    deterministic: bool

    def __call__(self, request: PermuteRequest) -> PermutationResult: ...


def repair_permutation(raw: Sequence[str], window_ids: Sequence[str]) -> PermutationResult:
    """Coerce a raw backend ordering into an exact permutation of the window.

    Ids outside the window are dropped, duplicates keep their first
    occurrence, and omitted ids are appended in original window order. One
    repair event is recorded per dropped, deduplicated, or appended id, in
    the order the repairs were applied.
    """
    known = set(window_ids)
    seen: set[str] = set()
    order: list[str] = []
    repairs: list[RepairEvent] = []
    for doc_id in raw:
        if doc_id not in known:
            repairs.append(RepairEvent(UNKNOWN_DROPPED, doc_id))
        elif doc_id in seen:
            repairs.append(RepairEvent(DUPLICATE_REMOVED, doc_id))
        else:
            seen.add(doc_id)
            order.append(doc_id)
    for doc_id in window_ids:
        if doc_id not in seen:
            repairs.append(RepairEvent(MISSING_APPENDED, doc_id))
            order.append(doc_id)
    return PermutationResult(order=tuple(order), repairs=tuple(repairs))


def oracle_permute(request: PermuteRequest, judgments: JudgmentSet) -> PermutationResult:
    """Order the window by relevance grade, best first; ties keep window order."""
    query_id = request.query.id
    ordered = sorted(request.window_ids, key=lambda doc_id: -judgments.grade(query_id, doc_id))
    return PermutationResult(order=tuple(ordered))


def window_fingerprint(query_id: str, window_ids: Sequence[str]) -> str:
    """Order-insensitive key identifying a (query, window contents) pair."""
    return query_id + "|" + ",".join(sorted(window_ids))


def scripted_permute(
    request: PermuteRequest,
    script: Mapping[str, Sequence[str]],
    fallback_identity: bool = True,
) -> PermutationResult:
    """Replay a scripted ordering for this window.

    The script maps ``window_fingerprint`` keys to orderings. A window with
    no entry falls back to the identity ordering, or raises ScriptError when
    ``fallback_identity`` is off. Scripted orderings pass through
    ``repair_permutation`` so a sloppy fixture still yields a permutation.
    """
    key = window_fingerprint(request.query.id, request.window_ids)
    raw = script.get(key)
    if raw is None:
        if not fallback_identity:
            raise ScriptError(f"no scripted ordering for window {key!r} and identity fallback is disabled")
        return PermutationResult(order=request.window_ids)
    return repair_permutation(list(raw), request.window_ids)


def remote_permute(
    request: PermuteRequest,
    endpoint: str,
    timeout: float = 30.0,
    retries: int = 2,
) -> PermutationResult:
    """POST the window to ``{endpoint}/permute`` and repair the returned order.

    Request body: {"query_id": ..., "query": ..., "documents": [{"id", "text"}, ...]}
    Expected response: {"order": [doc_id, ...]}

    Network failures, timeouts, and 5xx answers are retried; once attempts
    are exhausted a BackendError is raised. Any other unexpected status or
    an unparseable body raises ProtocolError immediately.
    """
    body = {
        "query_id": request.query.id,
        "query": request.query.text,
        "documents": [{"id": doc.doc_id, "text": doc.text} for doc in request.window],
    }
    url = endpoint.rstrip("/") + "/permute"
    attempts = max(0, retries) + 1
    last_error: str = "no attempt made"
    for _ in range(attempts):
        try:
            response = requests.post(url, json=body, timeout=timeout)
        except requests.RequestException as exc:
            last_error = str(exc)
            continue
        if response.status_code >= 500:
            last_error = f"HTTP {response.status_code}"
            continue
        if response.status_code // 100 != 2:
            raise ProtocolError(f"permute endpoint returned HTTP {response.status_code}")
        try:
            payload = response.json()
        except ValueError:
            raise ProtocolError("permute response body is not JSON")
        order = payload.get("order") if isinstance(payload, dict) else None
        if not isinstance(order, list) or not all(isinstance(item, str) for item in order):
            raise ProtocolError('permute response must be an object of the form {"order": [doc_id, ...]}')
        return repair_permutation(order, request.window_ids)
    raise BackendError(f"permute endpoint {url} unavailable after {attempts} attempts: {last_error}")


@dataclass(frozen=True)
class OraclePermuter:
    """Backend with access to relevance judgments; sorts each window by grade."""

    judgments: JudgmentSet
    deterministic: ClassVar[bool] = True

    def __call__(self, request: PermuteRequest) -> PermutationResult:
        return oracle_permute(request, self.judgments)


@dataclass(frozen=True)
class ScriptedPermuter:
    """Deterministic test double replaying orderings from a fingerprint map.

    With an empty script and the identity fallback enabled this is the
    identity permuter.
    """

    script: Mapping[str, Sequence[str]] = field(default_factory=dict)
    fallback_identity: bool = True
    deterministic: ClassVar[bool] = True

    def __call__(self, request: PermuteRequest) -> PermutationResult:
        return scripted_permute(request, self.script, self.fallback_identity)


@dataclass(frozen=True)
class RemotePermuter:
    """JSON-over-HTTP backend client.

    Each call is an independent POST, so any number of requests may be in
    flight concurrently.
    """

    endpoint: str
    timeout: float = 30.0
    retries: int = 2
    deterministic: ClassVar[bool] = False

    def __call__(self, request: PermuteRequest) -> PermutationResult:
        return remote_permute(request, self.endpoint, self.timeout, self.retries)
