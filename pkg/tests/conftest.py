"""Shared test doubles: permuters, dispatchers, a local permute server."""

from __future__ import annotations

import json
import random
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, ClassVar, Sequence

from pivotrank import (
    JudgmentSet,
    PermutationResult,
    PermuteRequest,
    Permuter,
    Query,
    RankedList,
    make_ranked_list,
)
from pivotrank.permute import window_fingerprint


def make_ids(n: int, prefix: str = "d") -> list[str]:
    return [f"{prefix}{i:04d}" for i in range(1, n + 1)]


def make_ranking(query_id: str, n: int, prefix: str = "d") -> RankedList:
    return make_ranked_list(Query(id=query_id), make_ids(n, prefix))


@dataclass(frozen=True)
class PromotePermuter:
    """Moves one designated document to the front of any window holding it.

    Against a pivoted window this contributes exactly one candidate, which
    makes it the worst-case driver: every partition stage runs and the final
    candidate permute cannot be skipped.
    """

    target: str
    deterministic: ClassVar[bool] = True

    def __call__(self, request: PermuteRequest) -> PermutationResult:
        ids = list(request.window_ids)
        if self.target in ids:
            ids.remove(self.target)
            ids.insert(0, self.target)
        return PermutationResult(order=tuple(ids))


@dataclass(frozen=True)
class ReversePermuter:
    """Reverses every window; floods the candidate set as hard as possible."""

    deterministic: ClassVar[bool] = True

    def __call__(self, request: PermuteRequest) -> PermutationResult:
        return PermutationResult(order=tuple(reversed(request.window_ids)))


@dataclass(frozen=True)
class HashPermuter:
    """Pure pseudo-random permuter: output depends only on (seed, window)."""

    seed: int = 0
    deterministic: ClassVar[bool] = True

    def __call__(self, request: PermuteRequest) -> PermutationResult:
        ids = list(request.window_ids)
        key = f"{self.seed}:{window_fingerprint(request.query.id, ids)}"
        random.Random(key).shuffle(ids)
        return PermutationResult(order=tuple(ids))


@dataclass
class CountingPermuter:
    """Wraps another permuter and records every call, thread-safely."""

    inner: Permuter
    calls: list[str] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock)
    deterministic: ClassVar[bool] = True

    def __call__(self, request: PermuteRequest) -> PermutationResult:
        with self._lock:
            self.calls.append(window_fingerprint(request.query.id, request.window_ids))
        return self.inner(request)

    @property
    def total(self) -> int:
        return len(self.calls)


def shuffled_dispatch(seed: int):
    """Dispatcher that executes a stage's calls in a random order.

    Results still come back aligned to the request order, as the engine
    requires; only the execution order is scrambled.
    """
    rng = random.Random(seed)

    def dispatch(requests: Sequence[PermuteRequest], permuter: Permuter) -> list[PermutationResult]:
        order = list(range(len(requests)))
        rng.shuffle(order)
        results: list[PermutationResult | None] = [None] * len(requests)
        for index in order:
            results[index] = permuter(requests[index])
        return results  # type: ignore[return-value]

    return dispatch


def sparse_judgments(query_id: str, graded: dict[str, int]) -> JudgmentSet:
    return JudgmentSet.from_pairs([(query_id, doc_id, grade) for doc_id, grade in graded.items()])


class _PermuteHandler(BaseHTTPRequestHandler):
    def do_POST(self) -> None:  # noqa: N802 (http.server API)
        if self.path != "/permute":
            self.send_error(404)
            return
        length = int(self.headers.get("Content-Length", "0"))
        raw = self.rfile.read(length)
        try:
            payload = json.loads(raw) if raw else {}
        except json.JSONDecodeError:
            payload = {}
        status, body = self.server.app(payload)  # type: ignore[attr-defined]
        if not isinstance(body, bytes):
            body = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args) -> None:
        pass


class _QuietServer(ThreadingHTTPServer):
    def handle_error(self, request, client_address) -> None:
        pass  # clients disconnect mid-request in the timeout tests


@contextmanager
def permute_server(app: Callable[[dict], tuple[int, object]]):
    """Serve ``app(payload) -> (status, body)`` on a local /permute endpoint."""
    server = _QuietServer(("127.0.0.1", 0), _PermuteHandler)
    server.app = app  # type: ignore[attr-defined]
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_address[1]}"
    finally:
        server.shutdown()
        server.server_close()
        thread.join(timeout=5)


def reverse_app(payload: dict) -> tuple[int, object]:
    return 200, {"order": [doc["id"] for doc in reversed(payload["documents"])]}


def identity_app(payload: dict) -> tuple[int, object]:
    return 200, {"order": [doc["id"] for doc in payload["documents"]]}


def oracle_app(judgments: JudgmentSet) -> Callable[[dict], tuple[int, object]]:
    def app(payload: dict) -> tuple[int, object]:
        query_id = payload["query_id"]
        ids = [doc["id"] for doc in payload["documents"]]
        ids.sort(key=lambda doc_id: -judgments.grade(query_id, doc_id))
        return 200, {"order": ids}

    return app


def flaky_app(failures: int, inner: Callable[[dict], tuple[int, object]]):
    """Fail the first ``failures`` calls with a 500, then defer to ``inner``."""
    state = {"left": failures}
    lock = threading.Lock()

    def app(payload: dict) -> tuple[int, object]:
        with lock:
            if state["left"] > 0:
                state["left"] -= 1
                return 500, {"error": "transient"}
        return inner(payload)

    return app
