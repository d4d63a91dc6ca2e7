"""Shared test doubles: stub HTTP servers, a scripted LLM gateway, and
in-memory search/page fakes for exercising the pipeline offline."""
from __future__ import annotations

import json
import threading
from collections import Counter
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Optional

import pytest

from claimcheck.agents import HelpfulnessJudgment
from claimcheck.llm import ChatRequest, ChatResponse
from claimcheck.model import (
    Acquisition,
    Claim,
    Document,
    EvidenceSet,
    QueryOrigin,
    SearchQuery,
    SearchResultMeta,
    Verdict,
)
from claimcheck.pages import Unusable


# ---------------------------------------------------------------------------
# stub HTTP server


class _StubHandler(BaseHTTPRequestHandler):
    def _respond(self) -> None:
        handler = self.server.app  # type: ignore[attr-defined]
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else b""
        status, headers, payload = handler(self.command, self.path, body, dict(self.headers))
        self.send_response(status)
        for key, value in headers.items():
            self.send_header(key, value)
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    do_GET = _respond
    do_POST = _respond

    def log_message(self, *args) -> None:  # quiet
        pass


@pytest.fixture
def http_stub():
    """Start stub servers handled by app(method, path, body, headers) ->
    (status, headers, bytes); yields a factory returning base URLs."""
    servers: list[ThreadingHTTPServer] = []

    def start(app: Callable) -> str:
        server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
        server.app = app  # type: ignore[attr-defined]
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        servers.append(server)
        return f"http://127.0.0.1:{server.server_address[1]}"

    yield start
    for server in servers:
        server.shutdown()
        server.server_close()


def openai_reply(text: str) -> tuple[int, dict, bytes]:
    body = json.dumps({
        "choices": [{"message": {"role": "assistant", "content": text}}],
        "usage": {"prompt_tokens": 10, "completion_tokens": 5},
    }).encode()
    return 200, {"Content-Type": "application/json"}, body


def standard_llm_rules(n_results: int = 1) -> list:
    """A deterministic end-to-end world: every claim searches for its own
    text, every page is comprehensible and helpful, evidence is always
    sufficient, and claims containing 'never' classify as False."""

    def helpful_reply(messages):
        user = messages[-1]["content"]
        claim = next(line for line in user.splitlines() if line.startswith("Claim:"))
        return f"HELPFUL: {claim[len('Claim:'):].strip()} according to the source."

    def classify_reply(messages):
        text = "\n".join(m["content"] for m in messages)
        return "False" if "never" in text.lower() else "True"

    return [
        ("list of new web search queries", "no further queries come to mind"),
        ("numbered list of web search queries", "just search for the claim directly"),
        ("Sort the results", "[" + ", ".join(str(i + 1) for i in range(n_results)) + "]"),
        ("Is the document comprehensible", "YES, it is readable on its own."),
        ("adds helpful new information", helpful_reply),
        ("Is this evidence sufficient", "YES, that settles it."),
        ("Is the claim true or false", classify_reply),
    ]


def serper_stub_app(n_results: int = 1, seen: Optional[list] = None) -> Callable:
    """Search stub: each query yields n_results results whose URLs point at
    an unreachable host, so the page reader falls back to the snippet."""

    def app(method, path, body, headers):
        payload = json.loads(body)
        if seen is not None:
            seen.append(payload)
        q = payload["q"]
        slug = "".join(c if c.isalnum() else "-" for c in q.lower())[:40]
        organic = [
            {
                "title": f"Source {i} for {q}",
                "link": f"http://127.0.0.1:9/{slug}/{i}",
                "snippet": f"{q} — supporting details, variant {i}.",
            }
            for i in range(n_results)
        ]
        return 200, {"Content-Type": "application/json"}, json.dumps({"organic": organic}).encode()

    return app


def scripted_llm_app(rules: list[tuple[str, str | Callable[[list], str]]],
                     seen: Optional[list] = None) -> Callable:
    """LLM stub: first rule whose substring occurs in any message wins."""

    def app(method, path, body, headers):
        payload = json.loads(body)
        messages = payload["messages"]
        if seen is not None:
            seen.append(payload)
        haystack = "\n".join(m["content"] for m in messages)
        for needle, reply in rules:
            if needle in haystack:
                text = reply(messages) if callable(reply) else reply
                return openai_reply(text)
        return openai_reply("I cannot help with that.")

    return app


# ---------------------------------------------------------------------------
# scripted gateway (no HTTP at all)


class FakeGateway:
    """Queue-driven gateway; records every request it answers."""

    def __init__(self, replies: Optional[list[str]] = None,
                 responder: Optional[Callable[[ChatRequest], str]] = None) -> None:
        self.replies = list(replies or [])
        self.responder = responder
        self.requests: list[ChatRequest] = []

    def complete(self, req: ChatRequest) -> ChatResponse:
        self.requests.append(req)
        if self.responder is not None:
            return ChatResponse(text=self.responder(req))
        if not self.replies:
            raise AssertionError("FakeGateway ran out of scripted replies")
        return ChatResponse(text=self.replies.pop(0))


# ---------------------------------------------------------------------------
# pipeline-level fakes


def make_result(url: str, title: str = "t", snippet: str = "s",
                query: str = "q") -> SearchResultMeta:
    return SearchResultMeta(title=title, url=url, snippet=snippet,
                            source_query=SearchQuery(query, QueryOrigin.INITIAL))


def make_doc(url: str, body: str = "some sufficiently long page body text",
             title: str = "t") -> Document:
    return Document(meta=make_result(url, title=title), body=body,
                    acquisition=Acquisition.FETCHED_PAGE)


class FakeSearch:
    """query text -> list of SearchResultMeta; unknown queries yield []."""

    def __init__(self, worlds: Optional[dict[str, list[SearchResultMeta]]] = None) -> None:
        self.worlds = worlds or {}
        self.calls: list[tuple[str, int]] = []

    def search(self, query: SearchQuery, k: int) -> list[SearchResultMeta]:
        self.calls.append((query.text, k))
        return list(self.worlds.get(query.text, []))[:k]


class FakeReader:
    """url -> document body; urls in `unusable` raise Unusable."""

    def __init__(self, bodies: Optional[dict[str, str]] = None,
                 unusable: Optional[set[str]] = None) -> None:
        self.bodies = bodies or {}
        self.unusable = unusable or set()
        self.acquired: list[str] = []

    def acquire_document(self, result: SearchResultMeta) -> Document:
        self.acquired.append(result.url)
        if result.url in self.unusable:
            raise Unusable(result.url)
        body = self.bodies.get(result.url, f"page text for {result.url} " * 3)
        return Document(meta=result, body=body, acquisition=Acquisition.FETCHED_PAGE)


class ScriptedAgents:
    """Programmable stand-in for the agent suite; counts every call.

    Behaviors may be constants or callables receiving the natural
    arguments of each agent.
    """

    def __init__(
        self,
        initial: list[str] | None = None,
        rank: Callable | str = "keep",          # "keep", "reverse", or callable
        scc: Callable | bool = True,
        helpful: Callable | HelpfulnessJudgment | None = None,
        sufficient: Callable | bool = False,
        verdict: Callable | Verdict = Verdict.TRUE,
        additional: Callable | list[str] | None = None,
    ) -> None:
        self.initial = initial or ["q1"]
        self.rank = rank
        self.scc = scc
        self.helpful = helpful if helpful is not None else HelpfulnessJudgment(True, "a note")
        self.sufficient = sufficient
        self.verdict = verdict
        self.additional = additional if additional is not None else []
        self.calls: Counter[str] = Counter()
        self.scc_urls: list[str] = []

    @staticmethod
    def _value(behavior, *args):
        return behavior(*args) if callable(behavior) else behavior

    def initial_query_gen(self, claim: Claim) -> list[SearchQuery]:
        self.calls["initial_query_gen"] += 1
        return [SearchQuery(t, QueryOrigin.INITIAL) for t in self.initial]

    def search_rank(self, query, results):
        self.calls["search_rank"] += 1
        if callable(self.rank):
            return self.rank(query, results)
        return list(reversed(results)) if self.rank == "reverse" else list(results)

    def self_contained_check(self, claim, evidence, doc) -> bool:
        self.calls["self_contained_check"] += 1
        self.scc_urls.append(doc.meta.url)
        return bool(self._value(self.scc, claim, evidence, doc))

    def det_helpful(self, claim, evidence, doc) -> HelpfulnessJudgment:
        self.calls["det_helpful"] += 1
        return self._value(self.helpful, claim, evidence, doc)

    def sufficient_evidence(self, claim, evidence: EvidenceSet) -> bool:
        if len(evidence) == 0:
            return False
        self.calls["sufficient_evidence"] += 1
        return bool(self._value(self.sufficient, claim, evidence))

    def classify(self, claim, evidence) -> Verdict:
        self.calls["classify"] += 1
        return self._value(self.verdict, claim, evidence)

    def additional_query_gen(self, claim, evidence, issued_texts, remaining_budget):
        self.calls["additional_query_gen"] += 1
        texts = self._value(self.additional, claim, evidence)
        issued = {t.lower() for t in issued_texts}
        texts = [t for t in texts if t.lower() not in issued][:remaining_budget]
        return [SearchQuery(t, QueryOrigin.ADDITIONAL) for t in texts]

    def total_llm_like_calls(self) -> int:
        return sum(self.calls.values())
