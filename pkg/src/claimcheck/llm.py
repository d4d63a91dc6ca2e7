"""Chat-completion gateway: live OpenAI-compatible HTTP backend plus
deterministic record/replay backends for offline runs and tests."""
from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass
from typing import Any, Callable, Optional

import requests

from .replaystore import FixtureMiss, FixtureStore, StorageError

__all__ = [
    "ChatRequest",
    "ChatResponse",
    "LlmGateway",
    "TransportError",
    "AuthError",
    "FixtureMiss",
    "StorageError",
    "canonical_form",
    "replay_key",
]

ROLES = ("system", "user")


class TransportError(Exception):
    """Network failure or HTTP error that survived the retry budget."""


class AuthError(Exception):
    """HTTP 401/403; not retryable."""


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    messages: tuple[tuple[str, str], ...]
    temperature: float

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("at least one message required")
        for role, content in self.messages:
            if role not in ROLES:
                raise ValueError(f"unsupported role: {role!r}")
            if not content:
                raise ValueError("message content must be non-empty")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    usage: Optional[tuple[int, int]] = None


def canonical_form(req: ChatRequest) -> dict[str, Any]:
    """Request form used for hashing; collapses trailing whitespace only."""
    return {
        "model": req.model_id,
        "temperature": req.temperature,
        "messages": [[role, content.rstrip()] for role, content in req.messages],
    }


def replay_key(req: ChatRequest) -> str:
    blob = json.dumps(canonical_form(req), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _requests_transport(url: str, headers: dict[str, str], payload: dict[str, Any],
                        timeout: float) -> tuple[int, str]:
    try:
        resp = requests.post(url, headers=headers, json=payload, timeout=timeout)
    except requests.RequestException as exc:
        raise TransportError(str(exc)) from exc
    return resp.status_code, resp.text


class LlmGateway:
    """Uniform complete() over three modes: live, record, replay.

    Replay mode never touches the network.  Live transport retries
    transient failures (connection errors, HTTP 429/5xx) with exponential
    backoff before surfacing TransportError.
    """

    RETRY_DELAYS = (1.0, 2.0, 4.0)

    def __init__(
        self,
        mode: str = "live",
        base_url: Optional[str] = None,
        api_key: Optional[str] = None,
        fixture_dir: Optional[str] = None,
        transport: Callable[..., tuple[int, str]] = _requests_transport,
        sleep: Callable[[float], None] = time.sleep,
        timeout: float = 60.0,
    ) -> None:
        if mode not in ("live", "record", "replay"):
            raise ValueError(f"unknown gateway mode: {mode!r}")
        if mode in ("live", "record") and not base_url:
            raise ValueError("base_url required for live/record mode")
        if mode in ("record", "replay") and not fixture_dir:
            raise ValueError("fixture_dir required for record/replay mode")
        self.mode = mode
        self.base_url = (base_url or "").rstrip("/")
        self.api_key = api_key
        self.store = FixtureStore(fixture_dir) if fixture_dir else None
        self._transport = transport
        self._sleep = sleep
        self._timeout = timeout

    @classmethod
    def from_env(cls, mode: Optional[str] = None, fixture_dir: Optional[str] = None,
                 **kwargs: Any) -> "LlmGateway":
        return cls(
            mode=mode or os.environ.get("CLAIMCHECK_LLM_MODE", "live"),
            base_url=kwargs.pop("base_url", None) or os.environ.get("CLAIMCHECK_LLM_BASE_URL"),
            api_key=kwargs.pop("api_key", None) or os.environ.get("CLAIMCHECK_LLM_API_KEY"),
            fixture_dir=fixture_dir or os.environ.get("CLAIMCHECK_LLM_FIXTURES"),
            **kwargs,
        )

    def complete(self, req: ChatRequest) -> ChatResponse:
        if self.mode == "replay":
            assert self.store is not None
            record = self.store.get(replay_key(req))
            if record is None:
                raise FixtureMiss(
                    f"no LLM fixture for key {replay_key(req)} "
                    f"(model={req.model_id}, first message "
                    f"{req.messages[0][1][:80]!r})"
                )
            return ChatResponse(text=record["response_text"])
        resp = self._complete_live(req)
        if self.mode == "record":
            self.record(req, resp)
        return resp

    def record(self, req: ChatRequest, resp: ChatResponse) -> None:
        assert self.store is not None
        self.store.put(replay_key(req), {
            "request": canonical_form(req),
            "response_text": resp.text,
        })

    def _complete_live(self, req: ChatRequest) -> ChatResponse:
        url = f"{self.base_url}/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": req.model_id,
            "temperature": req.temperature,
            "messages": [{"role": r, "content": c} for r, c in req.messages],
        }
        last_error: Exception | None = None
        for attempt in range(1 + len(self.RETRY_DELAYS)):
            if attempt:
                self._sleep(self.RETRY_DELAYS[attempt - 1])
            try:
                status, body = self._transport(url, headers, payload, self._timeout)
            except TransportError as exc:
                last_error = exc
                continue
            if status in (401, 403):
                raise AuthError(f"HTTP {status} from {url}")
            if status == 429 or status >= 500:
                last_error = TransportError(f"HTTP {status} from {url}")
                continue
            if status >= 400:
                raise TransportError(f"HTTP {status} from {url}: {body[:200]}")
            return self._parse_body(body)
        raise TransportError(f"giving up after retries: {last_error}")

    @staticmethod
    def _parse_body(body: str) -> ChatResponse:
        try:
            data = json.loads(body)
            text = data["choices"][0]["message"]["content"]
        except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completion response: {exc}") from exc
        usage = None
        if isinstance(data.get("usage"), dict):
            u = data["usage"]
            if "prompt_tokens" in u and "completion_tokens" in u:
                usage = (u["prompt_tokens"], u["completion_tokens"])
        return ChatResponse(text=text, usage=usage)
