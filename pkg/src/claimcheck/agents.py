"""The seven LLM agents: prompt rendering plus strict, fallback-equipped
output parsers.

Every parser is total: an arbitrary reply string always maps to a value of
the declared type, falling back on the conservative branch (keep searching,
defer, don't add evidence) rather than raising.
"""
from __future__ import annotations

import re
import string
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .llm import ChatRequest, LlmGateway
from .model import (
    BudgetConfig,
    Claim,
    Document,
    EvidenceSet,
    QueryOrigin,
    SearchQuery,
    SearchResultMeta,
    Verdict,
)
from .trace import EventKind, RunTrace

AGENT_NAMES = (
    "initial_query_gen",
    "search_rank",
    "self_contained_check",
    "det_helpful",
    "sufficient_evidence",
    "classify",
    "additional_query_gen",
)

EVIDENCE_PROMPT_BUDGET = 6000
PARSE_TOKEN_WINDOW = 10

CLASSIFY_RETRY_INSTRUCTION = (
    "Your previous answer could not be parsed. "
    "Answer with exactly one word: True or False."
)


@dataclass(frozen=True)
class AgentPrompt:
    agent_name: str
    system_text: str
    user_template: str

    def required_slots(self) -> set[str]:
        return {
            field
            for _, field, _, _ in string.Formatter().parse(self.user_template)
            if field
        }

    def render(self, **slots: str) -> tuple[tuple[str, str], ...]:
        missing = self.required_slots() - slots.keys()
        if missing:
            raise KeyError(f"{self.agent_name}: missing template slots {sorted(missing)}")
        return (
            ("system", self.system_text),
            ("user", self.user_template.format(**slots)),
        )


@dataclass(frozen=True)
class HelpfulnessJudgment:
    helpful: bool
    note: str = ""

    def __post_init__(self) -> None:
        if self.helpful and not self.note.strip():
            raise ValueError("helpful judgment requires a non-empty note")


def load_prompts(override_dir: str | Path | None = None) -> dict[str, AgentPrompt]:
    """Load the shipped prompt assets, with per-agent overrides from a
    config directory when given."""
    prompts: dict[str, AgentPrompt] = {}
    base = resources.files("claimcheck") / "prompts"
    for name in AGENT_NAMES:
        text = (base / f"{name}.txt").read_text(encoding="utf-8")
        if override_dir:
            candidate = Path(override_dir) / f"{name}.txt"
            if candidate.exists():
                text = candidate.read_text(encoding="utf-8")
        prompts[name] = _parse_prompt_asset(name, text)
    return prompts


def _parse_prompt_asset(name: str, text: str) -> AgentPrompt:
    if "\n===\n" not in text:
        raise ValueError(f"prompt asset {name} lacks the '===' system/user separator")
    system_text, user_template = text.split("\n===\n", 1)
    return AgentPrompt(name, system_text.strip(), user_template.strip())


# ---------------------------------------------------------------------------
# reply parsers

_BULLET_RE = re.compile(r"^\s*(?:\d+[\.\)]|[-*•])\s+(.*\S)\s*$")
_WORD_RE = re.compile(r"[a-z]+")


def parse_query_list(reply: str) -> list[str]:
    """Numbered/bulleted lines, deduped case-insensitively, order kept."""
    queries: list[str] = []
    seen: set[str] = set()
    for line in reply.splitlines():
        m = _BULLET_RE.match(line)
        if not m:
            continue
        text = m.group(1).strip().strip('"')
        if text and text.lower() not in seen:
            seen.add(text.lower())
            queries.append(text)
    return queries


def parse_permutation(reply: str, n: int) -> Optional[list[int]]:
    """1-based index permutation like '[2, 1]'; None when invalid."""
    numbers = [int(t) for t in re.findall(r"\d+", reply)]
    if sorted(numbers) != list(range(1, n + 1)):
        return None
    return numbers


def _leading_words(reply: str) -> list[str]:
    tokens = reply.split()[:PARSE_TOKEN_WINDOW]
    words: list[str] = []
    for token in tokens:
        words.extend(_WORD_RE.findall(token.lower()))
    return words[:PARSE_TOKEN_WINDOW]


def parse_yes_no(reply: str) -> Optional[bool]:
    """Case-insensitive scan of the first tokens; first YES/NO wins."""
    for word in _leading_words(reply):
        if word == "yes":
            return True
        if word == "no":
            return False
    return None


def parse_true_false(reply: str) -> Optional[Verdict]:
    for word in _leading_words(reply):
        if word == "true":
            return Verdict.TRUE
        if word == "false":
            return Verdict.FALSE
    return None


def parse_helpfulness(reply: str) -> HelpfulnessJudgment:
    stripped = reply.strip()
    lowered = stripped.lower()
    if lowered.startswith("not helpful") or lowered.startswith("unhelpful"):
        return HelpfulnessJudgment(helpful=False)
    if lowered.startswith("helpful"):
        after = stripped[len("helpful"):].lstrip(" :—-").strip()
        if after:
            return HelpfulnessJudgment(helpful=True, note=after)
    return HelpfulnessJudgment(helpful=False)


# ---------------------------------------------------------------------------
# the agent suite


class AgentSuite:
    """One method per agent; all LLM calls share the run's model,
    temperature, and trace."""

    def __init__(
        self,
        gateway: LlmGateway,
        config: BudgetConfig,
        prompts: Optional[dict[str, AgentPrompt]] = None,
        trace: Optional[RunTrace] = None,
    ) -> None:
        self.gateway = gateway
        self.config = config
        self.prompts = prompts or load_prompts()
        self.trace = trace

    # -- plumbing -----------------------------------------------------------

    def _log(self, agent: str, **payload) -> None:
        if self.trace is not None:
            self.trace.log(EventKind.AGENT_CALL, agent=agent, **payload)

    def _complete(self, agent: str, extra_user: Optional[str] = None, **slots: str) -> str:
        messages = self.prompts[agent].render(**slots)
        if extra_user:
            messages = messages + (("user", extra_user),)
        req = ChatRequest(
            model_id=self.config.model_id,
            messages=messages,
            temperature=self.config.temperature,
        )
        return self.gateway.complete(req).text

    @staticmethod
    def _evidence_block(evidence: EvidenceSet) -> str:
        return evidence.render(EVIDENCE_PROMPT_BUDGET)

    # -- agents -------------------------------------------------------------

    def initial_query_gen(self, claim: Claim) -> list[SearchQuery]:
        reply = self._complete("initial_query_gen", claim=claim.text)
        texts = parse_query_list(reply)[: self.config.max_search_queries]
        fallback = not texts
        if fallback:
            texts = [claim.text]
        self._log("initial_query_gen", n_queries=len(texts), fallback=fallback)
        return [SearchQuery(t, QueryOrigin.INITIAL) for t in texts]

    def search_rank(self, query: SearchQuery,
                    results: Sequence["SearchResultMeta"]) -> list["SearchResultMeta"]:
        if not results:
            raise ValueError("search_rank requires a non-empty result list")
        if len(results) == 1:
            return list(results)
        block = "\n".join(
            f"{i}. {r.title} — {r.url} — {r.snippet}"
            for i, r in enumerate(results, start=1)
        )
        reply = self._complete("search_rank", query=query.text, results=block)
        perm = parse_permutation(reply, len(results))
        fallback = perm is None
        self._log("search_rank", n_results=len(results), fallback=fallback)
        if perm is None:
            return list(results)
        return [results[i - 1] for i in perm]

    def self_contained_check(self, claim: Claim, evidence: EvidenceSet,
                             doc: Document) -> bool:
        reply = self._complete(
            "self_contained_check",
            claim=claim.text,
            evidence=self._evidence_block(evidence),
            document=doc.body,
        )
        parsed = parse_yes_no(reply)
        self._log("self_contained_check", url=doc.meta.url,
                  result=bool(parsed), fallback=parsed is None)
        return bool(parsed)

    def det_helpful(self, claim: Claim, evidence: EvidenceSet,
                    doc: Document) -> HelpfulnessJudgment:
        reply = self._complete(
            "det_helpful",
            claim=claim.text,
            evidence=self._evidence_block(evidence),
            document=doc.body,
        )
        judgment = parse_helpfulness(reply)
        self._log("det_helpful", url=doc.meta.url, helpful=judgment.helpful)
        return judgment

    def sufficient_evidence(self, claim: Claim, evidence: EvidenceSet) -> bool:
        if len(evidence) == 0:
            return False
        reply = self._complete(
            "sufficient_evidence",
            claim=claim.text,
            evidence=self._evidence_block(evidence),
        )
        parsed = parse_yes_no(reply)
        self._log("sufficient_evidence", result=bool(parsed), fallback=parsed is None)
        return bool(parsed)

    def classify(self, claim: Claim, evidence: EvidenceSet) -> Verdict:
        evidence_block = self._evidence_block(evidence)
        reply = self._complete("classify", claim=claim.text, evidence=evidence_block)
        verdict = parse_true_false(reply)
        if verdict is None:
            reply = self._complete(
                "classify",
                extra_user=CLASSIFY_RETRY_INSTRUCTION,
                claim=claim.text,
                evidence=evidence_block,
            )
            verdict = parse_true_false(reply)
        forced = verdict is None
        if forced:
            verdict = Verdict.FALSE
        self._log("classify", verdict=verdict.value, forced_default=forced)
        return verdict

    def additional_query_gen(self, claim: Claim, evidence: EvidenceSet,
                             issued_texts: Iterable[str],
                             remaining_budget: int) -> list[SearchQuery]:
        if remaining_budget < 1:
            return []
        reply = self._complete(
            "additional_query_gen",
            claim=claim.text,
            evidence=self._evidence_block(evidence),
        )
        issued = {t.lower() for t in issued_texts}
        texts = [t for t in parse_query_list(reply) if t.lower() not in issued]
        texts = texts[:remaining_budget]
        self._log("additional_query_gen", n_queries=len(texts), fallback=not texts)
        return [SearchQuery(t, QueryOrigin.ADDITIONAL) for t in texts]
