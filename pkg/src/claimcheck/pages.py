"""Fetch result pages and extract readable text, falling back to snippets."""
from __future__ import annotations

import logging
import re
import urllib.robotparser
from html import unescape
from html.parser import HTMLParser
from typing import Callable, Optional
from urllib.parse import urlparse

import requests

from .model import Acquisition, Document, SearchResultMeta

log = logging.getLogger(__name__)

__all__ = ["PageReader", "FetchError", "EmptyExtraction", "Unusable", "extract_text"]

# tags whose content is boilerplate or invisible, never page text
_SKIP_TAGS = frozenset(
    {"script", "style", "noscript", "template", "head", "nav", "header",
     "footer", "aside", "form", "iframe", "svg", "button"}
)
# tags that terminate the current paragraph
_BLOCK_TAGS = frozenset(
    {"p", "div", "br", "li", "ul", "ol", "h1", "h2", "h3", "h4", "h5", "h6",
     "tr", "table", "section", "article", "blockquote", "pre", "main", "figure"}
)

_ACCEPTED_CONTENT_TYPES = ("text/html", "application/xhtml", "text/plain", "")


class FetchError(Exception):
    """Page could not be fetched (timeout, HTTP error, too large, wrong type)."""


class EmptyExtraction(Exception):
    """Post-strip text too short to be a usable page body."""


class Unusable(Exception):
    """Neither the page nor the snippet yielded any text; skip the result."""


class _TextExtractor(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self._skip_depth = 0
        self._paragraphs: list[list[str]] = [[]]

    def handle_starttag(self, tag: str, attrs) -> None:
        if tag in _SKIP_TAGS:
            self._skip_depth += 1
        elif tag in _BLOCK_TAGS:
            self._break_paragraph()

    def handle_endtag(self, tag: str) -> None:
        if tag in _SKIP_TAGS and self._skip_depth:
            self._skip_depth -= 1
        elif tag in _BLOCK_TAGS:
            self._break_paragraph()

    def handle_data(self, data: str) -> None:
        if self._skip_depth or not data.strip():
            return
        # blank lines in text content are paragraph breaks in their own right
        pieces = re.split(r"\n[ \t]*\n", data)
        for i, piece in enumerate(pieces):
            if i:
                self._break_paragraph()
            if piece.strip():
                self._paragraphs[-1].append(piece)

    def _break_paragraph(self) -> None:
        if self._paragraphs[-1]:
            self._paragraphs.append([])

    def text(self) -> str:
        paragraphs = []
        for chunks in self._paragraphs:
            para = re.sub(r"\s+", " ", " ".join(chunks)).strip()
            if para:
                paragraphs.append(para)
        return "\n\n".join(paragraphs)


def extract_text(raw: str, min_chars: int = 40) -> str:
    """Strip tags, scripts, and boilerplate; collapse whitespace; keep
    paragraph breaks as blank lines.  Plain-text input passes through with
    whitespace normalization.

    Raises EmptyExtraction when the result is shorter than min_chars.
    """
    parser = _TextExtractor()
    parser.feed(unescape_guard(raw))
    parser.close()
    text = parser.text()
    if len(text) < min_chars:
        raise EmptyExtraction(f"extracted only {len(text)} characters")
    return text


def unescape_guard(raw: str) -> str:
    # HTMLParser handles entity refs itself; nothing to pre-process today,
    # but keep the hook so fetch can normalize encodings in one place.
    return raw


class PageReader:
    """fetch + extract with a snippet fallback when pages are unusable."""

    def __init__(
        self,
        timeout: float = 15.0,
        max_redirects: int = 5,
        max_bytes: int = 2_000_000,
        body_char_cap: int = 12_000,
        min_chars: int = 40,
        user_agent: str = "claimcheck/0.1 (+https://example.invalid/claimcheck)",
        respect_robots: bool = False,
        http_get: Optional[Callable[[str], tuple[str, str]]] = None,
    ) -> None:
        self.timeout = timeout
        self.max_redirects = max_redirects
        self.max_bytes = max_bytes
        self.body_char_cap = body_char_cap
        self.min_chars = min_chars
        self.user_agent = user_agent
        self.respect_robots = respect_robots
        self._http_get = http_get or self._requests_get
        self._robots_cache: dict[str, urllib.robotparser.RobotFileParser] = {}

    def fetch(self, url: str) -> tuple[str, str]:
        """Return (decoded body, content-type); raises FetchError otherwise."""
        if self.respect_robots and not self._robots_allowed(url):
            raise FetchError(f"disallowed by robots.txt: {url}")
        return self._http_get(url)

    def _requests_get(self, url: str) -> tuple[str, str]:
        session = requests.Session()
        session.max_redirects = self.max_redirects
        try:
            resp = session.get(
                url,
                timeout=self.timeout,
                headers={"User-Agent": self.user_agent},
                stream=True,
            )
        except requests.TooManyRedirects as exc:
            raise FetchError(f"redirect chain too long for {url}") from exc
        except requests.RequestException as exc:
            raise FetchError(f"fetch failed for {url}: {exc}") from exc
        with resp:
            if not 200 <= resp.status_code < 300:
                raise FetchError(f"HTTP {resp.status_code} for {url}")
            content_type = resp.headers.get("Content-Type", "").split(";")[0].strip().lower()
            if not any(content_type.startswith(t) for t in _ACCEPTED_CONTENT_TYPES if t) \
                    and content_type:
                raise FetchError(f"unsupported content-type {content_type!r} for {url}")
            chunks, size = [], 0
            for chunk in resp.iter_content(chunk_size=65536):
                size += len(chunk)
                if size > self.max_bytes:
                    raise FetchError(f"body over {self.max_bytes} bytes for {url}")
                chunks.append(chunk)
            encoding = resp.encoding or "utf-8"
        try:
            body = b"".join(chunks).decode(encoding, errors="replace")
        except LookupError:
            body = b"".join(chunks).decode("utf-8", errors="replace")
        return body, content_type

    def extract_text(self, raw: str) -> str:
        return extract_text(raw, min_chars=self.min_chars)

    def acquire_document(self, result: SearchResultMeta) -> Document:
        """Fetched page body (truncated to the cap), else title + snippet,
        else Unusable."""
        try:
            raw, _ = self.fetch(result.url)
            body = self.extract_text(raw)
            return Document(meta=result, body=body[: self.body_char_cap],
                            acquisition=Acquisition.FETCHED_PAGE)
        except (FetchError, EmptyExtraction) as exc:
            log.debug("falling back to snippet for %s: %s", result.url, exc)
        if result.snippet.strip():
            body = f"{result.title}\n{result.snippet}".strip()
            return Document(meta=result, body=body[: self.body_char_cap],
                            acquisition=Acquisition.SNIPPET_FALLBACK)
        raise Unusable(f"no page text and no snippet for {result.url}")

    def _robots_allowed(self, url: str) -> bool:
        netloc = urlparse(url).netloc
        parser = self._robots_cache.get(netloc)
        if parser is None:
            parser = urllib.robotparser.RobotFileParser()
            parser.set_url(f"{urlparse(url).scheme}://{netloc}/robots.txt")
            try:
                parser.read()
            except OSError:
                parser.allow_all = True
            self._robots_cache[netloc] = parser
        return parser.can_fetch(self.user_agent, url)
