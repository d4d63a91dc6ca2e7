"""Fixture store shared by the LLM and search gateways.

One UTF-8 JSON file per key so recorded fixtures stay reviewable in diffs.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Optional


class FixtureMiss(Exception):
    """Replay mode was asked for a key that was never recorded."""


class StorageError(Exception):
    """The fixture store could not be read or written."""


class FixtureStore:
    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def get(self, key: str) -> Optional[dict[str, Any]]:
        path = self._path(key)
        if not path.exists():
            return None
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise StorageError(f"unreadable fixture {path}: {exc}") from exc

    def put(self, key: str, record: dict[str, Any]) -> None:
        """Write a fixture; idempotent for identical records."""
        path = self._path(key)
        payload = json.dumps(record, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
        try:
            if path.exists() and path.read_text(encoding="utf-8") == payload:
                return
            self.root.mkdir(parents=True, exist_ok=True)
            path.write_text(payload, encoding="utf-8")
        except OSError as exc:
            raise StorageError(f"cannot write fixture {path}: {exc}") from exc

    def keys(self) -> list[str]:
        if not self.root.exists():
            return []
        return sorted(p.stem for p in self.root.glob("*.json"))
