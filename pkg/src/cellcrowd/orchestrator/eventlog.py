"""Append-only event log with periodic snapshots.

The log is the source of truth; the snapshot merely shortens recovery. Both
are plain JSON so they stay inspectable and diffable.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterator


class EventLog:
    """JSONL-backed append-only event journal.

    With no path the log lives in memory only (test mode). Appends are
    flushed immediately so a crash never loses acknowledged commands.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self.events: list[dict] = []
        self._fh = None
        if self.path and self.path.exists():
            with self.path.open() as fh:
                self.events = [json.loads(line) for line in fh if line.strip()]
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = self.path.open("a")

    def append(self, event: dict) -> None:
        self.events.append(event)
        if self._fh is not None:
            self._fh.write(json.dumps(event, sort_keys=True) + "\n")
            self._fh.flush()

    def __iter__(self) -> Iterator[dict]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def since(self, seq: int) -> list[dict]:
        return [e for e in self.events if e["seq"] > seq]

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def write_snapshot(path: str | Path, snapshot: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(snapshot, sort_keys=True))
    tmp.replace(path)


def read_snapshot(path: str | Path) -> dict | None:
    path = Path(path)
    if not path.exists():
        return None
    return json.loads(path.read_text())
