"""Durable consumed-hash store: the replay-protection ledger of send-block
hashes already exchanged for tokens.

insert-if-absent is atomic and linearizable: for any hash, at most one
caller ever observes "inserted", including across process restarts. The
backing file is append-only JSON lines, flushed and fsynced before the
insert is acknowledged (write-ahead discipline); a torn final line from a
crash is detected and ignored on load, but a corrupt line anywhere else
aborts startup rather than running on ambiguous state.
"""

from __future__ import annotations

import json
import os
import threading


class StorageFailure(Exception):
    """The store could not persist; callers must refuse to grant."""


class CorruptStore(Exception):
    """A non-final log line failed to parse; refusing to run."""


class ConsumedHashStore:
    def __init__(self, path: str | None = None):
        self._lock = threading.Lock()
        self._hashes: set[str] = set()
        self._path = path
        self._file = None
        if path is not None:
            self._load(path)
            self._file = open(path, "a", encoding="utf-8")

    def _load(self, path: str) -> None:
        if not os.path.exists(path):
            return
        with open(path, "r", encoding="utf-8") as f:
            lines = f.read().split("\n")
        # Trailing empty string after a final newline is normal.
        if lines and lines[-1] == "":
            lines.pop()
        for i, line in enumerate(lines):
            try:
                record = json.loads(line)
                self._hashes.add(record["hash"])
            except (ValueError, TypeError, KeyError):
                if i == len(lines) - 1:
                    continue  # torn final line from a crash
                raise CorruptStore(f"{path}:{i + 1}: unparseable record") from None

    def consume(self, block_hash: str) -> bool:
        """True exactly once per hash across the store's lifetime."""
        with self._lock:
            if block_hash in self._hashes:
                return False
            if self._file is not None:
                try:
                    self._file.write(json.dumps({"hash": block_hash}) + "\n")
                    self._file.flush()
                    os.fsync(self._file.fileno())
                except OSError as exc:
                    raise StorageFailure(f"cannot persist consumed hash: {exc}") from exc
            self._hashes.add(block_hash)
            return True

    def __contains__(self, block_hash: str) -> bool:
        with self._lock:
            return block_hash in self._hashes

    def __len__(self) -> int:
        with self._lock:
            return len(self._hashes)

    def close(self):
        if self._file is not None:
            self._file.close()
            self._file = None
