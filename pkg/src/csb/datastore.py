"""Per-application append-only datastore logs.

One JSON-lines file per application at ``<data_dir>/<app_id>.log``; each
line has exactly the keys bus_seq, msg_id, tenant_id, app_id,
producer_seq, ts_ms, payload_b64. Records are immutable once appended and
strictly ordered: line N holds bus_seq N (sequences are gap-free from 1),
so reads by sequence are plain slices.

Appends are deduplicated by msg_id, which makes persist retries after a
partial failure no-ops for the already-written prefix. Writers make an
entry visible to readers immediately after the line is written; ``sync``
flushes the batch to stable storage and is called once per persist batch.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path
from typing import Iterable

from .clock import Clock, SystemClock
from .errors import StorageError
from .bus import Envelope

LOG_SUFFIX = ".log"


class _AppLog:
    def __init__(self, app_id: str, path: Path) -> None:
        self.app_id = app_id
        self.path = path
        self._entries: list[Envelope] = []
        self._msg_ids: set[str] = set()
        self._fh = None
        self._lock = threading.Lock()

    def load(self) -> None:
        """Replay an existing file into memory (startup recovery)."""
        if not self.path.exists():
            return
        with self._lock:
            try:
                with self.path.open("r", encoding="utf-8") as fh:
                    for line_no, line in enumerate(fh, start=1):
                        if not line.strip():
                            continue
                        envelope = Envelope.from_json_dict(json.loads(line))
                        if envelope.bus_seq != len(self._entries) + 1:
                            raise StorageError(
                                f"{self.path}:{line_no}: bus_seq {envelope.bus_seq} "
                                f"breaks the gap-free order"
                            )
                        self._entries.append(envelope)
                        self._msg_ids.add(envelope.msg_id)
            except (OSError, ValueError, KeyError) as exc:
                raise StorageError(f"cannot replay {self.path}: {exc}") from exc

    def append(self, envelope: Envelope) -> bool:
        """Write one record; False if its msg_id is already logged."""
        with self._lock:
            if envelope.msg_id in self._msg_ids:
                return False
            expected = len(self._entries) + 1
            if envelope.bus_seq != expected:
                raise ValueError(
                    f"app {self.app_id}: expected bus_seq {expected}, got {envelope.bus_seq}"
                )
            line = json.dumps(envelope.to_json_dict(), separators=(",", ":")) + "\n"
            try:
                if self._fh is None:
                    self._fh = self.path.open("a", encoding="utf-8")
                self._write(line)
            except OSError as exc:
                raise StorageError(f"cannot append to {self.path}: {exc}") from exc
            self._entries.append(envelope)
            self._msg_ids.add(envelope.msg_id)
            return True

    def _write(self, line: str) -> None:
        self._fh.write(line)

    def sync(self) -> None:
        with self._lock:
            if self._fh is None:
                return
            try:
                self._fh.flush()
                os.fsync(self._fh.fileno())
            except OSError as exc:
                raise StorageError(f"cannot sync {self.path}: {exc}") from exc

    def read(self, after: int, limit: int) -> list[Envelope]:
        with self._lock:
            return self._entries[after : after + limit]

    def count(self) -> int:
        with self._lock:
            return len(self._entries)

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None


class Datastore:
    """All application logs under one data directory."""

    def __init__(self, data_dir: str | Path, *, clock: Clock | None = None) -> None:
        self._dir = Path(data_dir)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._clock = clock or SystemClock()
        self._logs: dict[str, _AppLog] = {}
        self._persisted_at_ms: dict[str, int] = {}
        self._lock = threading.Lock()
        for path in sorted(self._dir.glob(f"*{LOG_SUFFIX}")):
            log = _AppLog(path.stem, path)
            log.load()
            self._logs[path.stem] = log

    def create_log(self, app_id: str) -> None:
        with self._lock:
            if app_id in self._logs:
                return
            log = _AppLog(app_id, self._dir / f"{app_id}{LOG_SUFFIX}")
            try:
                log.path.touch()
            except OSError as exc:
                raise StorageError(f"cannot create {log.path}: {exc}") from exc
            self._logs[app_id] = log

    def has_log(self, app_id: str) -> bool:
        with self._lock:
            return app_id in self._logs

    def apps(self) -> list[str]:
        with self._lock:
            return sorted(self._logs)

    def _log(self, app_id: str) -> _AppLog:
        with self._lock:
            try:
                return self._logs[app_id]
            except KeyError:
                raise StorageError(f"no datastore log for application {app_id!r}") from None

    def append(self, envelope: Envelope) -> bool:
        appended = self._log(envelope.app_id).append(envelope)
        if appended:
            self._persisted_at_ms[envelope.msg_id] = self._clock.now_ms()
        return appended

    def sync(self, app_ids: Iterable[str] | None = None) -> None:
        targets = list(app_ids) if app_ids is not None else self.apps()
        for app_id in targets:
            self._log(app_id).sync()

    def read(self, app_id: str, after: int = 0, limit: int = 100) -> list[Envelope]:
        if after < 0:
            raise ValueError(f"after must be non-negative, got {after}")
        if limit < 1:
            raise ValueError(f"limit must be positive, got {limit}")
        return self._log(app_id).read(after, limit)

    def count(self, app_id: str) -> int:
        return self._log(app_id).count()

    def max_seq(self, app_id: str) -> int:
        # Gap-free from 1, so the count is the max persisted bus_seq.
        return self._log(app_id).count()

    def persisted_counts(self) -> dict[str, int]:
        return {app_id: self._logs[app_id].count() for app_id in self.apps()}

    def persisted_at_ms(self, msg_id: str) -> int | None:
        return self._persisted_at_ms.get(msg_id)

    def close(self) -> None:
        for app_id in self.apps():
            self._log(app_id).close()
