"""Append-only audit log.

One JSON object per line, each carrying a strictly increasing sequence
number that survives process restarts.  Every append is flushed and
fsynced before the sequence number is handed back, so an acknowledged
record is on disk.
"""

from __future__ import annotations

import json
import os
import threading
from datetime import datetime, timezone
from pathlib import Path

from .errors import AuditWriteError

KIND_DECISION = "decision"
KIND_MISMATCH = "mismatch"


class AuditLog:
    def __init__(self, path: str | Path):
        self._path = Path(path)
        self._lock = threading.Lock()
        self._seq = self._resume_seq()

    def _resume_seq(self) -> int:
        if not self._path.exists():
            return 0
        last = 0
        with open(self._path, "r", encoding="utf-8") as handle:
            for line in handle:
                try:
                    record = json.loads(line)
                except json.JSONDecodeError:
                    continue  # a torn trailing line must not block new appends
                if isinstance(record, dict) and isinstance(record.get("seq"), int):
                    last = max(last, record["seq"])
        return last

    @property
    def last_seq(self) -> int:
        return self._seq

    def append(self, kind: str, data: dict) -> int:
        with self._lock:
            seq = self._seq + 1
            record = {
                "seq": seq,
                "kind": kind,
                "at": datetime.now(timezone.utc).isoformat(),
                "data": data,
            }
            line = json.dumps(record, sort_keys=True, separators=(",", ":"))
            try:
                with open(self._path, "ab+") as handle:
                    # a torn final line (crash mid-write) must not swallow
                    # the next record, so start on a fresh line when needed
                    if handle.seek(0, os.SEEK_END) > 0:
                        handle.seek(-1, os.SEEK_END)
                        if handle.read(1) != b"\n":
                            handle.write(b"\n")
                    handle.write(line.encode("utf-8") + b"\n")
                    handle.flush()
                    os.fsync(handle.fileno())
            except OSError as exc:
                raise AuditWriteError(
                    f"cannot write audit record to {self._path}: {exc}"
                ) from exc
            self._seq = seq
            return seq

    def read(self, since: int = 0, kind: str | None = None) -> list[dict]:
        """Records with seq greater than ``since``, oldest first."""
        if not self._path.exists():
            return []
        out = []
        with open(self._path, "r", encoding="utf-8") as handle:
            for line in handle:
                try:
                    record = json.loads(line)
                except json.JSONDecodeError:
                    continue
                if not isinstance(record, dict):
                    continue
                if not isinstance(record.get("seq"), int) or record["seq"] <= since:
                    continue
                if kind is not None and record.get("kind") != kind:
                    continue
                out.append(record)
        out.sort(key=lambda r: r["seq"])
        return out
