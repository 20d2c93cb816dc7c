"""Append-only record log with snapshots.

``records.log`` holds one JSON document per line, each tagged with a
monotonically increasing ``seq``. ``append`` returns only after the line is
fsync'ed, so an acknowledged record survives a crash. ``snapshot.json`` holds
a folded state plus the last ``seq`` it covers; recovery loads it and replays
newer log lines. A torn final line (crash mid-write) is dropped.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from pathlib import Path
from typing import Any

log = logging.getLogger(__name__)

LOG_NAME = "records.log"
SNAPSHOT_NAME = "snapshot.json"


def canonical(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


class RecordLog:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.log_path = self.root / LOG_NAME
        self.snapshot_path = self.root / SNAPSHOT_NAME
        self._lock = threading.Lock()
        self._fh = None
        self.seq = 0

    def recover(self) -> tuple[Any, list[dict]]:
        """Return ``(snapshot_state_or_None, records_after_snapshot)``."""
        state, base = None, 0
        if self.snapshot_path.exists():
            with open(self.snapshot_path, encoding="utf-8") as fh:
                snap = json.load(fh)
            state, base = snap["state"], int(snap["seq"])
        records = []
        good_bytes = 0
        if self.log_path.exists():
            with open(self.log_path, "rb") as fh:
                for raw in fh:
                    try:
                        rec = json.loads(raw)
                    except ValueError:
                        log.warning("dropping torn record at byte %d of %s", good_bytes, self.log_path)
                        break
                    if not raw.endswith(b"\n"):
                        log.warning("dropping unterminated record at byte %d", good_bytes)
                        break
                    good_bytes += len(raw)
                    if rec["seq"] > base:
                        records.append(rec)
            if good_bytes != self.log_path.stat().st_size:
                with open(self.log_path, "r+b") as fh:
                    fh.truncate(good_bytes)
        self.seq = max([base] + [r["seq"] for r in records])
        return state, records

    def _open(self):
        if self._fh is None:
            self._fh = open(self.log_path, "ab")
        return self._fh

    def append(self, record: dict) -> dict:
        """Assign the next ``seq``, write, fsync; return the stored record."""
        with self._lock:
            rec = dict(record, seq=self.seq + 1)
            line = (canonical(rec) + "\n").encode("utf-8")
            fh = self._open()
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())
            self.seq = rec["seq"]
            return rec

    def write_snapshot(self, state: Any) -> None:
        """Persist ``state`` as of the current seq and start an empty log."""
        with self._lock:
            tmp = self.snapshot_path.with_suffix(".tmp")
            with open(tmp, "w", encoding="utf-8") as fh:
                fh.write(canonical({"seq": self.seq, "state": state}))
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, self.snapshot_path)
            if self._fh is not None:
                self._fh.close()
                self._fh = None
            empty = self.log_path.with_suffix(".new")
            open(empty, "wb").close()
            os.replace(empty, self.log_path)

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.flush()
                os.fsync(self._fh.fileno())
                self._fh.close()
                self._fh = None
