"""Append-only journal of service inputs.

One JSON record per line: {kind, at, seq, body}. The journal captures
*commands* (ingest, ping, infection, action) plus non-empty batch ticks
(publish), so replaying it through the same code paths rebuilds the
in-memory state exactly. Derived work — tracing-injected events — is
recomputed during replay rather than stored.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from ..errors import CorruptLog

KINDS = ("ingest", "publish", "ping", "infection", "action")


@dataclass(frozen=True)
class JournalRecord:
    kind: str
    at: float
    seq: int
    body: dict

    def to_line(self) -> str:
        return json.dumps(
            {"kind": self.kind, "at": self.at, "seq": self.seq, "body": self.body},
            sort_keys=True,
            separators=(",", ":"),
        )


@dataclass
class RecoveryReport:
    records_applied: int = 0
    corrupt_line: int | None = None
    warning: str | None = None


class JournalWriter:
    """Line-per-record appender; fsyncs on batch boundaries and close.

    Opening an existing journal repairs a torn final line (truncating the
    partial write) so appends always extend a well-formed log; corruption
    anywhere before the tail is refused rather than silently skipped.
    """

    def __init__(self, path: str | Path, fsync_every: int = 64):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._seq = self._repair_tail()
        self._fh = open(self.path, "a", encoding="utf-8")
        self._fsync_every = fsync_every
        self._since_sync = 0

    def _repair_tail(self) -> int:
        if not self.path.exists():
            return 0
        records, report = read_journal(self.path)  # raises CorruptLog mid-file
        if report.corrupt_line is not None:
            good_bytes = 0
            with open(self.path, "rb") as fh:
                for line_no, line in enumerate(fh, start=1):
                    if line_no >= report.corrupt_line:
                        break
                    good_bytes += len(line)
            with open(self.path, "r+b") as fh:
                fh.truncate(good_bytes)
        return records[-1].seq if records else 0

    def append(self, kind: str, at: float, body: dict) -> JournalRecord:
        assert kind in KINDS, kind
        self._seq += 1
        record = JournalRecord(kind=kind, at=at, seq=self._seq, body=body)
        self._fh.write(record.to_line() + "\n")
        self._fh.flush()
        self._since_sync += 1
        if self._since_sync >= self._fsync_every:
            self.sync()
        return record

    def sync(self) -> None:
        os.fsync(self._fh.fileno())
        self._since_sync = 0

    def close(self) -> None:
        if not self._fh.closed:
            self.sync()
            self._fh.close()


def read_journal(path: str | Path) -> tuple[list[JournalRecord], RecoveryReport]:
    """Read records up to the first undecodable line.

    A bad final line (torn write) produces a warning and the prefix; a bad
    line with good records after it means real corruption and raises.
    """
    path = Path(path)
    report = RecoveryReport()
    records: list[JournalRecord] = []
    if not path.exists():
        return records, report
    with open(path, encoding="utf-8") as fh:
        lines = fh.readlines()
    for idx, line in enumerate(lines):
        stripped = line.strip()
        if not stripped:
            continue
        try:
            doc = json.loads(stripped)
            record = JournalRecord(
                kind=str(doc["kind"]), at=float(doc["at"]), seq=int(doc["seq"]), body=doc["body"]
            )
            if record.kind not in KINDS:
                raise ValueError(f"unknown kind {record.kind}")
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            line_no = idx + 1
            trailing = any(l.strip() for l in lines[idx + 1 :])
            if trailing:
                raise CorruptLog(
                    f"journal corrupt at line {line_no} with records after it: {exc}", line_no
                ) from None
            report.corrupt_line = line_no
            report.warning = f"dropped torn final record at line {line_no}"
            break
        records.append(record)
    report.records_applied = len(records)
    return records, report
