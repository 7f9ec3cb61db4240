"""Append-only persistence: the hash chain, content store, projections.

The chain file is the deployment's single source of truth. Appends are
durable before they are acknowledged (write, flush, fsync); verification
always re-reads the persisted bytes so disk tampering is caught even
while a live process holds a clean copy in memory.

Record contents are stored content-addressed alongside the chain.
Destroying a record deletes its blob; since event bodies reference
contents by hash only, the chain stays verifiable across the redaction.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .canonical import ZERO_HASH, sha256_hex
from .errors import PersistenceFailure, RangeOutOfBounds
from .events import (
    AuditEvent,
    LineCorrupt,
    decode_line,
    encode_line,
    make_event,
    recomputed_hash,
)


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    first_bad: int | None = None

    def to_dict(self) -> dict:
        return {"ok": self.ok, "first_bad": self.first_bad}


def _split_log(raw: bytes) -> list[str]:
    """Split strictly on ``\\n`` and decode per line.

    splitlines() would also split on vertical tabs and friends, which
    lets a corrupted newline byte masquerade as clean structure; and one
    flipped byte can invalidate UTF-8, which must surface as a bad line,
    not a crash.
    """
    parts = raw.split(b"\n")
    if parts and parts[-1] == b"":
        parts.pop()
    return [p.decode("utf-8", errors="replace") for p in parts]


def verify_lines(
    lines: Sequence[str],
    start_seq: int = 0,
    anchor_prev: str | None = None,
) -> VerifyResult:
    """Structural + cryptographic verification of a line segment.

    ``anchor_prev`` is the expected prev_hash of the first event; pass the
    predecessor's this_hash to verify an exported subrange without the
    full log. Reports the first bad sequence number on any mismatch.
    """
    expected_prev = anchor_prev
    for offset, line in enumerate(lines):
        seq = start_seq + offset
        try:
            event = decode_line(line)
        except LineCorrupt:
            return VerifyResult(False, seq)
        if event.seq != seq:
            return VerifyResult(False, seq)
        if seq == 0 and event.prev_hash != ZERO_HASH:
            return VerifyResult(False, seq)
        if expected_prev is not None and event.prev_hash != expected_prev:
            return VerifyResult(False, seq)
        if recomputed_hash(event) != event.this_hash:
            return VerifyResult(False, seq)
        expected_prev = event.this_hash
    return VerifyResult(True)


class AuditChain:
    """Hash-chained event log, optionally file-backed.

    With a path, every append is fsynced before acknowledgment and
    ``verify`` re-reads the file. Without one the chain lives in memory
    (used by fuzz suites where disk round-trips would dominate runtime).
    """

    def __init__(self, path: "Path | str | None" = None):
        self.path = Path(path) if path is not None else None
        self._lines: list[str] = []
        self._events: list[AuditEvent] = []
        self._handle = None
        # Seq of the first undecodable line, if the stored log is damaged;
        # the engine refuses to build on such a chain (fail-closed).
        self.load_failed: int | None = None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            if self.path.exists():
                self._lines = _split_log(self.path.read_bytes())
                for seq, line in enumerate(self._lines):
                    try:
                        event = decode_line(line)
                    except LineCorrupt:
                        self.load_failed = seq
                        break
                    if event.seq != seq:
                        self.load_failed = seq
                        break
                    self._events.append(event)
            self._handle = open(self.path, "ab")

    # -- state ----------------------------------------------------------------

    def __len__(self) -> int:
        return len(self._events)

    @property
    def head_seq(self) -> int:
        return len(self._events) - 1

    @property
    def head_hash(self) -> str:
        return self._events[-1].this_hash if self._events else ZERO_HASH

    @property
    def events(self) -> tuple[AuditEvent, ...]:
        return tuple(self._events)

    def event(self, seq: int) -> AuditEvent:
        return self._events[seq]

    # -- mutation ---------------------------------------------------------------

    def append(
        self, kind: str, actor: str, citizen_id: str | None, body: dict, at: str
    ) -> AuditEvent:
        event = make_event(
            seq=len(self._events),
            at=at,
            kind=kind,
            actor=actor,
            citizen_id=citizen_id,
            body=body,
            prev_hash=self.head_hash,
        )
        line = encode_line(event)
        if self._handle is not None:
            try:
                self._handle.write(line.encode("utf-8") + b"\n")
                self._handle.flush()
                os.fsync(self._handle.fileno())
            except OSError as exc:
                raise PersistenceFailure(f"cannot persist event: {exc}") from exc
        self._lines.append(line)
        self._events.append(event)
        return event

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    # -- verification and export --------------------------------------------------

    def _stored_lines(self) -> list[str]:
        if self.path is not None:
            return _split_log(self.path.read_bytes())
        return list(self._lines)

    def _check_range(self, from_seq: int, to_seq: int | None, total: int) -> int:
        if to_seq is None:
            to_seq = total - 1
        if from_seq < 0 or to_seq >= total or (total > 0 and from_seq > to_seq + 1):
            raise RangeOutOfBounds(
                f"[{from_seq}, {to_seq}] outside log of {total} events"
            )
        return to_seq

    def verify(self, from_seq: int = 0, to_seq: int | None = None) -> VerifyResult:
        """Recompute every hash over the persisted bytes in the range."""
        lines = self._stored_lines()
        to_seq = self._check_range(from_seq, to_seq, len(lines))
        anchor = None
        if from_seq > 0:
            try:
                anchor = decode_line(lines[from_seq - 1]).this_hash
            except LineCorrupt:
                anchor = None  # predecessor unreadable; verify range internally
        return verify_lines(lines[from_seq : to_seq + 1], from_seq, anchor)

    def export(self, from_seq: int = 0, to_seq: int | None = None) -> list[str]:
        """Events as JSON Lines exactly as persisted."""
        lines = self._stored_lines()
        if from_seq > (to_seq if to_seq is not None else from_seq):
            return []
        to_seq = self._check_range(from_seq, to_seq, len(lines))
        return lines[from_seq : to_seq + 1]


# ---------------------------------------------------------------------------
# Content-addressed record storage
# ---------------------------------------------------------------------------


class ContentStore:
    """Text blobs addressed by SHA-256; deletable for destruction paths."""

    def __init__(self, base_dir: "Path | str | None" = None):
        self.base_dir = Path(base_dir) if base_dir is not None else None
        self._memory: dict[str, str] = {}
        if self.base_dir is not None:
            self.base_dir.mkdir(parents=True, exist_ok=True)

    def _path_for(self, content_hash: str) -> Path:
        return self.base_dir / content_hash[:2] / content_hash

    def put(self, content: str) -> str:
        content_hash = sha256_hex(content)
        if self.base_dir is None:
            self._memory[content_hash] = content
            return content_hash
        target = self._path_for(content_hash)
        if not target.exists():
            target.parent.mkdir(parents=True, exist_ok=True)
            tmp = target.with_suffix(".tmp")
            tmp.write_text(content, encoding="utf-8")
            os.replace(tmp, target)
        return content_hash

    def get(self, content_hash: str) -> str | None:
        if self.base_dir is None:
            return self._memory.get(content_hash)
        target = self._path_for(content_hash)
        if not target.exists():
            return None
        return target.read_text(encoding="utf-8")

    def delete(self, content_hash: str) -> None:
        if self.base_dir is None:
            self._memory.pop(content_hash, None)
            return
        try:
            self._path_for(content_hash).unlink()
        except FileNotFoundError:
            pass


# ---------------------------------------------------------------------------
# Per-citizen ledger projections
# ---------------------------------------------------------------------------


class ProjectionWriter:
    """Append-only JSON Lines file per citizen, mirroring that citizen's
    slice of the chain. Pure derivation: reconciled from the chain at
    startup if a crash left a file short."""

    def __init__(self, base_dir: "Path | str | None"):
        self.base_dir = Path(base_dir) if base_dir is not None else None
        if self.base_dir is not None:
            self.base_dir.mkdir(parents=True, exist_ok=True)

    def _path_for(self, citizen_id: str) -> Path:
        return self.base_dir / f"{citizen_id}.log"

    def append(self, citizen_id: str, line: str) -> None:
        if self.base_dir is None:
            return
        with open(self._path_for(citizen_id), "a", encoding="utf-8") as handle:
            handle.write(line + "\n")

    def reconcile(self, events: Iterable[AuditEvent]) -> None:
        if self.base_dir is None:
            return
        expected: dict[str, list[str]] = {}
        for event in events:
            if event.citizen_id:
                expected.setdefault(event.citizen_id, []).append(encode_line(event))
        for citizen_id, lines in expected.items():
            path = self._path_for(citizen_id)
            text = "\n".join(lines) + "\n"
            if not path.exists() or path.read_text(encoding="utf-8") != text:
                path.write_text(text, encoding="utf-8")
