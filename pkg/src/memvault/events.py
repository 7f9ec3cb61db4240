"""Audit events and the hash rule.

One event per mutating operation, chained by SHA-256. The persisted line
format is JSON with fields in this exact order:

    seq, at, kind, actor, citizen_id, body, prev_hash, this_hash

``this_hash`` covers every other persisted field (prev_hash, seq, at,
kind, actor, citizen_id, canonical body), so any single-byte change to a
stored line is detectable. Event bodies never contain record content --
only content hashes -- so destroying a memory later cannot invalidate or
rewrite history.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

from .canonical import ZERO_HASH, canonical_json, sha256_hex

LINE_FIELDS = (
    "seq",
    "at",
    "kind",
    "actor",
    "citizen_id",
    "body",
    "prev_hash",
    "this_hash",
)


class EventKind(str, Enum):
    GENESIS = "genesis"
    CITIZEN_BORN = "citizen_born"
    RULE_REGISTERED = "rule_registered"
    TICKET_SUBMITTED = "ticket_submitted"
    TICKET_DECIDED = "ticket_decided"
    TICKET_SUSPENDED = "ticket_suspended"
    MEMORY_APPENDED = "memory_appended"
    MEMORY_CORRECTED = "memory_corrected"
    MEMORY_DISTILLED = "memory_distilled"
    RECALL_WEIGHT_SET = "recall_weight_set"
    MEMORY_FORGOTTEN = "memory_forgotten"
    MEMORY_UNFORGOTTEN = "memory_unforgotten"
    MEMORY_ARCHIVED = "memory_archived"
    MEMORY_REVIVED = "memory_revived"
    MEMORY_DESTROYED = "memory_destroyed"
    OWNERSHIP_TRANSFERRED = "ownership_transferred"
    HANDOVER_COMPOSED = "handover_composed"
    INHERITANCE_BEGUN = "inheritance_begun"
    INHERITANCE_VERIFIED = "inheritance_verified"
    CITIZEN_FORKED = "citizen_forked"
    BRANCH_MERGED = "branch_merged"
    MERGE_CONFLICT = "merge_conflict"
    DEPARTURE_INITIATED = "departure_initiated"
    DEPARTURE_CANCELLED = "departure_cancelled"
    DEPARTURE_CONFIRMED = "departure_confirmed"


@dataclass(frozen=True)
class AuditEvent:
    seq: int
    at: str
    kind: str
    actor: str
    citizen_id: str | None
    body: dict
    prev_hash: str
    this_hash: str

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "at": self.at,
            "kind": self.kind,
            "actor": self.actor,
            "citizen_id": self.citizen_id,
            "body": self.body,
            "prev_hash": self.prev_hash,
            "this_hash": self.this_hash,
        }


def compute_event_hash(
    prev_hash: str,
    seq: int,
    at: str,
    kind: str,
    actor: str,
    citizen_id: str | None,
    body: dict,
) -> str:
    material = "\n".join(
        (prev_hash, str(seq), at, kind, actor, citizen_id or "", canonical_json(body))
    )
    return sha256_hex(material)


def make_event(
    seq: int,
    at: str,
    kind: str,
    actor: str,
    citizen_id: str | None,
    body: dict,
    prev_hash: str,
) -> AuditEvent:
    # Body keys are normalized to canonical (sorted) order up front so the
    # persisted line and the hashed form agree byte for byte.
    body = json.loads(canonical_json(body))
    return AuditEvent(
        seq=seq,
        at=at,
        kind=kind,
        actor=actor,
        citizen_id=citizen_id,
        body=body,
        prev_hash=prev_hash,
        this_hash=compute_event_hash(prev_hash, seq, at, kind, actor, citizen_id, body),
    )


def encode_line(event: AuditEvent) -> str:
    ordered = {name: getattr(event, name) for name in LINE_FIELDS}
    return json.dumps(ordered, separators=(",", ":"), ensure_ascii=False)


class LineCorrupt(ValueError):
    """A persisted line fails structural decoding."""


def decode_line(line: str) -> AuditEvent:
    try:
        data = json.loads(line)
    except json.JSONDecodeError as exc:
        raise LineCorrupt(str(exc)) from None
    if not isinstance(data, dict) or tuple(data.keys()) != LINE_FIELDS:
        raise LineCorrupt("unexpected fields or field order")
    if not isinstance(data["seq"], int) or not isinstance(data["body"], dict):
        raise LineCorrupt("bad field types")
    return AuditEvent(
        seq=data["seq"],
        at=data["at"],
        kind=data["kind"],
        actor=data["actor"],
        citizen_id=data["citizen_id"],
        body=data["body"],
        prev_hash=data["prev_hash"],
        this_hash=data["this_hash"],
    )


def recomputed_hash(event: AuditEvent) -> str:
    return compute_event_hash(
        event.prev_hash,
        event.seq,
        event.at,
        event.kind,
        event.actor,
        event.citizen_id,
        event.body,
    )


__all__ = [
    "AuditEvent",
    "EventKind",
    "LINE_FIELDS",
    "LineCorrupt",
    "ZERO_HASH",
    "compute_event_hash",
    "decode_line",
    "encode_line",
    "make_event",
    "recomputed_hash",
]
