"""Memory records: tiered, trust-graded, append-only.

A record's content, tier, category, trust, and creation metadata are
immutable after append. Only ``status`` and ``recall_weight`` may move,
and every move is a (seq, status, weight) transition kept on the record
so any historical view -- fork points, point-in-time replay -- can be
reconstructed exactly.

Record contents themselves live in the content-addressed store, never in
audit event bodies; records carry the content hash.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum

from .clock import from_rfc3339
from .errors import MalformedScope

CONTENT_MAX_BYTES = 64 * 1024


class StorageTier(str, Enum):
    """Stability strata: T0 most protected, T2 most writable, T3 reserved
    for cross-instance handover content."""

    T0 = "T0"
    T1 = "T1"
    T2 = "T2"
    T3 = "T3"

    @classmethod
    def parse(cls, value: "StorageTier | str") -> "StorageTier":
        if isinstance(value, StorageTier):
            return value
        try:
            return cls(value.strip().upper())
        except ValueError:
            raise MalformedScope(f"unknown storage tier {value!r}") from None


class TrustGrade(str, Enum):
    FIRSTHAND = "firsthand"
    REPORTED = "reported"
    INFERRED = "inferred"

    @classmethod
    def parse(cls, value: "TrustGrade | str") -> "TrustGrade":
        if isinstance(value, TrustGrade):
            return value
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise MalformedScope(f"unknown trust grade {value!r}") from None


# Provenance rank, most trustworthy first (used when deriving the trust
# of a distilled record from its sources).
TRUST_RANK = {TrustGrade.FIRSTHAND: 0, TrustGrade.REPORTED: 1, TrustGrade.INFERRED: 2}


@dataclass(frozen=True)
class TrustLevel:
    grade: TrustGrade
    uncertainty_tag: str | None = None

    def validate(self) -> "TrustLevel":
        if self.grade is TrustGrade.INFERRED and not (self.uncertainty_tag or "").strip():
            # Enforced as red line C4 at the engine boundary; this is the
            # type-level backstop.
            raise MalformedScope("inferred trust requires a non-empty uncertainty tag")
        return self

    def to_dict(self) -> dict:
        out: dict = {"grade": self.grade.value}
        if self.uncertainty_tag is not None:
            out["uncertainty_tag"] = self.uncertainty_tag
        return out

    @classmethod
    def from_dict(cls, data: "dict | str") -> "TrustLevel":
        if isinstance(data, str):
            return cls(grade=TrustGrade.parse(data))
        return cls(
            grade=TrustGrade.parse(data["grade"]),
            uncertainty_tag=data.get("uncertainty_tag"),
        )


class RecordStatus(str, Enum):
    ACTIVE = "active"
    FORGOTTEN = "forgotten"
    ARCHIVED = "archived"
    DESTROYED = "destroyed"


@dataclass
class MemoryRecord:
    record_id: str
    citizen_id: str
    tier: StorageTier
    category: str
    content_hash: str
    content_size: int
    tags: tuple[str, ...]
    trust: TrustLevel
    recall_weight: float
    supersedes: str | None
    derived_from: tuple[str, ...]
    status: RecordStatus
    created_by: str
    created_at: str
    created_seq: int
    # (seq, status, weight) history; first entry is the append itself.
    transitions: list[tuple[int, str, float]] = field(default_factory=list)

    def __post_init__(self):
        if not self.transitions:
            self.transitions = [
                (self.created_seq, self.status.value, self.recall_weight)
            ]

    def transition(self, seq: int, status: RecordStatus, weight: float) -> None:
        self.status = status
        self.recall_weight = weight
        self.transitions.append((seq, status.value, weight))

    def state_at(self, seq: int | None) -> tuple[RecordStatus, float]:
        """Status and weight as of an audit sequence number (None = live)."""
        if seq is None:
            return self.status, self.recall_weight
        current = self.transitions[0]
        for entry in self.transitions:
            if entry[0] > seq:
                break
            current = entry
        return RecordStatus(current[1]), current[2]

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "citizen_id": self.citizen_id,
            "tier": self.tier.value,
            "category": self.category,
            "content_hash": self.content_hash,
            "content_size": self.content_size,
            "tags": list(self.tags),
            "trust": self.trust.to_dict(),
            "recall_weight": self.recall_weight,
            "supersedes": self.supersedes,
            "derived_from": list(self.derived_from),
            "status": self.status.value,
            "created_by": self.created_by,
            "created_at": self.created_at,
            "created_seq": self.created_seq,
            "transitions": [list(t) for t in self.transitions],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MemoryRecord":
        return cls(
            record_id=data["record_id"],
            citizen_id=data["citizen_id"],
            tier=StorageTier.parse(data["tier"]),
            category=data["category"],
            content_hash=data["content_hash"],
            content_size=data["content_size"],
            tags=tuple(data.get("tags", ())),
            trust=TrustLevel.from_dict(data["trust"]),
            recall_weight=data["recall_weight"],
            supersedes=data.get("supersedes"),
            derived_from=tuple(data.get("derived_from", ())),
            status=RecordStatus(data["status"]),
            created_by=data.get("created_by", ""),
            created_at=data.get("created_at", ""),
            created_seq=data.get("created_seq", 0),
            transitions=[tuple(t) for t in data.get("transitions", [])],
        )


@dataclass
class OwnershipEntry:
    """Single designated primary writer per (citizen, category)."""

    citizen_id: str
    category: str
    primary_writer: str
    since: str
    since_seq: int

    def to_dict(self) -> dict:
        return {
            "citizen_id": self.citizen_id,
            "category": self.category,
            "primary_writer": self.primary_writer,
            "since": self.since,
            "since_seq": self.since_seq,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OwnershipEntry":
        return cls(
            citizen_id=data["citizen_id"],
            category=data["category"],
            primary_writer=data["primary_writer"],
            since=data["since"],
            since_seq=data.get("since_seq", 0),
        )


# ---------------------------------------------------------------------------
# Recall scoring
# ---------------------------------------------------------------------------

TIER_WEIGHT = {
    StorageTier.T0: 1.0,
    StorageTier.T1: 0.8,
    StorageTier.T2: 0.5,
    StorageTier.T3: 0.6,
}

TRUST_WEIGHT = {
    TrustGrade.FIRSTHAND: 1.0,
    TrustGrade.REPORTED: 0.7,
    TrustGrade.INFERRED: 0.4,
}

SUPERSEDED_PENALTY = 0.25
INITIAL_RECALL_WEIGHT = 1.0
DEFAULT_HALF_LIFE_DAYS = 30.0


def recency_decay(created_at: str, now: datetime, half_life_days: float) -> float:
    """2^(-age / half_life); age clamped at zero for future timestamps."""
    age_days = max(0.0, (now - from_rfc3339(created_at)).total_seconds() / 86400.0)
    return math.pow(2.0, -age_days / half_life_days)


def recall_score(
    record: MemoryRecord,
    weight: float,
    now: datetime,
    half_life_days: float,
    superseded: bool,
) -> float:
    score = (
        TIER_WEIGHT[record.tier]
        * TRUST_WEIGHT[record.trust.grade]
        * weight
        * recency_decay(record.created_at, now, half_life_days)
    )
    if superseded:
        score *= SUPERSEDED_PENALTY
    return score


@dataclass(frozen=True)
class RecallQuery:
    """Deterministic filter set; every provided field must be satisfied.

    Tags match on non-empty intersection; terms match by case-folded
    containment in the record content (all terms); ``as_of`` restricts to
    records created at or before the timestamp and pins the decay clock.
    """

    tags: tuple[str, ...] = ()
    terms: tuple[str, ...] = ()
    tiers: tuple[StorageTier, ...] = ()
    as_of: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "RecallQuery":
        return cls(
            tags=tuple(data.get("tags", ())),
            terms=tuple(data.get("terms", ())),
            tiers=tuple(StorageTier.parse(t) for t in data.get("tiers", ())),
            as_of=data.get("as_of"),
        )

    def matches(self, record: MemoryRecord, content: str) -> bool:
        if self.tiers and record.tier not in self.tiers:
            return False
        if self.tags and not set(self.tags) & set(record.tags):
            return False
        if self.as_of is not None and record.created_at > self.as_of:
            return False
        if self.terms:
            folded = content.casefold()
            if not all(term.casefold() in folded for term in self.terms):
                return False
        return True
