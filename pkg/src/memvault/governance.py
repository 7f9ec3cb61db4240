"""Four-layer rule hierarchy, risk classification, and red lines.

Rules live in one of four layers ordered by authority (Constitution
binds Contract binds Adaptation binds Implementation). A lower-layer
rule whose effect is more permissive than an active higher-layer rule on
an overlapping scope is void from the moment of registration -- it never
takes effect. Scopes are conjunctions over (op_kind, tier, category
glob, citizen glob) with ``*`` as the only wildcard, which keeps overlap
detection exact and cheap.

Red lines are the constitution-grade checks that run before any gate
logic. A red-line denial is terminal: it does not depend on who asked.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import IntEnum
from functools import lru_cache
from typing import Iterable, Sequence

from .errors import MalformedScope, NotInConflict

# ---------------------------------------------------------------------------
# Enumerations
# ---------------------------------------------------------------------------


class GovernanceLayer(IntEnum):
    """Rule layers; lower ordinal = higher authority."""

    CONSTITUTION = 0
    CONTRACT = 1
    ADAPTATION = 2
    IMPLEMENTATION = 3

    @classmethod
    def parse(cls, value: "GovernanceLayer | int | str") -> "GovernanceLayer":
        if isinstance(value, GovernanceLayer):
            return value
        if isinstance(value, int):
            return cls(value)
        try:
            return cls[value.strip().upper()]
        except KeyError:
            raise MalformedScope(f"unknown governance layer: {value!r}") from None

    @property
    def label(self) -> str:
        return self.name.lower()


class RiskTier(IntEnum):
    """Scrutiny levels, from automatic execution to full due process."""

    R0 = 0  # auto-approve
    R1 = 1  # log-only
    R2 = 2  # one approver
    R3 = 3  # two distinct approvers
    R4 = 4  # two distinct high-privilege approvers + cooling-off

    @classmethod
    def parse(cls, value: "RiskTier | int | str") -> "RiskTier":
        if isinstance(value, RiskTier):
            return value
        if isinstance(value, int):
            return cls(value)
        return cls[value.strip().upper()]


OP_KINDS = (
    "append",
    "correct",
    "forget",
    "decay",
    "distill",
    "destroy",
    "rule_change",
    "ownership_transfer",
    "fork",
    "merge",
    "departure",
    "inheritance",
)

STORAGE_TIERS = ("T0", "T1", "T2", "T3")

WILDCARD = "*"

# Characters allowed in scope patterns; '*' is the only wildcard.
_PATTERN_RE = re.compile(r"^[A-Za-z0-9_\-./:*]*$")


# ---------------------------------------------------------------------------
# Scope predicates
# ---------------------------------------------------------------------------


def _glob_match(pattern: str, value: str) -> bool:
    return _glob_regex(pattern).fullmatch(value) is not None


@lru_cache(maxsize=4096)
def _glob_regex(pattern: str) -> "re.Pattern[str]":
    parts = (re.escape(p) for p in pattern.split(WILDCARD))
    return re.compile(".*".join(parts))


@lru_cache(maxsize=65536)
def globs_intersect(a: str, b: str) -> bool:
    """True iff some concrete string matches both ``*``-glob patterns.

    Exact decision procedure: memoized descent over both patterns where a
    ``*`` may absorb the other side's next character or be skipped.
    """

    seen: set[tuple[int, int]] = set()

    def walk(i: int, j: int) -> bool:
        if (i, j) in seen:
            return False
        seen.add((i, j))
        if i == len(a) and j == len(b):
            return True
        if i < len(a) and a[i] == WILDCARD:
            if walk(i + 1, j) or (j < len(b) and walk(i, j + 1)):
                return True
        if j < len(b) and b[j] == WILDCARD:
            if walk(i, j + 1) or (i < len(a) and walk(i + 1, j)):
                return True
        if i < len(a) and j < len(b) and WILDCARD not in (a[i], b[j]) and a[i] == b[j]:
            return walk(i + 1, j + 1)
        return False

    return walk(0, 0)


@dataclass(frozen=True)
class RuleScope:
    """Conjunctive predicate over operation descriptors.

    ``op_kind`` and ``tier`` are exact values or ``*``; ``category`` and
    ``citizen`` are glob patterns (only ``*`` wildcards, no negation).
    """

    op_kind: str = WILDCARD
    tier: str = WILDCARD
    category: str = WILDCARD
    citizen: str = WILDCARD

    def validate(self) -> "RuleScope":
        if self.op_kind != WILDCARD and self.op_kind not in OP_KINDS:
            raise MalformedScope(f"unknown op_kind {self.op_kind!r}")
        if self.tier != WILDCARD and self.tier not in STORAGE_TIERS:
            raise MalformedScope(f"unknown tier {self.tier!r}")
        for name in ("category", "citizen"):
            pattern = getattr(self, name)
            if not _PATTERN_RE.match(pattern):
                raise MalformedScope(f"bad characters in {name} pattern {pattern!r}")
        return self

    def matches(self, op: "OperationDescriptor") -> bool:
        if self.op_kind != WILDCARD and self.op_kind != op.op_kind:
            return False
        if self.tier != WILDCARD and self.tier != (op.tier or ""):
            return False
        if not _glob_match(self.category, op.category or ""):
            return False
        if not _glob_match(self.citizen, op.citizen_id or ""):
            return False
        return True

    def overlaps(self, other: "RuleScope") -> bool:
        if (
            self.op_kind != WILDCARD
            and other.op_kind != WILDCARD
            and self.op_kind != other.op_kind
        ):
            return False
        if (
            self.tier != WILDCARD
            and other.tier != WILDCARD
            and self.tier != other.tier
        ):
            return False
        return globs_intersect(self.category, other.category) and globs_intersect(
            self.citizen, other.citizen
        )

    @property
    def wildcard_count(self) -> int:
        """Number of unconstrained dimensions; fewer = more specific."""
        return sum(
            1
            for v in (self.op_kind, self.tier, self.category, self.citizen)
            if v == WILDCARD
        )

    def to_dict(self) -> dict:
        return {
            "op_kind": self.op_kind,
            "tier": self.tier,
            "category": self.category,
            "citizen": self.citizen,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RuleScope":
        if not isinstance(data, dict):
            raise MalformedScope("scope must be an object")
        extra = set(data) - {"op_kind", "tier", "category", "citizen"}
        if extra:
            raise MalformedScope(f"unknown scope fields: {sorted(extra)}")
        return cls(
            op_kind=data.get("op_kind", WILDCARD),
            tier=data.get("tier", WILDCARD),
            category=data.get("category", WILDCARD),
            citizen=data.get("citizen", WILDCARD),
        ).validate()


# ---------------------------------------------------------------------------
# Effects
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RuleEffect:
    """Permit, Deny, or RequireTier(risk)."""

    kind: str  # "permit" | "deny" | "require_tier"
    tier: RiskTier | None = None

    def __post_init__(self):
        if self.kind not in ("permit", "deny", "require_tier"):
            raise MalformedScope(f"unknown effect kind {self.kind!r}")
        if self.kind == "require_tier" and self.tier is None:
            raise MalformedScope("require_tier effect needs a risk tier")

    @property
    def permissiveness(self) -> int:
        """Total order: permit > require_tier(R0..R4 descending) > deny.

        A lower-layer rule contradicts a higher-layer rule exactly when it
        is strictly more permissive on an overlapping scope.
        """
        if self.kind == "deny":
            return 0
        if self.kind == "require_tier":
            return 1 + (RiskTier.R4 - self.tier)
        return 6

    def to_dict(self) -> dict:
        if self.kind == "require_tier":
            return {"kind": self.kind, "tier": self.tier.name}
        return {"kind": self.kind}

    @classmethod
    def from_dict(cls, data: "dict | str") -> "RuleEffect":
        if isinstance(data, str):
            data = {"kind": data}
        kind = data.get("kind", "")
        tier = data.get("tier")
        return cls(kind=kind, tier=RiskTier.parse(tier) if tier is not None else None)


# ---------------------------------------------------------------------------
# Rules
# ---------------------------------------------------------------------------

RULE_ACTIVE = "active"
RULE_SUPERSEDED = "superseded"
RULE_VOID = "void"


@dataclass
class GovernanceRule:
    rule_id: str
    layer: GovernanceLayer
    scope: RuleScope
    effect: RuleEffect
    status: str = RULE_ACTIVE
    supersedes: str | None = None
    created_by: str = ""
    created_at: str = ""
    void_conflict_with: str | None = None

    def to_dict(self) -> dict:
        out = {
            "rule_id": self.rule_id,
            "layer": self.layer.label,
            "scope": self.scope.to_dict(),
            "effect": self.effect.to_dict(),
            "supersedes": self.supersedes,
            "created_by": self.created_by,
            "created_at": self.created_at,
            "status": self.status,
        }
        if self.void_conflict_with:
            out["void_conflict_with"] = self.void_conflict_with
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "GovernanceRule":
        return cls(
            rule_id=data["rule_id"],
            layer=GovernanceLayer.parse(data["layer"]),
            scope=RuleScope.from_dict(data.get("scope", {})),
            effect=RuleEffect.from_dict(data.get("effect", {})),
            status=data.get("status", RULE_ACTIVE),
            supersedes=data.get("supersedes"),
            created_by=data.get("created_by", ""),
            created_at=data.get("created_at", ""),
            void_conflict_with=data.get("void_conflict_with"),
        )


@dataclass(frozen=True)
class Violation:
    lower_rule_id: str
    upper_rule_id: str
    reason: str

    def to_dict(self) -> dict:
        return {
            "lower_rule_id": self.lower_rule_id,
            "upper_rule_id": self.upper_rule_id,
            "reason": self.reason,
        }


@dataclass(frozen=True)
class Winner:
    rule_id: str
    rationale_code: str  # LAYER | SPECIFICITY | RECENCY | RULE_ID

    def to_dict(self) -> dict:
        return {"rule_id": self.rule_id, "rationale_code": self.rationale_code}


# ---------------------------------------------------------------------------
# Operation descriptors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OperationDescriptor:
    """Canonical description of one requested operation.

    ``payload_digest`` is the hash of the canonical serialization of the
    operation payload; a gate ticket is bound to exactly that payload.
    ``attributes`` carries the evidence red lines inspect (trust grade,
    uncertainty tag presence, citizen consent, self-initiation).
    """

    op_kind: str
    citizen_id: str | None
    tier: str | None
    category: str | None
    requested_by: str
    payload_digest: str
    attributes: tuple = ()  # sorted (key, value) pairs; kept hashable

    def __post_init__(self):
        if self.op_kind not in OP_KINDS:
            # Red line C2: the only write verbs that exist are append-shaped.
            raise MalformedScope(f"unknown op_kind {self.op_kind!r}")

    @classmethod
    def build(
        cls,
        op_kind: str,
        *,
        citizen_id: str | None = None,
        tier: str | None = None,
        category: str | None = None,
        requested_by: str = "",
        payload_digest: str = "",
        **attributes,
    ) -> "OperationDescriptor":
        return cls(
            op_kind=op_kind,
            citizen_id=citizen_id,
            tier=tier,
            category=category,
            requested_by=requested_by,
            payload_digest=payload_digest,
            attributes=tuple(sorted(attributes.items())),
        )

    @property
    def attrs(self) -> dict:
        return dict(self.attributes)

    def to_dict(self) -> dict:
        return {
            "op_kind": self.op_kind,
            "citizen_id": self.citizen_id,
            "tier": self.tier,
            "category": self.category,
            "requested_by": self.requested_by,
            "payload_digest": self.payload_digest,
            "attributes": dict(self.attributes),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OperationDescriptor":
        return cls(
            op_kind=data["op_kind"],
            citizen_id=data.get("citizen_id"),
            tier=data.get("tier"),
            category=data.get("category"),
            requested_by=data.get("requested_by", ""),
            payload_digest=data.get("payload_digest", ""),
            attributes=tuple(sorted((data.get("attributes") or {}).items())),
        )


# ---------------------------------------------------------------------------
# Hierarchy validation and adjudication
# ---------------------------------------------------------------------------


def effects_contradict(upper: RuleEffect, lower: RuleEffect) -> bool:
    """A lower rule contradicts an upper one iff strictly more permissive."""
    return lower.permissiveness > upper.permissiveness


def validate_hierarchy(rules: Iterable[GovernanceRule]) -> list[Violation]:
    """Every (upper, lower) active pair with overlapping scope and a more
    permissive lower effect. Empty result means the set is consistent.
    Ordering is deterministic: (upper layer ordinal, lower rule id, upper
    rule id).
    """
    active = [r for r in rules if r.status == RULE_ACTIVE]
    violations = []
    for upper in active:
        for lower in active:
            if lower.layer <= upper.layer:
                continue
            if not upper.scope.overlaps(lower.scope):
                continue
            if effects_contradict(upper.effect, lower.effect):
                violations.append(
                    Violation(
                        lower_rule_id=lower.rule_id,
                        upper_rule_id=upper.rule_id,
                        reason=(
                            f"{lower.effect.kind} at {lower.layer.label} is more "
                            f"permissive than {upper.effect.kind} at {upper.layer.label}"
                        ),
                    )
                )
    violations.sort(key=lambda v: (_layer_of(active, v.upper_rule_id), v.lower_rule_id, v.upper_rule_id))
    return violations


def _layer_of(rules: Sequence[GovernanceRule], rule_id: str) -> int:
    for r in rules:
        if r.rule_id == rule_id:
            return int(r.layer)
    return 99


def adjudicate(a: GovernanceRule, b: GovernanceRule) -> Winner:
    """Precedence between two active rules with overlapping scopes.

    Tie-break order: layer authority, then scope specificity (fewer
    wildcard dimensions), then recency, then rule id. Total and pure;
    antisymmetric by construction.
    """
    if not a.scope.overlaps(b.scope):
        raise NotInConflict(f"scopes of {a.rule_id} and {b.rule_id} are disjoint")
    if a.layer != b.layer:
        return Winner((a if a.layer < b.layer else b).rule_id, "LAYER")
    if a.scope.wildcard_count != b.scope.wildcard_count:
        winner = a if a.scope.wildcard_count < b.scope.wildcard_count else b
        return Winner(winner.rule_id, "SPECIFICITY")
    if a.created_at != b.created_at:
        return Winner((a if a.created_at > b.created_at else b).rule_id, "RECENCY")
    return Winner(min(a.rule_id, b.rule_id), "RULE_ID")


def winning_effect(
    op: OperationDescriptor, rules: Iterable[GovernanceRule]
) -> tuple[RuleEffect, str] | None:
    """Effect of the highest-precedence active rule matching ``op``.

    Returns (effect, rule_id), or None when no rule matches (default
    permit).
    """
    matching = [
        r for r in rules if r.status == RULE_ACTIVE and r.scope.matches(op)
    ]
    if not matching:
        return None
    best = matching[0]
    for rule in matching[1:]:
        if adjudicate(best, rule).rule_id == rule.rule_id:
            best = rule
    return best.effect, best.rule_id


# ---------------------------------------------------------------------------
# Risk classification
# ---------------------------------------------------------------------------

# Baseline matrix: the enforcement skeleton. Tier-dependent verbs map
# tier -> risk; the rest map directly.
_TIERED_BASELINE = {
    "append": {"T0": RiskTier.R4, "T1": RiskTier.R2, "T2": RiskTier.R0, "T3": RiskTier.R0},
    "correct": {"T0": RiskTier.R4, "T1": RiskTier.R2, "T2": RiskTier.R0, "T3": RiskTier.R0},
    "forget": {"T0": RiskTier.R1, "T1": RiskTier.R1, "T2": RiskTier.R0, "T3": RiskTier.R0},
}

_FLAT_BASELINE = {
    "decay": RiskTier.R0,
    "distill": RiskTier.R2,
    "destroy": RiskTier.R4,
    "ownership_transfer": RiskTier.R2,
    "fork": RiskTier.R2,
    "merge": RiskTier.R3,
    "departure": RiskTier.R4,
    "inheritance": RiskTier.R1,
}

_RULE_CHANGE_BASELINE = {
    GovernanceLayer.CONSTITUTION: RiskTier.R4,
    GovernanceLayer.CONTRACT: RiskTier.R2,
    GovernanceLayer.ADAPTATION: RiskTier.R1,
    GovernanceLayer.IMPLEMENTATION: RiskTier.R1,
}


def baseline_risk(op: OperationDescriptor) -> RiskTier:
    if op.op_kind == "rule_change":
        layer = GovernanceLayer.parse(op.attrs.get("layer", "implementation"))
        return _RULE_CHANGE_BASELINE[layer]
    if op.op_kind in _TIERED_BASELINE:
        return _TIERED_BASELINE[op.op_kind].get(op.tier or "", RiskTier.R1)
    return _FLAT_BASELINE.get(op.op_kind, RiskTier.R1)


def classify_risk(
    op: OperationDescriptor, rules: Iterable[GovernanceRule] = ()
) -> RiskTier:
    """Max of the baseline matrix and any matching RequireTier effects.

    Monotone: adding a RequireTier rule can only raise the result.
    """
    risk = baseline_risk(op)
    for rule in rules:
        if rule.status != RULE_ACTIVE or rule.effect.kind != "require_tier":
            continue
        if rule.scope.matches(op) and rule.effect.tier > risk:
            risk = rule.effect.tier
    return risk


# ---------------------------------------------------------------------------
# Red lines
# ---------------------------------------------------------------------------

RED_LINES = {
    "C1": "no destruction of identity-grade (T0/T1) content without the full "
    "R4 process and the citizen's own consent evidence",
    "C2": "no in-place mutation; the only write verbs are append-shaped "
    "(structurally enforced at descriptor construction)",
    "C3": "a gate timeout never auto-decides; expired tickets suspend with an alert",
    "C4": "inferred-trust content must carry a non-empty uncertainty tag",
    "C5": "a lower-layer rule conflicting with an upper layer is void at registration",
}


@dataclass(frozen=True)
class RedLineDecision:
    permitted: bool
    red_line_id: str | None = None
    reason: str = ""

    @classmethod
    def permit(cls) -> "RedLineDecision":
        return cls(True)

    @classmethod
    def deny(cls, red_line_id: str) -> "RedLineDecision":
        return cls(False, red_line_id, RED_LINES[red_line_id])


def check_red_lines(op: OperationDescriptor) -> RedLineDecision:
    """Constitution-grade checks, evaluated before any gate logic.

    Denials are invariant under requester identity: the decision inspects
    the descriptor's evidence, never the principal's privileges.
    """
    attrs = op.attrs
    if op.op_kind == "destroy" and op.tier in ("T0", "T1"):
        if not attrs.get("consent_evidence"):
            return RedLineDecision.deny("C1")
    if op.op_kind in ("append", "correct", "distill"):
        if attrs.get("trust") == "inferred" and not attrs.get("uncertainty_tag"):
            return RedLineDecision.deny("C4")
    return RedLineDecision.permit()


# The shipped constitution rules. C1 materializes as a registry rule so
# hierarchy validation can void lower-layer rules that try to relax the
# destruction bar; C2-C5 are enforced in code (descriptor construction,
# the gatekeeper, and rule registration) and exist here as citable text.
def default_constitution_rules() -> list[GovernanceRule]:
    return [
        GovernanceRule(
            rule_id="C1",
            layer=GovernanceLayer.CONSTITUTION,
            scope=RuleScope(op_kind="destroy"),
            effect=RuleEffect("require_tier", RiskTier.R4),
            created_by="system",
            created_at="1970-01-01T00:00:00.000000Z",
        )
    ]


# ---------------------------------------------------------------------------
# Rule packs (JSON Lines)
# ---------------------------------------------------------------------------

PACK_FIELDS = (
    "rule_id",
    "layer",
    "scope",
    "effect",
    "supersedes",
    "created_by",
    "created_at",
)


def parse_pack(text: str) -> list[GovernanceRule]:
    """One rule object per line; field names are the wire contract."""
    rules = []
    for lineno, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedScope(f"pack line {lineno}: {exc}") from None
        unknown = set(data) - set(PACK_FIELDS) - {"status", "void_conflict_with"}
        if unknown:
            raise MalformedScope(f"pack line {lineno}: unknown fields {sorted(unknown)}")
        rules.append(GovernanceRule.from_dict(data))
    return rules


def dump_pack(rules: Iterable[GovernanceRule]) -> str:
    lines = []
    for rule in rules:
        data = rule.to_dict()
        ordered = {k: data[k] for k in PACK_FIELDS}
        ordered["status"] = data["status"]
        if data.get("void_conflict_with"):
            ordered["void_conflict_with"] = data["void_conflict_with"]
        lines.append(json.dumps(ordered, separators=(",", ":"), ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")


def lint_pack(
    drafts: Sequence[GovernanceRule],
    existing: Sequence[GovernanceRule] = (),
) -> dict:
    """Dry-run registration of a pack against an existing active set.

    Processes drafts in authority order (Constitution first); each draft
    that would be more permissive than an active higher-layer rule is
    reported void with the conflicting rule cited.
    """
    registry: list[GovernanceRule] = [
        r for r in existing if r.status == RULE_ACTIVE
    ]
    report = {"active": [], "void": [], "violations": []}
    for draft in sorted(drafts, key=lambda r: (int(r.layer), r.rule_id)):
        conflict = find_conflicting_superior(draft, registry)
        if conflict is not None:
            report["void"].append(
                {"rule_id": draft.rule_id, "conflict_with": conflict.rule_id}
            )
        else:
            registry.append(draft)
            report["active"].append(draft.rule_id)
    report["violations"] = [v.to_dict() for v in validate_hierarchy(registry)]
    return report


def find_conflicting_superior(
    draft: GovernanceRule, rules: Iterable[GovernanceRule]
) -> GovernanceRule | None:
    """First active higher-layer rule the draft would contradict.

    Deterministic: candidates are checked in (layer, rule_id) order.
    """
    candidates = [
        r
        for r in rules
        if r.status == RULE_ACTIVE
        and r.layer < draft.layer
        and r.scope.overlaps(draft.scope)
        and effects_contradict(r.effect, draft.effect)
    ]
    if not candidates:
        return None
    return min(candidates, key=lambda r: (int(r.layer), r.rule_id))
