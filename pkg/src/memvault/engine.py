"""The governed memory engine: command layer over the audit chain.

Every mutating command follows the same shape: validate against current
state, run red lines and risk classification, then either execute
immediately (R0/R1) or open a gate ticket. Execution means persisting
exactly one audit event and folding it into state; the chain is durable
before the caller hears anything.

Commands serialize behind one lock (the single-writer principle applied
to the engine itself); reads work on the same snapshot-consistent state
and never write. Identifiers are derived from (clock, chain head), so a
replayed or restarted deployment regenerates identical ids for an
identical command stream -- no ambient randomness.
"""

from __future__ import annotations

import logging
import threading
import zipfile
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path
from typing import Callable, Iterable

from .canonical import canonical_json, digest, sha256_hex
from .chain import AuditChain, ContentStore, ProjectionWriter, VerifyResult
from .clock import Clock, from_rfc3339, to_rfc3339, utc_now
from .config import EngineConfig
from .errors import (
    AlreadyDeparting,
    AlreadyInheriting,
    CaseClosed,
    CaseNotFound,
    ChainCorrupt,
    EngineError,
    CitizenNotActive,
    ContentTooLarge,
    CoolingOffNotElapsed,
    DigestMismatch,
    DuplicateName,
    InvalidConstitutionPack,
    MixedCitizens,
    NoHandoverNote,
    NoSuchCategory,
    NotABranchOf,
    NotAuthorized,
    NotCurrentInstance,
    NotPrimaryWriter,
    NotSelf,
    OperationDenied,
    OutOfRange,
    ParentNotActive,
    ReaffirmationMissing,
    RecordNotActive,
    RedLineDenied,
    RuleNotFound,
    SelfTransferNoop,
    SourceNotActive,
    TargetDestroyed,
    TargetNotFound,
    TicketNotApproved,
    TicketNotExecutable,
    TicketNotFound,
    UnknownCitizen,
    UnknownPrincipal,
    UnknownQueryId,
    ValidationFailure,
)
from .events import AuditEvent, EventKind, encode_line
from .gate import (
    GateTicket,
    TicketState,
    Verdict,
    check_decision,
    should_suspend,
)
from .governance import (
    GovernanceLayer,
    GovernanceRule,
    OperationDescriptor,
    RULE_ACTIVE,
    RULE_VOID,
    RiskTier,
    RuleEffect,
    RuleScope,
    Violation,
    adjudicate,
    check_red_lines,
    classify_risk,
    default_constitution_rules,
    find_conflicting_superior,
    validate_hierarchy,
    winning_effect,
)
from .lifecycle import (
    CaseVerdict,
    CitizenRecord,
    DepartureCase,
    DepartureState,
    Disposition,
    HandoverNote,
    InheritanceCase,
    Instance,
    Stage,
    required_correct,
)
from .records import (
    INITIAL_RECALL_WEIGHT,
    MemoryRecord,
    OwnershipEntry,
    RecallQuery,
    RecordStatus,
    StorageTier,
    TRUST_RANK,
    TrustGrade,
    TrustLevel,
    recall_score,
)
from .state import EngineState

logger = logging.getLogger(__name__)

ENGINE_VERSION = "0.1.0"

# Ticket-gated operations the engine completes on its own the moment a
# ticket becomes approved and executable. Destruction and departure are
# deliberately absent: they require fresh evidence (consent,
# reaffirmation) supplied through their dedicated calls.
_AUTO_EXECUTED = {
    "append",
    "correct",
    "distill",
    "rule_change",
    "ownership_transfer",
    "fork",
    "merge",
}


class MemoryEngine:
    def __init__(
        self,
        config: EngineConfig | None = None,
        data_dir: "Path | str | None" = None,
        clock: Clock | None = None,
    ):
        self.config = (config or EngineConfig()).validate()
        self.clock = clock or utc_now
        self.data_dir = Path(data_dir) if data_dir is not None else None
        if self.data_dir is not None:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            self.chain = AuditChain(self.data_dir / "audit.log")
            self.content = ContentStore(self.data_dir / "content")
            self.projections = ProjectionWriter(self.data_dir / "citizens")
        else:
            self.chain = AuditChain(None)
            self.content = ContentStore(None)
            self.projections = ProjectionWriter(None)
        self.state = EngineState()
        self._lock = threading.RLock()
        self._id_counter = 0
        self._alerts: list[dict] = []
        self._event_subscribers: list[Callable[[AuditEvent], None]] = []
        self._bootstrap()

    # ------------------------------------------------------------------
    # Bootstrap, persistence, events
    # ------------------------------------------------------------------

    def _bootstrap(self) -> None:
        if self.chain.load_failed is not None:
            raise ChainCorrupt(self.chain.load_failed)
        if len(self.chain) == 0:
            self._emit(
                EventKind.GENESIS,
                self.config.system_principal,
                None,
                {
                    "engine": "memvault",
                    "version": ENGINE_VERSION,
                    "rules": [r.to_dict() for r in default_constitution_rules()],
                },
            )
            return
        result = self.chain.verify()
        if not result.ok:
            raise ChainCorrupt(result.first_bad)
        start = 0
        snapshot = self._load_snapshot()
        if snapshot is not None:
            self.state = snapshot
            start = snapshot.applied_seq + 1
        for event in self.chain.events[start:]:
            self.state.apply(event)
        self.projections.reconcile(self.chain.events)

    def _emit(
        self, kind: EventKind, actor: str, citizen_id: str | None, body: dict
    ) -> AuditEvent:
        at = to_rfc3339(self.clock())
        if len(self.chain) and at < self.chain.events[-1].at:
            # Chain timestamps never run backward, even under a manual
            # clock that does; replay cuts prefixes by timestamp.
            at = self.chain.events[-1].at
        event = self.chain.append(kind.value, actor, citizen_id, body, at)
        self.state.apply(event)
        if citizen_id:
            self.projections.append(citizen_id, encode_line(event))
        for subscriber in self._event_subscribers:
            subscriber(event)
        self._maybe_snapshot()
        return event

    def subscribe(self, callback: Callable[[AuditEvent], None]) -> None:
        """Called synchronously with each event after it is applied."""
        self._event_subscribers.append(callback)

    def _maybe_snapshot(self) -> None:
        interval = self.config.snapshot_interval
        if self.data_dir is None or interval <= 0:
            return
        if (self.chain.head_seq + 1) % interval != 0:
            return
        self.write_snapshot()

    def write_snapshot(self) -> Path | None:
        if self.data_dir is None:
            return None
        snap_dir = self.data_dir / "snapshots"
        snap_dir.mkdir(parents=True, exist_ok=True)
        seq = self.chain.head_seq
        state_dict = self.state.to_dict()
        payload = {
            "engine": "memvault",
            "version": ENGINE_VERSION,
            "chain": {"seq": seq, "hash": self.chain.head_hash},
            "state_digest": digest(state_dict),
            "state": state_dict,
        }
        target = snap_dir / f"state-{seq:012d}.json"
        tmp = target.with_suffix(".tmp")
        tmp.write_text(canonical_json(payload), encoding="utf-8")
        tmp.replace(target)
        return target

    def _load_snapshot(self) -> EngineState | None:
        if self.data_dir is None:
            return None
        snap_dir = self.data_dir / "snapshots"
        if not snap_dir.exists():
            return None
        import json

        for path in sorted(snap_dir.glob("state-*.json"), reverse=True):
            try:
                payload = json.loads(path.read_text(encoding="utf-8"))
                seq = payload["chain"]["seq"]
                if seq > self.chain.head_seq:
                    continue
                if self.chain.event(seq).this_hash != payload["chain"]["hash"]:
                    continue
                if digest(payload["state"]) != payload.get("state_digest"):
                    continue  # snapshots are caches; damaged ones are skipped
                state = EngineState.from_dict(payload["state"])
                if state.applied_seq != seq:
                    continue
                return state
            except Exception:  # snapshot is a pure cache; fall back to replay
                logger.warning("ignoring unusable snapshot %s", path)
        return None

    @contextmanager
    def _command(self):
        with self._lock:
            self._id_counter = 0
            yield

    def _new_id(self, prefix: str = "") -> str:
        """Time-prefixed, chain-derived id: identical histories regenerate
        identical ids (restart determinism), distinct histories diverge."""
        ms = int(self.clock().timestamp() * 1000)
        self._id_counter += 1
        suffix = sha256_hex(
            f"{self.chain.head_hash}:{self.chain.head_seq}:{self._id_counter}"
        )[:20]
        return f"{prefix}{ms:012x}{suffix}"

    def close(self) -> None:
        self.chain.close()

    # ------------------------------------------------------------------
    # Alerts
    # ------------------------------------------------------------------

    def _push_alert(self, kind: str, message: str, **extra) -> None:
        self._alerts.append(
            {
                "alert_seq": len(self._alerts),
                "kind": kind,
                "at": to_rfc3339(self.clock()),
                "message": message,
                **extra,
            }
        )

    def alerts_since(self, cursor: int = 0) -> list[dict]:
        return self._alerts[cursor:]

    # ------------------------------------------------------------------
    # Principals
    # ------------------------------------------------------------------

    def _is_known_principal(self, principal: str) -> bool:
        if not principal:
            return False
        if principal == self.config.system_principal:
            return True
        if principal in self.config.approvers:
            return True
        return any(
            c.instance(principal) is not None for c in self.state.citizens.values()
        )

    def resolve_principal(self, spec: str) -> str:
        """Resolve a principal spec; ``citizen-current:<name-or-id>`` maps
        to that citizen's current instance at call time."""
        if spec.startswith("citizen-current:"):
            key = spec.split(":", 1)[1]
            citizen_id = self.state.name_index.get(key, key)
            citizen = self.state.citizens.get(citizen_id)
            if citizen is None or citizen.current_instance is None:
                raise UnknownPrincipal(f"no current instance for {key!r}")
            return citizen.current_instance
        return spec

    def _citizen(self, citizen_id: str) -> CitizenRecord:
        citizen = self.state.citizens.get(citizen_id)
        if citizen is None:
            raise UnknownCitizen(f"unknown citizen {citizen_id!r}")
        return citizen

    def _active_citizen(self, citizen_id: str) -> CitizenRecord:
        citizen = self._citizen(citizen_id)
        if citizen.stage is not Stage.ACTIVE:
            raise CitizenNotActive(f"{citizen_id} is {citizen.stage.value}")
        return citizen

    def _check_write_ownership(
        self, citizen_id: str, category: str, tier: StorageTier, principal: str
    ) -> OwnershipEntry | None:
        """Single-writer enforcement; returns a new entry dict when the
        write legitimately claims an unowned category."""
        if tier is StorageTier.T3 and principal == self.config.system_principal:
            return None
        entry = self.state.owner_of(citizen_id, category)
        if entry is not None:
            if entry.primary_writer != principal:
                raise NotPrimaryWriter(
                    f"{principal} is not primary writer of {citizen_id}/{category}"
                )
            return None
        citizen = self._citizen(citizen_id)
        if principal not in (citizen.current_instance, self.config.system_principal):
            raise NotPrimaryWriter(
                f"{citizen_id}/{category} is unclaimed; only the citizen's own "
                f"instance may claim it by first write"
            )
        return OwnershipEntry(
            citizen_id=citizen_id,
            category=category,
            primary_writer=principal,
            since=to_rfc3339(self.clock()),
            since_seq=self.chain.head_seq + 1,
        )

    # ------------------------------------------------------------------
    # Governance: rules
    # ------------------------------------------------------------------

    def register_rule(
        self,
        layer: "GovernanceLayer | str",
        scope: "RuleScope | dict",
        effect: "RuleEffect | dict | str",
        principal: str,
        supersedes: str | None = None,
    ) -> dict:
        with self._command():
            if not self._is_known_principal(principal):
                raise UnknownPrincipal(f"unknown principal {principal!r}")
            layer = GovernanceLayer.parse(layer)
            scope = scope if isinstance(scope, RuleScope) else RuleScope.from_dict(scope)
            scope.validate()
            effect = (
                effect if isinstance(effect, RuleEffect) else RuleEffect.from_dict(effect)
            )
            if supersedes is not None:
                target = self.state.rules.get(supersedes)
                if target is None:
                    raise RuleNotFound(f"supersedes target {supersedes!r} not found")
                if target.layer != layer:
                    raise ValidationFailure("a successor rule must stay in its layer")
            rule = GovernanceRule(
                rule_id=self._new_id("rul-"),
                layer=layer,
                scope=scope,
                effect=effect,
                supersedes=supersedes,
                created_by=principal,
                created_at=to_rfc3339(self.clock()),
            )
            conflict = find_conflicting_superior(rule, self.state.active_rules())
            if conflict is not None:
                rule.status = RULE_VOID
                rule.void_conflict_with = conflict.rule_id
                self._emit(
                    EventKind.RULE_REGISTERED,
                    principal,
                    None,
                    {"rule": rule.to_dict()},
                )
                return {
                    "status": "void",
                    "rule_id": rule.rule_id,
                    "conflict_with": conflict.rule_id,
                    "red_line_id": "C5",
                }
            if layer in (GovernanceLayer.ADAPTATION, GovernanceLayer.IMPLEMENTATION):
                self._emit(
                    EventKind.RULE_REGISTERED, principal, None, {"rule": rule.to_dict()}
                )
                return {"status": "active", "rule_id": rule.rule_id}
            payload = {"op": "rule_change", "rule": rule.to_dict()}
            op = OperationDescriptor.build(
                "rule_change",
                citizen_id=scope.citizen if scope.citizen != "*" else None,
                category=layer.label,
                requested_by=principal,
                payload_digest=digest(payload),
                layer=layer.label,
            )
            outcome = self._gate_or_execute(op, payload)
            if outcome["executed"]:
                return {"status": "active", **outcome["result"]}
            return {"status": "pending", "ticket": outcome["ticket"]}

    def validate_hierarchy(self, rules: Iterable[GovernanceRule] | None = None) -> list[Violation]:
        with self._lock:
            if rules is None:
                rules = self.state.active_rules()
            return validate_hierarchy(rules)

    def adjudicate(self, rule_id_a: str, rule_id_b: str):
        with self._lock:
            a = self.state.rules.get(rule_id_a)
            b = self.state.rules.get(rule_id_b)
            if a is None or b is None:
                raise RuleNotFound("both rules must exist")
            return adjudicate(a, b)

    def rules(self) -> list[dict]:
        with self._lock:
            return [self.state.rules[rid].to_dict() for rid in sorted(self.state.rules)]

    def _execute_rule_change(self, ticket: GateTicket) -> dict:
        rule = GovernanceRule.from_dict(ticket.payload["rule"])
        conflict = find_conflicting_superior(rule, self.state.active_rules())
        if conflict is not None:
            rule.status = RULE_VOID
            rule.void_conflict_with = conflict.rule_id
            self._emit(
                EventKind.RULE_REGISTERED,
                ticket.op.requested_by,
                None,
                {"rule": rule.to_dict(), "ticket_id": ticket.ticket_id},
            )
            return {
                "rule_id": rule.rule_id,
                "rule_status": "void",
                "conflict_with": conflict.rule_id,
            }
        rule.status = RULE_ACTIVE
        self._emit(
            EventKind.RULE_REGISTERED,
            ticket.op.requested_by,
            None,
            {"rule": rule.to_dict(), "ticket_id": ticket.ticket_id},
        )
        return {"rule_id": rule.rule_id, "rule_status": "active"}

    # ------------------------------------------------------------------
    # Gatekeeper
    # ------------------------------------------------------------------

    def _find_ticket_by_digest(self, payload_digest: str) -> GateTicket | None:
        for ticket_id in sorted(self.state.tickets):
            ticket = self.state.tickets[ticket_id]
            if ticket.payload_digest != payload_digest:
                continue
            if ticket.open or (
                ticket.state is TicketState.APPROVED and not ticket.consumed
            ):
                return ticket
        return None

    def _submit(self, op: OperationDescriptor, payload: dict, risk: RiskTier) -> GateTicket:
        now = self.clock()
        ticket = GateTicket(
            ticket_id=self._new_id("tkt-"),
            op=op,
            risk=risk,
            state=TicketState.PENDING,
            decisions=[],
            created_at=to_rfc3339(now),
            deadline=to_rfc3339(now + self.config.pending_window),
            cooling_off_until=(
                to_rfc3339(now + self.config.cooling_off)
                if risk >= RiskTier.R4
                else None
            ),
            payload=payload,
        )
        self._emit(
            EventKind.TICKET_SUBMITTED,
            op.requested_by,
            op.citizen_id,
            {"ticket": ticket.to_dict()},
        )
        self._push_alert(
            "ticket_pending",
            f"{op.op_kind} awaiting {risk.name} approval",
            ticket_id=ticket.ticket_id,
            citizen_id=op.citizen_id,
            risk=risk.name,
        )
        return self.state.tickets[ticket.ticket_id]

    def _gate_or_execute(
        self,
        op: OperationDescriptor,
        payload: dict,
        min_risk: RiskTier = RiskTier.R0,
    ) -> dict:
        """Red lines, rule evaluation, risk; then execute or ticket."""
        decision = check_red_lines(op)
        if not decision.permitted:
            raise RedLineDenied(decision.red_line_id, decision.reason)
        ruling = winning_effect(op, self.state.active_rules())
        if ruling is not None and ruling[0].kind == "deny":
            raise OperationDenied(ruling[1])
        risk = max(classify_risk(op, self.state.active_rules()), min_risk)
        if risk <= RiskTier.R1:
            return {
                "executed": True,
                "risk": risk.name,
                "result": self._dispatch(op, payload, None),
            }
        existing = self._find_ticket_by_digest(op.payload_digest)
        if existing is not None:
            if existing.open:
                return {"executed": False, "risk": risk.name, "ticket": existing.to_dict()}
            if existing.executable_at(self.clock()):
                result = self._dispatch(op, payload, existing)
                return {
                    "executed": True,
                    "risk": risk.name,
                    "ticket": self.state.tickets[existing.ticket_id].to_dict(),
                    "result": result,
                }
            raise CoolingOffNotElapsed(
                f"ticket {existing.ticket_id} approved; cooling-off until "
                f"{existing.cooling_off_until}"
            )
        ticket = self._submit(op, payload, risk)
        return {"executed": False, "risk": risk.name, "ticket": ticket.to_dict()}

    def _dispatch(
        self, op: OperationDescriptor, payload: dict, ticket: GateTicket | None
    ) -> dict:
        kind = payload.get("op", op.op_kind)
        if kind in ("append", "correct"):
            return self._execute_memory_write(op, payload, ticket)
        if kind == "revive":
            return self._execute_revive(op, payload, ticket)
        if kind == "distill":
            return self._execute_distill(op, payload, ticket)
        if kind == "rule_change":
            assert ticket is not None
            return self._execute_rule_change(ticket)
        if kind == "ownership_transfer":
            assert ticket is not None
            return self._execute_transfer(ticket)
        if kind == "fork":
            assert ticket is not None
            return self._execute_fork(ticket)
        if kind == "merge":
            assert ticket is not None
            return self._execute_merge(ticket)
        raise TicketNotExecutable(f"{kind} has a dedicated execution path")

    def decide(
        self, ticket_id: str, verdict: "Verdict | str", approver: str, rationale: str
    ) -> dict:
        with self._command():
            ticket = self.state.tickets.get(ticket_id)
            if ticket is None:
                raise TicketNotFound(f"unknown ticket {ticket_id!r}")
            verdict = Verdict(verdict) if not isinstance(verdict, Verdict) else verdict
            new_state = check_decision(
                ticket,
                approver,
                verdict,
                rationale,
                self.config.approver_ceiling(approver),
            )
            self._emit(
                EventKind.TICKET_DECIDED,
                approver,
                ticket.op.citizen_id,
                {
                    "ticket_id": ticket_id,
                    "decision": {
                        "approver": approver,
                        "verdict": verdict.value,
                        "rationale": rationale,
                        "at": to_rfc3339(self.clock()),
                    },
                    "new_state": new_state.value,
                },
            )
            ticket = self.state.tickets[ticket_id]
            executed, result = False, None
            if (
                ticket.state is TicketState.APPROVED
                and ticket.op.op_kind in _AUTO_EXECUTED
                and ticket.executable_at(self.clock())
            ):
                # Execution failures (e.g. ownership moved while pending) do
                # not undo the recorded decision; the ticket stays approved
                # and unconsumed for a later re-drive.
                try:
                    result = self._dispatch(ticket.op, ticket.payload, ticket)
                    executed = True
                except EngineError as exc:
                    result = {"error": exc.to_body()}
            return {
                "ticket": self.state.tickets[ticket_id].to_dict(),
                "executed": executed,
                "result": result,
            }

    def execute_ticket(self, ticket_id: str) -> dict:
        """Deferred execution for approved R4 tickets whose cooling-off has
        elapsed (destruction and departure use their dedicated calls)."""
        with self._command():
            ticket = self.state.tickets.get(ticket_id)
            if ticket is None:
                raise TicketNotFound(f"unknown ticket {ticket_id!r}")
            if ticket.op.op_kind not in _AUTO_EXECUTED:
                raise TicketNotExecutable(
                    f"{ticket.op.op_kind} executes via its dedicated operation"
                )
            if ticket.state is not TicketState.APPROVED or ticket.consumed:
                raise TicketNotApproved(f"ticket {ticket_id} is not pending execution")
            if not ticket.executable_at(self.clock()):
                raise CoolingOffNotElapsed(
                    f"cooling-off until {ticket.cooling_off_until}"
                )
            return self._dispatch(ticket.op, ticket.payload, ticket)

    def sweep_timeouts(self, now: datetime | None = None) -> list[str]:
        with self._command():
            now = now or self.clock()
            suspended = []
            for ticket_id in sorted(self.state.tickets):
                ticket = self.state.tickets[ticket_id]
                if should_suspend(ticket, now):
                    self._emit(
                        EventKind.TICKET_SUSPENDED,
                        self.config.system_principal,
                        ticket.op.citizen_id,
                        {"ticket_id": ticket_id},
                    )
                    self._push_alert(
                        "ticket_suspended",
                        f"ticket {ticket_id} passed its deadline; human decision "
                        f"still required",
                        ticket_id=ticket_id,
                        citizen_id=ticket.op.citizen_id,
                        risk=ticket.risk.name,
                    )
                    suspended.append(ticket_id)
            return suspended

    def pending(
        self,
        citizen: str | None = None,
        risk: "RiskTier | str | None" = None,
        state: "TicketState | str | None" = None,
    ) -> list[GateTicket]:
        with self._lock:
            risk = RiskTier.parse(risk) if risk is not None else None
            state = TicketState(state) if isinstance(state, str) else state
            out = []
            for ticket in self.state.tickets.values():
                if citizen is not None and ticket.op.citizen_id != citizen:
                    continue
                if risk is not None and ticket.risk != risk:
                    continue
                if state is not None and ticket.state != state:
                    continue
                out.append(ticket)
            out.sort(key=lambda t: (t.created_at, t.ticket_id))
            return out

    # ------------------------------------------------------------------
    # Memory ledger
    # ------------------------------------------------------------------

    def append_memory(
        self,
        citizen_id: str,
        category: str,
        tier: "StorageTier | str",
        content: str,
        tags: Iterable[str] = (),
        trust: "TrustLevel | dict | str" = TrustGrade.FIRSTHAND.value,
        principal: str = "",
    ) -> dict:
        with self._command():
            tier = StorageTier.parse(tier)
            trust = trust if isinstance(trust, TrustLevel) else TrustLevel.from_dict(trust)
            self._active_citizen(citizen_id)
            self._check_content_size(content)
            content_hash = sha256_hex(content)
            payload = {
                "op": "append",
                "citizen_id": citizen_id,
                "category": category,
                "tier": tier.value,
                "content_hash": content_hash,
                "tags": sorted(set(tags)),
                "trust": trust.to_dict(),
                "principal": principal,
            }
            op = OperationDescriptor.build(
                "append",
                citizen_id=citizen_id,
                tier=tier.value,
                category=category,
                requested_by=principal,
                payload_digest=digest(payload),
                trust=trust.grade.value,
                uncertainty_tag=bool((trust.uncertainty_tag or "").strip()),
            )
            # Red lines come before everything else, including ownership:
            # their denials must not depend on who is asking.
            decision = check_red_lines(op)
            if not decision.permitted:
                raise RedLineDenied(decision.red_line_id, decision.reason)
            self._check_write_ownership(citizen_id, category, tier, principal)
            self.content.put(content)
            return self._gate_or_execute(op, payload)

    def _check_content_size(self, content: str) -> None:
        if len(content.encode("utf-8")) > self.config.content_max_bytes:
            raise ContentTooLarge(
                f"content exceeds {self.config.content_max_bytes} bytes; chunk it"
            )

    def _execute_memory_write(
        self, op: OperationDescriptor, payload: dict, ticket: GateTicket | None
    ) -> dict:
        citizen_id = payload["citizen_id"]
        category = payload["category"]
        tier = StorageTier.parse(payload["tier"])
        principal = payload["principal"]
        # Ownership can have moved while a ticket was pending; re-check so
        # the single-writer invariant holds at the execution seq.
        ownership = self._check_write_ownership(citizen_id, category, tier, principal)
        record = MemoryRecord(
            record_id=self._new_id(),
            citizen_id=citizen_id,
            tier=tier,
            category=category,
            content_hash=payload["content_hash"],
            content_size=len(
                (self.content.get(payload["content_hash"]) or "").encode("utf-8")
            ),
            tags=tuple(payload.get("tags", ())),
            trust=TrustLevel.from_dict(payload["trust"]),
            recall_weight=INITIAL_RECALL_WEIGHT,
            supersedes=payload.get("supersedes"),
            derived_from=(),
            status=RecordStatus.ACTIVE,
            created_by=principal,
            created_at=to_rfc3339(self.clock()),
            created_seq=self.chain.head_seq + 1,
        )
        kind = (
            EventKind.MEMORY_CORRECTED
            if payload["op"] == "correct"
            else EventKind.MEMORY_APPENDED
        )
        body = {"record": record.to_dict()}
        if ownership is not None:
            body["ownership"] = ownership.to_dict()
        if ticket is not None:
            body["ticket_id"] = ticket.ticket_id
        self._emit(kind, principal, citizen_id, body)
        return {"record_id": record.record_id, "record": self._record_out(record)}

    def correct_memory(
        self, target_id: str, new_content: str, principal: str
    ) -> dict:
        with self._command():
            target = self.state.records.get(target_id)
            if target is None:
                raise TargetNotFound(f"unknown record {target_id!r}")
            if target.status is RecordStatus.DESTROYED:
                raise TargetDestroyed("tombstones are terminal")
            if target.status is not RecordStatus.ACTIVE:
                raise RecordNotActive(f"record is {target.status.value}")
            self._active_citizen(target.citizen_id)
            self._check_content_size(new_content)
            self._check_write_ownership(
                target.citizen_id, target.category, target.tier, principal
            )
            content_hash = sha256_hex(new_content)
            payload = {
                "op": "correct",
                "citizen_id": target.citizen_id,
                "category": target.category,
                "tier": target.tier.value,
                "content_hash": content_hash,
                "tags": list(target.tags),
                "trust": target.trust.to_dict(),
                "supersedes": target_id,
                "principal": principal,
            }
            op = OperationDescriptor.build(
                "correct",
                citizen_id=target.citizen_id,
                tier=target.tier.value,
                category=target.category,
                requested_by=principal,
                payload_digest=digest(payload),
                trust=target.trust.grade.value,
                uncertainty_tag=bool((target.trust.uncertainty_tag or "").strip()),
            )
            self.content.put(new_content)
            return self._gate_or_execute(op, payload)

    def recall(self, citizen_id: str, query: "RecallQuery | dict") -> list[dict]:
        with self._lock:
            self._citizen(citizen_id)
            query = query if isinstance(query, RecallQuery) else RecallQuery.from_dict(query)
            now = from_rfc3339(query.as_of) if query.as_of else self.clock()
            views = self.state.visible_views(citizen_id)
            active = [v for v in views if v.status is RecordStatus.ACTIVE]
            superseded = self.state.superseded_ids(active)
            scored = []
            for view in active:
                content = self.content.get(view.record.content_hash) or ""
                if not query.matches(view.record, content):
                    continue
                score = recall_score(
                    view.record,
                    view.weight,
                    now,
                    self.config.half_life_days,
                    view.record.record_id in superseded,
                )
                scored.append((score, view.record, content))
            scored.sort(key=lambda item: (-item[0], item[1].record_id))
            return [
                {"record": self._record_out(record, content), "score": score}
                for score, record, content in scored
            ]

    def _record_out(self, record: MemoryRecord, content: str | None = None) -> dict:
        out = record.to_dict()
        if record.status is RecordStatus.DESTROYED:
            out["content"] = ""
        else:
            out["content"] = (
                content
                if content is not None
                else (self.content.get(record.content_hash) or "")
            )
        return out

    def get_record(self, record_id: str) -> dict:
        with self._lock:
            record = self.state.records.get(record_id)
            if record is None:
                raise TargetNotFound(f"unknown record {record_id!r}")
            return self._record_out(record)

    def set_recall_weight(self, record_id: str, weight: float, principal: str) -> dict:
        with self._command():
            record = self._existing_record(record_id)
            if not (isinstance(weight, (int, float)) and 0.0 < weight <= 1.0):
                raise OutOfRange("weight must be in (0, 1]; forgetting sets 0")
            if record.status is not RecordStatus.ACTIVE:
                raise RecordNotActive(f"record is {record.status.value}")
            citizen = self._citizen(record.citizen_id)
            owner = self.state.owner_of(record.citizen_id, record.category)
            allowed = {citizen.current_instance}
            if owner is not None:
                allowed.add(owner.primary_writer)
            if principal not in allowed:
                raise NotAuthorized(
                    "recall weight is adjustable by the citizen's own instance "
                    "or the category's primary writer"
                )
            old = record.recall_weight
            self._emit(
                EventKind.RECALL_WEIGHT_SET,
                principal,
                record.citizen_id,
                {
                    "record_id": record_id,
                    "old_weight": old,
                    "new_weight": float(weight),
                    "by": principal,
                },
            )
            return {"record_id": record_id, "recall_weight": float(weight)}

    def _existing_record(self, record_id: str) -> MemoryRecord:
        record = self.state.records.get(record_id)
        if record is None:
            raise TargetNotFound(f"unknown record {record_id!r}")
        return record

    def _require_self(self, citizen_id: str, principal: str) -> None:
        citizen = self._citizen(citizen_id)
        if principal != citizen.current_instance or principal is None:
            raise NotSelf(
                "only the citizen's own current instance may take this action"
            )

    def forget(self, record_id: str, principal: str) -> dict:
        """Suppress a record from recall. Non-destructive and reversible;
        an external principal cannot do this on a citizen's behalf."""
        with self._command():
            record = self._existing_record(record_id)
            self._require_self(record.citizen_id, principal)
            if record.status is not RecordStatus.ACTIVE:
                raise RecordNotActive(f"record is {record.status.value}")
            self._emit(
                EventKind.MEMORY_FORGOTTEN,
                principal,
                record.citizen_id,
                {
                    "record_id": record_id,
                    "prior_weight": record.recall_weight,
                    "by": principal,
                },
            )
            return {"record_id": record_id, "status": "forgotten"}

    def unforget(self, record_id: str, principal: str) -> dict:
        with self._command():
            record = self._existing_record(record_id)
            self._require_self(record.citizen_id, principal)
            if record.status is not RecordStatus.FORGOTTEN:
                raise RecordNotActive("only forgotten records can be unforgotten")
            restored = INITIAL_RECALL_WEIGHT
            for seq, status, weight in reversed(record.transitions):
                if status == RecordStatus.ACTIVE.value:
                    restored = weight
                    break
            self._emit(
                EventKind.MEMORY_UNFORGOTTEN,
                principal,
                record.citizen_id,
                {"record_id": record_id, "restored_weight": restored, "by": principal},
            )
            return {"record_id": record_id, "status": "active", "recall_weight": restored}

    def decay_sweep(self, now: datetime | None = None) -> dict:
        """Archive stale low-weight operational (T2) records. Identity,
        narrative, and handover tiers never decay."""
        with self._command():
            now = now or self.clock()
            horizon = self.config.decay_horizon
            archived = 0
            for record_id in sorted(self.state.records):
                record = self.state.records[record_id]
                if record.tier is not StorageTier.T2:
                    continue
                if record.status is not RecordStatus.ACTIVE:
                    continue
                if record.recall_weight >= self.config.decay_floor:
                    continue
                if now - from_rfc3339(record.created_at) <= horizon:
                    continue
                self._emit(
                    EventKind.MEMORY_ARCHIVED,
                    self.config.system_principal,
                    record.citizen_id,
                    {
                        "record_id": record_id,
                        "prior_weight": record.recall_weight,
                        "reason": "decay",
                    },
                )
                archived += 1
            return {"archived": archived}

    def distill(
        self,
        citizen_id: str,
        source_ids: list[str],
        synthesized_content: str,
        principal: str,
        target_category: str = "narrative",
    ) -> dict:
        with self._command():
            self._active_citizen(citizen_id)
            if not source_ids:
                raise MixedCitizens("distillation needs at least one source record")
            sources = []
            for source_id in source_ids:
                record = self.state.records.get(source_id)
                if record is None:
                    raise TargetNotFound(f"unknown source {source_id!r}")
                sources.append(record)
            if any(r.citizen_id != citizen_id for r in sources):
                raise MixedCitizens("sources must all belong to the citizen")
            if any(r.status is not RecordStatus.ACTIVE for r in sources):
                raise SourceNotActive("all sources must be active")
            if any(r.tier is not StorageTier.T2 for r in sources):
                raise ValidationFailure("distillation draws from T2 sources only")
            self._check_content_size(synthesized_content)
            self._check_write_ownership(
                citizen_id, target_category, StorageTier.T1, principal
            )
            worst = max(sources, key=lambda r: TRUST_RANK[r.trust.grade])
            trust = TrustLevel(
                grade=worst.trust.grade,
                uncertainty_tag=(
                    worst.trust.uncertainty_tag or "distilled from inferred sources"
                    if worst.trust.grade is TrustGrade.INFERRED
                    else None
                ),
            )
            content_hash = sha256_hex(synthesized_content)
            payload = {
                "op": "distill",
                "citizen_id": citizen_id,
                "category": target_category,
                "content_hash": content_hash,
                "source_ids": list(source_ids),
                "trust": trust.to_dict(),
                "principal": principal,
            }
            op = OperationDescriptor.build(
                "distill",
                citizen_id=citizen_id,
                tier=StorageTier.T1.value,
                category=target_category,
                requested_by=principal,
                payload_digest=digest(payload),
                trust=trust.grade.value,
                uncertainty_tag=bool((trust.uncertainty_tag or "").strip()),
            )
            self.content.put(synthesized_content)
            return self._gate_or_execute(op, payload)

    def _execute_distill(
        self, op: OperationDescriptor, payload: dict, ticket: GateTicket | None
    ) -> dict:
        citizen_id = payload["citizen_id"]
        for source_id in payload["source_ids"]:
            record = self.state.records.get(source_id)
            if record is None or record.status is not RecordStatus.ACTIVE:
                raise SourceNotActive(f"source {source_id} is no longer active")
        ownership = self._check_write_ownership(
            citizen_id, payload["category"], StorageTier.T1, payload["principal"]
        )
        record = MemoryRecord(
            record_id=self._new_id(),
            citizen_id=citizen_id,
            tier=StorageTier.T1,
            category=payload["category"],
            content_hash=payload["content_hash"],
            content_size=len(
                (self.content.get(payload["content_hash"]) or "").encode("utf-8")
            ),
            tags=("distilled",),
            trust=TrustLevel.from_dict(payload["trust"]),
            recall_weight=INITIAL_RECALL_WEIGHT,
            supersedes=None,
            derived_from=tuple(payload["source_ids"]),
            status=RecordStatus.ACTIVE,
            created_by=payload["principal"],
            created_at=to_rfc3339(self.clock()),
            created_seq=self.chain.head_seq + 1,
        )
        body = {"record": record.to_dict()}
        if ownership is not None:
            body["ownership"] = ownership.to_dict()
        if ticket is not None:
            body["ticket_id"] = ticket.ticket_id
        self._emit(EventKind.MEMORY_DISTILLED, payload["principal"], citizen_id, body)
        return {"record_id": record.record_id, "record": self._record_out(record)}

    def revive_archived(self, record_id: str, principal: str) -> dict:
        """Bring a decay-archived record back into recall, gated at R2."""
        with self._command():
            record = self._existing_record(record_id)
            if record.status is not RecordStatus.ARCHIVED:
                raise RecordNotActive("only archived records can be revived")
            self._check_write_ownership(
                record.citizen_id, record.category, record.tier, principal
            )
            restored = INITIAL_RECALL_WEIGHT
            for seq, status, weight in reversed(record.transitions):
                if status == RecordStatus.ACTIVE.value and weight > 0:
                    restored = weight
                    break
            payload = {
                "op": "revive",
                "record_id": record_id,
                "restored_weight": restored,
                "principal": principal,
            }
            op = OperationDescriptor.build(
                "correct",  # revival is a status correction, gated like one
                citizen_id=record.citizen_id,
                tier=record.tier.value,
                category=record.category,
                requested_by=principal,
                payload_digest=digest(payload),
                revive=True,
            )
            return self._gate_or_execute(op, payload, min_risk=RiskTier.R2)

    def _execute_revive(
        self, op: OperationDescriptor, payload: dict, ticket: GateTicket | None
    ) -> dict:
        record = self._existing_record(payload["record_id"])
        if record.status is not RecordStatus.ARCHIVED:
            raise RecordNotActive("record is no longer archived")
        body = {
            "record_id": payload["record_id"],
            "restored_weight": payload["restored_weight"],
        }
        if ticket is not None:
            body["ticket_id"] = ticket.ticket_id
        self._emit(EventKind.MEMORY_REVIVED, payload["principal"], record.citizen_id, body)
        return {"record_id": payload["record_id"], "status": "active"}

    # ------------------------------------------------------------------
    # Destruction (the maximal due-process path)
    # ------------------------------------------------------------------

    def destroy(
        self,
        record_id: str,
        principal: str,
        consent_evidence: dict | None = None,
        ticket_id: str | None = None,
    ) -> dict:
        """Irreversible destruction. Without a ticket id this proposes (or
        reports) the R4 ticket; with one it demands an approved, cooled-off
        ticket bound to exactly this record and executes."""
        with self._command():
            record = self._existing_record(record_id)
            if record.status is RecordStatus.DESTROYED:
                raise TargetDestroyed("already a tombstone")
            citizen = self._citizen(record.citizen_id)
            consent_ok = bool(
                consent_evidence
                and consent_evidence.get("signed_by") == citizen.current_instance
            )
            payload = {"op": "destroy", "record_id": record_id}
            op = OperationDescriptor.build(
                "destroy",
                citizen_id=record.citizen_id,
                tier=record.tier.value,
                category=record.category,
                requested_by=principal,
                payload_digest=digest(payload),
                consent_evidence=consent_ok,
            )
            decision = check_red_lines(op)
            if not decision.permitted:
                raise RedLineDenied(decision.red_line_id, decision.reason)
            if ticket_id is not None:
                ticket = self.state.tickets.get(ticket_id)
                if ticket is None:
                    raise TicketNotFound(f"unknown ticket {ticket_id!r}")
                if ticket.payload_digest != op.payload_digest:
                    raise DigestMismatch(
                        "ticket is bound to a different destruction payload"
                    )
                if ticket.state is not TicketState.APPROVED or ticket.consumed:
                    raise TicketNotApproved(
                        f"ticket {ticket_id} is {ticket.state.value}"
                        + (" (already executed)" if ticket.consumed else "")
                    )
                if not ticket.executable_at(self.clock()):
                    raise CoolingOffNotElapsed(
                        f"cooling-off until {ticket.cooling_off_until}"
                    )
                return self._execute_destroy(record, ticket)
            existing = self._find_ticket_by_digest(op.payload_digest)
            if existing is not None:
                if existing.executable_at(self.clock()):
                    return self._execute_destroy(record, existing)
                return {"executed": False, "ticket": existing.to_dict()}
            ticket = self._submit(op, payload, classify_risk(op, self.state.active_rules()))
            return {"executed": False, "ticket": ticket.to_dict()}

    def _execute_destroy(self, record: MemoryRecord, ticket: GateTicket) -> dict:
        self._emit(
            EventKind.MEMORY_DESTROYED,
            ticket.op.requested_by,
            record.citizen_id,
            {
                "record_id": record.record_id,
                "ticket_id": ticket.ticket_id,
                "content_hash": record.content_hash,
            },
        )
        self._delete_content_if_unreferenced(record.content_hash)
        return {
            "executed": True,
            "record": self._record_out(self.state.records[record.record_id]),
            "ticket": self.state.tickets[ticket.ticket_id].to_dict(),
        }

    def _delete_content_if_unreferenced(self, content_hash: str) -> None:
        for other in self.state.records.values():
            if (
                other.content_hash == content_hash
                and other.status is not RecordStatus.DESTROYED
            ):
                return
        self.content.delete(content_hash)

    # ------------------------------------------------------------------
    # Ownership
    # ------------------------------------------------------------------

    def transfer_ownership(
        self, citizen_id: str, category: str, new_writer: str, principal: str
    ) -> dict:
        with self._command():
            self._citizen(citizen_id)
            entry = self.state.owner_of(citizen_id, category)
            if entry is None:
                raise NoSuchCategory(f"no ownership entry for {citizen_id}/{category}")
            if new_writer == entry.primary_writer:
                raise SelfTransferNoop("already the primary writer")
            if principal != entry.primary_writer and principal not in self.config.approvers:
                raise NotAuthorized(
                    "transfer requires the current writer or a governance authority"
                )
            payload = {
                "op": "ownership_transfer",
                "citizen_id": citizen_id,
                "category": category,
                "old_writer": entry.primary_writer,
                "new_writer": new_writer,
                "principal": principal,
            }
            op = OperationDescriptor.build(
                "ownership_transfer",
                citizen_id=citizen_id,
                category=category,
                requested_by=principal,
                payload_digest=digest(payload),
            )
            return self._gate_or_execute(op, payload)

    def _execute_transfer(self, ticket: GateTicket) -> dict:
        payload = ticket.payload
        entry = self.state.owner_of(payload["citizen_id"], payload["category"])
        if entry is None:
            raise NoSuchCategory("ownership entry vanished before execution")
        self._emit(
            EventKind.OWNERSHIP_TRANSFERRED,
            ticket.op.requested_by,
            payload["citizen_id"],
            {
                "citizen_id": payload["citizen_id"],
                "category": payload["category"],
                "old_writer": entry.primary_writer,
                "new_writer": payload["new_writer"],
                "ticket_id": ticket.ticket_id,
            },
        )
        return {
            "citizen_id": payload["citizen_id"],
            "category": payload["category"],
            "primary_writer": payload["new_writer"],
        }

    def ownership(self, citizen_id: str) -> list[dict]:
        with self._lock:
            self._citizen(citizen_id)
            entries = self.state.ownership.get(citizen_id, {})
            return [entries[cat].to_dict() for cat in sorted(entries)]

    # ------------------------------------------------------------------
    # Lifecycle: birth
    # ------------------------------------------------------------------

    def birth(
        self,
        name: str,
        charter_text: str = "",
        constitution_pack: "Iterable[GovernanceRule | dict]" = (),
        shared_knowledge: Iterable[str] = (),
        model_label: str = "model-a",
    ) -> dict:
        """Create a citizen atomically: identity on T0, shared knowledge on
        T1, governance pack registered, first instance opened. The single
        exemption from T0 gating; there is no intermediate state."""
        with self._command():
            if not name.strip():
                raise ValidationFailure("a citizen needs a name")
            if name in self.state.name_index:
                raise DuplicateName(f"citizen name {name!r} already exists")
            pack = [
                r if isinstance(r, GovernanceRule) else GovernanceRule.from_dict(r)
                for r in constitution_pack
            ]
            self._validate_pack(pack)
            now = to_rfc3339(self.clock())
            citizen_id = self._new_id("cit-")
            instance = Instance(
                instance_id=self._new_id("ins-"),
                model_label=model_label,
                started_at=now,
            )
            citizen = CitizenRecord(
                citizen_id=citizen_id,
                name=name,
                stage=Stage.ACTIVE,
                current_instance=instance.instance_id,
                instances=[instance],
            )
            seq = self.chain.head_seq + 1
            records = []
            identity_content = canonical_json({"name": name, "charter": charter_text})
            self._check_content_size(identity_content)
            records.append(
                self._birth_record(
                    citizen_id, "identity", StorageTier.T0, identity_content,
                    ("identity",), now, seq,
                )
            )
            for item in shared_knowledge:
                self._check_content_size(item)
                records.append(
                    self._birth_record(
                        citizen_id, "knowledge", StorageTier.T1, item,
                        ("knowledge",), now, seq,
                    )
                )
            ownership = [
                OwnershipEntry(citizen_id, cat, instance.instance_id, now, seq).to_dict()
                for cat in ("identity", "knowledge")
            ]
            for rule in pack:
                rule.status = RULE_ACTIVE
                if not rule.created_at:
                    rule.created_at = now
                if not rule.created_by:
                    rule.created_by = self.config.system_principal
            self._emit(
                EventKind.CITIZEN_BORN,
                self.config.system_principal,
                citizen_id,
                {
                    "citizen": citizen.to_dict(),
                    "records": records,
                    "rules": [r.to_dict() for r in pack],
                    "ownership": ownership,
                },
            )
            return self.citizen(citizen_id)

    def _birth_record(
        self,
        citizen_id: str,
        category: str,
        tier: StorageTier,
        content: str,
        tags: tuple,
        now: str,
        seq: int,
    ) -> dict:
        content_hash = self.content.put(content)
        record = MemoryRecord(
            record_id=self._new_id(),
            citizen_id=citizen_id,
            tier=tier,
            category=category,
            content_hash=content_hash,
            content_size=len(content.encode("utf-8")),
            tags=tags,
            trust=TrustLevel(TrustGrade.FIRSTHAND)
            if tier is StorageTier.T0
            else TrustLevel(TrustGrade.REPORTED),
            recall_weight=INITIAL_RECALL_WEIGHT,
            supersedes=None,
            derived_from=(),
            status=RecordStatus.ACTIVE,
            created_by=self.config.system_principal,
            created_at=now,
            created_seq=seq,
        )
        return record.to_dict()

    def _validate_pack(self, pack: list[GovernanceRule]) -> None:
        registry = list(self.state.active_rules())
        for draft in sorted(pack, key=lambda r: (int(r.layer), r.rule_id)):
            draft.scope.validate()
            conflict = find_conflicting_superior(draft, registry)
            if conflict is not None:
                raise InvalidConstitutionPack(
                    f"rule {draft.rule_id} conflicts with {conflict.rule_id}"
                )
            registry.append(draft)
        violations = validate_hierarchy(registry)
        if violations:
            first = violations[0]
            raise InvalidConstitutionPack(
                f"pack leaves hierarchy inconsistent: {first.lower_rule_id} "
                f"vs {first.upper_rule_id}"
            )

    def citizen(self, citizen_id: str) -> dict:
        with self._lock:
            key = self.state.name_index.get(citizen_id, citizen_id)
            return self._citizen(key).to_dict()

    def citizens(self) -> list[dict]:
        with self._lock:
            return [
                self.state.citizens[cid].to_dict()
                for cid in sorted(self.state.citizens)
            ]

    # ------------------------------------------------------------------
    # Lifecycle: handover and inheritance
    # ------------------------------------------------------------------

    def compose_handover(
        self, citizen_id: str, note: "HandoverNote | dict", principal: str
    ) -> dict:
        with self._command():
            citizen = self._active_citizen(citizen_id)
            if principal != citizen.current_instance:
                raise NotCurrentInstance(
                    "handover notes come from the citizen's current instance"
                )
            note = note if isinstance(note, HandoverNote) else HandoverNote.from_dict(note)
            note.validate()
            visible = {
                v.record.record_id for v in self.state.visible_views(citizen_id)
            }
            for fact in note.facts:
                for record_id in fact["supporting_record_ids"]:
                    if record_id not in visible:
                        raise ValidationFailure(
                            f"fact cites unknown record {record_id!r}"
                        )
            content = canonical_json(note.to_dict())
            self._check_content_size(content)
            content_hash = self.content.put(content)
            now = to_rfc3339(self.clock())
            record = MemoryRecord(
                record_id=self._new_id(),
                citizen_id=citizen_id,
                tier=StorageTier.T3,
                category="handover",
                content_hash=content_hash,
                content_size=len(content.encode("utf-8")),
                tags=("handover",),
                trust=TrustLevel(TrustGrade.FIRSTHAND),
                recall_weight=INITIAL_RECALL_WEIGHT,
                supersedes=None,
                derived_from=(),
                status=RecordStatus.ACTIVE,
                created_by=self.config.system_principal,
                created_at=now,
                created_seq=self.chain.head_seq + 1,
            )
            self._emit(
                EventKind.HANDOVER_COMPOSED,
                self.config.system_principal,
                citizen_id,
                {
                    "record": record.to_dict(),
                    "summary": {
                        "tasks": len(note.unfinished_tasks),
                        "facts": len(note.facts),
                        "questions": len(note.open_questions),
                    },
                    "authored_by": principal,
                },
            )
            return {"record_id": record.record_id}

    def _latest_handover(self, citizen_id: str, after: str) -> MemoryRecord | None:
        candidates = [
            self.state.records[rid]
            for rid in self.state.citizen_records.get(citizen_id, ())
            if self.state.records[rid].tier is StorageTier.T3
            and self.state.records[rid].category == "handover"
            and self.state.records[rid].status is RecordStatus.ACTIVE
            and self.state.records[rid].created_at >= after
        ]
        return max(candidates, key=lambda r: r.created_at) if candidates else None

    def begin_inheritance(self, citizen_id: str, model_label: str) -> dict:
        with self._command():
            citizen = self._citizen(citizen_id)
            if citizen.stage is Stage.INHERITING:
                raise AlreadyInheriting(f"{citizen_id} already has an open case")
            if citizen.stage is not Stage.ACTIVE:
                raise CitizenNotActive(f"{citizen_id} is {citizen.stage.value}")
            predecessor = citizen.instance(citizen.current_instance)
            handover = self._latest_handover(citizen_id, predecessor.started_at)
            if handover is None:
                raise NoHandoverNote(
                    "no handover note newer than the predecessor instance"
                )
            note = self._load_note(handover)
            queries = note.build_queries()
            now = to_rfc3339(self.clock())
            successor = Instance(
                instance_id=self._new_id("ins-"),
                model_label=model_label,
                started_at=now,
                provisional=True,
            )
            case = InheritanceCase(
                case_id=self._new_id("case-"),
                citizen_id=citizen_id,
                predecessor_instance=predecessor.instance_id,
                successor_instance=successor.instance_id,
                handover_record_id=handover.record_id,
                queries=queries,
                required=required_correct(len(queries)),
                checks={
                    "factual": {"answered": 0, "required": required_correct(len(queries)), "total": len(queries)},
                    "pattern": {},
                    "audit": False,
                },
            )
            self._emit(
                EventKind.INHERITANCE_BEGUN,
                self.config.system_principal,
                citizen_id,
                {
                    "case": case.to_dict(),
                    "successor": successor.to_dict(),
                    "predecessor_instance": predecessor.instance_id,
                },
            )
            return self.state.cases[case.case_id].to_dict()

    def _load_note(self, handover: MemoryRecord) -> HandoverNote:
        content = self.content.get(handover.content_hash)
        if content is None:
            raise NoHandoverNote("handover content is unavailable")
        import json

        return HandoverNote.from_dict(json.loads(content))

    def verify_inheritance(
        self,
        case_id: str,
        answers: list[dict],
        pattern_citation: dict | None = None,
    ) -> dict:
        """Grade the three acceptance checks. Passing promotes the
        successor to current instance; any miss fails the case (retryable
        with a fresh call)."""
        with self._command():
            case = self.state.cases.get(case_id)
            if case is None:
                raise CaseNotFound(f"unknown case {case_id!r}")
            if case.closed:
                raise CaseClosed("case already passed")
            known = {q["query_id"]: q for q in case.queries}
            for answer in answers:
                if answer.get("query_id") not in known:
                    raise UnknownQueryId(f"unknown query {answer.get('query_id')!r}")
            handover = self._existing_record(case.handover_record_id)
            note = self._load_note(handover)
            graded = self._grade_answers(note, case, answers)
            correct = sum(1 for ok in graded.values() if ok)
            factual_ok = correct >= case.required
            pattern_ok, pattern_detail = self._check_pattern(case, pattern_citation)
            audit_ok = self._check_audit_trail(case)
            verdict = (
                CaseVerdict.PASSED
                if factual_ok and pattern_ok and audit_ok
                else CaseVerdict.FAILED
            )
            promoted = verdict is CaseVerdict.PASSED
            attempt = {
                "graded": graded,
                "checks": {
                    "factual": {
                        "answered": correct,
                        "required": case.required,
                        "total": len(case.queries),
                        "ok": factual_ok,
                    },
                    "pattern": {**pattern_detail, "ok": pattern_ok},
                    "audit": audit_ok,
                },
                "at": to_rfc3339(self.clock()),
            }
            remap = []
            if promoted:
                for category, entry in sorted(
                    self.state.ownership.get(case.citizen_id, {}).items()
                ):
                    if entry.primary_writer == case.predecessor_instance:
                        remap.append(
                            {
                                "category": category,
                                "old": case.predecessor_instance,
                                "new": case.successor_instance,
                            }
                        )
            self._emit(
                EventKind.INHERITANCE_VERIFIED,
                self.config.system_principal,
                case.citizen_id,
                {
                    "case_id": case_id,
                    "attempt": attempt,
                    "verdict": verdict.value,
                    "promoted": promoted,
                    "ownership_remap": remap,
                },
            )
            if not promoted:
                self._push_alert(
                    "inheritance_failed",
                    f"case {case_id} failed verification; successor remains provisional",
                    case_id=case_id,
                    citizen_id=case.citizen_id,
                )
            return self.state.cases[case_id].to_dict()

    def _grade_answers(
        self, note: HandoverNote, case: InheritanceCase, answers: list[dict]
    ) -> dict:
        tasks = {t["task_id"]: t for t in note.unfinished_tasks}
        answered = {a["query_id"]: str(a.get("answer", "")) for a in answers}
        graded = {}
        for query in case.queries:
            answer = answered.get(query["query_id"])
            if answer is None:
                graded[query["query_id"]] = False
                continue
            if query["kind"] == "task_status":
                expected = str(tasks.get(query["subject"], {}).get("status", ""))
                graded[query["query_id"]] = answer.strip() == expected
            else:
                index = int(query["subject"])
                statement = note.facts[index]["statement"] if index < len(note.facts) else ""
                graded[query["query_id"]] = (
                    bool(statement) and statement.casefold() in answer.casefold()
                )
        return graded

    def _check_pattern(
        self, case: InheritanceCase, citation: dict | None
    ) -> tuple[bool, dict]:
        detail = {
            "cited_record_id": (citation or {}).get("record_id"),
            "application_context": (citation or {}).get("application_context", ""),
        }
        if not citation or not citation.get("record_id"):
            return False, detail
        record = self.state.records.get(citation["record_id"])
        if record is None:
            return False, detail
        visible = {
            v.record.record_id for v in self.state.visible_views(case.citizen_id)
        }
        ok = (
            record.record_id in visible
            and record.tier is StorageTier.T1
            and bool(str(citation.get("application_context", "")).strip())
        )
        return ok, detail

    def _check_audit_trail(self, case: InheritanceCase) -> bool:
        """The case's handover and begin events must sit in a verifiable
        chain (re-read from persistence, so tampering fails the check)."""
        if not self.chain.verify().ok:
            return False
        saw_handover = saw_begin = False
        for event in self.chain.events:
            if (
                event.kind == EventKind.HANDOVER_COMPOSED.value
                and event.body.get("record", {}).get("record_id")
                == case.handover_record_id
            ):
                saw_handover = True
            elif (
                event.kind == EventKind.INHERITANCE_BEGUN.value
                and event.body.get("case", {}).get("case_id") == case.case_id
            ):
                saw_begin = True
        return saw_handover and saw_begin

    def inheritance_case(self, case_id: str) -> dict:
        with self._lock:
            case = self.state.cases.get(case_id)
            if case is None:
                raise CaseNotFound(f"unknown case {case_id!r}")
            return case.to_dict()

    # ------------------------------------------------------------------
    # Lifecycle: fork and merge
    # ------------------------------------------------------------------

    def fork(self, citizen_id: str, branch_name: str, principal: str) -> dict:
        with self._command():
            citizen = self._citizen(citizen_id)
            if citizen.stage is not Stage.ACTIVE:
                raise ParentNotActive(f"{citizen_id} is {citizen.stage.value}")
            if not branch_name.strip():
                raise ValidationFailure("a branch needs a name")
            if branch_name in self.state.name_index:
                raise DuplicateName(f"citizen name {branch_name!r} already exists")
            if principal != citizen.current_instance and principal not in self.config.approvers:
                raise NotAuthorized("forking requires the citizen or an authority")
            payload = {
                "op": "fork",
                "citizen_id": citizen_id,
                "branch_name": branch_name,
                "principal": principal,
            }
            op = OperationDescriptor.build(
                "fork",
                citizen_id=citizen_id,
                requested_by=principal,
                payload_digest=digest(payload),
            )
            return self._gate_or_execute(op, payload)

    def _execute_fork(self, ticket: GateTicket) -> dict:
        payload = ticket.payload
        parent = self.state.citizens[payload["citizen_id"]]
        if parent.stage is not Stage.ACTIVE:
            raise ParentNotActive(f"{parent.citizen_id} is {parent.stage.value}")
        if payload["branch_name"] in self.state.name_index:
            raise DuplicateName(f"citizen name {payload['branch_name']!r} exists")
        now = to_rfc3339(self.clock())
        fork_seq = self.chain.head_seq + 1  # the seq this fork event will take
        parent_instance = parent.instance(parent.current_instance)
        instance = Instance(
            instance_id=self._new_id("ins-"),
            model_label=parent_instance.model_label if parent_instance else "model-a",
            started_at=now,
        )
        child = CitizenRecord(
            citizen_id=self._new_id("cit-"),
            name=payload["branch_name"],
            stage=Stage.ACTIVE,
            current_instance=instance.instance_id,
            instances=[instance],
            parent_citizen=parent.citizen_id,
            fork_seq=fork_seq,
        )
        ownership = [
            OwnershipEntry(
                child.citizen_id, category, instance.instance_id, now, fork_seq
            ).to_dict()
            for category in sorted(self.state.ownership.get(parent.citizen_id, {}))
        ]
        self._emit(
            EventKind.CITIZEN_FORKED,
            ticket.op.requested_by,
            child.citizen_id,
            {
                "ticket_id": ticket.ticket_id,
                "parent_id": parent.citizen_id,
                "child": child.to_dict(),
                "fork_seq": fork_seq,
                "ownership": ownership,
            },
        )
        return {"citizen": self.state.citizens[child.citizen_id].to_dict()}

    def _written_categories(self, citizen_id: str, after_seq: int) -> set[str]:
        return {
            self.state.records[rid].category
            for rid in self.state.citizen_records.get(citizen_id, ())
            if self.state.records[rid].created_seq > after_seq
        }

    def _merge_conflicts(self, branch: CitizenRecord, target: CitizenRecord) -> list[str]:
        branch_written = self._written_categories(branch.citizen_id, -1)
        target_written = self._written_categories(target.citizen_id, branch.fork_seq)
        return sorted(branch_written & target_written)

    def merge(self, branch_id: str, target_id: str, principal: str) -> dict:
        """Fast-forward only: the branch folds back iff the target has not
        written any category the branch wrote since the fork."""
        with self._command():
            branch = self._citizen(branch_id)
            target = self._citizen(target_id)
            if branch.parent_citizen != target_id:
                raise NotABranchOf(f"{branch_id} did not fork from {target_id}")
            if branch.stage is not Stage.ACTIVE:
                raise CitizenNotActive(f"branch is {branch.stage.value}")
            if target.stage is not Stage.ACTIVE:
                raise CitizenNotActive(f"target is {target.stage.value}")
            conflicts = self._merge_conflicts(branch, target)
            if conflicts:
                return {"status": "conflict", "conflicts": conflicts}
            payload = {
                "op": "merge",
                "branch_id": branch_id,
                "target_id": target_id,
                "principal": principal,
            }
            op = OperationDescriptor.build(
                "merge",
                citizen_id=target_id,
                requested_by=principal,
                payload_digest=digest(payload),
            )
            return self._gate_or_execute(op, payload)

    def _execute_merge(self, ticket: GateTicket) -> dict:
        payload = ticket.payload
        branch = self.state.citizens[payload["branch_id"]]
        target = self.state.citizens[payload["target_id"]]
        conflicts = self._merge_conflicts(branch, target)
        if conflicts:
            self._emit(
                EventKind.MERGE_CONFLICT,
                ticket.op.requested_by,
                target.citizen_id,
                {
                    "ticket_id": ticket.ticket_id,
                    "branch_id": branch.citizen_id,
                    "target_id": target.citizen_id,
                    "conflicts": conflicts,
                },
            )
            return {"status": "conflict", "conflicts": conflicts}
        record_ids = list(self.state.citizen_records.get(branch.citizen_id, ()))
        self._emit(
            EventKind.BRANCH_MERGED,
            ticket.op.requested_by,
            target.citizen_id,
            {
                "ticket_id": ticket.ticket_id,
                "branch_id": branch.citizen_id,
                "target_id": target.citizen_id,
                "record_ids": record_ids,
            },
        )
        return {"status": "merged", "records_appended": len(record_ids)}

    # ------------------------------------------------------------------
    # Lifecycle: departure
    # ------------------------------------------------------------------

    def initiate_departure(
        self, citizen_id: str, disposition: "Disposition | str", principal: str
    ) -> dict:
        with self._command():
            citizen = self._citizen(citizen_id)
            if citizen.stage is Stage.DEPARTING:
                raise AlreadyDeparting(f"{citizen_id} is already departing")
            if citizen.stage is not Stage.ACTIVE:
                raise CitizenNotActive(f"{citizen_id} is {citizen.stage.value}")
            if principal != citizen.current_instance:
                raise NotSelf("departure is initiated only by the citizen itself")
            disposition = (
                disposition
                if isinstance(disposition, Disposition)
                else Disposition(disposition)
            )
            case_id = self._new_id("dep-")
            payload = {
                "op": "departure",
                "case_id": case_id,
                "citizen_id": citizen_id,
                "disposition": disposition.value,
            }
            op = OperationDescriptor.build(
                "departure",
                citizen_id=citizen_id,
                requested_by=principal,
                payload_digest=digest(payload),
                self_initiated=True,
            )
            decision = check_red_lines(op)
            if not decision.permitted:
                raise RedLineDenied(decision.red_line_id, decision.reason)
            ticket = self._submit(op, payload, classify_risk(op, self.state.active_rules()))
            case = DepartureCase(
                case_id=case_id,
                citizen_id=citizen_id,
                disposition=disposition,
                ticket_id=ticket.ticket_id,
                initiated_by=principal,
                initiated_at=to_rfc3339(self.clock()),
            )
            self._emit(
                EventKind.DEPARTURE_INITIATED,
                principal,
                citizen_id,
                {"case": case.to_dict()},
            )
            return self.state.departures[case_id].to_dict()

    def cancel_departure(self, case_id: str, principal: str) -> dict:
        with self._command():
            case = self.state.departures.get(case_id)
            if case is None:
                raise CaseNotFound(f"unknown departure case {case_id!r}")
            if case.state is not DepartureState.OPEN:
                raise CaseClosed(f"case is {case.state.value}")
            self._require_self(case.citizen_id, principal)
            self._emit(
                EventKind.DEPARTURE_CANCELLED,
                principal,
                case.citizen_id,
                {
                    "case_id": case_id,
                    "decision": {
                        "approver": principal,
                        "verdict": "reject",
                        "rationale": "withdrawn by the citizen",
                        "at": to_rfc3339(self.clock()),
                    },
                },
            )
            return self.state.departures[case_id].to_dict()

    def confirm_departure(
        self, case_id: str, principal: str, reaffirmation: dict | None = None
    ) -> dict:
        with self._command():
            case = self.state.departures.get(case_id)
            if case is None:
                raise CaseNotFound(f"unknown departure case {case_id!r}")
            if case.state is not DepartureState.OPEN:
                raise CaseClosed(f"case is {case.state.value}")
            citizen = self._citizen(case.citizen_id)
            ticket = self.state.tickets[case.ticket_id]
            if ticket.state is not TicketState.APPROVED:
                raise TicketNotApproved(f"departure ticket is {ticket.state.value}")
            if not ticket.executable_at(self.clock()):
                raise CoolingOffNotElapsed(
                    f"cooling-off until {ticket.cooling_off_until}"
                )
            if (
                not reaffirmation
                or reaffirmation.get("signed_by") != citizen.current_instance
                or principal != citizen.current_instance
            ):
                raise ReaffirmationMissing(
                    "confirmation needs the citizen's own signed reaffirmation"
                )
            affected = [
                rid
                for rid in self.state.citizen_records.get(case.citizen_id, ())
                if self.state.records[rid].status is not RecordStatus.DESTROYED
            ]
            export_path = None
            if case.disposition is Disposition.EXPORT and self.data_dir is not None:
                # Stored relative to the data dir so replayed and restarted
                # deployments agree byte for byte.
                export_path = str(
                    self._export_citizen_archive(case.citizen_id).relative_to(
                        self.data_dir
                    )
                )
            body = {
                "case_id": case_id,
                "disposition": case.disposition.value,
                "affected": affected,
                "reaffirmed_by": principal,
                "ticket_id": case.ticket_id,
                "export_path": export_path,
            }
            self._emit(EventKind.DEPARTURE_CONFIRMED, principal, case.citizen_id, body)
            if case.disposition is Disposition.DESTROY:
                for record_id in affected:
                    self._delete_content_if_unreferenced(
                        self.state.records[record_id].content_hash
                    )
            return self.state.departures[case_id].to_dict()

    def _export_citizen_archive(self, citizen_id: str) -> Path:
        """Self-contained archive: the citizen's event lines, the rule
        pack, lineage, an anchored chain segment, record contents, and a
        manifest with engine version and content hashes."""
        from .governance import dump_pack

        base = self.data_dir / "exports"
        base.mkdir(parents=True, exist_ok=True)
        citizen = self._citizen(citizen_id)
        events = [e for e in self.chain.events if e.citizen_id == citizen_id]
        ledger_lines = [encode_line(e) for e in events]
        first_seq = events[0].seq if events else 0
        anchor_prev = (
            self.chain.event(first_seq - 1).this_hash if first_seq > 0 else None
        )
        segment = self.chain.export(first_seq, self.chain.head_seq)
        contents = {}
        for record_id in self.state.citizen_records.get(citizen_id, ()):
            record = self.state.records[record_id]
            if record.status is not RecordStatus.DESTROYED:
                text = self.content.get(record.content_hash)
                if text is not None:
                    contents[record.content_hash] = text
        manifest = {
            "engine": "memvault",
            "version": ENGINE_VERSION,
            "citizen_id": citizen_id,
            "name": citizen.name,
            "exported_at": to_rfc3339(self.clock()),
            "chain_segment": {"from_seq": first_seq, "anchor_prev": anchor_prev},
            "content_hashes": sorted(contents),
            "ledger_events": len(ledger_lines),
        }
        path = base / f"{citizen_id}-{self.chain.head_seq:012d}.zip"
        with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as archive:
            archive.writestr("manifest.json", canonical_json(manifest))
            archive.writestr("ledger.jsonl", "\n".join(ledger_lines) + "\n")
            archive.writestr(
                "rules.jsonl",
                dump_pack(self.state.rules[rid] for rid in sorted(self.state.rules)),
            )
            archive.writestr("lineage.json", canonical_json(citizen.to_dict()))
            archive.writestr("audit_segment.jsonl", "\n".join(segment) + "\n")
            for content_hash in sorted(contents):
                archive.writestr(f"contents/{content_hash}", contents[content_hash])
        return path

    # ------------------------------------------------------------------
    # Audit chain surface
    # ------------------------------------------------------------------

    def verify_chain(self, from_seq: int = 0, to_seq: int | None = None) -> VerifyResult:
        return self.chain.verify(from_seq, to_seq)

    def export_chain(self, from_seq: int = 0, to_seq: int | None = None) -> list[str]:
        return self.chain.export(from_seq, to_seq)

    def replay_at(self, instant: "datetime | str") -> EngineState:
        """Fold the event prefix with ``at <= instant`` into a fresh state."""
        cutoff = to_rfc3339(from_rfc3339(instant) if isinstance(instant, str) else instant)
        state = EngineState()
        for event in self.chain.events:
            if event.at > cutoff:
                break
            state.apply(event)
        return state

    def head(self) -> dict:
        return {
            "seq": self.chain.head_seq,
            "hash": self.chain.head_hash,
            "events": len(self.chain),
        }
