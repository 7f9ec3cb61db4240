"""Engine state as a pure fold over the audit chain.

``EngineState.apply`` is the only mutator: the live engine applies each
event right after persisting it, and point-in-time replay folds a prefix
of the chain into a fresh state with the same function. Anything the
engine needs to remember must therefore round-trip through event bodies.

Fork views are copy-on-write at an audit sequence number: a child sees
its parent's records exactly as they stood at the fork seq, which the
per-record transition history makes an O(log n) lookup.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .events import AuditEvent, EventKind
from .gate import Decision, GateTicket, TicketState
from .governance import GovernanceRule, RULE_ACTIVE, RULE_SUPERSEDED
from .lifecycle import (
    CitizenRecord,
    DepartureCase,
    DepartureState,
    CaseVerdict,
    InheritanceCase,
    Instance,
    Stage,
)
from .records import MemoryRecord, OwnershipEntry, RecordStatus


@dataclass
class RecordView:
    """A record as seen from one citizen's vantage at one moment."""

    record: MemoryRecord
    status: RecordStatus
    weight: float


@dataclass
class EngineState:
    rules: dict[str, GovernanceRule] = field(default_factory=dict)
    citizens: dict[str, CitizenRecord] = field(default_factory=dict)
    name_index: dict[str, str] = field(default_factory=dict)
    records: dict[str, MemoryRecord] = field(default_factory=dict)
    citizen_records: dict[str, list[str]] = field(default_factory=dict)
    ownership: dict[str, dict[str, OwnershipEntry]] = field(default_factory=dict)
    ownership_history: list[dict] = field(default_factory=list)
    tickets: dict[str, GateTicket] = field(default_factory=dict)
    cases: dict[str, InheritanceCase] = field(default_factory=dict)
    departures: dict[str, DepartureCase] = field(default_factory=dict)
    applied_seq: int = -1

    # -- lookups ---------------------------------------------------------------

    def active_rules(self) -> tuple[GovernanceRule, ...]:
        return tuple(
            self.rules[rid]
            for rid in sorted(self.rules)
            if self.rules[rid].status == RULE_ACTIVE
        )

    def owner_of(self, citizen_id: str, category: str) -> OwnershipEntry | None:
        return self.ownership.get(citizen_id, {}).get(category)

    def visible_views(
        self, citizen_id: str, limit_seq: int | None = None
    ) -> list[RecordView]:
        """All records in a citizen's ledger view, copy-on-write aware.

        ``limit_seq`` restricts to state as of that audit seq (fork
        points); None means live. Parent records are always frozen at the
        fork seq regardless of later parent-side transitions.
        """
        citizen = self.citizens[citizen_id]
        views: list[RecordView] = []
        for record_id in self.citizen_records.get(citizen_id, ()):  # own writes
            record = self.records[record_id]
            if limit_seq is not None and record.created_seq > limit_seq:
                continue
            status, weight = record.state_at(limit_seq)
            views.append(RecordView(record, status, weight))
        for branch_id, record_ids, merge_seq in citizen.merged_branches:
            if limit_seq is not None and merge_seq > limit_seq:
                continue
            for record_id in record_ids:
                record = self.records[record_id]
                status, weight = record.state_at(limit_seq)
                views.append(RecordView(record, status, weight))
        if citizen.parent_citizen is not None and citizen.fork_seq is not None:
            parent_limit = citizen.fork_seq
            if limit_seq is not None:
                parent_limit = min(parent_limit, limit_seq)
            views.extend(self.visible_views(citizen.parent_citizen, parent_limit))
        return views

    def superseded_ids(self, views: list[RecordView]) -> set[str]:
        """Records with an active successor within the same view."""
        out = set()
        for view in views:
            if view.status is RecordStatus.ACTIVE and view.record.supersedes:
                out.add(view.record.supersedes)
        return out

    # -- reducer -----------------------------------------------------------------

    def apply(self, event: AuditEvent) -> None:
        handler = _HANDLERS.get(event.kind)
        if handler is not None:
            handler(self, event)
        self.applied_seq = event.seq

    def _apply_rule(self, data: dict) -> None:
        rule = GovernanceRule.from_dict(data)
        self.rules[rule.rule_id] = rule
        if rule.status == RULE_ACTIVE and rule.supersedes in self.rules:
            self.rules[rule.supersedes].status = RULE_SUPERSEDED

    def _add_record(self, data: dict) -> None:
        record = MemoryRecord.from_dict(data)
        self.records[record.record_id] = record
        self.citizen_records.setdefault(record.citizen_id, []).append(record.record_id)

    def _open_ownership(self, data: dict) -> None:
        entry = OwnershipEntry.from_dict(data)
        self.ownership.setdefault(entry.citizen_id, {})[entry.category] = entry

    def _close_ownership(self, citizen_id: str, category: str, at: str, seq: int) -> None:
        entry = self.ownership.get(citizen_id, {}).pop(category, None)
        if entry is not None:
            self.ownership_history.append(
                {**entry.to_dict(), "closed_at": at, "closed_seq": seq}
            )

    def _consume_ticket(self, ticket_id: str | None, seq: int) -> None:
        if ticket_id and ticket_id in self.tickets:
            ticket = self.tickets[ticket_id]
            ticket.consumed = True
            ticket.executed_seq = seq

    # -- serialization -------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "rules": {k: v.to_dict() for k, v in self.rules.items()},
            "citizens": {k: v.to_dict() for k, v in self.citizens.items()},
            "name_index": dict(self.name_index),
            "records": {k: v.to_dict() for k, v in self.records.items()},
            "citizen_records": {k: list(v) for k, v in self.citizen_records.items()},
            "ownership": {
                cid: {cat: e.to_dict() for cat, e in by_cat.items()}
                for cid, by_cat in self.ownership.items()
            },
            "ownership_history": list(self.ownership_history),
            "tickets": {k: v.to_dict() for k, v in self.tickets.items()},
            "cases": {k: v.to_dict() for k, v in self.cases.items()},
            "departures": {k: v.to_dict() for k, v in self.departures.items()},
            "applied_seq": self.applied_seq,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EngineState":
        state = cls()
        state.rules = {
            k: GovernanceRule.from_dict(v) for k, v in data.get("rules", {}).items()
        }
        state.citizens = {
            k: CitizenRecord.from_dict(v) for k, v in data.get("citizens", {}).items()
        }
        state.name_index = dict(data.get("name_index", {}))
        state.records = {
            k: MemoryRecord.from_dict(v) for k, v in data.get("records", {}).items()
        }
        state.citizen_records = {
            k: list(v) for k, v in data.get("citizen_records", {}).items()
        }
        state.ownership = {
            cid: {cat: OwnershipEntry.from_dict(e) for cat, e in by_cat.items()}
            for cid, by_cat in data.get("ownership", {}).items()
        }
        state.ownership_history = list(data.get("ownership_history", []))
        state.tickets = {
            k: GateTicket.from_dict(v) for k, v in data.get("tickets", {}).items()
        }
        state.cases = {
            k: InheritanceCase.from_dict(v) for k, v in data.get("cases", {}).items()
        }
        state.departures = {
            k: DepartureCase.from_dict(v) for k, v in data.get("departures", {}).items()
        }
        state.applied_seq = data.get("applied_seq", -1)
        return state


# ---------------------------------------------------------------------------
# Event handlers
# ---------------------------------------------------------------------------


def _on_genesis(state: EngineState, event: AuditEvent) -> None:
    for rule in event.body.get("rules", []):
        state._apply_rule(rule)


def _on_citizen_born(state: EngineState, event: AuditEvent) -> None:
    citizen = CitizenRecord.from_dict(event.body["citizen"])
    state.citizens[citizen.citizen_id] = citizen
    state.name_index[citizen.name] = citizen.citizen_id
    for record in event.body.get("records", []):
        state._add_record(record)
    for rule in event.body.get("rules", []):
        state._apply_rule(rule)
    for entry in event.body.get("ownership", []):
        state._open_ownership(entry)


def _on_rule_registered(state: EngineState, event: AuditEvent) -> None:
    state._apply_rule(event.body["rule"])
    state._consume_ticket(event.body.get("ticket_id"), event.seq)


def _on_ticket_submitted(state: EngineState, event: AuditEvent) -> None:
    ticket = GateTicket.from_dict(event.body["ticket"])
    state.tickets[ticket.ticket_id] = ticket


def _on_ticket_decided(state: EngineState, event: AuditEvent) -> None:
    ticket = state.tickets[event.body["ticket_id"]]
    ticket.decisions.append(Decision.from_dict(event.body["decision"]))
    ticket.state = TicketState(event.body["new_state"])


def _on_ticket_suspended(state: EngineState, event: AuditEvent) -> None:
    state.tickets[event.body["ticket_id"]].state = TicketState.SUSPENDED


def _on_memory_written(state: EngineState, event: AuditEvent) -> None:
    state._add_record(event.body["record"])
    if event.body.get("ownership"):
        state._open_ownership(event.body["ownership"])
    state._consume_ticket(event.body.get("ticket_id"), event.seq)


def _on_recall_weight_set(state: EngineState, event: AuditEvent) -> None:
    record = state.records[event.body["record_id"]]
    record.transition(event.seq, RecordStatus.ACTIVE, event.body["new_weight"])


def _on_memory_forgotten(state: EngineState, event: AuditEvent) -> None:
    record = state.records[event.body["record_id"]]
    record.transition(event.seq, RecordStatus.FORGOTTEN, 0.0)


def _on_memory_unforgotten(state: EngineState, event: AuditEvent) -> None:
    record = state.records[event.body["record_id"]]
    record.transition(event.seq, RecordStatus.ACTIVE, event.body["restored_weight"])


def _on_memory_archived(state: EngineState, event: AuditEvent) -> None:
    record = state.records[event.body["record_id"]]
    record.transition(event.seq, RecordStatus.ARCHIVED, 0.0)


def _on_memory_revived(state: EngineState, event: AuditEvent) -> None:
    record = state.records[event.body["record_id"]]
    record.transition(event.seq, RecordStatus.ACTIVE, event.body["restored_weight"])
    state._consume_ticket(event.body.get("ticket_id"), event.seq)


def _on_memory_destroyed(state: EngineState, event: AuditEvent) -> None:
    record = state.records[event.body["record_id"]]
    record.transition(event.seq, RecordStatus.DESTROYED, 0.0)
    state._consume_ticket(event.body.get("ticket_id"), event.seq)


def _on_ownership_transferred(state: EngineState, event: AuditEvent) -> None:
    body = event.body
    state._close_ownership(body["citizen_id"], body["category"], event.at, event.seq)
    state._open_ownership(
        {
            "citizen_id": body["citizen_id"],
            "category": body["category"],
            "primary_writer": body["new_writer"],
            "since": event.at,
            "since_seq": event.seq,
        }
    )
    state._consume_ticket(body.get("ticket_id"), event.seq)


def _on_handover_composed(state: EngineState, event: AuditEvent) -> None:
    state._add_record(event.body["record"])


def _on_inheritance_begun(state: EngineState, event: AuditEvent) -> None:
    case = InheritanceCase.from_dict(event.body["case"])
    state.cases[case.case_id] = case
    citizen = state.citizens[case.citizen_id]
    predecessor = citizen.instance(case.predecessor_instance)
    if predecessor is not None:
        predecessor.ended_at = event.at
        predecessor.end_reason = "inheritance"
    citizen.instances.append(Instance.from_dict(event.body["successor"]))
    citizen.stage = Stage.INHERITING
    citizen.current_instance = None


def _on_inheritance_verified(state: EngineState, event: AuditEvent) -> None:
    case = state.cases[event.body["case_id"]]
    case.attempts.append(event.body["attempt"])
    case.verdict = CaseVerdict(event.body["verdict"])
    case.checks = event.body["attempt"]["checks"]
    if event.body.get("promoted"):
        citizen = state.citizens[case.citizen_id]
        citizen.stage = Stage.ACTIVE
        citizen.current_instance = case.successor_instance
        successor = citizen.instance(case.successor_instance)
        if successor is not None:
            successor.provisional = False
        for remap in event.body.get("ownership_remap", []):
            state._close_ownership(
                case.citizen_id, remap["category"], event.at, event.seq
            )
            state._open_ownership(
                {
                    "citizen_id": case.citizen_id,
                    "category": remap["category"],
                    "primary_writer": remap["new"],
                    "since": event.at,
                    "since_seq": event.seq,
                }
            )


def _on_citizen_forked(state: EngineState, event: AuditEvent) -> None:
    child = CitizenRecord.from_dict(event.body["child"])
    state.citizens[child.citizen_id] = child
    state.name_index[child.name] = child.citizen_id
    parent = state.citizens[event.body["parent_id"]]
    parent.fork_children.append(child.citizen_id)
    for entry in event.body.get("ownership", []):
        state._open_ownership(entry)
    state._consume_ticket(event.body.get("ticket_id"), event.seq)


def _on_branch_merged(state: EngineState, event: AuditEvent) -> None:
    body = event.body
    target = state.citizens[body["target_id"]]
    target.merged_branches.append(
        (body["branch_id"], list(body["record_ids"]), event.seq)
    )
    branch = state.citizens[body["branch_id"]]
    branch.stage = Stage.DEPARTED
    branch.current_instance = None
    open_instance = branch.open_instance()
    if open_instance is not None:
        open_instance.ended_at = event.at
        open_instance.end_reason = "merged"
    state._consume_ticket(body.get("ticket_id"), event.seq)


def _on_merge_conflict(state: EngineState, event: AuditEvent) -> None:
    state._consume_ticket(event.body.get("ticket_id"), event.seq)


def _on_departure_initiated(state: EngineState, event: AuditEvent) -> None:
    case = DepartureCase.from_dict(event.body["case"])
    state.departures[case.case_id] = case
    state.citizens[case.citizen_id].stage = Stage.DEPARTING


def _on_departure_cancelled(state: EngineState, event: AuditEvent) -> None:
    case = state.departures[event.body["case_id"]]
    case.state = DepartureState.CANCELLED
    state.citizens[case.citizen_id].stage = Stage.ACTIVE
    ticket = state.tickets.get(case.ticket_id)
    if ticket is not None and ticket.open:
        ticket.decisions.append(Decision.from_dict(event.body["decision"]))
        ticket.state = TicketState.REJECTED


def _on_departure_confirmed(state: EngineState, event: AuditEvent) -> None:
    body = event.body
    case = state.departures[body["case_id"]]
    case.state = DepartureState.CONFIRMED
    case.export_path = body.get("export_path")
    terminal = (
        RecordStatus.DESTROYED if body["disposition"] == "destroy" else RecordStatus.ARCHIVED
    )
    for record_id in body.get("affected", []):
        state.records[record_id].transition(event.seq, terminal, 0.0)
    citizen = state.citizens[case.citizen_id]
    citizen.stage = Stage.DEPARTED
    citizen.current_instance = None
    open_instance = citizen.open_instance()
    if open_instance is not None:
        open_instance.ended_at = event.at
        open_instance.end_reason = "departure"
    state._consume_ticket(body.get("ticket_id"), event.seq)


_HANDLERS = {
    EventKind.GENESIS.value: _on_genesis,
    EventKind.CITIZEN_BORN.value: _on_citizen_born,
    EventKind.RULE_REGISTERED.value: _on_rule_registered,
    EventKind.TICKET_SUBMITTED.value: _on_ticket_submitted,
    EventKind.TICKET_DECIDED.value: _on_ticket_decided,
    EventKind.TICKET_SUSPENDED.value: _on_ticket_suspended,
    EventKind.MEMORY_APPENDED.value: _on_memory_written,
    EventKind.MEMORY_CORRECTED.value: _on_memory_written,
    EventKind.MEMORY_DISTILLED.value: _on_memory_written,
    EventKind.RECALL_WEIGHT_SET.value: _on_recall_weight_set,
    EventKind.MEMORY_FORGOTTEN.value: _on_memory_forgotten,
    EventKind.MEMORY_UNFORGOTTEN.value: _on_memory_unforgotten,
    EventKind.MEMORY_ARCHIVED.value: _on_memory_archived,
    EventKind.MEMORY_REVIVED.value: _on_memory_revived,
    EventKind.MEMORY_DESTROYED.value: _on_memory_destroyed,
    EventKind.OWNERSHIP_TRANSFERRED.value: _on_ownership_transferred,
    EventKind.HANDOVER_COMPOSED.value: _on_handover_composed,
    EventKind.INHERITANCE_BEGUN.value: _on_inheritance_begun,
    EventKind.INHERITANCE_VERIFIED.value: _on_inheritance_verified,
    EventKind.CITIZEN_FORKED.value: _on_citizen_forked,
    EventKind.BRANCH_MERGED.value: _on_branch_merged,
    EventKind.MERGE_CONFLICT.value: _on_merge_conflict,
    EventKind.DEPARTURE_INITIATED.value: _on_departure_initiated,
    EventKind.DEPARTURE_CANCELLED.value: _on_departure_cancelled,
    EventKind.DEPARTURE_CONFIRMED.value: _on_departure_confirmed,
}
