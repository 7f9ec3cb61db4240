"""Gate tickets: the pending-approval state machine.

Pure functions here decide state transitions; the engine wraps them with
audit events and execution. Keeping the machine side-effect free is what
makes the exhaustive model check in the acceptance suite feasible.

Invariants enforced:
  * Approved requires the quorum for the ticket's risk tier, with every
    approver distinct and authorized for that tier.
  * A single Reject closes the ticket (single-veto).
  * The passage of time alone can only move Pending to Suspended -- never
    to Approved or Rejected (red line C3).
  * R4 tickets become executable only after the cooling-off instant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum

from .clock import from_rfc3339
from .errors import (
    DuplicateApprover,
    EmptyRationale,
    NotAuthorizedForTier,
    TicketClosed,
)
from .governance import OperationDescriptor, RiskTier


class TicketState(str, Enum):
    PENDING = "pending"
    APPROVED = "approved"
    REJECTED = "rejected"
    SUSPENDED = "suspended"


class Verdict(str, Enum):
    APPROVE = "approve"
    REJECT = "reject"


QUORUM = {RiskTier.R2: 1, RiskTier.R3: 2, RiskTier.R4: 2}


@dataclass
class Decision:
    approver: str
    verdict: Verdict
    rationale: str
    at: str

    def to_dict(self) -> dict:
        return {
            "approver": self.approver,
            "verdict": self.verdict.value,
            "rationale": self.rationale,
            "at": self.at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Decision":
        return cls(
            approver=data["approver"],
            verdict=Verdict(data["verdict"]),
            rationale=data["rationale"],
            at=data["at"],
        )


@dataclass
class GateTicket:
    ticket_id: str
    op: OperationDescriptor
    risk: RiskTier
    state: TicketState
    decisions: list[Decision]
    created_at: str
    deadline: str
    cooling_off_until: str | None = None
    payload: dict = field(default_factory=dict)
    consumed: bool = False
    executed_seq: int | None = None

    @property
    def payload_digest(self) -> str:
        return self.op.payload_digest

    @property
    def open(self) -> bool:
        return self.state in (TicketState.PENDING, TicketState.SUSPENDED)

    def approvals(self) -> list[str]:
        return [d.approver for d in self.decisions if d.verdict is Verdict.APPROVE]

    def executable_at(self, now: datetime) -> bool:
        """Approved, unconsumed, and past any cooling-off instant."""
        if self.state is not TicketState.APPROVED or self.consumed:
            return False
        if self.cooling_off_until is not None:
            return now >= from_rfc3339(self.cooling_off_until)
        return True

    def to_dict(self) -> dict:
        return {
            "ticket_id": self.ticket_id,
            "op": self.op.to_dict(),
            "risk": self.risk.name,
            "state": self.state.value,
            "decisions": [d.to_dict() for d in self.decisions],
            "created_at": self.created_at,
            "deadline": self.deadline,
            "cooling_off_until": self.cooling_off_until,
            "payload": self.payload,
            "consumed": self.consumed,
            "executed_seq": self.executed_seq,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GateTicket":
        return cls(
            ticket_id=data["ticket_id"],
            op=OperationDescriptor.from_dict(data["op"]),
            risk=RiskTier.parse(data["risk"]),
            state=TicketState(data["state"]),
            decisions=[Decision.from_dict(d) for d in data.get("decisions", [])],
            created_at=data["created_at"],
            deadline=data["deadline"],
            cooling_off_until=data.get("cooling_off_until"),
            payload=data.get("payload", {}),
            consumed=data.get("consumed", False),
            executed_seq=data.get("executed_seq"),
        )


def check_decision(
    ticket: GateTicket,
    approver: str,
    verdict: Verdict,
    rationale: str,
    approver_ceiling: RiskTier | None,
) -> TicketState:
    """Validate a decision and compute the resulting state. Pure.

    A Suspended ticket that gains a quorum-incomplete approval stays
    Suspended (the only exits from Suspended are explicit Approve with
    quorum, or Reject).
    """
    if not ticket.open:
        raise TicketClosed(f"ticket {ticket.ticket_id} is {ticket.state.value}")
    if approver_ceiling is None or approver_ceiling < ticket.risk:
        raise NotAuthorizedForTier(
            f"{approver} cannot decide {ticket.risk.name} tickets"
        )
    if not rationale.strip():
        raise EmptyRationale("a decision requires a rationale")
    if approver in {d.approver for d in ticket.decisions}:
        raise DuplicateApprover(f"{approver} already decided this ticket")
    if verdict is Verdict.REJECT:
        return TicketState.REJECTED
    approvers = set(ticket.approvals()) | {approver}
    if len(approvers) >= QUORUM[ticket.risk]:
        return TicketState.APPROVED
    return ticket.state  # Pending stays Pending; Suspended stays Suspended


def past_deadline(ticket: GateTicket, now: datetime) -> bool:
    return now > from_rfc3339(ticket.deadline)


def should_suspend(ticket: GateTicket, now: datetime) -> bool:
    return ticket.state is TicketState.PENDING and past_deadline(ticket, now)
