"""Pure ticket state machine checks; the engine-level gate behavior is
covered in test_ledger_ops and the exhaustive model check lives in the
acceptance suite."""

from datetime import timedelta

import pytest

from memvault.clock import ManualClock, to_rfc3339
from memvault.errors import (
    DuplicateApprover,
    EmptyRationale,
    NotAuthorizedForTier,
    TicketClosed,
)
from memvault.gate import (
    Decision,
    GateTicket,
    QUORUM,
    TicketState,
    Verdict,
    check_decision,
    should_suspend,
)
from memvault.governance import OperationDescriptor, RiskTier

CLOCK = ManualClock()


def make_ticket(risk=RiskTier.R2, state=TicketState.PENDING, decisions=(), cooling=None):
    op = OperationDescriptor.build(
        "distill",
        citizen_id="che",
        tier="T1",
        category="narrative",
        requested_by="i1",
        payload_digest="f" * 64,
    )
    return GateTicket(
        ticket_id="tkt-1",
        op=op,
        risk=risk,
        state=state,
        decisions=list(decisions),
        created_at=to_rfc3339(CLOCK()),
        deadline=to_rfc3339(CLOCK() + timedelta(hours=72)),
        cooling_off_until=cooling,
    )


def approve(who):
    return Decision(who, Verdict.APPROVE, "fine", to_rfc3339(CLOCK()))


def test_quorum_table():
    assert QUORUM[RiskTier.R2] == 1
    assert QUORUM[RiskTier.R3] == 2
    assert QUORUM[RiskTier.R4] == 2


def test_single_approval_closes_r2():
    ticket = make_ticket(RiskTier.R2)
    state = check_decision(ticket, "rev-1", Verdict.APPROVE, "ok", RiskTier.R2)
    assert state is TicketState.APPROVED


def test_r3_needs_two_distinct():
    ticket = make_ticket(RiskTier.R3)
    assert (
        check_decision(ticket, "a", Verdict.APPROVE, "ok", RiskTier.R3)
        is TicketState.PENDING
    )
    ticket.decisions.append(approve("a"))
    assert (
        check_decision(ticket, "b", Verdict.APPROVE, "ok", RiskTier.R3)
        is TicketState.APPROVED
    )


def test_same_principal_cannot_double_approve():
    ticket = make_ticket(RiskTier.R3, decisions=[approve("a")])
    with pytest.raises(DuplicateApprover):
        check_decision(ticket, "a", Verdict.APPROVE, "again", RiskTier.R3)


def test_single_reject_is_veto():
    ticket = make_ticket(RiskTier.R3, decisions=[approve("a")])
    assert (
        check_decision(ticket, "b", Verdict.REJECT, "no", RiskTier.R4)
        is TicketState.REJECTED
    )


def test_tier_ceiling_enforced():
    ticket = make_ticket(RiskTier.R4)
    with pytest.raises(NotAuthorizedForTier):
        check_decision(ticket, "rev-1", Verdict.APPROVE, "ok", RiskTier.R2)
    with pytest.raises(NotAuthorizedForTier):
        check_decision(ticket, "nobody", Verdict.APPROVE, "ok", None)


def test_rationale_required():
    ticket = make_ticket()
    with pytest.raises(EmptyRationale):
        check_decision(ticket, "rev-1", Verdict.APPROVE, "   ", RiskTier.R2)


def test_closed_tickets_refuse_decisions():
    for state in (TicketState.APPROVED, TicketState.REJECTED):
        ticket = make_ticket(state=state)
        with pytest.raises(TicketClosed):
            check_decision(ticket, "rev-1", Verdict.APPROVE, "ok", RiskTier.R4)


def test_suspended_stays_suspended_below_quorum():
    ticket = make_ticket(RiskTier.R3, state=TicketState.SUSPENDED)
    assert (
        check_decision(ticket, "a", Verdict.APPROVE, "ok", RiskTier.R3)
        is TicketState.SUSPENDED
    )


def test_deadline_boundary():
    ticket = make_ticket()
    just_before = CLOCK() + timedelta(hours=72) - timedelta(milliseconds=1)
    just_after = CLOCK() + timedelta(hours=72, seconds=1)
    assert not should_suspend(ticket, just_before)
    assert not should_suspend(ticket, CLOCK() + timedelta(hours=72))
    assert should_suspend(ticket, just_after)
    assert not should_suspend(
        make_ticket(state=TicketState.APPROVED), just_after
    )


def test_cooling_off_gates_executability():
    cooling_until = to_rfc3339(CLOCK() + timedelta(days=7))
    ticket = make_ticket(RiskTier.R4, state=TicketState.APPROVED, cooling=cooling_until)
    assert not ticket.executable_at(CLOCK())
    assert ticket.executable_at(CLOCK() + timedelta(days=7))
    ticket.consumed = True
    assert not ticket.executable_at(CLOCK() + timedelta(days=8))


def test_ticket_round_trips_through_dict():
    ticket = make_ticket(RiskTier.R4, decisions=[approve("a")], cooling="2026-01-08T00:00:00.000000Z")
    clone = GateTicket.from_dict(ticket.to_dict())
    assert clone.to_dict() == ticket.to_dict()


# ---------------------------------------------------------------------------
# Engine-level gate behavior
# ---------------------------------------------------------------------------


def submit_ticket(engine, citizen):
    cid, inst = citizen
    outcome = engine.append_memory(cid, "narrative", "T1", "pending insight", principal=inst)
    return outcome["ticket"]["ticket_id"]


def test_sweep_suspends_only_past_deadline_with_alert(engine, citizen, clock):
    ticket_id = submit_ticket(engine, citizen)
    clock.advance(timedelta(hours=72) - timedelta(milliseconds=1))
    assert engine.sweep_timeouts() == []
    clock.advance(timedelta(seconds=2))
    assert engine.sweep_timeouts() == [ticket_id]
    assert engine.state.tickets[ticket_id].state is TicketState.SUSPENDED
    kinds = [a["kind"] for a in engine.alerts_since(0)]
    assert "ticket_suspended" in kinds
    # C3: the clock never decides; a suspended ticket still takes decisions
    assert engine.sweep_timeouts() == []  # idempotent at the same now
    result = engine.decide(ticket_id, "approve", "rev-1", "late but reviewed")
    assert result["ticket"]["state"] == "approved" and result["executed"]


def test_suspended_set_depends_only_on_max_now(clock):
    """Timeout invariance: sweep frequency does not matter."""
    from conftest import make_config
    from memvault.engine import MemoryEngine

    def build(sweep_times):
        local_clock = ManualClock(clock())
        engine = MemoryEngine(make_config(), clock=local_clock)
        born = engine.birth("Sweepy", "c")
        engine.append_memory(
            born["citizen_id"], "narrative", "T1", "x",
            principal=born["current_instance"],
        )
        for offset in sweep_times:
            engine.sweep_timeouts(now=local_clock() + offset)
        return {
            tid for tid, t in engine.state.tickets.items()
            if t.state is TicketState.SUSPENDED
        }

    sparse = build([timedelta(hours=100)])
    dense = build([timedelta(hours=h) for h in (1, 10, 50, 71, 73, 100)])
    assert len(sparse) == len(dense) == 1


def test_pending_listing_order_matches_bruteforce(engine, citizen, clock):
    cid, inst = citizen
    ids = []
    for i in range(8):
        outcome = engine.append_memory(
            cid, "narrative", "T1", f"insight {i}", principal=inst
        )
        ids.append(outcome["ticket"]["ticket_id"])
        clock.advance(60 if i % 2 else 0)
    listed = engine.pending()
    expected = sorted(listed, key=lambda t: (t.created_at, t.ticket_id))
    assert [t.ticket_id for t in listed] == [t.ticket_id for t in expected]
    only_r2 = engine.pending(risk="R2")
    assert {t.ticket_id for t in only_r2} == set(ids)
