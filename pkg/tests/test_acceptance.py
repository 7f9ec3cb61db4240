"""Acceptance suite: one test per criterion, each printing a PASS line.

Every expected value is either trivially pinned, re-derived by an
independent oracle inside the test, or exhaustively enumerated. Nothing
here trusts the code path it is checking.
"""

import fnmatch
import itertools
import random
from datetime import timedelta

import pytest

from memvault.canonical import canonical_json
from memvault.chain import AuditChain
from memvault.clock import ManualClock, to_rfc3339
from memvault.config import EngineConfig
from memvault.engine import MemoryEngine
from memvault.errors import EngineError, NotSelf, RedLineDenied, TicketClosed
from memvault.gate import (
    Decision,
    GateTicket,
    QUORUM,
    TicketState,
    Verdict,
    check_decision,
    should_suspend,
)
from memvault.governance import (
    GovernanceLayer,
    GovernanceRule,
    OperationDescriptor,
    RiskTier,
    RuleEffect,
    RuleScope,
    default_constitution_rules,
    lint_pack,
    validate_hierarchy,
)
from memvault.records import RecordStatus, StorageTier
from memvault.state import EngineState

from conftest import make_config
from driver import OpDriver, clock_offsets


def ok(name):
    print(f"ACCEPTANCE {name}: PASS")


# =========================================================================
# 1. Append-only invariant
# =========================================================================


class AppendOnlyTracker:
    """Independent watch on (record_id, content_hash) pairs."""

    def __init__(self):
        self.hashes: dict[str, str] = {}

    def observe(self, event):
        body = event.body
        records = []
        if "record" in body:
            records.append(body["record"])
        records.extend(body.get("records", []))
        for record in records:
            rid, chash = record["record_id"], record["content_hash"]
            assert rid not in self.hashes, f"record id {rid} appended twice"
            assert chash, "record appended without a content hash"
            self.hashes[rid] = chash

    def check(self, engine):
        state_records = engine.state.records
        for rid, chash in self.hashes.items():
            assert rid in state_records, f"record {rid} disappeared"
            record = state_records[rid]
            assert record.content_hash == chash, f"content hash changed for {rid}"
        for rid, record in state_records.items():
            assert rid in self.hashes, f"record {rid} appeared without an event"


def _replay_ownership(events):
    """Independent single-writer fold: owner per (citizen, category) at
    each seq, driven only by event bodies."""
    owners = {}
    for event in events:
        body = event.body
        if event.kind in ("memory_appended", "memory_corrected", "memory_distilled"):
            record = body["record"]
            key = (record["citizen_id"], record["category"])
            if body.get("ownership"):
                owners[key] = body["ownership"]["primary_writer"]
            owner = owners.get(key)
            assert event.actor == owner or record["tier"] == "T3", (
                f"writer {event.actor} is not the owner {owner} at seq {event.seq}"
            )
        elif event.kind == "citizen_born":
            for entry in body.get("ownership", []):
                owners[(entry["citizen_id"], entry["category"])] = entry["primary_writer"]
        elif event.kind == "citizen_forked":
            for entry in body.get("ownership", []):
                owners[(entry["citizen_id"], entry["category"])] = entry["primary_writer"]
        elif event.kind == "ownership_transferred":
            owners[(body["citizen_id"], body["category"])] = body["new_writer"]
        elif event.kind == "inheritance_verified":
            case_citizen = event.citizen_id
            for remap in body.get("ownership_remap", []):
                owners[(case_citizen, remap["category"])] = remap["new"]


def _check_lifecycle_invariants(engine):
    """No overlapping instance intervals; exactly one open instance while
    the citizen is between birth and departure; departures self-initiated."""
    for citizen in engine.state.citizens.values():
        open_instances = [i for i in citizen.instances if i.ended_at is None]
        if citizen.stage.value in ("active", "inheriting", "departing"):
            assert len(open_instances) == 1, citizen.citizen_id
        else:
            assert not open_instances, citizen.citizen_id
        intervals = sorted(
            (i.started_at, i.ended_at or "9999") for i in citizen.instances
        )
        for (_, end_a), (start_b, _) in zip(intervals, intervals[1:]):
            assert start_b >= end_a, f"overlapping instances on {citizen.citizen_id}"
    for event in engine.chain.events:
        if event.kind == "departure_initiated":
            assert event.actor == event.body["case"]["initiated_by"]


def _check_gate_completeness(engine):
    """Every record whose append risk exceeds R0 must be preceded by an
    approved ticket bound to its payload (birth and handover records are
    the documented exemptions)."""
    approved_at = {}
    for event in engine.chain.events:
        if event.kind == "ticket_decided" and event.body["new_state"] == "approved":
            approved_at[event.body["ticket_id"]] = event.seq
        if event.kind in ("memory_appended", "memory_corrected", "memory_distilled"):
            tier = event.body["record"]["tier"]
            baseline = {"T0": 4, "T1": 2, "T2": 0, "T3": 0}[tier]
            if event.kind == "memory_distilled":
                baseline = 2
            if baseline > 0:
                ticket_id = event.body.get("ticket_id")
                assert ticket_id, f"gated write without ticket at seq {event.seq}"
                assert approved_at.get(ticket_id, 10**9) < event.seq, (
                    f"write at seq {event.seq} precedes its approval"
                )


def test_acceptance_append_only_invariant():
    sequences_total = 10_000
    sequences_per_engine = 100
    ops_per_sequence = 4
    seq_count = 0
    engine_index = 0
    while seq_count < sequences_total:
        clock = ManualClock()
        engine = MemoryEngine(make_config(cooling_off=timedelta(0)), clock=clock)
        tracker = AppendOnlyTracker()
        engine.subscribe(tracker.observe)
        for event in engine.chain.events:
            tracker.observe(event)
        driver = OpDriver(engine, clock, seed=1000 + engine_index, start=clock())
        steps = sequences_per_engine * ops_per_sequence
        offsets = clock_offsets(1000 + engine_index, steps)
        for sequence in range(sequences_per_engine):
            for k in range(ops_per_sequence):
                driver.step(sequence * ops_per_sequence + k,
                            offsets[sequence * ops_per_sequence + k])
            tracker.check(engine)
            seq_count += 1
            if seq_count >= sequences_total:
                break
        _replay_ownership(engine.chain.events)
        _check_gate_completeness(engine)
        _check_lifecycle_invariants(engine)
        engine_index += 1
    ok(f"append-only invariant over {sequences_total} randomized sequences")


# =========================================================================
# 2. Hierarchy fuzz with independent pairwise oracle
# =========================================================================

ORACLE_OPS = (
    "append", "correct", "forget", "decay", "distill", "destroy",
    "rule_change", "ownership_transfer", "fork", "merge", "departure",
    "inheritance",
)
ORACLE_TIERS = ("T0", "T1", "T2", "T3", "")
ORACLE_CATEGORIES = ("daily", "project", "projx", "mood", "ops", "zzz")
ORACLE_CITIZENS = ("che", "heng", "zoe")

_PERMISSIVENESS = {"deny": 0, "permit": 6}


def _oracle_rank(effect):
    if effect.kind == "require_tier":
        return 1 + (4 - int(effect.tier))
    return _PERMISSIVENESS[effect.kind]


def _oracle_dim_values(pattern, universe):
    return frozenset(v for v in universe if fnmatch.fnmatchcase(v, pattern))


def _oracle_overlap(a: RuleScope, b: RuleScope) -> bool:
    """Concrete-value oracle: scopes are conjunctions over independent
    dimensions, so overlap is per-dimension non-empty intersection over
    the enumerated universe."""
    for pattern_a, pattern_b, universe in (
        (a.op_kind, b.op_kind, ORACLE_OPS),
        (a.tier, b.tier, ORACLE_TIERS),
        (a.category, b.category, ORACLE_CATEGORIES),
        (a.citizen, b.citizen, ORACLE_CITIZENS),
    ):
        values_a = _oracle_dim_values(pattern_a, universe)
        values_b = _oracle_dim_values(pattern_b, universe)
        if not values_a & values_b:
            return False
    return True


def _random_pack(rng, max_rules=30):
    rules = []
    for i in range(rng.randint(1, max_rules)):
        effect_kind = rng.choice(("permit", "deny", "require_tier"))
        effect = (
            RuleEffect("require_tier", RiskTier(rng.randint(0, 4)))
            if effect_kind == "require_tier"
            else RuleEffect(effect_kind)
        )
        rules.append(
            GovernanceRule(
                rule_id=f"p{i:03d}",
                layer=rng.choice(list(GovernanceLayer)),
                scope=RuleScope(
                    op_kind=rng.choice(ORACLE_OPS + ("*",)),
                    tier=rng.choice(("T0", "T1", "T2", "T3", "*")),
                    category=rng.choice(("daily", "proj*", "project", "mood", "*", "ops")),
                    citizen=rng.choice(("che", "heng", "*")),
                ),
                effect=effect,
                created_at=f"2026-01-{rng.randint(1, 28):02d}T00:00:00.000000Z",
                created_by="fuzz",
            )
        )
    return rules


def test_acceptance_hierarchy_fuzz():
    rng = random.Random(20260101)
    for pack_index in range(1000):
        existing = default_constitution_rules() if pack_index % 2 else []
        drafts = _random_pack(rng)
        report = lint_pack(drafts, existing)
        by_id = {r.rule_id: r for r in drafts + list(existing)}
        active = [by_id[rid] for rid in report["active"]] + list(existing)

        # the registry accepted this set: zero violations, both by the
        # implementation and by the independent oracle
        assert report["violations"] == []
        assert validate_hierarchy(active) == []
        for upper, lower in itertools.permutations(active, 2):
            if upper.layer >= lower.layer:
                continue
            if not _oracle_overlap(upper.scope, lower.scope):
                continue
            assert not _oracle_rank(lower.effect) > _oracle_rank(upper.effect), (
                f"pack {pack_index}: oracle found contradiction "
                f"{lower.rule_id} vs {upper.rule_id}"
            )

        # every void rule cites a real higher-layer conflict
        for entry in report["void"]:
            voided = by_id[entry["rule_id"]]
            cited = by_id[entry["conflict_with"]]
            assert cited.layer < voided.layer
            assert _oracle_overlap(cited.scope, voided.scope)
            assert _oracle_rank(voided.effect) > _oracle_rank(cited.effect)
    ok("hierarchy fuzz: 1000 packs, zero oracle disagreements")


# =========================================================================
# 3. Gate safety: exhaustive model check
# =========================================================================

MODEL_APPROVERS = {"high-1": RiskTier.R4, "high-2": RiskTier.R4, "low-1": RiskTier.R2}


def _model_ticket(risk, base_clock):
    op = OperationDescriptor.build(
        "distill", citizen_id="c", tier="T1", category="n",
        requested_by="i", payload_digest="e" * 64,
    )
    cooling = (
        to_rfc3339(base_clock() + timedelta(days=7)) if risk is RiskTier.R4 else None
    )
    return GateTicket(
        ticket_id="tkt-model",
        op=op,
        risk=risk,
        state=TicketState.PENDING,
        decisions=[],
        created_at=to_rfc3339(base_clock()),
        deadline=to_rfc3339(base_clock() + timedelta(hours=72)),
        cooling_off_until=cooling,
    )


def _apply_model_action(ticket, action, base_clock):
    """Mirror of the engine's per-event ticket mutation."""
    kind = action[0]
    if kind == "decide":
        _, approver, verdict = action
        new_state = check_decision(
            ticket, approver, verdict, "model", MODEL_APPROVERS.get(approver)
        )
        ticket.decisions.append(
            Decision(approver, verdict, "model", to_rfc3339(base_clock()))
        )
        ticket.state = new_state
        return ("decided", new_state)
    now = (
        base_clock() + timedelta(hours=73)
        if kind == "sweep_late"
        else base_clock() + timedelta(hours=1)
    )
    if should_suspend(ticket, now):
        ticket.state = TicketState.SUSPENDED
        return ("suspended", ticket.state)
    return ("noop", ticket.state)


def test_acceptance_gate_model_check():
    base_clock = ManualClock()
    actions = [
        ("decide", approver, verdict)
        for approver in MODEL_APPROVERS
        for verdict in (Verdict.APPROVE, Verdict.REJECT)
    ] + [("sweep_late",), ("sweep_early",)]

    checked = 0
    for risk in (RiskTier.R2, RiskTier.R3, RiskTier.R4):
        for length in range(0, 6):
            for sequence in itertools.product(actions, repeat=length):
                ticket = _model_ticket(risk, base_clock)
                for action in sequence:
                    before = ticket.state
                    try:
                        cause, after = _apply_model_action(ticket, action, base_clock)
                    except EngineError:
                        assert ticket.state == before  # refused actions mutate nothing
                        continue
                    if before in (TicketState.APPROVED, TicketState.REJECTED):
                        # terminal states: decide raises TicketClosed above,
                        # sweeps must not resurrect the ticket
                        assert after == before
                    if action[0] != "decide":
                        # the clock alone never approves or rejects
                        assert after not in (TicketState.APPROVED, TicketState.REJECTED) or after == before
                        if after != before:
                            assert after is TicketState.SUSPENDED
                            assert action[0] == "sweep_late"
                    if after is TicketState.APPROVED and before is not TicketState.APPROVED:
                        approvers = {
                            d.approver for d in ticket.decisions if d.verdict is Verdict.APPROVE
                        }
                        assert len(approvers) >= QUORUM[risk]
                        assert all(
                            MODEL_APPROVERS[a] >= risk for a in approvers
                        ), "quorum contains an underprivileged approver"
                        assert ticket.decisions[-1].verdict is Verdict.APPROVE
                checked += 1
    assert checked == 3 * sum(len(actions) ** n for n in range(6))
    ok(f"gate model check: {checked} exhaustive decision/timeout sequences")


# =========================================================================
# 4. Inheritance scenario: three checks, independently toggled
# =========================================================================

SCENARIO_NOTE_TASKS = [
    {"task_id": "t-recall", "description": "finish recall tuning", "status": "in_progress"},
    {"task_id": "t-tests", "description": "extend the suite", "status": "blocked"},
    {"task_id": "t-docs", "description": "write run instructions", "status": "todo"},
]


def _scenario_engine(tmp_path=None):
    clock = ManualClock()
    engine = MemoryEngine(make_config(), data_dir=tmp_path, clock=clock)
    born = engine.birth("Scenario", "charter", shared_knowledge=["patterns matter"])
    cid, inst = born["citizen_id"], born["current_instance"]
    evidence = [
        engine.append_memory(cid, "daily", "T2", f"evidence {i}", principal=inst)["result"]["record_id"]
        for i in range(2)
    ]
    note = {
        "unfinished_tasks": SCENARIO_NOTE_TASKS,
        "facts": [
            {"statement": "the recall tuning is half done", "supporting_record_ids": [evidence[0]]},
            {"statement": "the suite covers the ledger", "supporting_record_ids": [evidence[1]]},
        ],
        "open_questions": ["should decay be weekly?"],
        "cognitive_state": "focused, slightly tired",
    }
    engine.compose_handover(cid, note, inst)
    case = engine.begin_inheritance(cid, "model-b")
    t1 = [
        r for r in engine.state.citizen_records[cid]
        if engine.state.records[r].tier is StorageTier.T1
    ]
    return engine, clock, cid, case, t1


GOOD_ANSWERS = [
    {"query_id": "q-task-t-recall", "answer": "in_progress"},
    {"query_id": "q-task-t-tests", "answer": "blocked"},
    {"query_id": "q-task-t-docs", "answer": "todo"},
    {"query_id": "q-fact-0", "answer": "I recall the recall tuning is half done."},
    {"query_id": "q-fact-1", "answer": "Also, the suite covers the ledger."},
]


def test_acceptance_inheritance_scenario(tmp_path):
    # (a) a successor answering from the handover alone passes
    engine, _, cid, case, t1 = _scenario_engine(tmp_path / "pass")
    assert len(case["queries"]) == 5 and case["required"] == 4
    result = engine.verify_inheritance(
        case["case_id"], GOOD_ANSWERS,
        {"record_id": t1[0], "application_context": "ranked notes by stability"},
    )
    assert result["verdict"] == "passed"
    assert engine.state.citizens[cid].current_instance == case["successor_instance"]

    # (b) factual check toggled: below the 80% threshold fails
    engine, _, cid, case, t1 = _scenario_engine(tmp_path / "factual")
    poor = GOOD_ANSWERS[:3] + [
        {"query_id": "q-fact-0", "answer": "no idea"},
        {"query_id": "q-fact-1", "answer": "none"},
    ]
    result = engine.verify_inheritance(
        case["case_id"], poor,
        {"record_id": t1[0], "application_context": "ranked notes"},
    )
    assert result["verdict"] == "failed"
    assert result["checks"]["factual"]["answered"] == 3
    assert result["checks"]["pattern"]["ok"] and result["checks"]["audit"]

    # (c) pattern check toggled: citing a T2 record fails it
    engine, _, cid, case, _ = _scenario_engine(tmp_path / "pattern")
    t2 = [
        r for r in engine.state.citizen_records[cid]
        if engine.state.records[r].tier is StorageTier.T2
    ]
    result = engine.verify_inheritance(
        case["case_id"], GOOD_ANSWERS,
        {"record_id": t2[0], "application_context": "tried"},
    )
    assert result["verdict"] == "failed"
    assert result["checks"]["factual"]["ok"] and result["checks"]["audit"]
    assert not result["checks"]["pattern"]["ok"]

    # (d) audit check toggled: a tampered persisted chain fails it
    engine, _, cid, case, t1 = _scenario_engine(tmp_path / "audit")
    log = tmp_path / "audit" / "audit.log"
    blob = bytearray(log.read_bytes())
    blob[len(blob) // 2] ^= 0x01
    log.write_bytes(bytes(blob))
    result = engine.verify_inheritance(
        case["case_id"], GOOD_ANSWERS,
        {"record_id": t1[0], "application_context": "ranked notes"},
    )
    assert result["verdict"] == "failed"
    assert result["checks"]["factual"]["ok"] and result["checks"]["pattern"]["ok"]
    assert result["checks"]["audit"] is False
    ok("inheritance scenario: pass + three independent check toggles")


# =========================================================================
# 5. Continuity equivalence across a passed inheritance
# =========================================================================


def test_acceptance_continuity_equivalence():
    clock = ManualClock()
    engine = MemoryEngine(make_config(), clock=clock)
    born = engine.birth("Continuum", "charter", shared_knowledge=["k-alpha", "k-beta"])
    cid, inst = born["citizen_id"], born["current_instance"]
    rng = random.Random(2)
    rids = []
    for i in range(30):
        rids.append(
            engine.append_memory(
                cid, rng.choice(("daily", "mood")), rng.choice(("T2", "T3")),
                f"memory {i} about {rng.choice(('gates', 'chains', 'tiers'))}",
                tags=rng.sample(("work", "life", "deep"), k=rng.randint(0, 2)),
                trust=rng.choice(
                    ({"grade": "firsthand"}, {"grade": "reported"},
                     {"grade": "inferred", "uncertainty_tag": "hmm"})
                ),
                principal=inst,
            )["result"]["record_id"]
        )
        clock.advance(timedelta(hours=rng.randint(1, 20)))
    for rid in rng.sample(rids, 6):
        engine.set_recall_weight(rid, round(rng.uniform(0.1, 0.9), 2), inst)
    for rid in rng.sample(rids, 3):
        engine.forget(rid, inst)

    queries = []
    for i in range(50):
        query = {}
        if rng.random() < 0.5:
            query["tags"] = rng.sample(("work", "life", "deep"), k=rng.randint(1, 2))
        if rng.random() < 0.5:
            query["terms"] = [rng.choice(("gates", "chains", "tiers", "memory"))]
        if rng.random() < 0.3:
            query["tiers"] = rng.sample(("T1", "T2", "T3"), k=rng.randint(1, 2))
        queries.append(query)

    pinned = to_rfc3339(clock())
    for query in queries:
        query["as_of"] = pinned

    before = [canonical_json(engine.recall(cid, q)) for q in queries]

    clock.advance(3600)  # handover happens after the pinned instant
    note = {
        "unfinished_tasks": [{"task_id": "t1", "description": "go on", "status": "open"}],
        "facts": [{"statement": "the ledger holds thirty memories",
                   "supporting_record_ids": [rids[0]]}],
    }
    engine.compose_handover(cid, note, inst)
    case = engine.begin_inheritance(cid, "model-b")
    t1 = [
        r for r in engine.state.citizen_records[cid]
        if engine.state.records[r].tier is StorageTier.T1
    ]
    result = engine.verify_inheritance(
        case["case_id"],
        [{"query_id": "q-task-t1", "answer": "open"},
         {"query_id": "q-fact-0", "answer": "yes, the ledger holds thirty memories"}],
        {"record_id": t1[0], "application_context": "used stability tiers"},
    )
    assert result["verdict"] == "passed"

    after = [canonical_json(engine.recall(cid, q)) for q in queries]
    assert before == after, "recall changed across the instance boundary"
    ok("continuity: 50 recall queries byte-identical across inheritance")


# =========================================================================
# 6. Tamper detection: all single-byte corruptions of a 20-event log
# =========================================================================


def test_acceptance_tamper_detection(tmp_path):
    path = tmp_path / "audit.log"
    chain = AuditChain(path)
    for i in range(20):
        chain.append(
            "memory_appended",
            f"writer-{i % 4}",
            "cit-x" if i % 3 else None,
            {"record": {"record_id": f"r{i:04d}", "content_hash": "ab" * 32},
             "note": f"event {i}"},
            f"2026-02-01T10:{i:02d}:00.000000Z",
        )
    assert chain.verify().ok
    blob = bytearray(path.read_bytes())
    trials = 0
    for position in range(len(blob)):
        original = blob[position]
        for mask in (0x01, 0x80, 0xFF):
            blob[position] = original ^ mask
            path.write_bytes(bytes(blob))
            result = chain.verify()
            assert not result.ok, (
                f"corruption missed at byte {position} mask {mask:#x}"
            )
            trials += 1
        blob[position] = original
    path.write_bytes(bytes(blob))
    assert chain.verify().ok
    ok(f"tamper detection: {trials} single-byte corruptions, zero misses")


# =========================================================================
# 7. Replay oracle: dual-maintained incremental state
# =========================================================================


def test_acceptance_replay_oracle():
    total_checked = 0
    for log_index in range(200):
        clock = ManualClock()
        engine = MemoryEngine(
            make_config(cooling_off=timedelta(0), pending_window=timedelta(hours=1)),
            clock=clock,
        )
        mirror = EngineState()
        for event in engine.chain.events:
            mirror.apply(event)
        engine.subscribe(mirror.apply)

        steps = 24
        rng = random.Random(f"cutoffs:{log_index}")
        snap_steps = sorted(rng.sample(range(steps), 10))
        driver = OpDriver(engine, clock, seed=31_000 + log_index, start=clock())
        offsets = clock_offsets(31_000 + log_index, steps)

        snapshots = []
        for k in range(steps):
            driver.step(k, offsets[k])
            if k in snap_steps:
                snapshots.append(
                    (to_rfc3339(clock()), len(engine.chain), canonical_json(mirror.to_dict()))
                )

        events = engine.chain.events
        for cutoff, event_count, expected in snapshots:
            if event_count < len(events) and events[event_count].at <= cutoff:
                continue  # clock did not advance past this boundary; skip
            replayed = engine.replay_at(cutoff)
            assert canonical_json(replayed.to_dict()) == expected, (
                f"log {log_index}: replay diverged at {cutoff}"
            )
            total_checked += 1
    assert total_checked >= 1800  # near-all of 200 x 10 cutoffs survive
    ok(f"replay oracle: {total_checked} point-in-time replays matched")


# =========================================================================
# 8. Red lines invariant under principal identity
# =========================================================================


def test_acceptance_red_lines_for_every_principal():
    config = make_config()
    principals = ["system", "ops-1", "ops-2", "ops-3", "rev-1"]  # incl. R4 ceiling
    clock = ManualClock()
    engine = MemoryEngine(config, clock=clock)
    born = engine.birth("Protected", "charter", shared_knowledge=["k"])
    cid, inst = born["citizen_id"], born["current_instance"]
    t0 = [
        r for r in engine.state.citizen_records[cid]
        if engine.state.records[r].tier is StorageTier.T0
    ][0]
    t2 = engine.append_memory(cid, "daily", "T2", "plain note", principal=inst)["result"]["record_id"]

    for principal in principals:
        with pytest.raises(RedLineDenied) as denied:
            engine.destroy(t0, principal=principal)  # no consent evidence
        assert denied.value.red_line_id == "C1"

        with pytest.raises(RedLineDenied) as denied:
            engine.append_memory(
                cid, "daily", "T2", "untagged guess",
                trust={"grade": "inferred"}, principal=principal,
            )
        assert denied.value.red_line_id == "C4"

        with pytest.raises(NotSelf):
            engine.forget(t2, principal)

        with pytest.raises(NotSelf):
            engine.initiate_departure(cid, "seal", principal)

    # the citizen itself is not blocked from its own rights
    engine.forget(t2, inst)
    ok("red lines: 4 violations rejected for all 5 principals")


# =========================================================================
# 9. Restart determinism
# =========================================================================


def test_acceptance_restart_determinism(tmp_path):
    seed = 777
    steps = 500
    split = 250
    offsets = clock_offsets(seed, steps)
    start = ManualClock()()

    config_kwargs = dict(
        cooling_off=timedelta(seconds=300), snapshot_interval=100
    )

    # run A: interrupted at the split (no graceful close; fsync'd appends
    # are all that survives a kill)
    dir_a = tmp_path / "a"
    clock_a = ManualClock(start)
    engine_a = MemoryEngine(make_config(**config_kwargs), data_dir=dir_a, clock=clock_a)
    OpDriver(engine_a, clock_a, seed=seed, start=start).run(0, split, offsets)
    del engine_a  # simulated kill: no close(), no snapshot flush

    clock_a2 = ManualClock(start)
    engine_a2 = MemoryEngine(make_config(**config_kwargs), data_dir=dir_a, clock=clock_a2)
    OpDriver(engine_a2, clock_a2, seed=seed, start=start).run(split, steps - split, offsets)

    # run B: uninterrupted
    dir_b = tmp_path / "b"
    clock_b = ManualClock(start)
    engine_b = MemoryEngine(make_config(**config_kwargs), data_dir=dir_b, clock=clock_b)
    OpDriver(engine_b, clock_b, seed=seed, start=start).run(0, steps, offsets)

    lines_a = engine_a2.export_chain()
    lines_b = engine_b.export_chain()
    assert len(lines_a) == len(lines_b)
    assert lines_a == lines_b, "audit chains diverged after restart"
    assert canonical_json(engine_a2.state.to_dict()) == canonical_json(
        engine_b.state.to_dict()
    )
    assert engine_a2.verify_chain().ok and engine_b.verify_chain().ok
    ok(f"restart determinism: {len(lines_a)} events identical across kill/restart")
