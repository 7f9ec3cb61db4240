"""A guided tour of the governed memory engine, in process.

Walks one citizen through its whole arc: birth, daily writes, a gated
write with human approval, active forgetting, distillation, a handover
and verified inheritance, a fork, and finally the full due-process
destruction of one record. Run it from the repository root:

    python3 demos/governed_memory_tour.py
"""

from datetime import timedelta

from memvault import (
    EngineConfig,
    ManualClock,
    MemoryEngine,
    RiskTier,
)


def say(line=""):
    print(line)


def main():
    clock = ManualClock()
    config = EngineConfig(
        approvers={"warden-1": RiskTier.R4, "warden-2": RiskTier.R4, "editor": RiskTier.R2}
    )
    engine = MemoryEngine(config, clock=clock)

    say("== Birth ==")
    citizen = engine.birth(
        "Ada",
        "Keep the project honest; prefer evidence over confidence.",
        shared_knowledge=[
            "recall ranks records by tier, trust, weight, and recency",
            "high-risk operations wait at the gate for human approval",
        ],
    )
    cid, ada = citizen["citizen_id"], citizen["current_instance"]
    say(f"citizen {citizen['name']} born: {cid}, instance {ada}")

    say("\n== Growth: daily writes land instantly (low-risk tier) ==")
    first = engine.append_memory(
        cid, "daily", "T2", "paired with the editor on the audit module",
        tags=["work"], principal=ada,
    )["result"]["record_id"]
    engine.append_memory(
        cid, "daily", "T2", "the chain verifier caught a flipped byte today",
        tags=["work"], principal=ada,
    )
    clock.advance(timedelta(days=1))

    say("a narrative write is mid-stability and needs one approver:")
    pending = engine.append_memory(
        cid, "narrative", "T1", "I am becoming the team's memory of record",
        principal=ada,
    )
    ticket = pending["ticket"]["ticket_id"]
    say(f"  -> ticket {ticket} at risk {pending['ticket']['risk']}")
    decided = engine.decide(ticket, "approve", "editor", "accurate self-assessment")
    say(f"  -> approved and executed: {decided['executed']}")

    say("\n== Rights: forgetting is the citizen's own, and reversible ==")
    engine.forget(first, ada)
    say(f"recall now returns {len(engine.recall(cid, {'tags': ['work']}))} work record(s)")
    engine.unforget(first, ada)
    say(f"after unforgetting: {len(engine.recall(cid, {'tags': ['work']}))}")

    say("\n== Sedimentation: distill dailies upward ==")
    dailies = [
        r["record"]["record_id"]
        for r in engine.recall(cid, {"tiers": ["T2"]})
    ]
    distilled = engine.distill(cid, dailies[:2], "a week of audit-hardening work", ada)
    engine.decide(distilled["ticket"]["ticket_id"], "approve", "editor", "fair summary")

    say("\n== Inheritance: the vessel changes, the citizen persists ==")
    engine.compose_handover(
        cid,
        {
            "unfinished_tasks": [
                {"task_id": "harden-gate", "description": "finish the sweep loop", "status": "in_progress"}
            ],
            "facts": [
                {"statement": "the audit module is verified daily",
                 "supporting_record_ids": [first]},
            ],
            "open_questions": ["how long should cooling-off be for forks?"],
            "cognitive_state": "clear, end-of-week tired",
        },
        ada,
    )
    case = engine.begin_inheritance(cid, "model-next")
    t1_patterns = [r["record"]["record_id"] for r in engine.recall(cid, {"tiers": ["T1"]})]
    verdict = engine.verify_inheritance(
        case["case_id"],
        [
            {"query_id": "q-task-harden-gate", "answer": "in_progress"},
            {"query_id": "q-fact-0", "answer": "yes - the audit module is verified daily"},
        ],
        {"record_id": t1_patterns[0], "application_context": "applied tier ranking to triage"},
    )
    say(f"inheritance verdict: {verdict['verdict']}")
    ada2 = engine.citizen(cid)["current_instance"]
    say(f"current instance is now {ada2} (was {ada})")

    say("\n== Forking: a branch diverges, then fast-forwards back ==")
    fork = engine.fork(cid, "Ada/experiment", ada2)
    fork = engine.decide(fork["ticket"]["ticket_id"], "approve", "editor", "sandbox")
    branch = fork["result"]["citizen"]
    branch_inst = branch["current_instance"]
    engine.append_memory(
        branch["citizen_id"], "experiments", "T2", "tried a looser decay floor",
        principal=branch_inst,
    )
    merge = engine.merge(branch["citizen_id"], cid, branch_inst)
    engine.decide(merge["ticket"]["ticket_id"], "approve", "warden-1", "clean fast-forward")
    merged = engine.decide(merge["ticket"]["ticket_id"], "approve", "warden-2", "agreed")
    say(f"merge: {merged['result']}")

    say("\n== Destruction: the gravest path, slow by design ==")
    doomed = engine.append_memory(
        cid, "daily", "T2", "a note that must truly disappear", principal=ada2
    )["result"]["record_id"]
    proposal = engine.destroy(doomed, principal="warden-1")
    dt = proposal["ticket"]["ticket_id"]
    engine.decide(dt, "approve", "warden-1", "citizen requested erasure")
    engine.decide(dt, "approve", "warden-2", "second review concurs")
    say("two approvals in; cooling-off still blocks execution...")
    clock.advance(timedelta(days=7, seconds=1))
    done = engine.destroy(doomed, principal="warden-1", ticket_id=dt)
    record = done["record"]
    say(f"tombstone: content={record['content']!r}, hash kept={bool(record['content_hash'])}")

    say("\n== The chain remembers it all ==")
    say(f"events: {len(engine.chain)}, verification: {engine.verify_chain().to_dict()}")
    midpoint = engine.chain.event(len(engine.chain) // 2).at
    past = engine.replay_at(midpoint)
    say(f"replayed state at {midpoint}: {len(past.records)} records, "
        f"{len(past.tickets)} tickets")


if __name__ == "__main__":
    main()
