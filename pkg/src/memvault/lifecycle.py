"""Citizen lifecycle types: identity, instances, handover, inheritance,
departure.

A citizen's identity persists through its memory; instances (the model
processes that carry it) open and close underneath. Exactly one instance
is open while the citizen is anywhere between birth and departure, and
every instance interval is disjoint from every other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .errors import EmptyNote, ValidationFailure


class Stage(str, Enum):
    NASCENT = "nascent"
    ACTIVE = "active"
    INHERITING = "inheriting"
    DEPARTING = "departing"
    DEPARTED = "departed"


class Disposition(str, Enum):
    EXPORT = "export"
    SEAL = "seal"
    DESTROY = "destroy"


@dataclass
class Instance:
    instance_id: str
    model_label: str
    started_at: str
    ended_at: str | None = None
    end_reason: str | None = None
    provisional: bool = False

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "model_label": self.model_label,
            "started_at": self.started_at,
            "ended_at": self.ended_at,
            "end_reason": self.end_reason,
            "provisional": self.provisional,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Instance":
        return cls(
            instance_id=data["instance_id"],
            model_label=data.get("model_label", ""),
            started_at=data["started_at"],
            ended_at=data.get("ended_at"),
            end_reason=data.get("end_reason"),
            provisional=data.get("provisional", False),
        )


@dataclass
class CitizenRecord:
    citizen_id: str
    name: str
    stage: Stage
    current_instance: str | None
    instances: list[Instance]
    parent_citizen: str | None = None
    fork_seq: int | None = None
    fork_children: list[str] = field(default_factory=list)
    # (branch_id, record_ids, merge_seq) for fast-forwarded branches.
    merged_branches: list[tuple[str, list[str], int]] = field(default_factory=list)

    def instance(self, instance_id: str) -> Instance | None:
        for inst in self.instances:
            if inst.instance_id == instance_id:
                return inst
        return None

    def open_instance(self) -> Instance | None:
        for inst in self.instances:
            if inst.ended_at is None:
                return inst
        return None

    def to_dict(self) -> dict:
        return {
            "citizen_id": self.citizen_id,
            "name": self.name,
            "stage": self.stage.value,
            "current_instance": self.current_instance,
            "instances": [i.to_dict() for i in self.instances],
            "lineage": {
                "parent_citizen": self.parent_citizen,
                "fork_children": list(self.fork_children),
            },
            "fork_seq": self.fork_seq,
            "merged_branches": [
                {"branch_id": b, "record_ids": list(r), "merge_seq": s}
                for b, r, s in self.merged_branches
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CitizenRecord":
        lineage = data.get("lineage", {})
        return cls(
            citizen_id=data["citizen_id"],
            name=data["name"],
            stage=Stage(data["stage"]),
            current_instance=data.get("current_instance"),
            instances=[Instance.from_dict(i) for i in data.get("instances", [])],
            parent_citizen=lineage.get("parent_citizen"),
            fork_seq=data.get("fork_seq"),
            fork_children=list(lineage.get("fork_children", [])),
            merged_branches=[
                (m["branch_id"], list(m["record_ids"]), m["merge_seq"])
                for m in data.get("merged_branches", [])
            ],
        )


# ---------------------------------------------------------------------------
# Handover notes
# ---------------------------------------------------------------------------


@dataclass
class HandoverNote:
    """Structured T3 payload a closing instance leaves for its successor.

    Facts must cite supporting records; provisional judgments must carry
    uncertainty tags; the two are disjoint by statement.
    """

    unfinished_tasks: list[dict] = field(default_factory=list)
    open_questions: list[str] = field(default_factory=list)
    cognitive_state: str = ""
    flagged_ambiguities: list[str] = field(default_factory=list)
    facts: list[dict] = field(default_factory=list)
    provisional_judgments: list[dict] = field(default_factory=list)

    def validate(self) -> "HandoverNote":
        if not (self.unfinished_tasks or self.facts or self.open_questions):
            raise EmptyNote("a handover needs tasks, facts, or open questions")
        for task in self.unfinished_tasks:
            if not task.get("task_id") or "status" not in task:
                raise ValidationFailure("each task needs task_id and status")
        for fact in self.facts:
            if not fact.get("statement", "").strip():
                raise ValidationFailure("facts need a statement")
            if not fact.get("supporting_record_ids"):
                raise ValidationFailure(
                    f"fact {fact.get('statement', '')!r} cites no supporting records"
                )
        fact_statements = {f["statement"] for f in self.facts}
        for judgment in self.provisional_judgments:
            if not judgment.get("uncertainty_tag", "").strip():
                raise ValidationFailure("provisional judgments need uncertainty tags")
            if judgment.get("statement") in fact_statements:
                raise ValidationFailure(
                    "a statement cannot be both fact and provisional judgment"
                )
        return self

    def to_dict(self) -> dict:
        return {
            "unfinished_tasks": self.unfinished_tasks,
            "open_questions": self.open_questions,
            "cognitive_state": self.cognitive_state,
            "flagged_ambiguities": self.flagged_ambiguities,
            "facts": self.facts,
            "provisional_judgments": self.provisional_judgments,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HandoverNote":
        return cls(
            unfinished_tasks=list(data.get("unfinished_tasks", [])),
            open_questions=list(data.get("open_questions", [])),
            cognitive_state=data.get("cognitive_state", ""),
            flagged_ambiguities=list(data.get("flagged_ambiguities", [])),
            facts=list(data.get("facts", [])),
            provisional_judgments=list(data.get("provisional_judgments", [])),
        )

    def build_queries(self) -> list[dict]:
        """Mechanical query generation: one per task status, one per fact.

        Queries reference positions in the note, never raw conversation
        logs; expected answers are re-derived from the stored note at
        grading time.
        """
        queries = []
        for task in self.unfinished_tasks:
            queries.append(
                {
                    "query_id": f"q-task-{task['task_id']}",
                    "kind": "task_status",
                    "subject": task["task_id"],
                    "prompt": f"status of task {task['task_id']}",
                }
            )
        for index, fact in enumerate(self.facts):
            queries.append(
                {
                    "query_id": f"q-fact-{index}",
                    "kind": "fact",
                    "subject": str(index),
                    "prompt": f"restate handover fact #{index}",
                }
            )
        return queries


def required_correct(total_queries: int) -> int:
    """Pass bar for the factual check: ceil(0.8 x queries)."""
    return math.ceil(0.8 * total_queries)


# ---------------------------------------------------------------------------
# Inheritance cases
# ---------------------------------------------------------------------------


class CaseVerdict(str, Enum):
    PROVISIONAL = "provisional"
    PASSED = "passed"
    FAILED = "failed"


@dataclass
class InheritanceCase:
    case_id: str
    citizen_id: str
    predecessor_instance: str
    successor_instance: str
    handover_record_id: str
    queries: list[dict]
    required: int
    verdict: CaseVerdict = CaseVerdict.PROVISIONAL
    checks: dict = field(default_factory=dict)
    attempts: list[dict] = field(default_factory=list)

    @property
    def closed(self) -> bool:
        return self.verdict is CaseVerdict.PASSED

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "citizen_id": self.citizen_id,
            "predecessor_instance": self.predecessor_instance,
            "successor_instance": self.successor_instance,
            "handover_record_id": self.handover_record_id,
            "queries": self.queries,
            "required": self.required,
            "verdict": self.verdict.value,
            "checks": self.checks,
            "attempts": self.attempts,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "InheritanceCase":
        return cls(
            case_id=data["case_id"],
            citizen_id=data["citizen_id"],
            predecessor_instance=data["predecessor_instance"],
            successor_instance=data["successor_instance"],
            handover_record_id=data["handover_record_id"],
            queries=list(data.get("queries", [])),
            required=data["required"],
            verdict=CaseVerdict(data.get("verdict", "provisional")),
            checks=dict(data.get("checks", {})),
            attempts=list(data.get("attempts", [])),
        )


# ---------------------------------------------------------------------------
# Departure cases
# ---------------------------------------------------------------------------


class DepartureState(str, Enum):
    OPEN = "open"
    CANCELLED = "cancelled"
    CONFIRMED = "confirmed"


@dataclass
class DepartureCase:
    case_id: str
    citizen_id: str
    disposition: Disposition
    ticket_id: str
    initiated_by: str
    initiated_at: str
    state: DepartureState = DepartureState.OPEN
    export_path: str | None = None

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "citizen_id": self.citizen_id,
            "disposition": self.disposition.value,
            "ticket_id": self.ticket_id,
            "initiated_by": self.initiated_by,
            "initiated_at": self.initiated_at,
            "state": self.state.value,
            "export_path": self.export_path,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DepartureCase":
        return cls(
            case_id=data["case_id"],
            citizen_id=data["citizen_id"],
            disposition=Disposition(data["disposition"]),
            ticket_id=data["ticket_id"],
            initiated_by=data["initiated_by"],
            initiated_at=data["initiated_at"],
            state=DepartureState(data.get("state", "open")),
            export_path=data.get("export_path"),
        )
