"""memvault: a governed, append-only memory engine for persistent agents.

The pieces, bottom up: a tamper-evident hash-chained audit log
(``chain``), a pure state fold over it (``state``), a four-layer rule
hierarchy with risk tiers and red lines (``governance``), the
pending-approval gate (``gate``), the memory ledger and citizen
lifecycle commands (``engine``), and an HTTP gateway plus operator CLI
(``service``, ``cli``).
"""

from .canonical import canonical_json, digest, sha256_hex
from .chain import AuditChain, ContentStore, VerifyResult, verify_lines
from .clock import ManualClock, from_rfc3339, to_rfc3339, utc_now
from .config import EngineConfig, ServiceConfig, parse_duration
from .engine import ENGINE_VERSION, MemoryEngine
from .errors import EngineError, RedLineDenied
from .gate import GateTicket, TicketState, Verdict
from .governance import (
    GovernanceLayer,
    GovernanceRule,
    OperationDescriptor,
    RiskTier,
    RuleEffect,
    RuleScope,
    adjudicate,
    check_red_lines,
    classify_risk,
    validate_hierarchy,
)
from .lifecycle import CitizenRecord, Disposition, HandoverNote, Stage
from .records import (
    MemoryRecord,
    RecallQuery,
    RecordStatus,
    StorageTier,
    TrustGrade,
    TrustLevel,
)
from .state import EngineState

__version__ = ENGINE_VERSION

__all__ = [
    "AuditChain",
    "CitizenRecord",
    "ContentStore",
    "Disposition",
    "EngineConfig",
    "EngineError",
    "EngineState",
    "GateTicket",
    "GovernanceLayer",
    "GovernanceRule",
    "HandoverNote",
    "ManualClock",
    "MemoryEngine",
    "MemoryRecord",
    "OperationDescriptor",
    "RecallQuery",
    "RecordStatus",
    "RedLineDenied",
    "RiskTier",
    "RuleEffect",
    "RuleScope",
    "ServiceConfig",
    "Stage",
    "StorageTier",
    "TicketState",
    "TrustGrade",
    "TrustLevel",
    "Verdict",
    "VerifyResult",
    "adjudicate",
    "canonical_json",
    "check_red_lines",
    "classify_risk",
    "digest",
    "from_rfc3339",
    "parse_duration",
    "sha256_hex",
    "to_rfc3339",
    "utc_now",
    "validate_hierarchy",
    "verify_lines",
]
