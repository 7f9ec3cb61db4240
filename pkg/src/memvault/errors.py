"""Engine error taxonomy.

Every failure the engine can report carries a stable ``code`` (the
machine-readable contract used by the HTTP gateway and CLI) and an HTTP
status class. Red-line denials additionally carry the red line id; they
are terminal and identical for every principal.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class; ``code`` is the wire-level error identifier."""

    code = "EngineError"
    http_status = 500

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code

    def to_body(self) -> dict:
        return {"code": self.code, "message": self.message}


# -- 400: malformed or invalid input ---------------------------------------

class ValidationFailure(EngineError):
    http_status = 400


class MalformedScope(ValidationFailure):
    code = "MalformedScope"


class ContentTooLarge(ValidationFailure):
    code = "ContentTooLarge"


class OutOfRange(ValidationFailure):
    code = "OutOfRange"


class EmptyRationale(ValidationFailure):
    code = "EmptyRationale"


class EmptyNote(ValidationFailure):
    code = "EmptyNote"


class MixedCitizens(ValidationFailure):
    code = "MixedCitizens"


class UnknownQueryId(ValidationFailure):
    code = "UnknownQueryId"


class InvalidConstitutionPack(ValidationFailure):
    code = "InvalidConstitutionPack"


class ReaffirmationMissing(ValidationFailure):
    code = "ReaffirmationMissing"


class RangeOutOfBounds(ValidationFailure):
    code = "RangeOutOfBounds"


class NotInConflict(ValidationFailure):
    code = "NotInConflict"


# -- 401 / 403: identity and authority -------------------------------------

class UnknownPrincipal(EngineError):
    code = "UnknownPrincipal"
    http_status = 401


class AuthorizationFailure(EngineError):
    http_status = 403


class NotAuthorized(AuthorizationFailure):
    code = "NotAuthorized"


class NotPrimaryWriter(AuthorizationFailure):
    code = "NotPrimaryWriter"


class NotSelf(AuthorizationFailure):
    code = "NotSelf"


class NotCurrentInstance(AuthorizationFailure):
    code = "NotCurrentInstance"


class NotAuthorizedForTier(AuthorizationFailure):
    code = "NotAuthorizedForTier"


class OperationDenied(AuthorizationFailure):
    """An active governance rule denies this operation."""

    code = "OperationDenied"

    def __init__(self, rule_id: str, message: str = ""):
        super().__init__(message or f"denied by rule {rule_id}")
        self.rule_id = rule_id

    def to_body(self) -> dict:
        return {"code": self.code, "message": self.message, "rule_id": self.rule_id}


# -- 404: unknown identifiers -----------------------------------------------

class NotFoundFailure(EngineError):
    http_status = 404


class TargetNotFound(NotFoundFailure):
    code = "TargetNotFound"


class UnknownCitizen(NotFoundFailure):
    code = "UnknownCitizen"


class NoSuchCategory(NotFoundFailure):
    code = "NoSuchCategory"


class TicketNotFound(NotFoundFailure):
    code = "TicketNotFound"


class CaseNotFound(NotFoundFailure):
    code = "CaseNotFound"


class RuleNotFound(NotFoundFailure):
    code = "RuleNotFound"


# -- 409: state machine refuses ---------------------------------------------

class StateConflict(EngineError):
    http_status = 409


class CitizenNotActive(StateConflict):
    code = "CitizenNotActive"


class TargetDestroyed(StateConflict):
    code = "TargetDestroyed"


class RecordNotActive(StateConflict):
    code = "RecordNotActive"


class SourceNotActive(StateConflict):
    code = "SourceNotActive"


class TicketNotApproved(StateConflict):
    code = "TicketNotApproved"


class TicketClosed(StateConflict):
    code = "TicketClosed"


class DuplicateApprover(StateConflict):
    code = "DuplicateApprover"


class DuplicateTicket(StateConflict):
    code = "DuplicateTicket"


class CoolingOffNotElapsed(StateConflict):
    code = "CoolingOffNotElapsed"


class DigestMismatch(StateConflict):
    code = "DigestMismatch"


class SelfTransferNoop(StateConflict):
    code = "SelfTransferNoop"


class AlreadyInheriting(StateConflict):
    code = "AlreadyInheriting"


class AlreadyDeparting(StateConflict):
    code = "AlreadyDeparting"


class CaseClosed(StateConflict):
    code = "CaseClosed"


class ParentNotActive(StateConflict):
    code = "ParentNotActive"


class NotABranchOf(StateConflict):
    code = "NotABranchOf"


class NoHandoverNote(StateConflict):
    code = "NoHandoverNote"


class DuplicateName(StateConflict):
    code = "DuplicateName"


class TicketNotExecutable(StateConflict):
    code = "TicketNotExecutable"


# -- 423: constitutional red line -------------------------------------------

class RedLineDenied(EngineError):
    """Terminal denial; no principal, including administrators, can override."""

    code = "RedLineDenied"
    http_status = 423

    def __init__(self, red_line_id: str, message: str = ""):
        super().__init__(message or f"red line {red_line_id}")
        self.red_line_id = red_line_id

    def to_body(self) -> dict:
        return {
            "code": self.code,
            "message": self.message,
            "red_line_id": self.red_line_id,
        }


# -- 500: engine failures -----------------------------------------------------

class PersistenceFailure(EngineError):
    code = "PersistenceFailure"


class ChainCorrupt(EngineError):
    code = "ChainCorrupt"

    def __init__(self, first_bad: int, message: str = ""):
        super().__init__(message or f"audit chain corrupt at seq {first_bad}")
        self.first_bad = first_bad

    def to_body(self) -> dict:
        return {
            "code": self.code,
            "message": self.message,
            "first_bad": self.first_bad,
        }
