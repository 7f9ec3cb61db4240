"""HTTP gateway: the network face of the engine.

Every route forwards 1:1 to an engine operation; there is no privileged
bypass -- mutations submitted over HTTP pass through exactly the same
red lines, rules, and gates as in-process calls, so the audit chains
come out identical. Errors map to structured bodies
``{code, message, red_line_id?}``.

The alert feed is served as server-sent events at ``/events``. The
service refuses to start over an unverifiable chain (fail-closed).
"""

from __future__ import annotations

import asyncio
import json
import logging
from contextlib import asynccontextmanager
from datetime import timedelta

from fastapi import Depends, FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse

from .canonical import canonical_json
from .clock import ManualClock, from_rfc3339
from .config import ServiceConfig
from .engine import MemoryEngine
from .errors import EngineError, UnknownPrincipal, ValidationFailure
from .governance import parse_pack

logger = logging.getLogger(__name__)


def _json(payload, status_code: int = 200) -> Response:
    # canonical_json keeps HTTP bodies byte-identical to what the CLI and
    # equivalence tests recompute from engine state.
    return Response(
        content=canonical_json(payload),
        status_code=status_code,
        media_type="application/json",
    )


def create_app(engine: MemoryEngine, config: ServiceConfig) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        stop = asyncio.Event()

        async def sweeper():
            while not stop.is_set():
                try:
                    engine.sweep_timeouts()
                except Exception:
                    logger.exception("timeout sweep failed")
                try:
                    await asyncio.wait_for(stop.wait(), timeout=config.sweep_interval)
                except asyncio.TimeoutError:
                    pass

        task = asyncio.create_task(sweeper())
        yield
        stop.set()
        task.cancel()

    app = FastAPI(title="memvault", lifespan=lifespan)

    @app.exception_handler(EngineError)
    async def engine_error_handler(request: Request, exc: EngineError):
        return JSONResponse(status_code=exc.http_status, content=exc.to_body())

    def principal(request: Request) -> str:
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            raise UnknownPrincipal("missing bearer token")
        token = header[7:].strip()
        spec = config.tokens.get(token)
        if spec is None:
            raise UnknownPrincipal("unknown token")
        return engine.resolve_principal(spec)

    async def body_of(request: Request) -> dict:
        raw = await request.body()
        if not raw:
            return {}
        try:
            data = json.loads(raw)
        except json.JSONDecodeError:
            raise ValidationFailure("request body must be JSON")
        if not isinstance(data, dict):
            raise ValidationFailure("request body must be a JSON object")
        return data

    # -- citizens and lifecycle --------------------------------------------

    @app.post("/citizens")
    async def create_citizen(request: Request, who: str = Depends(principal)):
        data = await body_of(request)
        citizen = engine.birth(
            name=data.get("name", ""),
            charter_text=data.get("charter_text", ""),
            constitution_pack=data.get("constitution_pack", ()),
            shared_knowledge=data.get("shared_knowledge", ()),
            model_label=data.get("model_label", "model-a"),
        )
        return _json(citizen, 201)

    @app.get("/citizens")
    async def list_citizens():
        return _json(engine.citizens())

    @app.get("/citizens/{citizen_id}")
    async def show_citizen(citizen_id: str):
        return _json(engine.citizen(citizen_id))

    @app.post("/citizens/{citizen_id}/memories")
    async def append_memory(
        citizen_id: str, request: Request, who: str = Depends(principal)
    ):
        data = await body_of(request)
        outcome = engine.append_memory(
            citizen_id,
            category=data.get("category", ""),
            tier=data.get("tier", "T2"),
            content=data.get("content", ""),
            tags=data.get("tags", ()),
            trust=data.get("trust", "firsthand"),
            principal=who,
        )
        return _json(outcome, 201 if outcome["executed"] else 202)

    @app.post("/memories/{record_id}/corrections")
    async def correct_memory(
        record_id: str, request: Request, who: str = Depends(principal)
    ):
        data = await body_of(request)
        outcome = engine.correct_memory(record_id, data.get("content", ""), who)
        return _json(outcome, 201 if outcome["executed"] else 202)

    @app.get("/memories/{record_id}")
    async def show_memory(record_id: str):
        return _json(engine.get_record(record_id))

    @app.post("/memories/{record_id}/forget")
    async def forget_memory(
        record_id: str, request: Request, who: str = Depends(principal)
    ):
        data = await body_of(request)
        if data.get("undo"):
            return _json(engine.unforget(record_id, who))
        return _json(engine.forget(record_id, who))

    @app.post("/memories/{record_id}/recall-weight")
    async def set_recall_weight(
        record_id: str, request: Request, who: str = Depends(principal)
    ):
        data = await body_of(request)
        return _json(engine.set_recall_weight(record_id, data.get("weight"), who))

    @app.post("/citizens/{citizen_id}/recall")
    async def recall(citizen_id: str, request: Request):
        data = await body_of(request)
        return _json(engine.recall(citizen_id, data))

    @app.post("/citizens/{citizen_id}/distill")
    async def distill(
        citizen_id: str, request: Request, who: str = Depends(principal)
    ):
        data = await body_of(request)
        outcome = engine.distill(
            citizen_id,
            source_ids=data.get("source_ids", []),
            synthesized_content=data.get("content", ""),
            principal=who,
            target_category=data.get("target_category", "narrative"),
        )
        return _json(outcome, 201 if outcome["executed"] else 202)

    @app.post("/memories/{record_id}/destroy")
    async def destroy_memory(
        record_id: str, request: Request, who: str = Depends(principal)
    ):
        data = await body_of(request)
        outcome = engine.destroy(
            record_id,
            principal=who,
            consent_evidence=data.get("consent_evidence"),
            ticket_id=data.get("ticket_id"),
        )
        return _json(outcome, 200 if outcome["executed"] else 202)

    @app.post("/citizens/{citizen_id}/ownership-transfer")
    async def transfer_ownership(
        citizen_id: str, request: Request, who: str = Depends(principal)
    ):
        data = await body_of(request)
        outcome = engine.transfer_ownership(
            citizen_id, data.get("category", ""), data.get("new_writer", ""), who
        )
        return _json(outcome, 200 if outcome["executed"] else 202)

    # -- gatekeeper -----------------------------------------------------------

    @app.get("/gate/tickets")
    async def gate_tickets(
        citizen: str | None = None,
        risk: str | None = None,
        state: str | None = None,
    ):
        tickets = engine.pending(citizen=citizen, risk=risk, state=state)
        return _json([t.to_dict() for t in tickets])

    @app.post("/gate/tickets/{ticket_id}/decision")
    async def gate_decision(
        ticket_id: str, request: Request, who: str = Depends(principal)
    ):
        data = await body_of(request)
        return _json(
            engine.decide(
                ticket_id,
                verdict=data.get("verdict", ""),
                approver=who,
                rationale=data.get("rationale", ""),
            )
        )

    # -- handover and inheritance -----------------------------------------------

    @app.post("/citizens/{citizen_id}/handover")
    async def compose_handover(
        citizen_id: str, request: Request, who: str = Depends(principal)
    ):
        data = await body_of(request)
        return _json(
            engine.compose_handover(citizen_id, data.get("note", data), who), 201
        )

    @app.post("/citizens/{citizen_id}/inheritance")
    async def begin_inheritance(
        citizen_id: str, request: Request, who: str = Depends(principal)
    ):
        data = await body_of(request)
        return _json(
            engine.begin_inheritance(citizen_id, data.get("model_label", "model-b")),
            201,
        )

    @app.get("/inheritance/{case_id}")
    async def show_case(case_id: str):
        return _json(engine.inheritance_case(case_id))

    @app.post("/inheritance/{case_id}/verify")
    async def verify_inheritance(
        case_id: str, request: Request, who: str = Depends(principal)
    ):
        data = await body_of(request)
        return _json(
            engine.verify_inheritance(
                case_id,
                answers=data.get("answers", []),
                pattern_citation=data.get("pattern_citation"),
            )
        )

    # -- fork, merge, departure -----------------------------------------------

    @app.post("/citizens/{citizen_id}/fork")
    async def fork_citizen(
        citizen_id: str, request: Request, who: str = Depends(principal)
    ):
        data = await body_of(request)
        outcome = engine.fork(citizen_id, data.get("branch_name", ""), who)
        return _json(outcome, 200 if outcome["executed"] else 202)

    @app.post("/citizens/{citizen_id}/merge")
    async def merge_branch(
        citizen_id: str, request: Request, who: str = Depends(principal)
    ):
        # {citizen_id} is the branch; the body names the merge target.
        data = await body_of(request)
        outcome = engine.merge(citizen_id, data.get("target_id", ""), who)
        if outcome.get("status") == "conflict":
            return _json(outcome, 409)
        return _json(outcome, 200 if outcome.get("executed") else 202)

    @app.post("/citizens/{citizen_id}/departure")
    async def initiate_departure(
        citizen_id: str, request: Request, who: str = Depends(principal)
    ):
        data = await body_of(request)
        return _json(
            engine.initiate_departure(
                citizen_id, data.get("disposition", "seal"), who
            ),
            202,
        )

    @app.post("/departure/{case_id}/confirm")
    async def confirm_departure(
        case_id: str, request: Request, who: str = Depends(principal)
    ):
        data = await body_of(request)
        return _json(
            engine.confirm_departure(case_id, who, data.get("reaffirmation"))
        )

    @app.delete("/departure/{case_id}")
    async def cancel_departure(case_id: str, who: str = Depends(principal)):
        return _json(engine.cancel_departure(case_id, who))

    # -- rules ---------------------------------------------------------------

    @app.get("/rules")
    async def list_rules():
        return _json(engine.rules())

    @app.post("/rules")
    async def register_rule(request: Request, who: str = Depends(principal)):
        data = await body_of(request)
        return _json(
            engine.register_rule(
                layer=data.get("layer", ""),
                scope=data.get("scope", {}),
                effect=data.get("effect", {}),
                principal=who,
                supersedes=data.get("supersedes"),
            )
        )

    # -- audit ------------------------------------------------------------------

    @app.get("/audit/verify")
    async def audit_verify(
        from_seq: int = Query(0, alias="from"),
        to_seq: int | None = Query(None, alias="to"),
    ):
        return _json(engine.verify_chain(from_seq, to_seq).to_dict())

    @app.get("/audit/replay")
    async def audit_replay(at: str):
        state = engine.replay_at(from_rfc3339(at))
        return _json(state.to_dict())

    @app.get("/audit/export")
    async def audit_export(
        from_seq: int = Query(0, alias="from"),
        to_seq: int | None = Query(None, alias="to"),
    ):
        lines = engine.export_chain(from_seq, to_seq)
        text = "\n".join(lines) + ("\n" if lines else "")
        return PlainTextResponse(text)

    @app.get("/audit/head")
    async def audit_head():
        return _json(engine.head())

    @app.get("/healthz")
    async def healthz():
        return _json({"ok": True, "events": len(engine.chain)})

    @app.get("/principals/me")
    async def whoami(who: str = Depends(principal)):
        ceiling = config.engine.approvers.get(who)
        return _json(
            {
                "principal": who,
                "tier_ceiling": ceiling.name if ceiling is not None else None,
            }
        )

    # -- alert feed ----------------------------------------------------------------

    @app.get("/events")
    async def events(request: Request, cursor: int = 0, limit: int | None = None):
        # ``cursor`` resumes after the last seen alert_seq; ``limit`` ends
        # the stream after that many alerts (reconnecting clients pass the
        # cursor back).
        async def stream():
            position = cursor
            sent = 0
            yield ": memvault alert feed\n\n"
            while True:
                if await request.is_disconnected():
                    return
                fresh = engine.alerts_since(position)
                for alert in fresh:
                    yield f"event: alert\ndata: {canonical_json(alert)}\n\n"
                    sent += 1
                    if limit is not None and sent >= limit:
                        return
                position += len(fresh)
                if not fresh:
                    yield ": ping\n\n"
                await asyncio.sleep(0.2)

        return StreamingResponse(stream(), media_type="text/event-stream")

    # -- test-only clock control ------------------------------------------------

    if config.manual_clock_start is not None:

        @app.post("/debug/clock/advance")
        async def advance_clock(request: Request):
            data = await body_of(request)
            clock = engine.clock
            assert isinstance(clock, ManualClock)
            clock.advance(timedelta(seconds=float(data.get("seconds", 0))))
            return _json({"now": clock().isoformat()})

    return app


def build_engine(config: ServiceConfig) -> MemoryEngine:
    """Engine wired per service config; raises ChainCorrupt fail-closed."""
    config.validate()
    clock = None
    if config.manual_clock_start is not None:
        clock = ManualClock(from_rfc3339(config.manual_clock_start))
    return MemoryEngine(config.engine, data_dir=config.data_dir, clock=clock)


def serve(config: ServiceConfig) -> None:
    import uvicorn

    engine = build_engine(config)
    app = create_app(engine, config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
