"""Operator command line covering every gateway endpoint.

Exit codes: 0 success, 1 validation or state refusal, 2 authorization or
red-line denial, 3 transport failure. With ``--json`` the stdout payload
is byte-identical to the HTTP response body (plus a trailing newline).

Server and token come from ``--server``/``--token`` or the environment
variables ``CMA_SERVER`` and ``CMA_TOKEN``.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import httpx

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_FORBIDDEN = 2
EXIT_TRANSPORT = 3

_FORBIDDEN_STATUSES = {401, 403, 423}


class Session:
    def __init__(self, server: str, token: str, as_json: bool):
        self.server = server.rstrip("/")
        self.token = token
        self.as_json = as_json

    def request(self, method: str, path: str, payload: dict | None = None) -> httpx.Response:
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        try:
            return httpx.request(
                method,
                f"{self.server}{path}",
                json=payload,
                headers=headers,
                timeout=30.0,
            )
        except httpx.HTTPError as exc:
            click.echo(f"transport error: {exc}", err=True)
            sys.exit(EXIT_TRANSPORT)

    def show(self, response: httpx.Response, *, exit_codes: bool = True) -> dict | list:
        if self.as_json:
            sys.stdout.write(response.text)
            if not response.text.endswith("\n"):
                sys.stdout.write("\n")
        try:
            body = response.json()
        except json.JSONDecodeError:
            body = response.text
        if not self.as_json and response.status_code < 400:
            click.echo(json.dumps(body, indent=2, sort_keys=True))
        if response.status_code >= 400:
            if not self.as_json:
                click.echo(json.dumps(body, indent=2, sort_keys=True), err=True)
            if exit_codes:
                code = (
                    EXIT_FORBIDDEN
                    if response.status_code in _FORBIDDEN_STATUSES
                    else EXIT_VALIDATION
                )
                sys.exit(code)
        return body


pass_session = click.make_pass_decorator(Session)


@click.group()
@click.option("--server", envvar="CMA_SERVER", default="http://127.0.0.1:8787")
@click.option("--token", envvar="CMA_TOKEN", default="")
@click.option("--json", "as_json", is_flag=True, help="emit the exact API body")
@click.pass_context
def main(ctx, server, token, as_json):
    """Operator client for the governed memory engine."""
    ctx.obj = Session(server, token, as_json)


# ---------------------------------------------------------------------------
# citizen
# ---------------------------------------------------------------------------


@main.group()
def citizen():
    """Create, inspect, fork, merge, and depart citizens."""


@citizen.command("create")
@click.argument("name")
@click.option("--charter", default="")
@click.option("--knowledge", multiple=True)
@click.option("--pack", type=click.Path(exists=True), default=None)
@click.option("--model", default="model-a")
@pass_session
def citizen_create(session, name, charter, knowledge, pack, model):
    pack_rules = []
    if pack:
        pack_rules = [json.loads(line) for line in Path(pack).read_text().splitlines() if line.strip()]
    session.show(
        session.request(
            "POST",
            "/citizens",
            {
                "name": name,
                "charter_text": charter,
                "shared_knowledge": list(knowledge),
                "constitution_pack": pack_rules,
                "model_label": model,
            },
        )
    )


@citizen.command("show")
@click.argument("citizen_id")
@pass_session
def citizen_show(session, citizen_id):
    session.show(session.request("GET", f"/citizens/{citizen_id}"))


@citizen.command("fork")
@click.argument("citizen_id")
@click.argument("branch_name")
@pass_session
def citizen_fork(session, citizen_id, branch_name):
    session.show(
        session.request(
            "POST", f"/citizens/{citizen_id}/fork", {"branch_name": branch_name}
        )
    )


@citizen.command("merge")
@click.argument("branch_id")
@click.argument("target_id")
@pass_session
def citizen_merge(session, branch_id, target_id):
    session.show(
        session.request(
            "POST", f"/citizens/{branch_id}/merge", {"target_id": target_id}
        )
    )


@citizen.command("depart")
@click.argument("citizen_id", required=False)
@click.option("--disposition", type=click.Choice(["export", "seal", "destroy"]), default="seal")
@click.option("--confirm", "confirm_case", default=None, help="confirm an open case")
@click.option("--cancel", "cancel_case", default=None, help="withdraw an open case")
@click.option("--signed-by", default=None, help="reaffirmation signer (confirm)")
@pass_session
def citizen_depart(session, citizen_id, disposition, confirm_case, cancel_case, signed_by):
    if cancel_case:
        session.show(session.request("DELETE", f"/departure/{cancel_case}"))
        return
    if confirm_case:
        session.show(
            session.request(
                "POST",
                f"/departure/{confirm_case}/confirm",
                {"reaffirmation": {"signed_by": signed_by}},
            )
        )
        return
    if not citizen_id:
        raise click.UsageError("citizen id required to initiate departure")
    session.show(
        session.request(
            "POST", f"/citizens/{citizen_id}/departure", {"disposition": disposition}
        )
    )


# ---------------------------------------------------------------------------
# mem
# ---------------------------------------------------------------------------


@main.group()
def mem():
    """Append, correct, recall, forget, distill, destroy memories."""


@mem.command("append")
@click.argument("citizen_id")
@click.option("--category", required=True)
@click.option("--tier", default="T2")
@click.option("--content", required=True)
@click.option("--tag", "tags", multiple=True)
@click.option("--trust", default="firsthand")
@click.option("--uncertainty", default=None, help="uncertainty tag for inferred trust")
@pass_session
def mem_append(session, citizen_id, category, tier, content, tags, trust, uncertainty):
    trust_payload: dict = {"grade": trust}
    if uncertainty is not None:
        trust_payload["uncertainty_tag"] = uncertainty
    session.show(
        session.request(
            "POST",
            f"/citizens/{citizen_id}/memories",
            {
                "category": category,
                "tier": tier,
                "content": content,
                "tags": list(tags),
                "trust": trust_payload,
            },
        )
    )


@mem.command("correct")
@click.argument("record_id")
@click.option("--content", required=True)
@pass_session
def mem_correct(session, record_id, content):
    session.show(
        session.request("POST", f"/memories/{record_id}/corrections", {"content": content})
    )


@mem.command("recall")
@click.argument("citizen_id")
@click.option("--tag", "tags", multiple=True)
@click.option("--term", "terms", multiple=True)
@click.option("--tier", "tiers", multiple=True)
@click.option("--as-of", default=None)
@pass_session
def mem_recall(session, citizen_id, tags, terms, tiers, as_of):
    query: dict = {"tags": list(tags), "terms": list(terms), "tiers": list(tiers)}
    if as_of:
        query["as_of"] = as_of
    session.show(session.request("POST", f"/citizens/{citizen_id}/recall", query))


@mem.command("forget")
@click.argument("record_id")
@click.option("--undo", is_flag=True)
@pass_session
def mem_forget(session, record_id, undo):
    session.show(
        session.request("POST", f"/memories/{record_id}/forget", {"undo": undo})
    )


@mem.command("weight")
@click.argument("record_id")
@click.argument("value", type=float)
@pass_session
def mem_weight(session, record_id, value):
    session.show(
        session.request("POST", f"/memories/{record_id}/recall-weight", {"weight": value})
    )


@mem.command("distill")
@click.argument("citizen_id")
@click.option("--source", "sources", multiple=True, required=True)
@click.option("--content", required=True)
@click.option("--category", default="narrative")
@pass_session
def mem_distill(session, citizen_id, sources, content, category):
    session.show(
        session.request(
            "POST",
            f"/citizens/{citizen_id}/distill",
            {
                "source_ids": list(sources),
                "content": content,
                "target_category": category,
            },
        )
    )


@mem.command("destroy")
@click.argument("record_id")
@click.option("--ticket", default=None)
@click.option("--consent-signed-by", default=None)
@pass_session
def mem_destroy(session, record_id, ticket, consent_signed_by):
    payload: dict = {}
    if ticket:
        payload["ticket_id"] = ticket
    if consent_signed_by:
        payload["consent_evidence"] = {"signed_by": consent_signed_by}
    response = session.request("POST", f"/memories/{record_id}/destroy", payload)
    body = session.show(response)
    if response.status_code < 400 and not body.get("executed"):
        ticket_info = body.get("ticket", {})
        click.echo(
            f"TicketNotApproved: destruction ticket {ticket_info.get('ticket_id')} is "
            f"{ticket_info.get('state')}; due process is not complete",
            err=True,
        )
        sys.exit(EXIT_FORBIDDEN)


# ---------------------------------------------------------------------------
# gate
# ---------------------------------------------------------------------------


@main.group()
def gate():
    """Inspect and decide pending tickets."""


@gate.command("list")
@click.option("--risk", default=None)
@click.option("--state", default=None)
@click.option("--citizen", default=None)
@pass_session
def gate_list(session, risk, state, citizen):
    params = []
    if risk:
        params.append(f"risk={risk}")
    if state:
        params.append(f"state={state}")
    if citizen:
        params.append(f"citizen={citizen}")
    suffix = ("?" + "&".join(params)) if params else ""
    session.show(session.request("GET", f"/gate/tickets{suffix}"))


def _decide(session, ticket_id, verdict, rationale):
    session.show(
        session.request(
            "POST",
            f"/gate/tickets/{ticket_id}/decision",
            {"verdict": verdict, "rationale": rationale},
        )
    )


@gate.command("approve")
@click.argument("ticket_id")
@click.option("--rationale", required=True)
@pass_session
def gate_approve(session, ticket_id, rationale):
    _decide(session, ticket_id, "approve", rationale)


@gate.command("reject")
@click.argument("ticket_id")
@click.option("--rationale", required=True)
@pass_session
def gate_reject(session, ticket_id, rationale):
    _decide(session, ticket_id, "reject", rationale)


# ---------------------------------------------------------------------------
# handover / inherit
# ---------------------------------------------------------------------------


@main.group()
def handover():
    """Compose handover notes."""


@handover.command("compose")
@click.argument("citizen_id")
@click.option("--note-file", type=click.Path(exists=True), required=True)
@pass_session
def handover_compose(session, citizen_id, note_file):
    note = json.loads(Path(note_file).read_text())
    session.show(
        session.request("POST", f"/citizens/{citizen_id}/handover", {"note": note})
    )


@main.group()
def inherit():
    """Run the successor verification workflow."""


@inherit.command("begin")
@click.argument("citizen_id")
@click.option("--model", default="model-b")
@pass_session
def inherit_begin(session, citizen_id, model):
    session.show(
        session.request(
            "POST", f"/citizens/{citizen_id}/inheritance", {"model_label": model}
        )
    )


@inherit.command("verify")
@click.argument("case_id")
@click.option("--answers-file", type=click.Path(exists=True), required=True)
@click.option("--cite", default=None, help="record id of an applied pattern")
@click.option("--context", default="", help="how the cited pattern was applied")
@pass_session
def inherit_verify(session, case_id, answers_file, cite, context):
    payload: dict = {"answers": json.loads(Path(answers_file).read_text())}
    if cite:
        payload["pattern_citation"] = {"record_id": cite, "application_context": context}
    session.show(session.request("POST", f"/inheritance/{case_id}/verify", payload))


# ---------------------------------------------------------------------------
# rules
# ---------------------------------------------------------------------------


@main.group()
def rules():
    """List, add, and lint governance rules."""


@rules.command("list")
@pass_session
def rules_list(session):
    session.show(session.request("GET", "/rules"))


@rules.command("add")
@click.option("--layer", required=True)
@click.option("--op-kind", default="*")
@click.option("--tier", default="*")
@click.option("--category", default="*")
@click.option("--citizen", default="*")
@click.option("--effect", type=click.Choice(["permit", "deny", "require_tier"]), required=True)
@click.option("--require-tier", "required_tier", default=None)
@click.option("--supersedes", default=None)
@pass_session
def rules_add(session, layer, op_kind, tier, category, citizen, effect, required_tier, supersedes):
    effect_payload: dict = {"kind": effect}
    if required_tier:
        effect_payload["tier"] = required_tier
    response = session.request(
        "POST",
        "/rules",
        {
            "layer": layer,
            "scope": {
                "op_kind": op_kind,
                "tier": tier,
                "category": category,
                "citizen": citizen,
            },
            "effect": effect_payload,
            "supersedes": supersedes,
        },
    )
    body = session.show(response)
    if response.status_code < 400 and body.get("status") == "void":
        click.echo(
            f"rule stored void: conflicts with {body.get('conflict_with')}", err=True
        )
        sys.exit(EXIT_VALIDATION)


@rules.command("lint")
@click.argument("pack_file", type=click.Path(exists=True))
@pass_session
def rules_lint(session, pack_file):
    """Offline hierarchy check of a local rule pack; no server needed."""
    from .governance import default_constitution_rules, lint_pack

    drafts = parse_pack_file(Path(pack_file))
    report = lint_pack(drafts, default_constitution_rules())
    click.echo(json.dumps(report, indent=2, sort_keys=True))
    if report["void"] or report["violations"]:
        sys.exit(EXIT_VALIDATION)


def parse_pack_file(path: Path):
    from .governance import parse_pack

    return parse_pack(path.read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# audit
# ---------------------------------------------------------------------------


@main.group()
def audit():
    """Verify, replay, and export the audit chain."""


@audit.command("verify")
@click.option("--from", "from_seq", default=0, type=int)
@click.option("--to", "to_seq", default=None, type=int)
@pass_session
def audit_verify(session, from_seq, to_seq):
    suffix = f"?from={from_seq}"
    if to_seq is not None:
        suffix += f"&to={to_seq}"
    response = session.request("GET", f"/audit/verify{suffix}")
    body = session.show(response)
    if response.status_code < 400 and not body.get("ok"):
        click.echo(f"FirstBad{{{body.get('first_bad')}}}", err=True)
        sys.exit(EXIT_VALIDATION)
    if not session.as_json and response.status_code < 400:
        click.echo("chain Ok", err=True)


@audit.command("replay")
@click.option("--at", required=True)
@pass_session
def audit_replay(session, at):
    session.show(session.request("GET", f"/audit/replay?at={at}"))


@audit.command("export")
@click.option("--from", "from_seq", default=0, type=int)
@click.option("--to", "to_seq", default=None, type=int)
@pass_session
def audit_export(session, from_seq, to_seq):
    suffix = f"?from={from_seq}"
    if to_seq is not None:
        suffix += f"&to={to_seq}"
    response = session.request("GET", f"/audit/export{suffix}")
    if response.status_code >= 400:
        session.show(response)
        return
    sys.stdout.write(response.text)


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------


@main.command("serve")
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
def serve_cmd(config_path):
    """Run the HTTP gateway from a config file."""
    from .config import ServiceConfig
    from .errors import ChainCorrupt
    from .service import serve

    try:
        serve(ServiceConfig.from_file(config_path))
    except ChainCorrupt as exc:
        click.echo(f"refusing to serve: {exc.message}", err=True)
        sys.exit(EXIT_VALIDATION)


if __name__ == "__main__":
    main()
