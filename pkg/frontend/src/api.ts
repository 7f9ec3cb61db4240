// Typed client for the gateway. The console issues only documented API
// calls and keeps no state the server does not; a failed call surfaces
// the server's structured error verbatim.

import type {
  ApiError,
  AuditEventLine,
  Citizen,
  InheritanceCase,
  RecallHit,
  Ticket,
  VerifyResult,
} from './types';

export class RequestFailed extends Error {
  constructor(
    public status: number,
    public body: ApiError,
  ) {
    super(`${body.code}: ${body.message}`);
  }
}

export class ConsoleApi {
  constructor(
    private serverUrl: string,
    private token: string,
  ) {}

  private async request<T>(
    method: string,
    path: string,
    payload?: unknown,
  ): Promise<T> {
    const response = await fetch(`${this.serverUrl}${path}`, {
      method,
      headers: {
        Authorization: `Bearer ${this.token}`,
        ...(payload !== undefined ? { 'Content-Type': 'application/json' } : {}),
      },
      body: payload !== undefined ? JSON.stringify(payload) : undefined,
    });
    const text = await response.text();
    const body = text ? JSON.parse(text) : {};
    if (!response.ok) {
      throw new RequestFailed(response.status, body as ApiError);
    }
    return body as T;
  }

  whoami(): Promise<{ principal: string; tier_ceiling: string | null }> {
    return this.request('GET', '/principals/me');
  }

  tickets(filter: { risk?: string; state?: string; citizen?: string } = {}): Promise<Ticket[]> {
    const params = new URLSearchParams();
    if (filter.risk) params.set('risk', filter.risk);
    if (filter.state) params.set('state', filter.state);
    if (filter.citizen) params.set('citizen', filter.citizen);
    const query = params.toString();
    return this.request('GET', `/gate/tickets${query ? `?${query}` : ''}`);
  }

  decide(ticketId: string, verdict: 'approve' | 'reject', rationale: string) {
    return this.request<{ ticket: Ticket; executed: boolean; result: unknown }>(
      'POST',
      `/gate/tickets/${ticketId}/decision`,
      { verdict, rationale },
    );
  }

  citizens(): Promise<Citizen[]> {
    return this.request('GET', '/citizens');
  }

  recall(citizenId: string, query: Record<string, unknown> = {}): Promise<RecallHit[]> {
    return this.request('POST', `/citizens/${citizenId}/recall`, query);
  }

  proposeDestruction(recordId: string, consentSignedBy?: string) {
    const payload: Record<string, unknown> = {};
    if (consentSignedBy) payload.consent_evidence = { signed_by: consentSignedBy };
    return this.request<{ executed: boolean; ticket: Ticket }>(
      'POST',
      `/memories/${recordId}/destroy`,
      payload,
    );
  }

  executeDestruction(recordId: string, ticketId: string, consentSignedBy?: string) {
    const payload: Record<string, unknown> = { ticket_id: ticketId };
    if (consentSignedBy) payload.consent_evidence = { signed_by: consentSignedBy };
    return this.request<{ executed: boolean; record: unknown }>(
      'POST',
      `/memories/${recordId}/destroy`,
      payload,
    );
  }

  inheritanceCase(caseId: string): Promise<InheritanceCase> {
    return this.request('GET', `/inheritance/${caseId}`);
  }

  verifyChain(): Promise<VerifyResult> {
    return this.request('GET', '/audit/verify');
  }

  exportChain(fromSeq = 0, toSeq?: number): Promise<AuditEventLine[]> {
    const params = new URLSearchParams({ from: String(fromSeq) });
    if (toSeq !== undefined) params.set('to', String(toSeq));
    return fetch(`${this.serverUrl}/audit/export?${params}`)
      .then((r) => r.text())
      .then((text) =>
        text
          .split('\n')
          .filter((line) => line.trim())
          .map((line) => JSON.parse(line) as AuditEventLine),
      );
  }

  replayAt(at: string): Promise<Record<string, unknown>> {
    return this.request('GET', `/audit/replay?at=${encodeURIComponent(at)}`);
  }

  head(): Promise<{ seq: number; hash: string; events: number }> {
    return this.request('GET', '/audit/head');
  }
}
