// Audit browser: chain verification status, the event stream, and a
// point-in-time replay panel. A broken chain renders loudly.

import { escapeHtml, shortId } from '../format';
import type { AuditEventLine, VerifyResult } from '../types';

export interface AuditViewState {
  verify: VerifyResult | null;
  events: AuditEventLine[];
  replayAt: string | null;
  replaySummary: ReplaySummary | null;
}

export interface ReplaySummary {
  applied_seq: number;
  citizens: number;
  records: number;
  activeRecords: number;
  tickets: number;
}

export function summarizeReplay(state: Record<string, unknown>): ReplaySummary {
  const records = (state.records ?? {}) as Record<string, { status?: string }>;
  return {
    applied_seq: (state.applied_seq as number) ?? -1,
    citizens: Object.keys((state.citizens ?? {}) as object).length,
    records: Object.keys(records).length,
    activeRecords: Object.values(records).filter((r) => r.status === 'active').length,
    tickets: Object.keys((state.tickets ?? {}) as object).length,
  };
}

export function renderAudit(state: AuditViewState): string {
  return `
    ${renderVerifyBadge(state.verify)}
    <form class="replay-form" data-role="replay-form">
      <label>state as of
        <input name="at" type="text" placeholder="2026-01-01T00:00:00Z"
               value="${escapeHtml(state.replayAt ?? '')}" />
      </label>
      <button type="submit">replay</button>
    </form>
    ${state.replaySummary ? renderReplaySummary(state.replaySummary) : ''}
    <table class="events">
      <thead><tr><th>seq</th><th>at</th><th>kind</th><th>actor</th><th>citizen</th><th>hash</th></tr></thead>
      <tbody>
        ${state.events
          .map(
            (e) => `
          <tr class="${state.verify && !state.verify.ok && state.verify.first_bad === e.seq ? 'broken' : ''}"
              data-seq="${e.seq}">
            <td>${e.seq}</td>
            <td class="mono">${escapeHtml(e.at)}</td>
            <td>${escapeHtml(e.kind)}</td>
            <td>${escapeHtml(e.actor)}</td>
            <td class="mono">${escapeHtml(e.citizen_id ? shortId(e.citizen_id, 12) : '—')}</td>
            <td class="mono">${escapeHtml(shortId(e.this_hash, 12))}</td>
          </tr>`,
          )
          .join('')}
      </tbody>
    </table>
  `;
}

export function renderVerifyBadge(verify: VerifyResult | null): string {
  if (verify === null) {
    return '<div class="chain-status muted" data-role="chain-status">verifying…</div>';
  }
  if (verify.ok) {
    return '<div class="chain-status chain-ok" data-role="chain-status">⛓ chain verified</div>';
  }
  return `<div class="chain-status chain-broken" data-role="chain-status">
    ⚠ CHAIN CORRUPT — first bad event: seq ${verify.first_bad}
  </div>`;
}

function renderReplaySummary(summary: ReplaySummary): string {
  return `
    <div class="replay-summary" data-role="replay-summary">
      replayed through seq ${summary.applied_seq}:
      ${summary.citizens} citizen(s), ${summary.records} record(s)
      (${summary.activeRecords} active), ${summary.tickets} ticket(s)
    </div>`;
}
