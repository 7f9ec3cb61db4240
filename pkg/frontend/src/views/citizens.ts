// Citizens & lifecycle: stages, instances, recent memories, and the
// destruction workflow (propose with optional consent, execute once due
// process completes). No content editing: memories render read-only.

import { escapeHtml, shortId } from '../format';
import type { Citizen, RecallHit, Ticket } from '../types';

export interface CitizensViewState {
  citizens: Citizen[];
  memories: Record<string, RecallHit[]>; // citizen_id -> recall results
  destructionTickets: Ticket[];
}

const STAGE_LABELS: Record<Citizen['stage'], string> = {
  nascent: 'nascent',
  active: 'active',
  inheriting: 'inheriting (successor under verification)',
  departing: 'departing (cooling-off)',
  departed: 'departed',
};

export function renderCitizens(state: CitizensViewState): string {
  if (state.citizens.length === 0) {
    return '<div class="empty-state">No citizens yet.</div>';
  }
  return state.citizens.map((c) => renderCitizenCard(c, state)).join('');
}

function renderCitizenCard(citizen: Citizen, state: CitizensViewState): string {
  const memories = state.memories[citizen.citizen_id] ?? [];
  return `
  <article class="citizen stage-${citizen.stage}" data-citizen-id="${escapeHtml(citizen.citizen_id)}">
    <header>
      <b>${escapeHtml(citizen.name)}</b>
      <span class="badge stage">${STAGE_LABELS[citizen.stage]}</span>
      <span class="mono muted">${escapeHtml(shortId(citizen.citizen_id, 14))}</span>
    </header>
    <div class="instances">
      ${citizen.instances
        .map(
          (i) => `
        <span class="chip ${i.ended_at ? 'ended' : 'open'}${i.provisional ? ' provisional' : ''}">
          ${escapeHtml(i.model_label)} ${i.ended_at ? `· ended (${escapeHtml(i.end_reason ?? '')})` : i.provisional ? '· provisional' : '· current'}
        </span>`,
        )
        .join('')}
    </div>
    ${citizen.lineage.fork_children.length ? `<div class="muted">forks: ${citizen.lineage.fork_children.map((f) => escapeHtml(shortId(f, 12))).join(', ')}</div>` : ''}
    <table class="memories">
      <thead><tr><th>tier</th><th>category</th><th>content</th><th>score</th><th></th></tr></thead>
      <tbody>
        ${memories.map((hit) => renderMemoryRow(hit, state)).join('')}
      </tbody>
    </table>
  </article>`;
}

function renderMemoryRow(hit: RecallHit, state: CitizensViewState): string {
  const record = hit.record;
  const ticket = state.destructionTickets.find(
    (t) => (t.payload as { record_id?: string }).record_id === record.record_id && !t.consumed,
  );
  let action: string;
  if (ticket && ticket.state === 'approved') {
    action = `<button data-role="execute-destruction" data-record-id="${escapeHtml(record.record_id)}" data-ticket-id="${escapeHtml(ticket.ticket_id)}">execute destruction</button>`;
  } else if (ticket) {
    action = `<span class="muted">destruction ${ticket.state}</span>`;
  } else {
    action = `<button data-role="propose-destruction" data-record-id="${escapeHtml(record.record_id)}" data-tier="${record.tier}">propose destruction</button>`;
  }
  return `
    <tr data-record-id="${escapeHtml(record.record_id)}">
      <td><span class="badge tier-${record.tier}">${record.tier}</span></td>
      <td>${escapeHtml(record.category)}</td>
      <td class="content">${escapeHtml(record.content)}</td>
      <td>${hit.score.toFixed(3)}</td>
      <td>${action}</td>
    </tr>`;
}
