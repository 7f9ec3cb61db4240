// Pending queue: risk badges, deadlines, cooling-off countdowns, quorum
// progress, and the decide form. Suspended tickets are visually flagged;
// R4 destruction tickets render their due-process checklist.

import {
  approvalsOf,
  canDecide,
  coolingRemaining,
  deadlineRemaining,
  escapeHtml,
  quorumProgress,
  RISK_LABELS,
  shortId,
} from '../format';
import type { RiskTier, Ticket } from '../types';

export interface QueueViewState {
  tickets: Ticket[];
  tierCeiling: RiskTier | null;
  nowIso: string;
  feedConnected: boolean;
}

export function renderQueue(state: QueueViewState): string {
  const open = state.tickets.filter(
    (t) => t.state === 'pending' || t.state === 'suspended',
  );
  const closed = state.tickets.filter(
    (t) => t.state === 'approved' || t.state === 'rejected',
  );
  const banner = state.feedConnected
    ? ''
    : '<div class="banner banner-warn" data-role="feed-banner">alert feed disconnected; retrying…</div>';
  if (state.tickets.length === 0) {
    return `${banner}<div class="empty-state">No tickets. The gate is quiet.</div>`;
  }
  return `
    ${banner}
    <section class="ticket-list" data-role="open-tickets">
      ${open.map((t) => renderTicketRow(t, state)).join('')}
    </section>
    ${closed.length ? `<h3 class="muted">decided</h3>` : ''}
    <section class="ticket-list" data-role="closed-tickets">
      ${closed.map((t) => renderTicketRow(t, state)).join('')}
    </section>
  `;
}

export function renderTicketRow(ticket: Ticket, state: QueueViewState): string {
  const { have, need } = quorumProgress(ticket);
  const cooling = coolingRemaining(ticket, state.nowIso);
  const suspended = ticket.state === 'suspended';
  const decidable =
    (ticket.state === 'pending' || suspended) &&
    canDecide(state.tierCeiling, ticket.risk);
  const isDestruction = ticket.op.op_kind === 'destroy';
  return `
  <article class="ticket state-${ticket.state}${suspended ? ' flagged' : ''}"
           data-ticket-id="${escapeHtml(ticket.ticket_id)}">
    <header>
      <span class="badge risk-${ticket.risk}">${ticket.risk} · ${RISK_LABELS[ticket.risk]}</span>
      <span class="op-kind">${escapeHtml(ticket.op.op_kind)}</span>
      <span class="ticket-id mono">${escapeHtml(shortId(ticket.ticket_id, 16))}</span>
      <span class="state-label" data-role="state">${ticket.state}${suspended ? ' ⚠ needs a human' : ''}</span>
    </header>
    <div class="ticket-meta">
      <span>citizen ${escapeHtml(ticket.op.citizen_id ?? '—')}</span>
      <span>${escapeHtml(ticket.op.tier ?? '')} ${escapeHtml(ticket.op.category ?? '')}</span>
      <span>requested by ${escapeHtml(ticket.op.requested_by)}</span>
      <span data-role="deadline">${deadlineRemaining(ticket, state.nowIso)}</span>
      ${cooling ? `<span data-role="cooling">cooling-off: ${cooling}</span>` : ''}
    </div>
    <div class="quorum" data-role="quorum">
      approvals ${have}/${need}
      <span class="quorum-bar"><span class="quorum-fill" style="width:${need ? Math.min(100, (have / need) * 100) : 0}%"></span></span>
      ${approvalsOf(ticket).map((a) => `<span class="chip">${escapeHtml(a)}</span>`).join('')}
    </div>
    ${isDestruction ? renderDueProcessChecklist(ticket, have, need, cooling) : ''}
    ${renderDecisions(ticket)}
    ${decidable ? renderDecideForm(ticket) : ''}
  </article>`;
}

function renderDueProcessChecklist(
  ticket: Ticket,
  have: number,
  need: number,
  cooling: string | null,
): string {
  const check = (done: boolean, label: string) =>
    `<li class="${done ? 'done' : 'todo'}">${done ? '☑' : '☐'} ${label}</li>`;
  return `
    <ul class="due-process" data-role="due-process">
      ${check(have >= need, `approvals collected (${have}/${need})`)}
      ${check(cooling === 'elapsed', `cooling-off ${cooling === 'elapsed' ? 'elapsed' : `remaining: ${cooling ?? '—'}`}`)}
      ${check(ticket.consumed, 'executed')}
    </ul>`;
}

function renderDecisions(ticket: Ticket): string {
  if (ticket.decisions.length === 0) return '';
  return `<ul class="decisions">${ticket.decisions
    .map(
      (d) =>
        `<li><b>${escapeHtml(d.approver)}</b> ${d.verdict}: ${escapeHtml(d.rationale)}</li>`,
    )
    .join('')}</ul>`;
}

function renderDecideForm(ticket: Ticket): string {
  return `
    <form class="decide-form" data-role="decide-form" data-ticket-id="${escapeHtml(ticket.ticket_id)}">
      <input name="rationale" type="text" placeholder="rationale (required)" required />
      <button type="submit" name="verdict" value="approve" data-role="approve">approve</button>
      <button type="submit" name="verdict" value="reject" data-role="reject">reject</button>
      <span class="form-error" data-role="form-error"></span>
    </form>`;
}
