// Pure display helpers; unit-tested directly.

import type { RiskTier, Ticket } from './types';

export const RISK_LABELS: Record<RiskTier, string> = {
  R0: 'auto',
  R1: 'log-only',
  R2: 'one approver',
  R3: 'two approvers',
  R4: 'due process',
};

const QUORUM: Record<string, number> = { R2: 1, R3: 2, R4: 2 };

export function escapeHtml(value: string): string {
  return value
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export function quorumFor(risk: RiskTier): number {
  return QUORUM[risk] ?? 0;
}

export function approvalsOf(ticket: Ticket): string[] {
  const seen: string[] = [];
  for (const decision of ticket.decisions) {
    if (decision.verdict === 'approve' && !seen.includes(decision.approver)) {
      seen.push(decision.approver);
    }
  }
  return seen;
}

export function quorumProgress(ticket: Ticket): { have: number; need: number } {
  return { have: approvalsOf(ticket).length, need: quorumFor(ticket.risk) };
}

export function coolingRemaining(ticket: Ticket, nowIso: string): string | null {
  if (!ticket.cooling_off_until) return null;
  const remainingMs = Date.parse(ticket.cooling_off_until) - Date.parse(nowIso);
  if (remainingMs <= 0) return 'elapsed';
  return formatDuration(remainingMs);
}

export function deadlineRemaining(ticket: Ticket, nowIso: string): string {
  const remainingMs = Date.parse(ticket.deadline) - Date.parse(nowIso);
  return remainingMs <= 0 ? 'past deadline' : `${formatDuration(remainingMs)} left`;
}

export function formatDuration(ms: number): string {
  const seconds = Math.round(ms / 1000);
  if (seconds < 90) return `${seconds}s`;
  const minutes = Math.round(seconds / 60);
  if (minutes < 90) return `${minutes}m`;
  const hours = Math.round(minutes / 60);
  if (hours < 48) return `${hours}h`;
  return `${Math.round(hours / 24)}d`;
}

export function shortId(id: string, keep = 10): string {
  return id.length <= keep ? id : `${id.slice(0, keep)}…`;
}

// A decision is renderable as enabled only within the session's ceiling.
export function canDecide(ceiling: RiskTier | null, risk: RiskTier): boolean {
  if (ceiling === null) return false;
  return Number(ceiling.slice(1)) >= Number(risk.slice(1));
}
