// Wire types mirroring the gateway's JSON bodies.

export type RiskTier = 'R0' | 'R1' | 'R2' | 'R3' | 'R4';
export type TicketStateName = 'pending' | 'approved' | 'rejected' | 'suspended';

export interface Decision {
  approver: string;
  verdict: 'approve' | 'reject';
  rationale: string;
  at: string;
}

export interface OperationDescriptor {
  op_kind: string;
  citizen_id: string | null;
  tier: string | null;
  category: string | null;
  requested_by: string;
  payload_digest: string;
  attributes: Record<string, unknown>;
}

export interface Ticket {
  ticket_id: string;
  op: OperationDescriptor;
  risk: RiskTier;
  state: TicketStateName;
  decisions: Decision[];
  created_at: string;
  deadline: string;
  cooling_off_until: string | null;
  payload: Record<string, unknown>;
  consumed: boolean;
  executed_seq: number | null;
}

export interface Instance {
  instance_id: string;
  model_label: string;
  started_at: string;
  ended_at: string | null;
  end_reason: string | null;
  provisional: boolean;
}

export interface Citizen {
  citizen_id: string;
  name: string;
  stage: 'nascent' | 'active' | 'inheriting' | 'departing' | 'departed';
  current_instance: string | null;
  instances: Instance[];
  lineage: { parent_citizen: string | null; fork_children: string[] };
}

export interface MemoryRecord {
  record_id: string;
  citizen_id: string;
  tier: 'T0' | 'T1' | 'T2' | 'T3';
  category: string;
  content: string;
  content_hash: string;
  tags: string[];
  trust: { grade: string; uncertainty_tag?: string };
  recall_weight: number;
  status: 'active' | 'forgotten' | 'archived' | 'destroyed';
  supersedes: string | null;
  created_at: string;
}

export interface RecallHit {
  record: MemoryRecord;
  score: number;
}

export interface AuditEventLine {
  seq: number;
  at: string;
  kind: string;
  actor: string;
  citizen_id: string | null;
  body: Record<string, unknown>;
  prev_hash: string;
  this_hash: string;
}

export interface VerifyResult {
  ok: boolean;
  first_bad: number | null;
}

export interface Alert {
  alert_seq: number;
  kind: string;
  at: string;
  message: string;
  ticket_id?: string;
  citizen_id?: string;
  risk?: RiskTier;
}

export interface InheritanceCase {
  case_id: string;
  citizen_id: string;
  predecessor_instance: string;
  successor_instance: string;
  verdict: 'provisional' | 'passed' | 'failed';
  required: number;
  queries: { query_id: string; kind: string; prompt: string }[];
  checks: Record<string, unknown>;
}

export interface DepartureCase {
  case_id: string;
  citizen_id: string;
  disposition: 'export' | 'seal' | 'destroy';
  ticket_id: string;
  state: 'open' | 'cancelled' | 'confirmed';
  initiated_at: string;
}

export interface ApiError {
  code: string;
  message: string;
  red_line_id?: string;
}

export interface Session {
  serverUrl: string;
  token: string;
  principal: string;
  tierCeiling: RiskTier | null;
}
