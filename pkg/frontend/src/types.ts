/** Wire shapes of the firewall admin API. */

export interface VerdictSummary {
  decision: "allow" | "quarantine" | "block";
  score: string; // fixed 4-decimal string
  matched_rules: string[];
  response_digest?: string;
}

export interface EventRecord {
  seq: string;
  event_id: string;
  occurred_at: string;
  client_id: string;
  envelope_digest: string;
  input_verdict: VerdictSummary;
  output_verdict: VerdictSummary | null;
  final_decision: string;
  latency_ms: string;
  reason: string | null;
  prev_hash: string;
  hash: string;
  related_event_id?: string;
}

export interface WireRule {
  id: string;
  category: string;
  pattern_type: "substring" | "regex";
  pattern: string;
  weight: number;
  action: "score" | "hard_block";
  applies_to: "input" | "output" | "both";
  description: string;
}

export interface RulesDoc {
  version: number;
  loaded_at: number;
  rules: WireRule[];
}

export interface WireMessage {
  role: string;
  content: string;
}

export interface QuarantineItemDoc {
  event_id: string;
  kind: "input" | "output";
  envelope: { messages: WireMessage[]; [key: string]: unknown };
  matched_rule_ids: string[];
  enqueued_at: number;
  suppressed_response: WireMessage[] | null;
  status: "pending" | "released" | "blocked";
  resolved_by: string | null;
  label: "tp" | "fp" | null;
}

export interface AlertDoc {
  alert_id: number;
  kind: string;
  severity: "info" | "warn" | "critical";
  created_at: number;
  payload: Record<string, unknown>;
}

export interface MetricsSnapshot {
  window_start: number;
  totals: {
    requests: number;
    allows: number;
    blocks: number;
    quarantines: number;
    rate_limited: number;
  };
  per_rule_hits: Record<string, number>;
  latency_ms: { p50: number; p95: number; max: number };
  ewma_block_rate: number;
}

export interface ResolveResult {
  event_id: string;
  status: string;
  label: string;
  feedback_applied: Array<{
    rule_id: string;
    weight_before: number;
    weight_after: number;
  }>;
  release: { event_id: string; decision: string } | null;
}

export interface FeedbackResult {
  event_id: string;
  rule_id: string;
  label: string;
  weight_before: number;
  weight_after: number;
}
