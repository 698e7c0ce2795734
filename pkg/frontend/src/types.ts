// DTOs mirroring the /v1 service contract.

export type TrustLevel = "TRUSTED" | "SEMI_TRUSTED" | "UNTRUSTED";

export type FindingStatus =
  | "CANDIDATE"
  | "NEEDS_HUMAN_VERIFICATION"
  | "VALID"
  | "INVALID"
  | "FILTERED";

export type Strategy = "A_static" | "B_cross_impl" | "C_dynamic";

export type Severity = "Critical" | "High" | "Medium" | "Low" | "Informational";

export const FP_CATEGORIES = [
  "threat_model_misalignment",
  "already_known_duplicate",
  "incorrect_analysis",
  "out_of_scope",
] as const;

export type FpCategory = (typeof FP_CATEGORIES)[number];

export interface CodeLocation {
  impl_id: string;
  path: string;
  line_start: number;
  line_end: number;
  symbol: string;
}

export interface CapabilityDemand {
  acting_actor: string;
  required_trust: TrustLevel;
  scope_tag: string;
  via_edge: [string, string] | null;
}

export interface Finding {
  finding_id: string;
  req_id: string;
  item_id: string;
  impl_id: string;
  location: CodeLocation;
  violation: string;
  strategy: Strategy;
  capability: CapabilityDemand;
  severity: Severity;
  impact_fraction: number;
  status: FindingStatus;
  fp_category: FpCategory | null;
  filter_reason: string | null;
  poc_attached: boolean;
  discovered_week: number;
  source_finding_id: string | null;
  requirement_text?: string | null;
  requirement_source?: {
    doc_id: string;
    section_slug: string;
    line_start: number;
    line_end: number;
  } | null;
  excerpt?: string | null;
}

export interface Actor {
  actor_id: string;
  trust: TrustLevel;
}

export interface BoundaryEdge {
  from_actor: string;
  to_actor: string;
  channel: string;
  crossing_trust: TrustLevel;
}

export interface ThreatModel {
  actors: Actor[];
  edges: BoundaryEdge[];
  scope_tags: string[];
}

export interface RunRecord {
  run_id: string;
  created_at: string | null;
  state: "INDEXED" | "MAPPED" | "AUDITED";
  counters: {
    requirements: number;
    checklist_items: number;
    findings_total: number;
    findings_by_status: Record<string, number>;
  };
}

export interface AttributionReport {
  rows: { strategy: Strategy; label: string; count: number; pct: number }[];
  total: number;
}

export interface FpReport {
  rows: { category: FpCategory; label: string; count: number; pct: number }[];
  total: number;
}

export interface TriageRequest {
  verdict: "VALID" | "INVALID";
  fp_category?: FpCategory;
  poc_attached: boolean;
}

export interface ProblemDetails {
  type: string;
  title: string;
  status: number;
  detail: string;
}
