// Finding cards: the queue's view model. Pure projections of service
// responses so a reload always reproduces the identical view.

import type { Finding, Severity } from "./types.js";

const SEVERITY_RANK: Record<Severity, number> = {
  Critical: 4,
  High: 3,
  Medium: 2,
  Low: 1,
  Informational: 0,
};

export interface Affordances {
  validate: boolean;
  invalidate: boolean;
  propagate: boolean;
}

export interface FindingCard {
  finding_id: string;
  summary: string;
  requirementText: string;
  sourceAnchor: string;
  excerpt: string;
  capability: string;
  severity: Severity;
  strategy: string;
  state: string;
  affordances: Affordances;
  /** count shown inline after a propagate action resolves */
  propagatedCount: number | null;
}

// Affordances strictly reflect the finding's legal transitions.
export function affordancesFor(finding: Finding): Affordances {
  const triagable = finding.status === "NEEDS_HUMAN_VERIFICATION";
  return {
    validate: triagable,
    invalidate: triagable,
    propagate: finding.status === "VALID",
  };
}

export function toCard(finding: Finding): FindingCard {
  const location = finding.location.path
    ? `${finding.location.path}:${finding.location.line_start}`
    : finding.impl_id;
  const source = finding.requirement_source;
  return {
    finding_id: finding.finding_id,
    summary: `[${finding.impl_id}] ${finding.violation} @ ${location}`,
    requirementText: finding.requirement_text ?? finding.req_id,
    sourceAnchor: source
      ? `${source.doc_id}/${source.section_slug}#L${source.line_start}`
      : finding.req_id,
    excerpt: finding.excerpt ?? "",
    capability: `${finding.capability.acting_actor} (${finding.capability.required_trust}) / ${finding.capability.scope_tag}`,
    severity: finding.severity,
    strategy: finding.strategy,
    state: finding.status,
    affordances: affordancesFor(finding),
    propagatedCount: null,
  };
}

export interface QueueFilters {
  status?: string;
  strategy?: string;
  impl?: string;
  page?: number;
  pageSize?: number;
}

export interface QueuePage {
  cards: FindingCard[];
  total: number;
  page: number;
  pageCount: number;
}

// Default queue: pending verification, severity descending then finding id.
export function buildQueue(findings: Finding[], filters: QueueFilters = {}): QueuePage {
  const status = filters.status ?? "NEEDS_HUMAN_VERIFICATION";
  const pageSize = filters.pageSize ?? 20;
  let selected = findings.filter((f) => !status || f.status === status);
  if (filters.strategy) {
    selected = selected.filter((f) => f.strategy === filters.strategy);
  }
  if (filters.impl) {
    selected = selected.filter((f) => f.impl_id === filters.impl);
  }
  selected = [...selected].sort((a, b) => {
    const bySeverity = SEVERITY_RANK[b.severity] - SEVERITY_RANK[a.severity];
    if (bySeverity !== 0) return bySeverity;
    return a.finding_id < b.finding_id ? -1 : a.finding_id > b.finding_id ? 1 : 0;
  });
  const page = Math.max(filters.page ?? 0, 0);
  const start = page * pageSize;
  return {
    cards: selected.slice(start, start + pageSize).map(toCard),
    total: selected.length,
    page,
    pageCount: Math.max(Math.ceil(selected.length / pageSize), 1),
  };
}
