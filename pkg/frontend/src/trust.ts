// Client-side mirror of the service's threat-model semantics, used for
// inline editor validation and the prospective KEEP/FILTER flip diff.

import type {
  CapabilityDemand,
  Finding,
  ThreatModel,
  TrustLevel,
} from "./types.js";

const TRUST_LEVELS: TrustLevel[] = ["TRUSTED", "SEMI_TRUSTED", "UNTRUSTED"];

export interface ModelIssue {
  kind: "DuplicateActor" | "DanglingEdge" | "VacuousModel";
  message: string;
  // index into actors/edges for inline rendering on the offending row
  actorIndex?: number;
  edgeIndex?: number;
}

export function validateModel(model: ThreatModel): {
  errors: ModelIssue[];
  warnings: ModelIssue[];
} {
  const errors: ModelIssue[] = [];
  const warnings: ModelIssue[] = [];
  const seen = new Set<string>();
  model.actors.forEach((actor, i) => {
    if (seen.has(actor.actor_id)) {
      errors.push({
        kind: "DuplicateActor",
        message: `actor ${actor.actor_id} declared twice`,
        actorIndex: i,
      });
    }
    seen.add(actor.actor_id);
    if (!TRUST_LEVELS.includes(actor.trust)) {
      errors.push({
        kind: "DuplicateActor",
        message: `actor ${actor.actor_id} has unknown trust ${actor.trust}`,
        actorIndex: i,
      });
    }
  });
  model.edges.forEach((edge, i) => {
    for (const endpoint of [edge.from_actor, edge.to_actor]) {
      if (!seen.has(endpoint)) {
        errors.push({
          kind: "DanglingEdge",
          message: `edge references undeclared actor ${endpoint}`,
          edgeIndex: i,
        });
      }
    }
  });
  if (!model.actors.some((a) => a.trust === "UNTRUSTED")) {
    warnings.push({
      kind: "VacuousModel",
      message: "no UNTRUSTED actor declared",
    });
  }
  return { errors, warnings };
}

export type Verdict =
  | { keep: true; penalty: boolean }
  | { keep: false; reason: "threat_model_misalignment" | "out_of_scope" };

export function filterFinding(
  model: ThreatModel,
  demand: CapabilityDemand,
): Verdict {
  const actor = model.actors.find((a) => a.actor_id === demand.acting_actor);
  if (!actor) {
    throw new Error(`UnknownActor: ${demand.acting_actor}`);
  }
  if (actor.trust === "TRUSTED") {
    return { keep: false, reason: "threat_model_misalignment" };
  }
  if (demand.via_edge) {
    const [from, to] = demand.via_edge;
    const edge = model.edges.find(
      (e) => e.from_actor === from && e.to_actor === to,
    );
    if (!edge) {
      throw new Error(`UnknownActor: edge ${from}->${to}`);
    }
    if (edge.crossing_trust === "TRUSTED" && demand.required_trust === "UNTRUSTED") {
      return { keep: false, reason: "threat_model_misalignment" };
    }
  }
  if (!model.scope_tags.includes(demand.scope_tag)) {
    return { keep: false, reason: "out_of_scope" };
  }
  return { keep: true, penalty: actor.trust === "SEMI_TRUSTED" };
}

export interface VerdictFlip {
  finding_id: string;
  before: "KEEP" | "FILTER";
  after: "KEEP" | "FILTER";
}

// Which findings would flip KEEP<->FILTER if the draft model replaced the
// current one. Shown in the editor before saving.
export function diffVerdicts(
  current: ThreatModel,
  draft: ThreatModel,
  findings: Finding[],
): VerdictFlip[] {
  const flips: VerdictFlip[] = [];
  for (const finding of findings) {
    let before: "KEEP" | "FILTER";
    let after: "KEEP" | "FILTER";
    try {
      before = filterFinding(current, finding.capability).keep ? "KEEP" : "FILTER";
      after = filterFinding(draft, finding.capability).keep ? "KEEP" : "FILTER";
    } catch {
      continue; // unknown actors in one of the models: no verdict to compare
    }
    if (before !== after) {
      flips.push({ finding_id: finding.finding_id, before, after });
    }
  }
  return flips;
}
