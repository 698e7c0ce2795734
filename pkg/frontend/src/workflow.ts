// Triage workflow: submit verdicts, surface PoC blocking inline, reconcile
// 409 conflicts by refreshing, and expose the 1->N propagate action whose
// result count is shown on the card.

import { ApiError, SpecaClient } from "./api.js";
import { affordancesFor, toCard, type FindingCard } from "./cards.js";
import type { Finding, FpCategory } from "./types.js";

export type TriageOutcome =
  | { kind: "updated"; card: FindingCard; finding: Finding }
  | { kind: "blocked"; reason: string } // 422, e.g. PoCRequired
  | { kind: "conflict"; card: FindingCard; finding: Finding }; // 409: refreshed

export async function submitTriage(
  client: SpecaClient,
  runId: string,
  finding: Finding,
  verdict: "VALID" | "INVALID",
  options: { fpCategory?: FpCategory; pocAttached?: boolean } = {},
): Promise<TriageOutcome> {
  if (!affordancesFor(finding).validate) {
    return { kind: "blocked", reason: `finding is ${finding.status}` };
  }
  try {
    const updated = await client.triage(finding.finding_id, {
      verdict,
      fp_category: options.fpCategory,
      poc_attached: options.pocAttached ?? false,
    });
    return { kind: "updated", card: toCard(updated), finding: updated };
  } catch (error) {
    if (error instanceof ApiError && error.status === 422) {
      return { kind: "blocked", reason: error.problem.title };
    }
    if (error instanceof ApiError && error.status === 409) {
      const fresh = await client.listFindings(runId);
      const current = fresh.find((f) => f.finding_id === finding.finding_id);
      if (current) {
        return { kind: "conflict", card: toCard(current), finding: current };
      }
    }
    throw error;
  }
}

export async function propagateFinding(
  client: SpecaClient,
  finding: Finding,
): Promise<{ card: FindingCard; createdIds: string[] }> {
  if (!affordancesFor(finding).propagate) {
    throw new Error(`propagate not available for status ${finding.status}`);
  }
  const result = await client.propagate(finding.finding_id);
  const card = toCard(finding);
  card.propagatedCount = result.created.length;
  return { card, createdIds: result.created };
}
