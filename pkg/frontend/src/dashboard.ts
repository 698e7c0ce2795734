// Dashboard tabs: strategy attribution and FP distribution. Counts are
// computed client-side from the findings list and cross-checked against
// the report endpoints, so every displayed number equals the service's.

import type { SpecaClient } from "./api.js";
import type { Finding, FpCategory, Strategy } from "./types.js";
import { FP_CATEGORIES } from "./types.js";

export interface DashboardCounts {
  valid: number;
  invalid: number;
  pending: number;
  byStrategy: Record<Strategy, number>;
  byStrategyPct: Record<Strategy, number>;
  byFpCategory: Record<FpCategory, number>;
  byFpCategoryPct: Record<FpCategory, number>;
}

const STRATEGIES: Strategy[] = ["B_cross_impl", "A_static", "C_dynamic"];

function pct(count: number, total: number): number {
  return total === 0 ? 0 : Math.round((1000 * count) / total) / 10;
}

export function computeDashboard(findings: Finding[]): DashboardCounts {
  const valid = findings.filter((f) => f.status === "VALID");
  const invalid = findings.filter((f) => f.status === "INVALID");
  const pending = findings.filter(
    (f) => f.status === "NEEDS_HUMAN_VERIFICATION",
  );
  const byStrategy = { B_cross_impl: 0, A_static: 0, C_dynamic: 0 };
  for (const f of valid) byStrategy[f.strategy] += 1;
  const byStrategyPct = { B_cross_impl: 0, A_static: 0, C_dynamic: 0 };
  for (const s of STRATEGIES) {
    byStrategyPct[s] = pct(byStrategy[s], valid.length);
  }
  const byFpCategory = Object.fromEntries(
    FP_CATEGORIES.map((c) => [c, 0]),
  ) as Record<FpCategory, number>;
  for (const f of invalid) {
    if (f.fp_category) byFpCategory[f.fp_category] += 1;
  }
  const byFpCategoryPct = Object.fromEntries(
    FP_CATEGORIES.map((c) => [c, pct(byFpCategory[c], invalid.length)]),
  ) as Record<FpCategory, number>;
  return {
    valid: valid.length,
    invalid: invalid.length,
    pending: pending.length,
    byStrategy,
    byStrategyPct,
    byFpCategory,
    byFpCategoryPct,
  };
}

export interface CrossCheck {
  consistent: boolean;
  mismatches: string[];
}

// Every displayed count must equal the corresponding report endpoint value.
export async function crossCheckReports(
  client: SpecaClient,
  runId: string,
  counts: DashboardCounts,
): Promise<CrossCheck> {
  const mismatches: string[] = [];
  const attribution = await client.attributionReport(runId);
  for (const row of attribution.rows) {
    if (row.count !== counts.byStrategy[row.strategy]) {
      mismatches.push(
        `attribution ${row.strategy}: ui=${counts.byStrategy[row.strategy]} service=${row.count}`,
      );
    }
    if (row.pct !== counts.byStrategyPct[row.strategy]) {
      mismatches.push(
        `attribution pct ${row.strategy}: ui=${counts.byStrategyPct[row.strategy]} service=${row.pct}`,
      );
    }
  }
  const fp = await client.fpReport(runId);
  for (const row of fp.rows) {
    if (row.count !== counts.byFpCategory[row.category]) {
      mismatches.push(
        `fp ${row.category}: ui=${counts.byFpCategory[row.category]} service=${row.count}`,
      );
    }
    if (row.pct !== counts.byFpCategoryPct[row.category]) {
      mismatches.push(
        `fp pct ${row.category}: ui=${counts.byFpCategoryPct[row.category]} service=${row.pct}`,
      );
    }
  }
  return { consistent: mismatches.length === 0, mismatches };
}
