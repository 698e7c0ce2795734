// Vanilla DOM shell for the triage console. Queue-first layout: the review
// queue is the landing view, dashboards and the threat-model editor are
// secondary tabs. All state is fetched from the service; reloading the
// page reproduces the identical view.

import { ApiError, SpecaClient } from "./api.js";
import { buildQueue, type FindingCard } from "./cards.js";
import { computeDashboard, crossCheckReports } from "./dashboard.js";
import { diffVerdicts, validateModel } from "./trust.js";
import type { Finding, FpCategory, ThreatModel } from "./types.js";
import { propagateFinding, submitTriage } from "./workflow.js";

interface AppState {
  client: SpecaClient;
  runId: string;
  findings: Finding[];
  page: number;
  statusFilter: string;
  banner: string | null;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

async function refresh(state: AppState): Promise<void> {
  try {
    state.findings = await state.client.listFindings(state.runId);
    state.banner = null;
  } catch {
    state.banner = "service unreachable; retrying keeps your place";
  }
}

function renderCard(
  state: AppState,
  card: FindingCard,
  finding: Finding,
  rerender: () => void,
): HTMLElement {
  const root = el("article", `card severity-${card.severity.toLowerCase()}`);
  root.append(
    el("header", "card-title", `${card.finding_id} · ${card.severity} · ${card.strategy}`),
    el("p", "card-summary", card.summary),
    el("blockquote", "card-requirement", `${card.requirementText} (${card.sourceAnchor})`),
    el("pre", "card-excerpt", card.excerpt),
    el("p", "card-capability", `capability: ${card.capability}`),
    el("p", "card-state", `state: ${card.state}`),
  );
  const actions = el("div", "card-actions");
  const error = el("p", "card-error");

  if (card.affordances.validate) {
    const poc = el("input") as HTMLInputElement;
    poc.type = "checkbox";
    const pocLabel = el("label", "poc", "PoC attached");
    pocLabel.prepend(poc);
    const validate = el("button", "validate", "Validate");
    validate.onclick = async () => {
      const outcome = await submitTriage(state.client, state.runId, finding, "VALID", {
        pocAttached: poc.checked,
      });
      if (outcome.kind === "blocked") {
        error.textContent = outcome.reason; // PoCRequired renders inline
        return;
      }
      await refresh(state);
      rerender();
    };
    const category = el("select") as HTMLSelectElement;
    for (const value of [
      "threat_model_misalignment",
      "already_known_duplicate",
      "incorrect_analysis",
      "out_of_scope",
    ]) {
      const option = el("option", undefined, value) as HTMLOptionElement;
      option.value = value;
      category.append(option);
    }
    const invalidate = el("button", "invalidate", "Invalidate");
    invalidate.onclick = async () => {
      const outcome = await submitTriage(state.client, state.runId, finding, "INVALID", {
        fpCategory: category.value as FpCategory,
      });
      if (outcome.kind === "blocked") {
        error.textContent = outcome.reason;
        return;
      }
      await refresh(state);
      rerender();
    };
    actions.append(validate, pocLabel, invalidate, category);
  }

  if (card.affordances.propagate) {
    const propagate = el("button", "propagate", "Propagate 1→N");
    propagate.onclick = async () => {
      try {
        const { createdIds } = await propagateFinding(state.client, finding);
        error.textContent = `propagated: ${createdIds.length} new candidates`;
        await refresh(state);
        rerender();
      } catch (e) {
        error.textContent = e instanceof ApiError ? e.problem.title : String(e);
      }
    };
    actions.append(propagate);
  }

  root.append(actions, error);
  return root;
}

function renderQueue(state: AppState, mount: HTMLElement): void {
  mount.replaceChildren();
  if (state.banner) {
    const banner = el("div", "banner", state.banner);
    const retry = el("button", "retry", "Retry");
    retry.onclick = async () => {
      await refresh(state);
      renderQueue(state, mount);
    };
    banner.append(retry);
    mount.append(banner);
  }
  const queue = buildQueue(state.findings, {
    status: state.statusFilter,
    page: state.page,
  });
  mount.append(
    el("h2", undefined, `Review queue (${queue.total})`),
  );
  const byId = new Map(state.findings.map((f) => [f.finding_id, f]));
  for (const card of queue.cards) {
    const finding = byId.get(card.finding_id);
    if (finding) {
      mount.append(renderCard(state, card, finding, () => renderQueue(state, mount)));
    }
  }
  const pager = el("div", "pager");
  const prev = el("button", undefined, "‹ prev");
  prev.disabled = queue.page === 0;
  prev.onclick = () => {
    state.page -= 1;
    renderQueue(state, mount);
  };
  const next = el("button", undefined, "next ›");
  next.disabled = queue.page >= queue.pageCount - 1;
  next.onclick = () => {
    state.page += 1;
    renderQueue(state, mount);
  };
  pager.append(prev, el("span", undefined, ` ${queue.page + 1}/${queue.pageCount} `), next);
  mount.append(pager);
}

async function renderDashboard(state: AppState, mount: HTMLElement): Promise<void> {
  mount.replaceChildren(el("h2", undefined, "Dashboards"));
  const counts = computeDashboard(state.findings);
  const attribution = el("table", "attribution");
  for (const [strategy, count] of Object.entries(counts.byStrategy)) {
    const row = el("tr");
    row.append(
      el("td", undefined, strategy),
      el("td", undefined, String(count)),
      el("td", undefined, `${counts.byStrategyPct[strategy as keyof typeof counts.byStrategyPct]}%`),
    );
    attribution.append(row);
  }
  const fp = el("table", "fp");
  for (const [category, count] of Object.entries(counts.byFpCategory)) {
    const row = el("tr");
    row.append(
      el("td", undefined, category),
      el("td", undefined, String(count)),
      el("td", undefined, `${counts.byFpCategoryPct[category as keyof typeof counts.byFpCategoryPct]}%`),
    );
    fp.append(row);
  }
  mount.append(el("h3", undefined, "Strategy attribution (valid)"), attribution,
               el("h3", undefined, "False positive categories"), fp);
  const check = await crossCheckReports(state.client, state.runId, counts);
  mount.append(el("p", check.consistent ? "check-ok" : "check-bad",
                  check.consistent
                    ? "counts verified against report endpoints"
                    : `MISMATCH: ${check.mismatches.join("; ")}`));
}

async function renderThreatModel(state: AppState, mount: HTMLElement): Promise<void> {
  mount.replaceChildren(el("h2", undefined, "Threat model"));
  const current = await state.client.getThreatModel(state.runId);
  const editor = el("textarea", "model-editor") as HTMLTextAreaElement;
  editor.rows = 20;
  editor.value = JSON.stringify(current, null, 2);
  const issues = el("ul", "model-issues");
  const diff = el("div", "model-diff");
  const save = el("button", "save-model", "Save");

  const revalidate = () => {
    issues.replaceChildren();
    diff.replaceChildren();
    let draft: ThreatModel;
    try {
      draft = JSON.parse(editor.value) as ThreatModel;
    } catch {
      issues.append(el("li", "error", "draft is not valid JSON"));
      save.disabled = true;
      return;
    }
    const { errors, warnings } = validateModel(draft);
    for (const issue of errors) {
      issues.append(el("li", "error", `${issue.kind}: ${issue.message}`));
    }
    for (const issue of warnings) {
      issues.append(el("li", "warning", `${issue.kind}: ${issue.message}`));
    }
    save.disabled = errors.length > 0;
    if (errors.length === 0) {
      const flips = diffVerdicts(current, draft, state.findings);
      diff.append(el("h3", undefined, `Prospective flips: ${flips.length}`));
      for (const flip of flips) {
        diff.append(el("p", "flip",
                       `${flip.finding_id}: ${flip.before} → ${flip.after}`));
      }
    }
  };
  editor.oninput = revalidate;
  save.onclick = async () => {
    const draft = JSON.parse(editor.value) as ThreatModel;
    await state.client.putThreatModel(state.runId, draft);
    await renderThreatModel(state, mount);
  };
  revalidate();
  mount.append(editor, issues, diff, save);
}

export async function startApp(root: HTMLElement, baseUrl: string, runId: string) {
  const state: AppState = {
    client: new SpecaClient(baseUrl),
    runId,
    findings: [],
    page: 0,
    statusFilter: "NEEDS_HUMAN_VERIFICATION",
    banner: null,
  };
  await refresh(state);

  const nav = el("nav");
  const main = el("main");
  const tabs: [string, (mount: HTMLElement) => void | Promise<void>][] = [
    ["Queue", (m) => renderQueue(state, m)],
    ["Dashboards", (m) => renderDashboard(state, m)],
    ["Threat model", (m) => renderThreatModel(state, m)],
  ];
  for (const [label, render] of tabs) {
    const button = el("button", "tab", label);
    button.onclick = () => void render(main);
    nav.append(button);
  }
  root.replaceChildren(nav, main);
  renderQueue(state, main);
}
