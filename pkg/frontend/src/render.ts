/** DOM rendering for the console.
 *
 * Rendering discipline: every value shown on screen is written with
 * textContent, verbatim from a gateway response field, and tagged with a
 * data-field attribute naming that field. The contract suite walks those
 * tags and compares each one against the recorded response, so nothing
 * here may invent, reword, or post-process a gateway value.
 */

import type {
  ConflictDto,
  DecisionDto,
  GenerationFailureDto,
  PolicyDto,
} from "./api.js";
import type { Banner, ConsoleState, HistoryEntry, PolicyCard } from "./state.js";

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function field(tag: string, name: string, value: string, className?: string): HTMLElement {
  const node = el(tag, className, value);
  node.dataset.field = name;
  return node;
}

function listField(container: HTMLElement, name: string, values: string[]): void {
  values.forEach((value, index) => {
    const item = field("span", name, value, "list-item");
    item.dataset.index = String(index);
    container.append(item);
  });
}

function clear(node: HTMLElement): void {
  node.replaceChildren();
}

/** verified gets a green badge, rejected a red one, anything else grey. */
function statusBadgeClass(status: string): string {
  if (status === "verified") {
    return "badge badge-ok";
  }
  if (status === "rejected") {
    return "badge badge-danger";
  }
  return "badge badge-muted";
}

/** effect conflicts are blocking (red); the warning kinds render yellow. */
function conflictBadgeClass(kind: string): string {
  return kind === "effect" ? "badge badge-danger" : "badge badge-warn";
}

export function renderPolicyTable(
  container: HTMLElement,
  policies: PolicyDto[],
  conflicts: ConflictDto[],
): void {
  clear(container);
  if (policies.length === 0) {
    container.append(
      el(
        "p",
        "empty-state",
        "No policies stored yet. Submit a description to create the first one.",
      ),
    );
    return;
  }
  const table = el("table", "policy-table");
  const head = el("tr");
  for (const title of ["id", "subject", "resource", "action", "effect", "conditions", "status", "conflicts"]) {
    head.append(el("th", undefined, title));
  }
  table.append(head);
  for (const policy of policies) {
    const row = el("tr", "policy-row");
    row.dataset.policyId = policy.id;
    row.id = `policy-${policy.id}`;
    row.append(field("td", "id", policy.id));
    for (const [name, values] of [
      ["subject", policy.subject],
      ["resource", policy.resource],
      ["action", policy.action],
    ] as const) {
      const cell = el("td");
      listField(cell, name, values);
      row.append(cell);
    }
    row.append(field("td", "effect", policy.effect));
    const conditionCell = el("td");
    listField(conditionCell, "conditions", policy.conditions);
    row.append(conditionCell);
    const statusCell = el("td");
    statusCell.append(field("span", "status", policy.status, statusBadgeClass(policy.status)));
    row.append(statusCell);
    const conflictCell = el("td");
    for (const report of conflicts) {
      if (report.first === policy.id || report.second === policy.id) {
        conflictCell.append(field("span", "kind", report.kind, conflictBadgeClass(report.kind)));
      }
    }
    row.append(conflictCell);
    table.append(row);
  }
  container.append(table);
}

export function renderConflictList(container: HTMLElement, conflicts: ConflictDto[]): void {
  clear(container);
  if (conflicts.length === 0) {
    container.append(el("p", "empty-state", "No conflicts among the stored policies."));
    return;
  }
  for (const report of conflicts) {
    const item = el("div", "conflict-item");
    item.append(field("span", "kind", report.kind, conflictBadgeClass(report.kind)));
    for (const [name, id] of [
      ["first", report.first],
      ["second", report.second],
    ] as const) {
      const link = field("a", name, id, "policy-link") as HTMLAnchorElement;
      link.href = `#policy-${id}`;
      item.append(link);
    }
    item.append(field("p", "explanation", report.explanation, "conflict-explanation"));
    if (report.witness) {
      item.append(
        field("pre", "witness", JSON.stringify(report.witness, null, 2), "conflict-witness"),
      );
    }
    container.append(item);
  }
}

export function renderCards(
  container: HTMLElement,
  cards: PolicyCard[],
  failures: GenerationFailureDto[],
): void {
  clear(container);
  for (const { policy, verdict } of cards) {
    const card = el("div", "policy-card");
    card.dataset.policyId = policy.id;
    card.append(field("h3", "id", policy.id));
    const badgeStatus = verdict ? verdict.status : policy.status;
    card.append(field("span", "status", badgeStatus, statusBadgeClass(badgeStatus)));
    card.append(field("span", "effect", policy.effect, "card-effect"));
    const scope = el("p", "card-scope");
    listField(scope, "subject", policy.subject);
    listField(scope, "resource", policy.resource);
    listField(scope, "action", policy.action);
    card.append(scope);
    const conditions = el("p", "card-conditions");
    listField(conditions, "conditions", policy.conditions);
    card.append(conditions);
    if (verdict) {
      card.append(
        field("p", "rendered_sentence", verdict.rendered_sentence, "card-sentence"),
      );
      card.append(field("span", "forward", verdict.forward, "card-entailment"));
      card.append(field("span", "backward", verdict.backward, "card-entailment"));
    }
    container.append(card);
  }
  for (const failure of failures) {
    const note = el("div", "generation-failure");
    note.append(field("span", "index", String(failure.index), "failure-index"));
    note.append(field("span", "error", failure.error, "failure-error"));
    container.append(note);
  }
}

export function renderBanners(
  container: HTMLElement,
  banners: Banner[],
  onDismiss: (index: number) => void,
): void {
  clear(container);
  banners.forEach((banner, index) => {
    const box = el("div", `banner banner-${banner.tone}`);
    box.append(field("span", "message", banner.text, "banner-text"));
    for (const report of banner.conflicts) {
      const line = el("span", "banner-conflict");
      line.append(field("span", "kind", report.kind, conflictBadgeClass(report.kind)));
      line.append(field("span", "first", report.first, "banner-policy-id"));
      line.append(field("span", "second", report.second, "banner-policy-id"));
      box.append(line);
    }
    const dismiss = el("button", "banner-dismiss", "dismiss");
    dismiss.addEventListener("click", () => onDismiss(index));
    box.append(dismiss);
    container.append(box);
  });
}

export function renderDecisionPanel(container: HTMLElement, decision: DecisionDto | null): void {
  clear(container);
  if (!decision) {
    container.append(el("p", "empty-state", "Run a what-if request to see its decision here."));
    return;
  }
  const panel = el("div", `decision-panel decision-${decision.decision}`);
  panel.append(field("span", "decision", decision.decision, "decision-verdict"));
  panel.append(field("span", "path", decision.path, "decision-path"));
  panel.append(field("span", "checker", decision.checker, "decision-checker"));
  panel.append(field("span", "complexity", decision.complexity, "decision-complexity"));
  panel.append(field("p", "reason", decision.reason, "decision-reason"));
  panel.append(field("span", "request_id", decision.request_id, "decision-request"));
  for (const [name, ids] of [
    ["matched", decision.matched],
    ["applicable", decision.applicable],
    ["possible", decision.possible],
  ] as const) {
    const line = el("p", `decision-${name}`);
    listField(line, name, ids);
    panel.append(line);
  }
  container.append(panel);
}

export function renderHistory(container: HTMLElement, history: HistoryEntry[]): void {
  clear(container);
  for (const entry of history) {
    const line = el("div", "history-entry");
    line.append(field("span", "request_id", entry.decision.request_id, "history-id"));
    line.append(field("span", "decision", entry.decision.decision, "history-verdict"));
    line.append(field("span", "path", entry.decision.path, "history-path"));
    line.append(field("span", "checker", entry.decision.checker, "history-checker"));
    container.append(line);
  }
}

export function renderFeedback(container: HTMLElement, records: Record<string, unknown>[]): void {
  clear(container);
  if (records.length === 0) {
    container.append(el("p", "empty-state", "No checker disagreements logged yet."));
    return;
  }
  for (const record of records) {
    container.append(el("pre", "feedback-record", JSON.stringify(record, null, 2)));
  }
}

export function renderState(
  roots: {
    banners: HTMLElement;
    cards: HTMLElement;
    table: HTMLElement;
    conflicts: HTMLElement;
    decision: HTMLElement;
    history: HTMLElement;
    feedback: HTMLElement;
  },
  state: ConsoleState,
  visible: PolicyDto[],
  onDismiss: (index: number) => void,
): void {
  renderBanners(roots.banners, state.banners, onDismiss);
  renderCards(roots.cards, state.cards, state.failures);
  renderPolicyTable(roots.table, visible, state.conflicts);
  renderConflictList(roots.conflicts, state.conflicts);
  const last = state.history.length ? state.history[state.history.length - 1] : undefined;
  renderDecisionPanel(roots.decision, last ? last.decision : null);
  renderHistory(roots.history, state.history);
  renderFeedback(roots.feedback, state.feedback);
}
