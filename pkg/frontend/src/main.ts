/** Page wiring: forms in, gateway calls out, state re-rendered after
 * every response. The only configuration is the gateway base URL.
 */

import { GatewayClient, GatewayError } from "./api.js";
import type { WhatifRequest } from "./api.js";
import {
  appendDecision,
  applyConflictRejection,
  applyConflicts,
  applyFeedback,
  applyPolicies,
  applySubmission,
  dismissBanner,
  initialState,
  pushBanner,
  setSortOrder,
  visiblePolicies,
} from "./state.js";
import type { ConsoleState, StatusSortOrder } from "./state.js";
import { renderState } from "./render.js";

const FEEDBACK_POLL_MS = 5000;

function mustFind<T extends HTMLElement>(root: Document, id: string): T {
  const node = root.getElementById(id);
  if (!node) {
    throw new Error(`console page is missing #${id}`);
  }
  return node as T;
}

export interface ConsoleHandles {
  state(): ConsoleState;
  refresh(): Promise<void>;
  submitDescriptions(): Promise<void>;
  runWhatif(): Promise<void>;
  pollFeedback(): Promise<void>;
  dispose(): void;
}

export function initConsole(root: Document): ConsoleHandles {
  const roots = {
    banners: mustFind<HTMLElement>(root, "banners"),
    cards: mustFind<HTMLElement>(root, "policy-cards"),
    table: mustFind<HTMLElement>(root, "policy-table"),
    conflicts: mustFind<HTMLElement>(root, "conflict-list"),
    decision: mustFind<HTMLElement>(root, "decision-panel"),
    history: mustFind<HTMLElement>(root, "decision-history"),
    feedback: mustFind<HTMLElement>(root, "feedback-tail"),
  };
  const gatewayInput = mustFind<HTMLInputElement>(root, "gateway-url");
  const descriptionInput = mustFind<HTMLTextAreaElement>(root, "description-input");
  const descriptionValidation = mustFind<HTMLElement>(root, "description-validation");
  const whatif = {
    id: mustFind<HTMLInputElement>(root, "whatif-id"),
    subject: mustFind<HTMLInputElement>(root, "whatif-subject"),
    resource: mustFind<HTMLInputElement>(root, "whatif-resource"),
    action: mustFind<HTMLInputElement>(root, "whatif-action"),
    time: mustFind<HTMLInputElement>(root, "whatif-time"),
    day: mustFind<HTMLSelectElement>(root, "whatif-day"),
    extraKey: mustFind<HTMLInputElement>(root, "whatif-extra-key"),
    extraValue: mustFind<HTMLInputElement>(root, "whatif-extra-value"),
    contextText: mustFind<HTMLTextAreaElement>(root, "whatif-context-text"),
    validation: mustFind<HTMLElement>(root, "whatif-validation"),
  };
  const sortSelect = mustFind<HTMLSelectElement>(root, "sort-order");
  const healthLine = mustFind<HTMLElement>(root, "health-line");

  const params = new URLSearchParams(root.location ? root.location.search : "");
  const fromQuery = params.get("gateway");
  if (fromQuery) {
    gatewayInput.value = fromQuery;
  }
  if (!gatewayInput.value) {
    gatewayInput.value = "http://127.0.0.1:8731";
  }

  let state = initialState();
  let whatifCounter = 0;
  let polling = false;

  const client = () => new GatewayClient(gatewayInput.value);

  function rerender(): void {
    renderState(roots, state, visiblePolicies(state), (index) => {
      state = dismissBanner(state, index);
      rerender();
    });
  }

  function reportError(error: unknown): void {
    if (error instanceof GatewayError && error.status === 409 && error.body) {
      state = applyConflictRejection(state, error.body);
    } else if (error instanceof GatewayError) {
      state = pushBanner(state, "error", error.message);
    } else {
      state = pushBanner(state, "error", String(error));
    }
    rerender();
  }

  async function refresh(): Promise<void> {
    try {
      const [policies, conflicts] = await Promise.all([
        client().listPolicies(),
        client().listConflicts(),
      ]);
      state = applyConflicts(applyPolicies(state, policies.policies), conflicts.conflicts);
      rerender();
    } catch (error) {
      reportError(error);
    }
  }

  async function submitDescriptions(): Promise<void> {
    const lines = descriptionInput.value
      .split("\n")
      .map((line) => line.trim())
      .filter((line) => line.length > 0);
    if (lines.length === 0) {
      descriptionValidation.textContent = "Enter a description before submitting.";
      return;
    }
    descriptionValidation.textContent = "";
    try {
      const response = await client().submitDescriptions(lines);
      state = applySubmission(state, response);
      rerender();
      await refresh();
    } catch (error) {
      reportError(error);
    }
  }

  async function runWhatif(): Promise<void> {
    const subject = whatif.subject.value.trim();
    const resource = whatif.resource.value.trim();
    const action = whatif.action.value.trim();
    if (!subject || !resource || !action) {
      whatif.validation.textContent = "Subject, resource, and action are all required.";
      return;
    }
    whatif.validation.textContent = "";
    const context: Record<string, string> = {};
    if (whatif.time.value) {
      context["time"] = whatif.time.value;
    }
    if (whatif.day.value) {
      context["day"] = whatif.day.value;
    }
    const extraKey = whatif.extraKey.value.trim();
    if (extraKey) {
      context[extraKey] = whatif.extraValue.value.trim();
    }
    whatifCounter += 1;
    const request: WhatifRequest = {
      id: whatif.id.value.trim() || `whatif-${whatifCounter}`,
      subject,
      resource,
      action,
      context,
    };
    const contextText = whatif.contextText.value.trim();
    if (contextText) {
      request.context_text = contextText;
    }
    try {
      const decision = await client().decide(request);
      state = appendDecision(state, request, decision);
      rerender();
    } catch (error) {
      reportError(error);
    }
  }

  async function pollFeedback(): Promise<void> {
    if (polling) {
      return;
    }
    polling = true;
    try {
      const response = await client().feedback(state.lastSeq);
      state = applyFeedback(state, response.feedback, response.last_seq);
      rerender();
    } catch {
      // the tail is a convenience; a missed poll is not worth a banner
    } finally {
      polling = false;
    }
  }

  async function showHealth(): Promise<void> {
    try {
      const health = await client().health();
      healthLine.textContent = `gateway ${health.status}, ${health.policies} policies stored`;
    } catch {
      healthLine.textContent = "gateway unreachable";
    }
  }

  mustFind<HTMLButtonElement>(root, "submit-descriptions").addEventListener("click", () => {
    void submitDescriptions();
  });
  mustFind<HTMLButtonElement>(root, "run-whatif").addEventListener("click", () => {
    void runWhatif();
  });
  mustFind<HTMLButtonElement>(root, "refresh-policies").addEventListener("click", () => {
    void refresh();
    void showHealth();
  });
  sortSelect.addEventListener("change", () => {
    state = setSortOrder(state, sortSelect.value as StatusSortOrder);
    rerender();
  });

  rerender();
  void refresh();
  void showHealth();
  const timer = setInterval(() => void pollFeedback(), FEEDBACK_POLL_MS);
  const win = root.defaultView;
  if (win) {
    win.addEventListener("beforeunload", () => clearInterval(timer));
  }

  return {
    state: () => state,
    refresh,
    submitDescriptions,
    runWhatif,
    pollFeedback,
    dispose: () => clearInterval(timer),
  };
}

declare global {
  interface Window {
    laceConsole?: ConsoleHandles;
  }
}

if (typeof document !== "undefined" && document.getElementById("policy-table")) {
  const boot = () => {
    window.laceConsole = initConsole(document);
  };
  if (document.readyState === "loading") {
    document.addEventListener("DOMContentLoaded", boot);
  } else {
    boot();
  }
}
