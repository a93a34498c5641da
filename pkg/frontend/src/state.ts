/** Console state and its pure update functions.
 *
 * Every field holds gateway responses as received. Updates return fresh
 * state objects; the decision history is append-only within a session
 * and a page reload starts from server truth again.
 */

import type {
  ConflictDto,
  DecisionDto,
  ErrorBodyDto,
  GenerationFailureDto,
  PolicyDto,
  SubmitResponseDto,
  VerdictDto,
  WhatifRequest,
} from "./api.js";

export type BannerTone = "error" | "warning" | "info";

export interface Banner {
  tone: BannerTone;
  text: string;
  conflicts: ConflictDto[];
}

export interface PolicyCard {
  policy: PolicyDto;
  verdict: VerdictDto | null;
}

export interface HistoryEntry {
  request: WhatifRequest;
  decision: DecisionDto;
}

export type StatusSortOrder = "none" | "status";

export interface ConsoleState {
  policies: PolicyDto[];
  conflicts: ConflictDto[];
  cards: PolicyCard[];
  failures: GenerationFailureDto[];
  stored: string[];
  history: HistoryEntry[];
  feedback: Record<string, unknown>[];
  lastSeq: number;
  banners: Banner[];
  sortOrder: StatusSortOrder;
}

export function initialState(): ConsoleState {
  return {
    policies: [],
    conflicts: [],
    cards: [],
    failures: [],
    stored: [],
    history: [],
    feedback: [],
    lastSeq: 0,
    banners: [],
    sortOrder: "none",
  };
}

export function applyPolicies(state: ConsoleState, policies: PolicyDto[]): ConsoleState {
  return { ...state, policies };
}

export function applyConflicts(state: ConsoleState, conflicts: ConflictDto[]): ConsoleState {
  return { ...state, conflicts };
}

/** Record a successful description submission: policy cards plus verdicts. */
export function applySubmission(state: ConsoleState, response: SubmitResponseDto): ConsoleState {
  const byPolicy = new Map(response.verdicts.map((v) => [v.policy_id, v]));
  const cards = response.policies.map((policy) => ({
    policy,
    verdict: byPolicy.get(policy.id) ?? null,
  }));
  return {
    ...state,
    cards,
    failures: response.failures,
    stored: response.stored ?? [],
  };
}

/** Record a 409 rejection: a red banner naming the blocking conflicts. */
export function applyConflictRejection(state: ConsoleState, body: ErrorBodyDto): ConsoleState {
  const details = body.details as { conflicts?: ConflictDto[] };
  const conflicts = Array.isArray(details.conflicts) ? details.conflicts : [];
  const banner: Banner = { tone: "error", text: body.message, conflicts };
  return { ...state, banners: [...state.banners, banner] };
}

export function pushBanner(state: ConsoleState, tone: BannerTone, text: string): ConsoleState {
  return { ...state, banners: [...state.banners, { tone, text, conflicts: [] }] };
}

export function dismissBanner(state: ConsoleState, index: number): ConsoleState {
  return { ...state, banners: state.banners.filter((_, i) => i !== index) };
}

/** History grows at the end only; earlier entries are never touched. */
export function appendDecision(
  state: ConsoleState,
  request: WhatifRequest,
  decision: DecisionDto,
): ConsoleState {
  return { ...state, history: [...state.history, { request, decision }] };
}

export function applyFeedback(
  state: ConsoleState,
  records: Record<string, unknown>[],
  lastSeq: number,
): ConsoleState {
  return {
    ...state,
    feedback: records.length ? [...state.feedback, ...records] : state.feedback,
    lastSeq,
  };
}

export function setSortOrder(state: ConsoleState, sortOrder: StatusSortOrder): ConsoleState {
  return { ...state, sortOrder };
}

/** Rows in display order; sorting is presentation only and stable. */
export function visiblePolicies(state: ConsoleState): PolicyDto[] {
  if (state.sortOrder === "none") {
    return state.policies;
  }
  return [...state.policies].sort((a, b) => a.status.localeCompare(b.status));
}
