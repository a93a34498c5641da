/** Typed client for the policy gateway HTTP API.
 *
 * Every method maps onto one route and returns the parsed JSON body
 * unchanged. The console never reshapes or re-derives gateway values;
 * whatever it displays comes verbatim from these responses.
 */

export interface PolicyDto {
  id: string;
  subject: string[];
  resource: string[];
  action: string[];
  effect: string;
  conditions: string[];
  status: string;
  source_description?: string;
}

export interface VerdictDto {
  policy_id: string;
  status: string;
  forward: string;
  backward: string;
  rendered_sentence: string;
}

export interface GenerationFailureDto {
  index: number;
  error: string;
}

export interface WitnessDto {
  context: Record<string, string>;
  assertions: string[];
}

export interface ConflictDto {
  kind: string;
  first: string;
  second: string;
  explanation: string;
  witness: WitnessDto | null;
}

export interface SubmitResponseDto {
  policies: PolicyDto[];
  verdicts: VerdictDto[];
  failures: GenerationFailureDto[];
  conflicts: ConflictDto[];
  stored?: string[];
}

export interface DecisionDto {
  request_id: string;
  decision: string;
  reason: string;
  path: string;
  checker: string;
  complexity: string;
  matched: string[];
  applicable: string[];
  possible: string[];
}

export interface WhatifRequest {
  id?: string;
  subject: string;
  resource: string;
  action: string;
  context: Record<string, string>;
  context_text?: string;
}

export interface FeedbackResponseDto {
  feedback: Record<string, unknown>[];
  last_seq: number;
}

export interface HealthDto {
  status: string;
  policies: number;
  last_seq: number;
  providers: Record<string, string>;
}

export interface ErrorBodyDto {
  code: string;
  message: string;
  details: Record<string, unknown>;
}

/** Raised for any non-2xx reply and for network failures (status 0). */
export class GatewayError extends Error {
  readonly status: number;
  readonly body: ErrorBodyDto | null;

  constructor(status: number, body: ErrorBodyDto | null, message: string) {
    super(message);
    this.name = "GatewayError";
    this.status = status;
    this.body = body;
  }
}

async function readErrorBody(response: Response): Promise<ErrorBodyDto | null> {
  try {
    const parsed = (await response.json()) as Record<string, unknown>;
    if (typeof parsed.code === "string" && typeof parsed.message === "string") {
      return {
        code: parsed.code,
        message: parsed.message,
        details: (parsed.details as Record<string, unknown>) ?? {},
      };
    }
    return { code: "http_error", message: JSON.stringify(parsed), details: {} };
  } catch {
    return null;
  }
}

export class GatewayClient {
  readonly baseUrl: string;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(method: string, path: string, payload?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await fetch(this.baseUrl + path, {
        method,
        headers: payload === undefined ? {} : { "content-type": "application/json" },
        body: payload === undefined ? undefined : JSON.stringify(payload),
      });
    } catch (exc) {
      throw new GatewayError(0, null, `gateway unreachable: ${String(exc)}`);
    }
    if (!response.ok) {
      const body = await readErrorBody(response);
      const message = body ? body.message : `gateway returned HTTP ${response.status}`;
      throw new GatewayError(response.status, body, message);
    }
    return (await response.json()) as T;
  }

  submitDescriptions(descriptions: string[]): Promise<SubmitResponseDto> {
    return this.request("POST", "/v1/descriptions", { descriptions });
  }

  listPolicies(): Promise<{ policies: PolicyDto[] }> {
    return this.request("GET", "/v1/policies");
  }

  listConflicts(): Promise<{ conflicts: ConflictDto[] }> {
    return this.request("GET", "/v1/conflicts");
  }

  deletePolicy(id: string): Promise<{ deleted: string }> {
    return this.request("DELETE", `/v1/policies/${encodeURIComponent(id)}`);
  }

  decide(request: WhatifRequest): Promise<DecisionDto> {
    return this.request("POST", "/v1/decisions", request);
  }

  feedback(since: number): Promise<FeedbackResponseDto> {
    return this.request("GET", `/v1/feedback?since=${since}`);
  }

  health(): Promise<HealthDto> {
    return this.request("GET", "/v1/health");
  }
}
