/** Thin typed client for the gateway HTTP API.
 *
 * Every byte the console renders comes through this module; there is no
 * second channel. The fetch implementation is injectable so tests can run
 * against a recorded transport.
 */

import type {
  CaseDetail,
  CaseKind,
  CaseSummary,
  DecisionReply,
  JobStatus,
  NonceGrant,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

/** A non-2xx gateway reply, carrying the structured error body. */
export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly reason: string | null;

  constructor(status: number, code: string, message: string,
              reason: string | null = null) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
    this.reason = reason;
  }

  /** One line suitable for an inline error banner. */
  describe(): string {
    const tail = this.reason ? ` (${this.reason})` : "";
    return `${this.code}: ${this.message}${tail}`;
  }
}

export class GatewayClient {
  readonly baseUrl: string;
  readonly #token: string;
  readonly #fetch: FetchLike;

  constructor(baseUrl: string, token: string, fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.#token = token;
    this.#fetch = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  resultsUrl(jobId: string): string {
    return `${this.baseUrl}/v1/jobs/${encodeURIComponent(jobId)}/results`;
  }

  async listCases(kind: CaseKind): Promise<CaseSummary[]> {
    const body = (await this.#json(
      "GET", `/v1/vetting/${kind}`,
    )) as { cases: CaseSummary[] };
    return body.cases;
  }

  async caseDetail(kind: CaseKind, jobId: string,
                   fullArtifact?: string): Promise<CaseDetail> {
    let path = `/v1/vetting/${kind}/${encodeURIComponent(jobId)}`;
    if (fullArtifact !== undefined) {
      path += `?full_artifact=${encodeURIComponent(fullArtifact)}`;
    }
    return (await this.#json("GET", path)) as CaseDetail;
  }

  async requestNonce(): Promise<NonceGrant> {
    return (await this.#json("POST", "/v1/nonces")) as NonceGrant;
  }

  async decideInput(jobId: string, approved: boolean, options: {
    reason?: string;
    signatureFileHex?: string;
  } = {}): Promise<DecisionReply> {
    const body: Record<string, unknown> = { approved };
    if (options.reason !== undefined) body.reason = options.reason;
    if (options.signatureFileHex !== undefined) {
      body.signature_file_hex = options.signatureFileHex;
    }
    return (await this.#json(
      "POST", `/v1/vetting/input/${encodeURIComponent(jobId)}/decision`, body,
    )) as DecisionReply;
  }

  async decideOutput(jobId: string, approved: boolean,
                     reason?: string): Promise<DecisionReply> {
    const body: Record<string, unknown> = { approved };
    if (reason !== undefined) body.reason = reason;
    return (await this.#json(
      "POST", `/v1/vetting/output/${encodeURIComponent(jobId)}/decision`, body,
    )) as DecisionReply;
  }

  async jobStatus(jobId: string): Promise<JobStatus> {
    return (await this.#json(
      "GET", `/v1/jobs/${encodeURIComponent(jobId)}`,
    )) as JobStatus;
  }

  /** Download the released results archive as raw bytes. */
  async fetchResults(jobId: string): Promise<Uint8Array> {
    const response = await this.#send("GET", this.resultsUrl(jobId));
    await this.#raiseForStatus(response);
    return new Uint8Array(await response.arrayBuffer());
  }

  async #json(method: string, path: string,
              body?: unknown): Promise<unknown> {
    const response = await this.#send(method, this.baseUrl + path, body);
    await this.#raiseForStatus(response);
    return response.json();
  }

  #send(method: string, url: string, body?: unknown): Promise<Response> {
    const init: RequestInit = {
      method,
      headers: {
        Authorization: `Bearer ${this.#token}`,
        ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
      },
    };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    return this.#fetch(url, init);
  }

  async #raiseForStatus(response: Response): Promise<void> {
    if (response.ok) {
      return;
    }
    let code = `HTTP ${response.status}`;
    let message = response.statusText || "request failed";
    let reason: string | null = null;
    try {
      const body = await response.json();
      if (body && typeof body === "object") {
        const payload = body as Record<string, unknown>;
        if (typeof payload.error === "string") code = payload.error;
        if (typeof payload.message === "string") message = payload.message;
        if (typeof payload.reason === "string") reason = payload.reason;
      }
    } catch {
      // non-JSON error body; keep the HTTP-level description
    }
    throw new ApiError(response.status, code, message, reason);
  }
}
