/** Console session state: who is signed in, what they are watching, and the
 * client-side guards that run before any decision leaves the browser.
 *
 * The guards are a usability rail, not a security boundary; the gateway
 * re-checks everything. They exist so a vetter cannot fat-finger an
 * approval without the offline signature in hand.
 */

import { ApiError, GatewayClient, type FetchLike } from "./api.js";
import type {
  CaseSummary,
  DecisionReply,
  JobStatus,
  NonceGrant,
  Role,
} from "./types.js";

export interface ActionResult {
  /** False when a client-side guard stopped the action before any request. */
  sent: boolean;
  blocked?: string;
  reply?: DecisionReply;
  error?: string;
}

export interface SessionOptions {
  role: Role;
  baseUrl: string;
  token: string;
  fetchImpl?: FetchLike;
}

export const DEFAULT_POLL_MS = 3000;

function toHex(bytes: Uint8Array): string {
  let out = "";
  for (const b of bytes) {
    out += b.toString(16).padStart(2, "0");
  }
  return out;
}

export class ConsoleSession {
  readonly role: Role;
  readonly api: GatewayClient;

  pendingInput: CaseSummary[] = [];
  pendingOutput: CaseSummary[] = [];
  jobs = new Map<string, JobStatus>();
  lastError: string | null = null;

  #trackedJobs = new Set<string>();
  #pollHandle: ReturnType<typeof setInterval> | null = null;

  constructor(options: SessionOptions) {
    this.role = options.role;
    this.api = new GatewayClient(
      options.baseUrl, options.token, options.fetchImpl,
    );
  }

  /** The bearer token lives only inside the client closure; serialising a
   * session for debugging must never leak it. */
  toJSON(): Record<string, unknown> {
    return {
      role: this.role,
      baseUrl: this.api.baseUrl,
      trackedJobs: [...this.#trackedJobs],
    };
  }

  trackJob(jobId: string): void {
    this.#trackedJobs.add(jobId);
  }

  trackedJobs(): string[] {
    return [...this.#trackedJobs];
  }

  async refresh(): Promise<void> {
    if (this.role === "vetter") {
      await this.refreshVetting();
    } else {
      await this.refreshJobs();
    }
  }

  async refreshVetting(): Promise<void> {
    try {
      this.pendingInput = await this.api.listCases("input");
      this.pendingOutput = await this.api.listCases("output");
      this.lastError = null;
    } catch (exc) {
      this.lastError = describeError(exc);
    }
  }

  async refreshJobs(): Promise<void> {
    try {
      for (const jobId of this.#trackedJobs) {
        this.jobs.set(jobId, await this.api.jobStatus(jobId));
      }
      this.lastError = null;
    } catch (exc) {
      this.lastError = describeError(exc);
    }
  }

  async requestNonce(): Promise<NonceGrant> {
    return this.api.requestNonce();
  }

  /** Approve an input case. Refuses to send anything until the vetter has
   * attached the signature file produced by the offline signer. */
  async approveInput(jobId: string,
                     signatureFile: Uint8Array | null): Promise<ActionResult> {
    if (signatureFile === null || signatureFile.length === 0) {
      return {
        sent: false,
        blocked: "attach the offline signature file before approving",
      };
    }
    return this.#decide(() => this.api.decideInput(jobId, true, {
      signatureFileHex: toHex(signatureFile),
    }));
  }

  /** Reject an input case; a written reason is mandatory. */
  async rejectInput(jobId: string, reason: string): Promise<ActionResult> {
    if (reason.trim() === "") {
      return { sent: false, blocked: "a rejection needs a written reason" };
    }
    return this.#decide(() => this.api.decideInput(jobId, false, { reason }));
  }

  /** Release results. The confirmed flag must come from an explicit
   * confirmation step; the default path never releases. */
  async approveOutput(jobId: string,
                      options: { confirmed: boolean }): Promise<ActionResult> {
    if (!options.confirmed) {
      return {
        sent: false,
        blocked: "release requires explicit confirmation",
      };
    }
    return this.#decide(() => this.api.decideOutput(jobId, true));
  }

  async rejectOutput(jobId: string, reason: string,
                     options: { confirmed: boolean }): Promise<ActionResult> {
    if (reason.trim() === "") {
      return { sent: false, blocked: "a rejection needs a written reason" };
    }
    if (!options.confirmed) {
      return {
        sent: false,
        blocked: "output decisions require explicit confirmation",
      };
    }
    return this.#decide(() => this.api.decideOutput(jobId, false, reason));
  }

  startPolling(intervalMs: number = DEFAULT_POLL_MS): void {
    if (this.#pollHandle !== null) {
      return;
    }
    this.#pollHandle = setInterval(() => {
      void this.refresh();
    }, intervalMs);
  }

  stopPolling(): void {
    if (this.#pollHandle !== null) {
      clearInterval(this.#pollHandle);
      this.#pollHandle = null;
    }
  }

  get polling(): boolean {
    return this.#pollHandle !== null;
  }

  async #decide(
    send: () => Promise<DecisionReply>,
  ): Promise<ActionResult> {
    try {
      const reply = await send();
      this.lastError = null;
      return { sent: true, reply };
    } catch (exc) {
      const message = describeError(exc);
      this.lastError = message;
      return { sent: true, error: message };
    }
  }
}

export function describeError(exc: unknown): string {
  if (exc instanceof ApiError) {
    return exc.describe();
  }
  if (exc instanceof Error) {
    return exc.message;
  }
  return String(exc);
}
