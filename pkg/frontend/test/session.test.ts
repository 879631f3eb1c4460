import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiError, GatewayClient } from "../src/api.js";
import { ConsoleSession, DEFAULT_POLL_MS } from "../src/session.js";

interface Sent {
  url: string;
  method: string;
  headers: Record<string, string>;
  body: string | null;
}

/** Records every request and answers from a route table. */
function mockTransport(routes: Record<string, () => Response> = {}) {
  const calls: Sent[] = [];
  const impl = async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({
      url,
      method: init?.method ?? "GET",
      headers: { ...(init?.headers as Record<string, string>) },
      body: typeof init?.body === "string" ? init.body : null,
    });
    const path = new URL(url).pathname + new URL(url).search;
    const route = routes[path];
    if (!route) {
      return json(200, { cases: [] });
    }
    return route();
  };
  return { calls, impl };
}

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

function vetterSession(routes: Record<string, () => Response> = {}) {
  const transport = mockTransport(routes);
  const session = new ConsoleSession({
    role: "vetter",
    baseUrl: "http://gw",
    token: "tok-secret-string",
    fetchImpl: transport.impl,
  });
  return { session, transport };
}

afterEach(() => {
  vi.useRealTimers();
});

describe("input decision guards", () => {
  it("blocks approval before a signature file is attached", async () => {
    const { session, transport } = vetterSession();
    for (const missing of [null, new Uint8Array(0)]) {
      const result = await session.approveInput("job-1", missing);
      expect(result.sent).toBe(false);
      expect(result.blocked).toMatch(/signature file/);
    }
    expect(transport.calls).toHaveLength(0);
  });

  it("sends the attached signature bytes as hex", async () => {
    const { session, transport } = vetterSession({
      "/v1/vetting/input/job-1/decision": () =>
        json(200, { job_id: "job-1", state: "ApprovedSigned" }),
    });
    const sigBytes = new Uint8Array([0x7b, 0x22, 0xff, 0x00]);
    const result = await session.approveInput("job-1", sigBytes);
    expect(result.sent).toBe(true);
    expect(result.reply?.state).toBe("ApprovedSigned");
    expect(transport.calls).toHaveLength(1);
    const body = JSON.parse(transport.calls[0].body!);
    expect(body).toEqual({
      approved: true,
      signature_file_hex: "7b22ff00",
    });
  });

  it("refuses a reasonless input rejection", async () => {
    const { session, transport } = vetterSession();
    for (const reason of ["", "   "]) {
      const result = await session.rejectInput("job-1", reason);
      expect(result.sent).toBe(false);
      expect(result.blocked).toMatch(/reason/);
    }
    expect(transport.calls).toHaveLength(0);
  });
});

describe("output decision guards", () => {
  it("never releases without explicit confirmation", async () => {
    const { session, transport } = vetterSession();
    const result = await session.approveOutput("job-2", { confirmed: false });
    expect(result.sent).toBe(false);
    expect(result.blocked).toMatch(/confirmation/);
    expect(transport.calls).toHaveLength(0);
  });

  it("releases once confirmed", async () => {
    const { session, transport } = vetterSession({
      "/v1/vetting/output/job-2/decision": () =>
        json(200, { job_id: "job-2", state: "Released" }),
    });
    const result = await session.approveOutput("job-2", { confirmed: true });
    expect(result.sent).toBe(true);
    expect(result.reply?.state).toBe("Released");
    expect(JSON.parse(transport.calls[0].body!)).toEqual({ approved: true });
  });

  it("requires both a reason and confirmation to reject", async () => {
    const { session, transport } = vetterSession({
      "/v1/vetting/output/job-2/decision": () =>
        json(200, { job_id: "job-2", state: "RejectedOutput" }),
    });
    expect(
      (await session.rejectOutput("job-2", "", { confirmed: true })).sent,
    ).toBe(false);
    expect(
      (await session.rejectOutput("job-2", "too raw", { confirmed: false }))
        .sent,
    ).toBe(false);
    expect(transport.calls).toHaveLength(0);

    const result = await session.rejectOutput(
      "job-2", "aggregate too small", { confirmed: true },
    );
    expect(result.sent).toBe(true);
    expect(JSON.parse(transport.calls[0].body!)).toEqual({
      approved: false,
      reason: "aggregate too small",
    });
  });
});

describe("gateway errors surface inline", () => {
  it("reports a closed case instead of throwing", async () => {
    const { session } = vetterSession({
      "/v1/vetting/output/job-2/decision": () =>
        json(409, { error: "CaseClosed", message: "job-2" }),
    });
    const result = await session.approveOutput("job-2", { confirmed: true });
    expect(result.sent).toBe(true);
    expect(result.error).toContain("CaseClosed");
    expect(session.lastError).toContain("CaseClosed");
  });

  it("carries the gateway's rejection reason", async () => {
    const { session } = vetterSession({
      "/v1/vetting/input/job-1/decision": () =>
        json(422, {
          error: "SignatureInvalid",
          message: "signature rejected",
          reason: "NonceConsumed",
        }),
    });
    const result = await session.approveInput("job-1", new Uint8Array([1]));
    expect(result.error).toContain("SignatureInvalid");
    expect(result.error).toContain("NonceConsumed");
  });

  it("clears the banner after the next success", async () => {
    let failures = 1;
    const { session } = vetterSession({
      "/v1/vetting/input": () =>
        failures-- > 0
          ? json(401, { error: "Unauthorised", message: "bad token" })
          : json(200, { cases: [] }),
      "/v1/vetting/output": () => json(200, { cases: [] }),
    });
    await session.refreshVetting();
    expect(session.lastError).toContain("Unauthorised");
    await session.refreshVetting();
    expect(session.lastError).toBeNull();
  });
});

describe("case list decoding", () => {
  it("unwraps the cases envelope the gateway sends", async () => {
    const { session } = vetterSession({
      "/v1/vetting/input": () => json(200, {
        cases: [{
          job_id: "job-5", kind: "input",
          opened_at: "2026-08-15T07:00:00+00:00",
          state: "PendingInputVetting", submitter_id: "alice",
        }],
      }),
    });
    await session.refreshVetting();
    expect(session.pendingInput.map((c) => c.job_id)).toEqual(["job-5"]);
    expect(session.pendingOutput).toEqual([]);
  });
});

describe("token handling", () => {
  it("sends the bearer header but never serialises the token", async () => {
    const { session, transport } = vetterSession();
    await session.refreshVetting();
    expect(transport.calls[0].headers.Authorization)
      .toBe("Bearer tok-secret-string");
    expect(JSON.stringify(session)).not.toContain("tok-secret-string");
    expect(JSON.stringify(session.toJSON())).not.toContain("secret");
  });

  it("keeps the token out of enumerable client state", () => {
    const client = new GatewayClient("http://gw", "tok-secret-string");
    expect(JSON.stringify(client)).not.toContain("tok-secret-string");
    expect(Object.values(client as object)).not.toContain("tok-secret-string");
  });
});

describe("polling", () => {
  it("refreshes on the default three second cadence", async () => {
    vi.useFakeTimers();
    const { session, transport } = vetterSession();
    session.startPolling();
    expect(session.polling).toBe(true);
    await vi.advanceTimersByTimeAsync(DEFAULT_POLL_MS * 3);
    session.stopPolling();
    expect(session.polling).toBe(false);
    // each vetter refresh hits both case lists
    expect(transport.calls).toHaveLength(6);
    const before = transport.calls.length;
    await vi.advanceTimersByTimeAsync(DEFAULT_POLL_MS * 2);
    expect(transport.calls).toHaveLength(before);
  });

  it("does not stack intervals on repeated starts", async () => {
    vi.useFakeTimers();
    const { session, transport } = vetterSession();
    session.startPolling();
    session.startPolling();
    await vi.advanceTimersByTimeAsync(DEFAULT_POLL_MS);
    session.stopPolling();
    expect(transport.calls).toHaveLength(2);
  });

  it("polls tracked jobs for a consumer", async () => {
    vi.useFakeTimers();
    const transport = mockTransport({
      "/v1/jobs/job-7": () => json(200, {
        job_id: "job-7", state: "Executing", detail: "", history: [],
      }),
    });
    const session = new ConsoleSession({
      role: "consumer",
      baseUrl: "http://gw",
      token: "tok",
      fetchImpl: transport.impl,
    });
    session.trackJob("job-7");
    session.startPolling();
    await vi.advanceTimersByTimeAsync(DEFAULT_POLL_MS);
    session.stopPolling();
    expect(session.jobs.get("job-7")?.state).toBe("Executing");
  });
});

describe("ApiError", () => {
  it("describes itself with code, message, and reason", () => {
    const err = new ApiError(422, "SignatureInvalid", "no", "BadSignature");
    expect(err.describe()).toBe("SignatureInvalid: no (BadSignature)");
    expect(new ApiError(404, "NotFound", "job-1").describe())
      .toBe("NotFound: job-1");
  });
});
