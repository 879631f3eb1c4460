/** End-to-end console round trip against a live gateway process.
 *
 * A Python harness boots a full installation (real sandbox runner, real
 * vault) and serves the HTTP API on a random port. Everything the console
 * does here goes through GatewayClient/ConsoleSession; the only side
 * channels are the job submission (a consumer CLI concern) and the offline
 * signer, which is the point of the design.
 */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { createInterface } from "node:readline";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiError } from "../src/api.js";
import { ConsoleSession } from "../src/session.js";
import {
  renderInputCase,
  renderJobCard,
  renderOutputCase,
} from "../src/views.js";
import { jobBundle } from "./zip.js";

const HARNESS = join(
  dirname(fileURLToPath(import.meta.url)), "harness", "serve_gateway.py",
);

interface Handshake {
  port: number;
  consumer_token: string;
  vetter_token: string;
  seed_path: string;
  dataset_id: string;
}

let harness: ChildProcess;
let info: Handshake;
let baseUrl: string;
let scratch: string;
let stderrTail = "";

const TRAINER = [
  "import collections, json, os, pathlib",
  "data = pathlib.Path(os.environ['AIRLOCK_DATA_DIR'])",
  "out = pathlib.Path(os.environ['AIRLOCK_OUTPUT_DIR'])",
  "rows = json.loads((data / 'ds-console').read_text())",
  "counts = collections.Counter(row['label'] for row in rows)",
  "model = {",
  "    'counts': {k: counts[k] for k in sorted(counts)},",
  "    'n_rows': sum(counts.values()),",
  "}",
  "(out / 'model.json').write_text(json.dumps(model, sort_keys=True))",
].join("\n");

const DUMPER = [
  "import os, pathlib",
  "out = pathlib.Path(os.environ['AIRLOCK_OUTPUT_DIR'])",
  "(out / 'raw.txt').write_text('row-level dump')",
].join("\n");

beforeAll(async () => {
  scratch = mkdtempSync(join(tmpdir(), "console-sig-"));
  harness = spawn("python3", [HARNESS], {
    stdio: ["ignore", "pipe", "pipe"],
  });
  harness.stderr!.on("data", (chunk: Buffer) => {
    stderrTail = (stderrTail + chunk.toString()).slice(-4000);
  });
  const reader = createInterface({ input: harness.stdout! });
  info = await new Promise<Handshake>((resolve, reject) => {
    const timer = setTimeout(
      () => reject(new Error(`harness never spoke; stderr: ${stderrTail}`)),
      45_000,
    );
    reader.once("line", (line) => {
      clearTimeout(timer);
      resolve(JSON.parse(line) as Handshake);
    });
    harness.once("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`harness exited ${code}; stderr: ${stderrTail}`));
    });
  });
  baseUrl = `http://127.0.0.1:${info.port}`;
});

afterAll(() => {
  harness?.kill();
});

async function until<T>(
  probe: () => Promise<T | null>,
  what: string,
  timeoutMs = 90_000,
): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    const value = await probe();
    if (value !== null) {
      return value;
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error(`timed out waiting for ${what}; stderr: ${stderrTail}`);
}

/** Job submission is a consumer CLI concern; the console never does it. */
async function submitJob(source: string): Promise<{
  job_id: string;
  code_hash: string;
  state: string;
}> {
  const response = await fetch(`${baseUrl}/v1/jobs`, {
    method: "POST",
    headers: {
      Authorization: `Bearer ${info.consumer_token}`,
      "Content-Type": "application/octet-stream",
    },
    body: jobBundle(source, info.dataset_id),
  });
  expect(response.status).toBe(200);
  return response.json();
}

/** The offline half of input approval: the air-gapped signer CLI. */
function signOffline(jobId: string, codeHash: string,
                     nonceValue: string): Uint8Array {
  const sigPath = join(scratch, `${jobId}.sig`);
  execFileSync("python3", [
    "-m", "airlock.cli.signer", "sign",
    "--hash", codeHash,
    "--nonce", nonceValue,
    "--job-id", jobId,
    "--key", info.seed_path,
    "--out", sigPath,
  ]);
  return new Uint8Array(readFileSync(sigPath));
}

function vetterSession(): ConsoleSession {
  return new ConsoleSession({
    role: "vetter", baseUrl, token: info.vetter_token,
  });
}

function consumerSession(): ConsoleSession {
  return new ConsoleSession({
    role: "consumer", baseUrl, token: info.consumer_token,
  });
}

async function approveInputViaConsole(
  vetter: ConsoleSession, jobId: string, codeHash: string,
): Promise<void> {
  const detail = await vetter.api.caseDetail("input", jobId);
  expect(detail.code_hash).toBe(codeHash);
  const nonce = await vetter.requestNonce();
  const signature = signOffline(jobId, detail.code_hash!, nonce.value);
  const result = await vetter.approveInput(jobId, signature);
  expect(result.sent).toBe(true);
  expect(result.error).toBeUndefined();
}

describe("console round trip against a live gateway", () => {
  it("carries a job from submission to released download", async () => {
    const submitted = await submitJob(TRAINER);
    const jobId = submitted.job_id;
    expect(submitted.state).toBe("PendingInputVetting");

    const vetter = vetterSession();
    await vetter.refreshVetting();
    expect(vetter.pendingInput.map((c) => c.job_id)).toContain(jobId);

    // the guard holds in a live session too: no signature, no request
    const blocked = await vetter.approveInput(jobId, null);
    expect(blocked.sent).toBe(false);

    const inputDetail = await vetter.api.caseDetail("input", jobId);
    const inputHtml = renderInputCase(inputDetail);
    expect(inputHtml).toContain(submitted.code_hash);
    expect(inputHtml).toContain("main.py");
    expect(inputHtml).toContain("manifest.json");

    await approveInputViaConsole(vetter, jobId, submitted.code_hash);

    const consumer = consumerSession();
    consumer.trackJob(jobId);
    await until(async () => {
      await consumer.refreshJobs();
      const state = consumer.jobs.get(jobId)?.state;
      return state === "PendingOutputVetting" ? state : null;
    }, "execution to finish");

    await vetter.refreshVetting();
    expect(vetter.pendingOutput.map((c) => c.job_id)).toContain(jobId);

    const outputDetail = await vetter.api.caseDetail(
      "output", jobId, "model.json",
    );
    expect(outputDetail.exit_status).toBe(0);
    const model = JSON.parse(Buffer.from(
      outputDetail.full_artifact!.content_hex, "hex",
    ).toString("utf8"));
    // 120 rows, every third one labelled ellipse
    expect(model).toEqual({
      counts: { ellipse: 40, spiral: 80 },
      n_rows: 120,
    });

    const outputHtml = renderOutputCase(
      outputDetail, vetter.api.resultsUrl(jobId),
    );
    expect(outputHtml).toContain("model.json");
    expect(outputHtml).toContain("exit status 0");
    expect(outputHtml).toContain(`href="${vetter.api.resultsUrl(jobId)}"`);

    const unconfirmed = await vetter.approveOutput(jobId, { confirmed: false });
    expect(unconfirmed.sent).toBe(false);
    const released = await vetter.approveOutput(jobId, { confirmed: true });
    expect(released.sent).toBe(true);
    expect(released.reply?.state).toBe("Released");

    await consumer.refreshJobs();
    const status = consumer.jobs.get(jobId)!;
    expect(status.state).toBe("Released");
    const cardHtml = renderJobCard(status, consumer.api.resultsUrl(jobId));
    expect(cardHtml).toContain("download results");

    const archive = await consumer.api.fetchResults(jobId);
    const blob = Buffer.from(archive);
    expect(blob.subarray(0, 4)).toEqual(Buffer.from("PK\x03\x04", "latin1"));
    expect(blob.includes("artifacts/model.json")).toBe(true);
    expect(blob.includes("logs/job.log")).toBe(true);
  }, 180_000);

  it("shows the vetter's reason when output is rejected", async () => {
    const submitted = await submitJob(DUMPER);
    const jobId = submitted.job_id;

    const vetter = vetterSession();
    await approveInputViaConsole(vetter, jobId, submitted.code_hash);

    const consumer = consumerSession();
    consumer.trackJob(jobId);
    await until(async () => {
      await consumer.refreshJobs();
      const state = consumer.jobs.get(jobId)?.state;
      return state === "PendingOutputVetting" ? state : null;
    }, "execution to finish");

    const reasonless = await vetter.rejectOutput(jobId, "", {
      confirmed: true,
    });
    expect(reasonless.sent).toBe(false);
    const rejected = await vetter.rejectOutput(
      jobId, "row-level output is not releasable", { confirmed: true },
    );
    expect(rejected.sent).toBe(true);
    expect(rejected.reply?.state).toBe("RejectedOutput");

    await consumer.refreshJobs();
    const status = consumer.jobs.get(jobId)!;
    expect(status.state).toBe("RejectedOutput");
    const html = renderJobCard(status, consumer.api.resultsUrl(jobId));
    expect(html).toContain("rejected: row-level output is not releasable");
    expect(html).not.toContain("download results");

    await expect(consumer.api.fetchResults(jobId)).rejects.toMatchObject({
      status: 409,
      code: "NotReleased",
    } satisfies Partial<ApiError>);
  }, 180_000);

  it("surfaces bad signature uploads inline and recovers", async () => {
    const submitted = await submitJob(TRAINER);
    const jobId = submitted.job_id;
    const vetter = vetterSession();

    // a signature naming a nonce the gateway never issued
    const forged = signOffline(jobId, submitted.code_hash, "ff".repeat(16));
    const unknown = await vetter.approveInput(jobId, forged);
    expect(unknown.sent).toBe(true);
    expect(unknown.error).toContain("SignatureInvalid");
    expect(unknown.error).toContain("NonceUnknown");
    expect(vetter.lastError).toContain("NonceUnknown");

    // a real nonce, but signed over the wrong code hash
    const nonce = await vetter.requestNonce();
    const wrongHash = signOffline(jobId, "0".repeat(64), nonce.value);
    const mismatch = await vetter.approveInput(jobId, wrongHash);
    expect(mismatch.sent).toBe(true);
    expect(mismatch.error).toContain("HashMismatch");

    // neither upload closed the case; a correct signature still lands
    await vetter.refreshVetting();
    expect(vetter.pendingInput.map((c) => c.job_id)).toContain(jobId);
    await approveInputViaConsole(vetter, jobId, submitted.code_hash);
  }, 180_000);
});
