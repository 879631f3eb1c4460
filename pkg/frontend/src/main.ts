/** Browser entry point: wires the session and renderers into the DOM.
 *
 * Layout contract with index.html: a #login form, a #nav tab strip, and a
 * #view container the renderers paint into.
 */

import { ConsoleSession } from "./session.js";
import type { CaseKind, Role } from "./types.js";
import {
  renderCaseList,
  renderDashboard,
  renderError,
  renderInputCase,
  renderOutputCase,
} from "./views.js";

type Screen =
  | { name: "cases"; kind: CaseKind }
  | { name: "case"; kind: CaseKind; jobId: string }
  | { name: "dashboard" };

let session: ConsoleSession | null = null;
let screen: Screen = { name: "dashboard" };
let pendingSignature: Uint8Array | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing #${id} in index.html`);
  }
  return node as T;
}

async function paint(): Promise<void> {
  if (!session) {
    return;
  }
  const view = el<HTMLDivElement>("view");
  const banner = renderError(session.lastError);
  if (screen.name === "dashboard") {
    await session.refreshJobs();
    const statuses = session.trackedJobs()
      .map((id) => session!.jobs.get(id))
      .filter((s): s is NonNullable<typeof s> => s !== undefined);
    view.innerHTML = banner + renderDashboard(
      statuses, (id) => session!.api.resultsUrl(id),
    );
    return;
  }
  if (screen.name === "cases") {
    await session.refreshVetting();
    const cases = screen.kind === "input"
      ? session.pendingInput : session.pendingOutput;
    view.innerHTML = banner + renderCaseList(screen.kind, cases);
    for (const row of view.querySelectorAll<HTMLElement>("tr[data-job]")) {
      row.addEventListener("click", () => {
        screen = {
          name: "case",
          kind: (screen as { kind: CaseKind }).kind,
          jobId: row.dataset.job!,
        };
        void paint();
      });
    }
    return;
  }
  const detail = await session.api.caseDetail(screen.kind, screen.jobId);
  const body = screen.kind === "input"
    ? renderInputCase(detail)
    : renderOutputCase(detail, session.api.resultsUrl(screen.jobId));
  view.innerHTML = banner + body + decisionControls(screen.kind);
  wireDecisionControls(screen.kind, screen.jobId);
}

function decisionControls(kind: CaseKind): string {
  if (kind === "input") {
    return `
      <div class="controls">
        <button id="nonce">issue signing nonce</button>
        <output id="nonce-out"></output>
        <label>signature file
          <input type="file" id="sig-file" accept=".sig"></label>
        <button id="approve">approve (requires signature)</button>
        <input id="reject-reason" placeholder="reason">
        <button id="reject">reject</button>
      </div>`;
  }
  return `
    <div class="controls">
      <button id="approve">release results</button>
      <input id="reject-reason" placeholder="reason">
      <button id="reject">reject output</button>
    </div>`;
}

function wireDecisionControls(kind: CaseKind, jobId: string): void {
  const approve = el<HTMLButtonElement>("approve");
  const reject = el<HTMLButtonElement>("reject");
  const reasonBox = el<HTMLInputElement>("reject-reason");

  if (kind === "input") {
    el<HTMLButtonElement>("nonce").addEventListener("click", async () => {
      const grant = await session!.requestNonce();
      el<HTMLOutputElement>("nonce-out").textContent =
        `nonce ${grant.value} (expires ${grant.expires_at})`;
    });
    el<HTMLInputElement>("sig-file").addEventListener("change", async (ev) => {
      const input = ev.target as HTMLInputElement;
      const file = input.files?.[0];
      pendingSignature = file
        ? new Uint8Array(await file.arrayBuffer()) : null;
    });
    approve.addEventListener("click", async () => {
      const result = await session!.approveInput(jobId, pendingSignature);
      report(result.blocked ?? result.error ?? "approved; job queued");
      pendingSignature = null;
      await paint();
    });
    reject.addEventListener("click", async () => {
      const result = await session!.rejectInput(jobId, reasonBox.value);
      report(result.blocked ?? result.error ?? "rejected");
      await paint();
    });
    return;
  }

  approve.addEventListener("click", async () => {
    const confirmed = window.confirm(
      "Release these results to the submitter?",
    );
    const result = await session!.approveOutput(jobId, { confirmed });
    report(result.blocked ?? result.error ?? "released");
    await paint();
  });
  reject.addEventListener("click", async () => {
    const confirmed = window.confirm("Reject these results?");
    const result = await session!.rejectOutput(
      jobId, reasonBox.value, { confirmed },
    );
    report(result.blocked ?? result.error ?? "rejected");
    await paint();
  });
}

function report(message: string): void {
  el<HTMLParagraphElement>("notice").textContent = message;
}

function wireLogin(): void {
  el<HTMLFormElement>("login").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const role = el<HTMLSelectElement>("role").value as Role;
    session?.stopPolling();
    session = new ConsoleSession({
      role,
      baseUrl: el<HTMLInputElement>("gateway-url").value,
      token: el<HTMLInputElement>("token").value,
    });
    el<HTMLInputElement>("token").value = "";
    screen = role === "vetter"
      ? { name: "cases", kind: "input" } : { name: "dashboard" };
    session.startPolling();
    void paint();
  });

  el<HTMLButtonElement>("tab-input").addEventListener("click", () => {
    screen = { name: "cases", kind: "input" };
    void paint();
  });
  el<HTMLButtonElement>("tab-output").addEventListener("click", () => {
    screen = { name: "cases", kind: "output" };
    void paint();
  });
  el<HTMLButtonElement>("tab-jobs").addEventListener("click", () => {
    screen = { name: "dashboard" };
    void paint();
  });
  el<HTMLFormElement>("track").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const box = el<HTMLInputElement>("track-id");
    if (session && box.value.trim() !== "") {
      session.trackJob(box.value.trim());
      box.value = "";
      void paint();
    }
  });
}

if (typeof document !== "undefined") {
  wireLogin();
}
