/** Pure HTML renderers. Each takes gateway JSON and returns a markup string;
 * no view touches the network, so every one of them is testable offline.
 * All interpolated data passes through escapeHtml.
 */

import {
  bytesLabel,
  escapeHtml,
  isHexDigest,
  shortDigest,
  timeLabel,
} from "./format.js";
import type {
  CaseDetail,
  CaseSummary,
  JobStatus,
  Preview,
} from "./types.js";

function previewBlock(path: string, preview: Preview): string {
  const note = preview.truncated ? " (truncated)" : "";
  const cls = preview.kind === "hex" ? "preview hex" : "preview text";
  return [
    `<figure class="${cls}">`,
    `<figcaption>${escapeHtml(path)}${note}</figcaption>`,
    `<pre>${escapeHtml(preview.content)}</pre>`,
    `</figure>`,
  ].join("");
}

function decisionBanner(detail: CaseDetail): string {
  if (detail.decision === null) {
    return `<p class="status open">awaiting decision</p>`;
  }
  const verdict = detail.decision.approved ? "approved" : "rejected";
  const reason = detail.decision.reason
    ? ` &mdash; ${escapeHtml(detail.decision.reason)}`
    : "";
  return `<p class="status closed">${verdict} by ` +
    `${escapeHtml(detail.decision.decided_by)}${reason}</p>`;
}

export function renderCaseList(kind: string, cases: CaseSummary[]): string {
  if (cases.length === 0) {
    return `<p class="empty">no pending ${escapeHtml(kind)} cases</p>`;
  }
  const rows = cases.map((c) =>
    `<tr data-job="${escapeHtml(c.job_id)}">` +
    `<td class="job-id">${escapeHtml(c.job_id)}</td>` +
    `<td>${escapeHtml(c.submitter_id)}</td>` +
    `<td>${escapeHtml(timeLabel(c.opened_at))}</td>` +
    `<td>${escapeHtml(c.state)}</td>` +
    `</tr>`,
  );
  return [
    `<table class="case-list">`,
    `<thead><tr><th>job</th><th>submitter</th>` +
      `<th>opened</th><th>state</th></tr></thead>`,
    `<tbody>${rows.join("")}</tbody>`,
    `</table>`,
  ].join("");
}

/** Input case: the code hash the vetter must sign, shown in full, plus the
 * complete file listing with per-file previews. */
export function renderInputCase(detail: CaseDetail): string {
  const hash = detail.code_hash ?? "";
  const hashClass = isHexDigest(hash) ? "code-hash" : "code-hash invalid";
  const parts = [
    `<section class="case input-case" data-job="${escapeHtml(detail.job_id)}">`,
    `<h2>input review: ${escapeHtml(detail.job_id)}</h2>`,
    decisionBanner(detail),
    `<p>submitted by ${escapeHtml(detail.submitter_id)}</p>`,
    `<p class="hash-line">code hash to sign: ` +
      `<code class="${hashClass}">${escapeHtml(hash)}</code></p>`,
  ];
  if (detail.manifest) {
    const m = detail.manifest;
    parts.push(
      `<dl class="manifest">`,
      `<dt>entrypoint</dt><dd>${escapeHtml(m.entrypoint)}</dd>`,
      `<dt>runtime</dt><dd>${escapeHtml(m.runtime_ref)}</dd>`,
      `<dt>dataset</dt><dd>${escapeHtml(m.dataset_id)}</dd>`,
      `<dt>limits</dt><dd>${m.resource_request.cpu_cores} cpu, ` +
        `${m.resource_request.memory_mb} MB, ` +
        `${m.resource_request.max_runtime_s}s</dd>`,
      `</dl>`,
    );
  }
  const files = detail.files ?? {};
  const rows = Object.keys(files).sort().map((path) => {
    const entry = files[path];
    return `<li><span class="path">${escapeHtml(path)}</span> ` +
      `<span class="size">${escapeHtml(bytesLabel(entry.byte_size))}</span> ` +
      `<code class="digest" title="${escapeHtml(entry.digest)}">` +
      `${escapeHtml(shortDigest(entry.digest))}</code></li>`;
  });
  parts.push(`<ul class="file-tree">${rows.join("")}</ul>`);
  for (const path of Object.keys(files).sort()) {
    parts.push(previewBlock(path, files[path].preview));
  }
  parts.push(`</section>`);
  return parts.join("\n");
}

/** Output case: run evidence (exit status, log, artifact digests with
 * previews) plus a link to the exact archive a consumer would download. */
export function renderOutputCase(detail: CaseDetail,
                                 resultsUrl: string): string {
  const report = detail.report;
  const parts = [
    `<section class="case output-case" data-job="${escapeHtml(detail.job_id)}">`,
    `<h2>output review: ${escapeHtml(detail.job_id)}</h2>`,
    decisionBanner(detail),
    `<p>submitted by ${escapeHtml(detail.submitter_id)}</p>`,
  ];
  if (report) {
    const flags = [
      detail.exit_status === undefined
        ? null : `exit status ${detail.exit_status}`,
      report.timed_out ? "timed out" : null,
      report.validated ? null : "validation failed",
    ].filter((f): f is string => f !== null);
    parts.push(`<p class="run-flags">${escapeHtml(flags.join("; "))}</p>`);
    if (report.started_at && report.finished_at) {
      parts.push(
        `<p class="run-window">ran ${escapeHtml(timeLabel(report.started_at))}` +
        ` to ${escapeHtml(timeLabel(report.finished_at))}</p>`,
      );
    }
  }
  const artifacts = detail.artifacts ?? [];
  if (artifacts.length === 0) {
    parts.push(`<p class="empty">job produced no artifacts</p>`);
  } else {
    const rows = artifacts.map((a) =>
      `<tr><td class="path">${escapeHtml(a.relative_path)}</td>` +
      `<td class="size">${escapeHtml(bytesLabel(a.byte_size))}</td>` +
      `<td><code class="digest">${escapeHtml(a.digest)}</code></td></tr>`,
    );
    parts.push(
      `<table class="artifacts">`,
      `<thead><tr><th>artifact</th><th>size</th><th>sha-256</th></tr></thead>`,
      `<tbody>${rows.join("")}</tbody>`,
      `</table>`,
    );
  }
  const previews = detail.previews ?? {};
  for (const path of Object.keys(previews).sort()) {
    parts.push(previewBlock(path, previews[path]));
  }
  if (detail.log_text !== undefined) {
    parts.push(
      `<h3>job log</h3>`,
      `<pre class="job-log">${escapeHtml(detail.log_text)}</pre>`,
    );
  }
  parts.push(
    `<p><a class="download" href="${escapeHtml(resultsUrl)}">` +
    `download archive under review</a></p>`,
    `</section>`,
  );
  return parts.join("\n");
}

function timelineItems(status: JobStatus): string {
  return status.history.map((entry) => {
    const note = entry.detail ? ` &mdash; ${escapeHtml(entry.detail)}` : "";
    return `<li><time>${escapeHtml(timeLabel(entry.entered_at))}</time> ` +
      `<span class="state">${escapeHtml(entry.state)}</span>${note}</li>`;
  }).join("");
}

/** One consumer job card: current state, full timeline, rejection reason
 * when vetting said no, download link once results are released. */
export function renderJobCard(status: JobStatus, resultsUrl: string): string {
  const parts = [
    `<article class="job-card" data-job="${escapeHtml(status.job_id)}">`,
    `<h3>${escapeHtml(status.job_id)}</h3>`,
    `<p class="state">${escapeHtml(status.state)}</p>`,
  ];
  if (status.state === "RejectedInput" || status.state === "RejectedOutput") {
    const reason = status.detail || "no reason recorded";
    parts.push(
      `<p class="rejection">rejected: ${escapeHtml(reason)}</p>`,
    );
  }
  if (status.state === "Released" || status.state === "Retrieved") {
    parts.push(
      `<p><a class="download" href="${escapeHtml(resultsUrl)}">` +
      `download results</a></p>`,
    );
  }
  parts.push(
    `<ol class="timeline">${timelineItems(status)}</ol>`,
    `</article>`,
  );
  return parts.join("\n");
}

export function renderDashboard(
  statuses: JobStatus[],
  resultsUrlFor: (jobId: string) => string,
): string {
  if (statuses.length === 0) {
    return `<p class="empty">no tracked jobs; submit with the client CLI ` +
      `and add the job id here</p>`;
  }
  return statuses
    .map((s) => renderJobCard(s, resultsUrlFor(s.job_id)))
    .join("\n");
}

/** Inline banner for transport or gateway errors. */
export function renderError(message: string | null): string {
  if (!message) {
    return "";
  }
  return `<p class="error-banner" role="alert">${escapeHtml(message)}</p>`;
}
