/** JSON shapes served by the gateway HTTP API. */

export type Role = "vetter" | "consumer";

export type CaseKind = "input" | "output";

export interface CaseSummary {
  job_id: string;
  kind: CaseKind;
  opened_at: string;
  state: string;
  submitter_id: string;
}

export interface Preview {
  kind: "text" | "hex";
  content: string;
  truncated: boolean;
}

export interface FileView {
  byte_size: number;
  digest: string;
  preview: Preview;
}

export interface ManifestView {
  entrypoint: string;
  runtime_ref: string;
  dataset_id: string;
  resource_request: {
    cpu_cores: number;
    memory_mb: number;
    max_runtime_s: number;
  };
}

export interface Decision {
  approved: boolean;
  reason: string;
  decided_by: string;
  decided_at: string;
}

export interface ArtifactEntry {
  relative_path: string;
  byte_size: number;
  digest: string;
}

export interface RunReport {
  validated: boolean;
  rejection_reason: string | null;
  timed_out: boolean;
  attempts: number;
  started_at: string | null;
  finished_at: string | null;
}

export interface FullArtifact {
  relative_path: string;
  content_hex: string;
}

/** Detail payload for one vetting case; output cases add run evidence. */
export interface CaseDetail {
  job_id: string;
  kind: CaseKind;
  opened_at: string;
  state: string;
  submitter_id: string;
  decision: Decision | null;
  code_hash?: string;
  manifest?: ManifestView;
  files?: Record<string, FileView>;
  report?: RunReport;
  exit_status?: number;
  artifacts?: ArtifactEntry[];
  log_text?: string;
  previews?: Record<string, Preview>;
  full_artifact?: FullArtifact;
}

export interface HistoryEntry {
  state: string;
  entered_at: string;
  detail: string;
}

export interface JobStatus {
  job_id: string;
  state: string;
  detail: string;
  history: HistoryEntry[];
}

export interface NonceGrant {
  value: string;
  expires_at: string;
}

export interface DecisionReply {
  job_id: string;
  state: string;
}
