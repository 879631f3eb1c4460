"""Shared domain types and the job lifecycle state machine.

Every zone process interprets these identically; a job's record is an
immutable value that moves between zones only on the one-way queues.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

from .canonical import canonical_json_bytes, is_hex_digest, sha256_hex, ts_now
from .errors import IllegalTransition


class JobState(str, Enum):
    SUBMITTED = "Submitted"
    PENDING_INPUT_VETTING = "PendingInputVetting"
    REJECTED_INPUT = "RejectedInput"
    APPROVED_SIGNED = "ApprovedSigned"
    QUEUED_FOR_EXECUTION = "QueuedForExecution"
    EXECUTING = "Executing"
    EXECUTION_FAILED = "ExecutionFailed"
    COMPLETED = "Completed"
    PENDING_OUTPUT_VETTING = "PendingOutputVetting"
    REJECTED_OUTPUT = "RejectedOutput"
    RELEASED = "Released"
    RETRIEVED = "Retrieved"


class LifecycleEvent(str, Enum):
    INPUT_VETTING_OPENED = "input_vetting_opened"
    REJECTED = "rejected"
    APPROVED = "approved"
    QUEUED = "queued"
    STARTED = "started"
    FAILED = "failed"
    COMPLETED = "completed"
    OUTPUT_VETTING_OPENED = "output_vetting_opened"
    RETRIEVED = "retrieved"


# The full directed graph. Any (state, event) pair absent here is a hard error;
# a failed job still flows to output vetting because its logs are vetted before
# anything leaves the secure zone.
TRANSITIONS: dict[tuple[JobState, LifecycleEvent], JobState] = {
    (JobState.SUBMITTED, LifecycleEvent.INPUT_VETTING_OPENED): JobState.PENDING_INPUT_VETTING,
    (JobState.PENDING_INPUT_VETTING, LifecycleEvent.REJECTED): JobState.REJECTED_INPUT,
    (JobState.PENDING_INPUT_VETTING, LifecycleEvent.APPROVED): JobState.APPROVED_SIGNED,
    (JobState.APPROVED_SIGNED, LifecycleEvent.QUEUED): JobState.QUEUED_FOR_EXECUTION,
    (JobState.QUEUED_FOR_EXECUTION, LifecycleEvent.STARTED): JobState.EXECUTING,
    (JobState.EXECUTING, LifecycleEvent.FAILED): JobState.EXECUTION_FAILED,
    (JobState.EXECUTING, LifecycleEvent.COMPLETED): JobState.COMPLETED,
    (JobState.EXECUTION_FAILED, LifecycleEvent.OUTPUT_VETTING_OPENED): JobState.PENDING_OUTPUT_VETTING,
    (JobState.COMPLETED, LifecycleEvent.OUTPUT_VETTING_OPENED): JobState.PENDING_OUTPUT_VETTING,
    (JobState.PENDING_OUTPUT_VETTING, LifecycleEvent.REJECTED): JobState.REJECTED_OUTPUT,
    (JobState.PENDING_OUTPUT_VETTING, LifecycleEvent.APPROVED): JobState.RELEASED,
    (JobState.RELEASED, LifecycleEvent.RETRIEVED): JobState.RETRIEVED,
}

TERMINAL_STATES = frozenset(
    {JobState.REJECTED_INPUT, JobState.REJECTED_OUTPUT, JobState.RETRIEVED}
)


@dataclass(frozen=True)
class ResourceRequest:
    cpu_cores: int
    memory_mb: int
    max_runtime_s: int

    def __post_init__(self):
        for name in ("cpu_cores", "memory_mb", "max_runtime_s"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
                raise ValueError(f"resource_request.{name} must be a positive integer")

    def to_dict(self) -> dict:
        return {
            "cpu_cores": self.cpu_cores,
            "memory_mb": self.memory_mb,
            "max_runtime_s": self.max_runtime_s,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ResourceRequest":
        return cls(
            cpu_cores=data["cpu_cores"],
            memory_mb=data["memory_mb"],
            max_runtime_s=data["max_runtime_s"],
        )


@dataclass(frozen=True)
class JobBundle:
    """A submitted workload: code archive plus the request that frames it.

    code_hash is the digest of the canonicalised archive and must equal its
    recomputation at every hand-off.
    """

    job_id: str
    submitter_id: str
    code_archive: bytes
    entrypoint: str
    runtime_ref: str
    dataset_id: str
    resource_request: ResourceRequest
    code_hash: str

    def __post_init__(self):
        if not is_hex_digest(self.code_hash):
            raise ValueError("code_hash must be a 64-char lowercase hex digest")

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "submitter_id": self.submitter_id,
            "code_archive": self.code_archive.hex(),
            "entrypoint": self.entrypoint,
            "runtime_ref": self.runtime_ref,
            "dataset_id": self.dataset_id,
            "resource_request": self.resource_request.to_dict(),
            "code_hash": self.code_hash,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "JobBundle":
        return cls(
            job_id=data["job_id"],
            submitter_id=data["submitter_id"],
            code_archive=bytes.fromhex(data["code_archive"]),
            entrypoint=data["entrypoint"],
            runtime_ref=data["runtime_ref"],
            dataset_id=data["dataset_id"],
            resource_request=ResourceRequest.from_dict(data["resource_request"]),
            code_hash=data["code_hash"],
        )


@dataclass(frozen=True)
class StateEntry:
    state: JobState
    entered_at: str
    detail: str | None = None

    def to_dict(self) -> dict:
        return {
            "state": self.state.value,
            "entered_at": self.entered_at,
            "detail": self.detail,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StateEntry":
        return cls(
            state=JobState(data["state"]),
            entered_at=data["entered_at"],
            detail=data.get("detail"),
        )


@dataclass(frozen=True)
class JobRecord:
    """A job and its full lifecycle history. Immutable; transition copies."""

    job_id: str
    submitter_id: str
    state: JobState
    state_entered_at: str
    detail: str | None = None
    history: tuple[StateEntry, ...] = field(default_factory=tuple)

    @classmethod
    def new(cls, job_id: str, submitter_id: str, now: str | None = None) -> "JobRecord":
        now = now or ts_now()
        entry = StateEntry(JobState.SUBMITTED, now)
        return cls(
            job_id=job_id,
            submitter_id=submitter_id,
            state=JobState.SUBMITTED,
            state_entered_at=now,
            history=(entry,),
        )

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "submitter_id": self.submitter_id,
            "state": self.state.value,
            "state_entered_at": self.state_entered_at,
            "detail": self.detail,
            "history": [entry.to_dict() for entry in self.history],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "JobRecord":
        return cls(
            job_id=data["job_id"],
            submitter_id=data["submitter_id"],
            state=JobState(data["state"]),
            state_entered_at=data["state_entered_at"],
            detail=data.get("detail"),
            history=tuple(StateEntry.from_dict(e) for e in data["history"]),
        )


def transition(
    job: JobRecord,
    event: LifecycleEvent,
    detail: str | None = None,
    now: str | None = None,
) -> JobRecord:
    """Apply a lifecycle event, returning a new record.

    Pure: the input record is never mutated; persistence and audit of the
    result are the caller's concern. Raises IllegalTransition off-graph.
    """
    key = (job.state, event)
    if key not in TRANSITIONS:
        raise IllegalTransition(job.state.value, event.value)
    new_state = TRANSITIONS[key]
    now = now or ts_now()
    entry = StateEntry(new_state, now, detail)
    return replace(
        job,
        state=new_state,
        state_entered_at=now,
        detail=detail,
        history=job.history + (entry,),
    )


@dataclass(frozen=True)
class ArtifactRef:
    relative_path: str
    byte_size: int
    digest: str

    def to_dict(self) -> dict:
        return {
            "relative_path": self.relative_path,
            "byte_size": self.byte_size,
            "digest": self.digest,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ArtifactRef":
        return cls(
            relative_path=data["relative_path"],
            byte_size=data["byte_size"],
            digest=data["digest"],
        )


@dataclass(frozen=True)
class JobResultSet:
    """What leaves an airlock: artifact digests, log digest, exit status.

    Artifacts originate only from the job's output mount; the workspace is
    never exported.
    """

    job_id: str
    artifacts: tuple[ArtifactRef, ...]
    log_digest: str
    exit_status: int
    produced_at: str

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "artifacts": [a.to_dict() for a in self.artifacts],
            "log_digest": self.log_digest,
            "exit_status": self.exit_status,
            "produced_at": self.produced_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "JobResultSet":
        return cls(
            job_id=data["job_id"],
            artifacts=tuple(ArtifactRef.from_dict(a) for a in data["artifacts"]),
            log_digest=data["log_digest"],
            exit_status=data["exit_status"],
            produced_at=data["produced_at"],
        )

    def canonical_bytes(self) -> bytes:
        return canonical_json_bytes(self.to_dict())

    def digest(self) -> str:
        return sha256_hex(self.canonical_bytes())
