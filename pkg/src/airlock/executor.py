"""Secure zone: approved-job intake, vetting-chain verification, and
airlocked execution behind one-time data credentials.

Flow per job: dequeue from the execution queue, persist an intake journal
entry, then (a) re-verify the whole vetting chain (archive hash, detached
signature, single-use nonce), (b) hand a signed mount request to the vault
and wait for a one-time credential, (c) run the entrypoint in a transient
airlock, (d) collect only the output area plus logs into a result set for
output vetting, revoke the credential, and destroy the airlock.

Validation failures never launch anything: the job routes to output vetting
as a failure with the rejection reason in its log.
"""

from __future__ import annotations

import json
import os
import queue
import threading
from dataclasses import dataclass
from pathlib import Path

from .archive import canonical_hash_of_zip, extract_entries, parse_zip
from .attestation import (
    KeyRegistry,
    Nonce,
    NonceRegistry,
    VettingSignature,
    verify_signature,
)
from .audit import AuditLog
from .canonical import canonical_json_bytes, sha256_hex, ts_now
from .errors import (
    CollectionFailure,
    CredentialDenied,
    MalformedArchive,
    RunnerFailure,
    SignatureRejected,
)
from .model import ArtifactRef, JobBundle, JobResultSet
from .runner import (
    BASE_UID,
    RUNTIME_CATALOGUE,
    AirlockDirs,
    ProcessRunner,
    RunnerLimits,
    RunResult,
    destroy_airlock_dirs,
    lock_data_dir,
    prepare_airlock_dirs,
)
from .vault import MountRequest

EXECUTION_QUEUE = "execution"
RESULTS_QUEUE = "results"
MOUNT_QUEUE = "mount-requests"
CREDENTIAL_QUEUE = "credentials"

CREDENTIAL_TIMEOUT_S = 60
ATTEMPT_CAP = 3
ARTIFACT_CAP_BYTES = 64 * 1024 * 1024
VALIDATION_EXIT_STATUS = -255  # result sets for jobs that never launched


@dataclass(frozen=True)
class ExecutionTask:
    """One approved job as it travels the execution queue."""

    bundle: JobBundle
    signature: VettingSignature
    nonce: Nonce

    def to_dict(self) -> dict:
        return {
            "bundle": self.bundle.to_dict(),
            "signature": self.signature.to_dict(),
            "nonce": self.nonce.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExecutionTask":
        return cls(
            bundle=JobBundle.from_dict(data["bundle"]),
            signature=VettingSignature.from_dict(data["signature"]),
            nonce=Nonce.from_dict(data["nonce"]),
        )


def result_payload(
    result_set: JobResultSet,
    *,
    validated: bool,
    rejection_reason: str | None,
    timed_out: bool,
    attempts: int,
    log_text: str,
    artifact_data: dict[str, bytes],
    started_at: str | None,
    finished_at: str | None,
) -> dict:
    return {
        "job_id": result_set.job_id,
        "result_set": result_set.to_dict(),
        "report": {
            "validated": validated,
            "rejection_reason": rejection_reason,
            "timed_out": timed_out,
            "attempts": attempts,
            "started_at": started_at,
            "finished_at": finished_at,
        },
        "log_text": log_text,
        "artifact_data": {path: data.hex() for path, data in artifact_data.items()},
    }


class Executor:
    """The secure-zone service. One instance owns the zone's directories."""

    def __init__(
        self,
        zone_root: Path | str,
        audit: AuditLog,
        broker,
        keys: KeyRegistry,
        nonces: NonceRegistry,
        redeem_channel,
        runner: ProcessRunner | None = None,
        parallelism: int = 1,
        credential_timeout_s: int = CREDENTIAL_TIMEOUT_S,
        attempt_cap: int = ATTEMPT_CAP,
        artifact_cap_bytes: int = ARTIFACT_CAP_BYTES,
    ):
        if parallelism < 1:
            raise ValueError("parallelism must be at least 1")
        self.zone_root = Path(zone_root)
        self.audit = audit
        self.keys = keys
        self.nonces = nonces
        self.redeem_channel = redeem_channel
        self.runner = runner or ProcessRunner()
        self.parallelism = parallelism
        self.credential_timeout_s = credential_timeout_s
        self.attempt_cap = attempt_cap
        self.artifact_cap_bytes = artifact_cap_bytes

        self.journal_dir = self.zone_root / "journal"
        self.airlocks_dir = self.zone_root / "airlocks"
        self.journal_dir.mkdir(parents=True, exist_ok=True)
        self.airlocks_dir.mkdir(parents=True, exist_ok=True)
        # Job uids need traverse (not list) through to their own airlock;
        # the per-airlock 0o750 root:gid is the actual isolation wall.
        self.journal_dir.chmod(0o700)
        self.airlocks_dir.chmod(0o711)
        self.zone_root.chmod(0o711)

        self._exec_consumer = broker.consumer(EXECUTION_QUEUE, "secure")
        self._results_producer = broker.producer(RESULTS_QUEUE, "secure")
        self._mount_producer = broker.producer(MOUNT_QUEUE, "secure")
        self._cred_consumer = broker.consumer(CREDENTIAL_QUEUE, "secure")

        self._cred_cond = threading.Condition()
        self._cred_responses: dict[str, dict] = {}

        self._pending: "queue.Queue[Path]" = queue.Queue()
        existing = sorted(self.journal_dir.glob("*.json"))
        for path in existing:
            self._pending.put(path)
        self._intake_seq = len(existing)
        for path in existing:
            try:
                self._intake_seq = max(
                    self._intake_seq, int(path.name.split("-", 1)[0])
                )
            except ValueError:
                pass

        self.launch_count = 0
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []

    # -- service lifecycle -------------------------------------------------

    def start(self) -> None:
        self._stop.clear()
        self._threads = [
            threading.Thread(target=self._intake_loop, daemon=True,
                             name="executor-intake"),
            threading.Thread(target=self._dispatch_loop, daemon=True,
                             name="executor-credentials"),
        ]
        for slot in range(self.parallelism):
            self._threads.append(
                threading.Thread(
                    target=self._worker_loop, args=(slot,), daemon=True,
                    name=f"executor-worker-{slot}",
                )
            )
        for thread in self._threads:
            thread.start()

    def stop(self) -> None:
        self._stop.set()
        for thread in self._threads:
            thread.join(timeout=10)
        self._threads = []

    def _intake_loop(self) -> None:
        while not self._stop.is_set():
            if self.intake_once() is None:
                self._stop.wait(0.05)

    def _dispatch_loop(self) -> None:
        while not self._stop.is_set():
            if not self.credential_pump_once():
                self._stop.wait(0.05)

    def _worker_loop(self, slot: int) -> None:
        while not self._stop.is_set():
            try:
                path = self._pending.get(timeout=0.1)
            except queue.Empty:
                continue
            try:
                self.process_journal_entry(path, slot=slot)
            except Exception as exc:  # keep the slot alive; entry is on disk
                self.audit.append(
                    "executor", "results.collected",
                    {"journal": path.name, "error": f"worker crash: {exc}"},
                )

    # -- intake --------------------------------------------------------------

    def intake_once(self) -> str | None:
        """Move one execution-queue record into the durable intake journal."""
        record = self._exec_consumer.dequeue()
        if record is None:
            return None
        task = json.loads(record.payload)
        job_id = task["bundle"]["job_id"]
        existing = list(self.journal_dir.glob(f"*-{job_id}.json"))
        if not existing:
            self._intake_seq += 1
            path = self.journal_dir / f"{self._intake_seq:06d}-{job_id}.json"
            self._write_journal(path, task, 0, False)
            self._pending.put(path)
        self._exec_consumer.ack(record.seq)
        return job_id

    def credential_pump_once(self) -> bool:
        record = self._cred_consumer.dequeue()
        if record is None:
            return False
        response = json.loads(record.payload)
        with self._cred_cond:
            self._cred_responses[response["job_id"]] = response
            self._cred_cond.notify_all()
        self._cred_consumer.ack(record.seq)
        return True

    # -- processing ----------------------------------------------------------

    def process_journal_entry(self, path: Path, slot: int = 0) -> None:
        if not path.exists():  # already completed by an earlier life
            return
        data = json.loads(path.read_bytes())
        attempts = data["attempts"] + 1
        already_validated = data.get("validated", False)
        self._write_journal(path, data["task"], attempts, already_validated)

        task = ExecutionTask.from_dict(data["task"])
        job_id = task.bundle.job_id
        payload = None

        if attempts > self.attempt_cap:
            payload = self._failure_payload(
                task, attempts,
                f"RedeliveryCapExceeded: gave up after {self.attempt_cap} attempts",
            )
        else:
            if not already_validated:
                try:
                    self._validate(task)
                    # the nonce is burned now; record that so a crash before
                    # the run completes does not read as a replay on retry
                    self._write_journal(path, data["task"], attempts, True)
                except SignatureRejected as exc:
                    payload = self._failure_payload(
                        task, attempts, f"SignatureRejected: {exc.reason}"
                    )
            if payload is None:
                try:
                    credential = self._obtain_credential(task)
                except CredentialDenied as exc:
                    payload = self._failure_payload(
                        task, attempts, f"CredentialDenied: {exc.reason}"
                    )
                else:
                    payload = self._execute_and_collect(
                        task, credential, slot, attempts
                    )
        self._results_producer.enqueue(canonical_json_bytes(payload))
        self.audit.append(
            "executor", "results.collected",
            {"job_id": job_id,
             "result_digest": sha256_hex(canonical_json_bytes(payload["result_set"])),
             "validated": payload["report"]["validated"],
             "attempts": attempts},
        )
        path.unlink(missing_ok=True)

    def _write_journal(
        self, path: Path, task: dict, attempts: int, validated: bool
    ) -> None:
        body = canonical_json_bytes(
            {"task": task, "attempts": attempts, "validated": validated}
        )
        tmp = path.with_suffix(".tmp")
        with open(tmp, "wb") as fh:
            fh.write(body)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    def _validate(self, task: ExecutionTask) -> None:
        """Re-verify the vetting chain; raises SignatureRejected."""
        bundle, sig = task.bundle, task.signature
        try:
            recomputed = canonical_hash_of_zip(bundle.code_archive)
        except MalformedArchive as exc:
            self._audit_rejected(bundle.job_id, f"MalformedArchive: {exc}")
            raise SignatureRejected("HashMismatch") from exc
        if recomputed != bundle.code_hash or recomputed != sig.code_hash:
            self._audit_rejected(bundle.job_id, "HashMismatch")
            raise SignatureRejected("HashMismatch")
        # the signature must be bound to this very job and to the nonce
        # record riding with it, not merely be self-consistent
        if sig.job_id != bundle.job_id or sig.nonce_value != task.nonce.value:
            self._audit_rejected(bundle.job_id, "BadSignature")
            raise SignatureRejected("BadSignature")
        entries = parse_zip(bundle.code_archive)
        if bundle.entrypoint not in entries:
            self._audit_rejected(bundle.job_id, "MissingEntrypoint")
            raise SignatureRejected("MissingEntrypoint")
        if bundle.runtime_ref not in RUNTIME_CATALOGUE:
            self._audit_rejected(bundle.job_id, "UnknownRuntime")
            raise SignatureRejected("UnknownRuntime")
        self.nonces.import_issued(task.nonce)
        result = verify_signature(sig, recomputed, self.keys, self.nonces)
        if not result.accepted:
            self._audit_rejected(bundle.job_id, result.reason)
            raise SignatureRejected(result.reason)
        self.audit.append(
            "executor", "signature.accepted",
            {"job_id": bundle.job_id, "vetter_id": sig.vetter_id,
             "code_hash": bundle.code_hash},
        )

    def _audit_rejected(self, job_id: str, reason: str) -> None:
        self.audit.append(
            "executor", "signature.rejected",
            {"job_id": job_id, "reason": reason},
        )

    def _obtain_credential(self, task: ExecutionTask) -> dict:
        """Send a signed mount request; block until grant, denial, or timeout."""
        request = MountRequest(
            job_id=task.bundle.job_id,
            dataset_id=task.bundle.dataset_id,
            code_hash=task.bundle.code_hash,
            vetting_signature=task.signature,
            requested_at=ts_now(),
            max_runtime_s=task.bundle.resource_request.max_runtime_s,
        )
        self._mount_producer.enqueue(
            canonical_json_bytes({"kind": "mount", "request": request.to_dict()})
        )
        job_id = task.bundle.job_id
        with self._cred_cond:
            granted = self._cred_cond.wait_for(
                lambda: job_id in self._cred_responses,
                timeout=self.credential_timeout_s,
            )
            response = self._cred_responses.pop(job_id, None)
        if not granted or response is None:
            raise CredentialDenied("Timeout")
        if not response.get("granted"):
            raise CredentialDenied(response.get("denial_reason", "Denied"))
        return response["credential"]

    def _revoke_credential(self, credential: dict, job_id: str) -> None:
        self._mount_producer.enqueue(
            canonical_json_bytes(
                {
                    "kind": "revoke",
                    "job_id": job_id,
                    "credential_id": credential["credential_id"],
                }
            )
        )

    def _execute_and_collect(
        self, task: ExecutionTask, credential: dict, slot: int, attempts: int
    ) -> dict:
        bundle = task.bundle
        dirs = prepare_airlock_dirs(
            self.airlocks_dir / os.urandom(8).hex(), slot
        )
        run_result: RunResult | None = None
        failure: str | None = None
        try:
            try:
                stream = self.redeem_channel.redeem(credential["token"])
                with open(dirs.data / bundle.dataset_id, "wb") as fh:
                    for chunk in stream.chunks():
                        fh.write(chunk)
                lock_data_dir(dirs, slot)
                extract_entries(parse_zip(bundle.code_archive), dirs.work)
                entry_path = dirs.work / bundle.entrypoint
                if os.geteuid() == 0:
                    for sub in sorted(dirs.work.rglob("*")):
                        os.chown(sub, BASE_UID + slot, BASE_UID + slot)
                runtime = RUNTIME_CATALOGUE[bundle.runtime_ref]
                limits = RunnerLimits(
                    cpu_cores=bundle.resource_request.cpu_cores,
                    memory_mb=bundle.resource_request.memory_mb,
                    max_runtime_s=bundle.resource_request.max_runtime_s,
                )
                self.launch_count += 1
                self.audit.append(
                    "executor", "airlock.launched",
                    {"job_id": bundle.job_id, "runtime_ref": bundle.runtime_ref,
                     "dataset_id": bundle.dataset_id, "slot": slot},
                )
                run_result = self.runner.run(
                    runtime.argv(str(entry_path)), dirs, limits, slot=slot
                )
            except RunnerFailure as exc:
                failure = f"RunnerFailure: {exc}"
            except Exception as exc:  # redeem/extract errors keep their own name
                failure = f"{type(exc).__name__}: {exc}"
            artifacts: list[ArtifactRef] = []
            artifact_data: dict[str, bytes] = {}
            log_text = run_result.log_text if run_result else (failure or "")
            if run_result is not None:
                try:
                    artifacts, artifact_data = self._collect_outputs(dirs)
                except CollectionFailure as exc:
                    failure = f"CollectionFailure: {exc}"
                    artifacts, artifact_data = [], {}
                    log_text += f"\n[executor] {failure}\n"
                    self.audit.append(
                        "executor", "results.collected",
                        {"job_id": bundle.job_id, "error": str(exc)},
                    )
            result_set = JobResultSet(
                job_id=bundle.job_id,
                artifacts=tuple(artifacts),
                log_digest=sha256_hex(log_text.encode("utf-8")),
                exit_status=(
                    run_result.exit_status if run_result else VALIDATION_EXIT_STATUS
                ),
                produced_at=ts_now(),
            )
            succeeded = (
                failure is None
                and run_result is not None
                and run_result.exit_status == 0
                and not run_result.timed_out
            )
            reason = failure
            if reason is None and run_result is not None:
                if run_result.timed_out:
                    reason = "Timeout"
                elif run_result.exit_status != 0:
                    reason = f"NonZeroExit: {run_result.exit_status}"
            return result_payload(
                result_set,
                validated=True,
                rejection_reason=None if succeeded else reason,
                timed_out=bool(run_result and run_result.timed_out),
                attempts=attempts,
                log_text=log_text,
                artifact_data=artifact_data,
                started_at=run_result.started_at if run_result else None,
                finished_at=run_result.finished_at if run_result else None,
            )
        finally:
            self._revoke_credential(credential, bundle.job_id)
            destroy_airlock_dirs(dirs)
            self.audit.append(
                "executor", "airlock.destroyed",
                {"job_id": bundle.job_id, "slot": slot},
            )

    def _collect_outputs(
        self, dirs: AirlockDirs
    ) -> tuple[list[ArtifactRef], dict[str, bytes]]:
        """Enumerate the output area only; the workspace is never exported."""
        artifacts: list[ArtifactRef] = []
        artifact_data: dict[str, bytes] = {}
        total = 0
        try:
            paths = sorted(
                p for p in dirs.output.rglob("*") if p.is_file() and not p.is_symlink()
            )
            for path in paths:
                rel = path.relative_to(dirs.output).as_posix()
                content = path.read_bytes()
                total += len(content)
                if total > self.artifact_cap_bytes:
                    raise CollectionFailure(
                        f"output exceeds {self.artifact_cap_bytes} byte cap"
                    )
                artifacts.append(
                    ArtifactRef(
                        relative_path=rel,
                        byte_size=len(content),
                        digest=sha256_hex(content),
                    )
                )
                artifact_data[rel] = content
        except OSError as exc:
            raise CollectionFailure(f"cannot read output area: {exc}") from exc
        return artifacts, artifact_data

    def _failure_payload(
        self, task: ExecutionTask, attempts: int, reason: str
    ) -> dict:
        log_text = f"[executor] job was not executed: {reason}\n"
        result_set = JobResultSet(
            job_id=task.bundle.job_id,
            artifacts=(),
            log_digest=sha256_hex(log_text.encode("utf-8")),
            exit_status=VALIDATION_EXIT_STATUS,
            produced_at=ts_now(),
        )
        return result_payload(
            result_set,
            validated=False,
            rejection_reason=reason,
            timed_out=False,
            attempts=attempts,
            log_text=log_text,
            artifact_data={},
            started_at=None,
            finished_at=None,
        )
