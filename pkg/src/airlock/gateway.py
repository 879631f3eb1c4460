"""Public zone service: job submission/retrieval API and vetting workflow.

All state lives in the public zone (job records, uploaded bundles, vetting
cases, released results). The only paths out of this zone are the two
one-way queues it produces onto (input-vetting for its own workflow
durability, execution toward the secure zone); the only path in is the
results queue. Nothing here can read vault storage or executor
filesystems.

Bearer tokens are never stored; only their SHA-256 digests are kept, and
lookup is by digest comparison.
"""

from __future__ import annotations

import hmac
import json
import os
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Header, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .archive import MANIFEST_NAME, build_zip, canonical_hash_of_zip, parse_zip
from .attestation import KeyRegistry, NonceRegistry, VettingSignature, raw_verify
from .audit import AuditLog
from .canonical import (
    canonical_json_bytes,
    sha256_hex,
    ts_before,
    ts_now,
)
from .errors import (
    CaseClosed,
    HashMismatch,
    MalformedArchive,
    MalformedBundle,
    NotFound,
    NotReleased,
    SignatureInvalid,
    TooLarge,
    Unauthorised,
    UnknownVetter,
)
from .model import (
    JobBundle,
    JobRecord,
    JobState,
    LifecycleEvent,
    ResourceRequest,
    transition,
)

INPUT_VETTING_QUEUE = "input-vetting"
EXECUTION_QUEUE = "execution"
RESULTS_QUEUE = "results"

SIZE_CAP_BYTES = 256 * 1024 * 1024
PREVIEW_CAP_BYTES = 1024 * 1024

ROLES = ("consumer", "vetter", "admin")


@dataclass(frozen=True)
class Principal:
    principal_id: str
    role: str  # consumer | vetter | admin
    token_digest: str


def _render_preview(content: bytes, cap: int) -> dict:
    """Bounded human-readable view: text as text, binary as a hex head."""
    head = content[:cap]
    try:
        text = head.decode("utf-8")
        if "\x00" not in text:
            return {
                "kind": "text",
                "content": text,
                "truncated": len(content) > cap,
            }
    except UnicodeDecodeError:
        pass
    return {
        "kind": "hex",
        "content": content[: cap // 2].hex(),
        "truncated": len(content) > cap // 2,
    }


class GatewayCore:
    """Framework-free service logic; the HTTP layer is a thin adapter."""

    def __init__(
        self,
        root: Path | str,
        audit: AuditLog,
        broker,
        keys: KeyRegistry,
        nonces: NonceRegistry,
        size_cap_bytes: int = SIZE_CAP_BYTES,
        preview_cap_bytes: int = PREVIEW_CAP_BYTES,
    ):
        self.root = Path(root)
        self.audit = audit
        self.keys = keys
        self.nonces = nonces
        self.size_cap_bytes = size_cap_bytes
        self.preview_cap_bytes = preview_cap_bytes

        self.jobs_dir = self.root / "jobs"
        self.cases_dir = self.root / "cases"
        self.principals_path = self.root / "principals.json"
        self.jobs_dir.mkdir(parents=True, exist_ok=True)
        (self.cases_dir / "input").mkdir(parents=True, exist_ok=True)
        (self.cases_dir / "output").mkdir(parents=True, exist_ok=True)

        self._vetting_producer = broker.producer(INPUT_VETTING_QUEUE, "public")
        self._vetting_consumer = broker.consumer(INPUT_VETTING_QUEUE, "public")
        self._execution_producer = broker.producer(EXECUTION_QUEUE, "public")
        self._results_consumer = broker.consumer(RESULTS_QUEUE, "public")

        self._lock = threading.RLock()
        self._principals: dict[str, Principal] = {}
        self._load_principals()

    # -- principals --------------------------------------------------------

    def _load_principals(self) -> None:
        if self.principals_path.exists():
            data = json.loads(self.principals_path.read_bytes())
            for pid, entry in data.items():
                self._principals[pid] = Principal(
                    principal_id=pid,
                    role=entry["role"],
                    token_digest=entry["token_digest"],
                )

    def _save_principals(self) -> None:
        body = {
            p.principal_id: {"role": p.role, "token_digest": p.token_digest}
            for p in self._principals.values()
        }
        self._write_json(self.principals_path, body)

    def add_principal(self, principal_id: str, role: str, token: str) -> Principal:
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r}")
        principal = Principal(
            principal_id=principal_id,
            role=role,
            token_digest=sha256_hex(token.encode("utf-8")),
        )
        with self._lock:
            self._principals[principal_id] = principal
            self._save_principals()
        return principal

    def authenticate(self, token: str) -> Principal:
        digest = sha256_hex(token.encode("utf-8"))
        with self._lock:
            for principal in self._principals.values():
                if hmac.compare_digest(principal.token_digest, digest):
                    return principal
        raise Unauthorised("unknown bearer token")

    @staticmethod
    def _require_role(principal: Principal, *roles: str) -> None:
        if principal.role not in roles:
            raise Unauthorised(
                f"role {principal.role!r} may not perform this operation"
            )

    # -- persistence helpers -------------------------------------------------

    @staticmethod
    def _write_json(path: Path, payload) -> None:
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "wb") as fh:
            fh.write(canonical_json_bytes(payload))
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    def _job_dir(self, job_id: str) -> Path:
        return self.jobs_dir / job_id

    def _load_record(self, job_id: str) -> JobRecord | None:
        path = self._job_dir(job_id) / "record.json"
        if not path.exists():
            return None
        return JobRecord.from_dict(json.loads(path.read_bytes()))

    def _save_record(self, record: JobRecord) -> None:
        self._write_json(self._job_dir(record.job_id) / "record.json",
                         record.to_dict())

    def _load_bundle(self, job_id: str) -> JobBundle:
        path = self._job_dir(job_id) / "bundle.json"
        return JobBundle.from_dict(json.loads(path.read_bytes()))

    def _load_results(self, job_id: str) -> dict | None:
        path = self._job_dir(job_id) / "results.json"
        if not path.exists():
            return None
        return json.loads(path.read_bytes())

    def _case_path(self, kind: str, job_id: str) -> Path:
        return self.cases_dir / kind / f"{job_id}.json"

    def _load_case(self, kind: str, job_id: str) -> dict | None:
        path = self._case_path(kind, job_id)
        if not path.exists():
            return None
        return json.loads(path.read_bytes())

    def _apply(self, record: JobRecord, event: LifecycleEvent,
               detail: str | None = None) -> JobRecord:
        moved = transition(record, event, detail=detail)
        self._save_record(moved)
        self.audit.append(
            "gateway", "job.transition",
            {"job_id": record.job_id, "from": record.state.value,
             "event": event.value, "to": moved.state.value,
             "detail": detail or ""},
        )
        return moved

    # -- consumer operations ---------------------------------------------------

    def submit_job(self, principal: Principal, archive: bytes,
                   claimed_hash: str | None = None) -> dict:
        self._require_role(principal, "consumer")
        if len(archive) > self.size_cap_bytes:
            raise TooLarge(
                f"archive is {len(archive)} bytes; cap is {self.size_cap_bytes}"
            )
        try:
            entries = parse_zip(archive)
        except MalformedArchive as exc:
            raise MalformedBundle(str(exc)) from exc
        if MANIFEST_NAME not in entries:
            raise MalformedBundle(f"{MANIFEST_NAME} missing from archive root")
        try:
            manifest = json.loads(entries[MANIFEST_NAME])
        except ValueError as exc:
            raise MalformedBundle(f"unreadable {MANIFEST_NAME}: {exc}") from exc
        for field in ("entrypoint", "runtime_ref", "dataset_id",
                      "resource_request"):
            if field not in manifest:
                raise MalformedBundle(f"{MANIFEST_NAME} lacks {field!r}")
        if manifest["entrypoint"] not in entries:
            raise MalformedBundle(
                f"entrypoint {manifest['entrypoint']!r} not in archive"
            )
        try:
            request = ResourceRequest.from_dict(manifest["resource_request"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedBundle(f"bad resource_request: {exc}") from exc

        code_hash = canonical_hash_of_zip(archive)
        if claimed_hash is not None and claimed_hash != code_hash:
            raise HashMismatch(
                f"client claimed {claimed_hash}, server computed {code_hash}"
            )

        with self._lock:
            job_id = uuid.uuid4().hex
            bundle = JobBundle(
                job_id=job_id,
                submitter_id=principal.principal_id,
                code_archive=archive,
                entrypoint=manifest["entrypoint"],
                runtime_ref=manifest["runtime_ref"],
                dataset_id=manifest["dataset_id"],
                resource_request=request,
                code_hash=code_hash,
            )
            record = JobRecord.new(job_id, principal.principal_id)
            self._job_dir(job_id).mkdir(parents=True)
            self._write_json(self._job_dir(job_id) / "bundle.json",
                             bundle.to_dict())
            self._save_record(record)
            self.audit.append(
                "gateway", "job.submitted",
                {"job_id": job_id, "submitter_id": principal.principal_id,
                 "code_hash": code_hash, "dataset_id": bundle.dataset_id},
            )
            self._vetting_producer.enqueue(
                canonical_json_bytes({"job_id": job_id})
            )
            # same process consumes the queue; drain so the case opens now
            while self.pump_input_cases_once():
                pass
            state = self._load_record(job_id).state
        return {"job_id": job_id, "code_hash": code_hash,
                "state": state.value}

    def get_status(self, principal: Principal, job_id: str) -> dict:
        record = self._load_record(job_id)
        if record is None:
            raise NotFound(job_id)
        if (principal.role == "consumer"
                and record.submitter_id != principal.principal_id):
            raise NotFound(job_id)  # no existence oracle for others' jobs
        return {
            "job_id": record.job_id,
            "state": record.state.value,
            "detail": record.detail or "",
            "history": [
                {"state": entry.state.value, "entered_at": entry.entered_at,
                 "detail": entry.detail or ""}
                for entry in record.history
            ],
        }

    def fetch_results(self, principal: Principal, job_id: str) -> bytes:
        with self._lock:
            record = self._load_record(job_id)
            if record is None or record.submitter_id != principal.principal_id:
                raise NotFound(job_id)
            if record.state not in (JobState.RELEASED, JobState.RETRIEVED):
                raise NotReleased(record.state.value)
            results = self._load_results(job_id)
            entries = {
                f"artifacts/{path}": bytes.fromhex(hexed)
                for path, hexed in results["artifact_data"].items()
            }
            entries["logs/job.log"] = results["log_text"].encode("utf-8")
            archive = build_zip(entries)
            if record.state is JobState.RELEASED:
                self._apply(record, LifecycleEvent.RETRIEVED)
                self.audit.append(
                    "gateway", "results.retrieved",
                    {"job_id": job_id, "by": principal.principal_id},
                )
            return archive

    # -- vetting operations ---------------------------------------------------

    def list_cases(self, principal: Principal, kind: str) -> list[dict]:
        self._require_role(principal, "vetter")
        if kind not in ("input", "output"):
            raise NotFound(kind)
        summaries = []
        for path in sorted((self.cases_dir / kind).glob("*.json")):
            case = json.loads(path.read_bytes())
            if case.get("decision") is not None:
                continue
            record = self._load_record(case["job_id"])
            summaries.append({
                "job_id": case["job_id"],
                "kind": kind,
                "opened_at": case["opened_at"],
                "state": record.state.value,
                "submitter_id": record.submitter_id,
            })
        return summaries

    def case_detail(self, principal: Principal, kind: str, job_id: str,
                    full_artifact: str | None = None) -> dict:
        self._require_role(principal, "vetter")
        case = self._load_case(kind, job_id)
        if case is None:
            raise NotFound(job_id)
        record = self._load_record(job_id)
        detail = {
            "job_id": job_id,
            "kind": kind,
            "opened_at": case["opened_at"],
            "state": record.state.value,
            "submitter_id": record.submitter_id,
            "decision": case.get("decision"),
        }
        if kind == "input":
            bundle = self._load_bundle(job_id)
            entries = parse_zip(bundle.code_archive)
            detail["code_hash"] = bundle.code_hash
            detail["manifest"] = json.loads(entries[MANIFEST_NAME])
            detail["files"] = {
                path: {
                    "byte_size": len(content),
                    "digest": sha256_hex(content),
                    "preview": _render_preview(content, self.preview_cap_bytes),
                }
                for path, content in sorted(entries.items())
            }
        else:
            results = self._load_results(job_id)
            detail["report"] = results["report"]
            detail["exit_status"] = results["result_set"]["exit_status"]
            detail["artifacts"] = results["result_set"]["artifacts"]
            detail["log_text"] = results["log_text"][: self.preview_cap_bytes]
            detail["previews"] = {
                path: _render_preview(bytes.fromhex(hexed),
                                      self.preview_cap_bytes)
                for path, hexed in sorted(results["artifact_data"].items())
            }
            if full_artifact is not None:
                if full_artifact not in results["artifact_data"]:
                    raise NotFound(full_artifact)
                detail["full_artifact"] = {
                    "relative_path": full_artifact,
                    "content_hex": results["artifact_data"][full_artifact],
                }
        return detail

    def decide_input(self, principal: Principal, job_id: str, approved: bool,
                     reason: str | None = None,
                     signature_file: bytes | None = None) -> dict:
        self._require_role(principal, "vetter")
        with self._lock:
            case = self._load_case("input", job_id)
            if case is None:
                raise NotFound(job_id)
            if case.get("decision") is not None:
                raise CaseClosed(job_id)
            record = self._load_record(job_id)
            bundle = self._load_bundle(job_id)

            if approved:
                sig = self._check_approval_signature(
                    principal, job_id, bundle.code_hash, signature_file
                )
                nonce = self.nonces.status(sig.nonce_value)
                decision = {
                    "approved": True,
                    "reason": reason or "",
                    "decided_by": principal.principal_id,
                    "decided_at": ts_now(),
                }
                case["decision"] = decision
                case["signature_file"] = sig.to_dict()
                self._write_json(self._case_path("input", job_id), case)
                self.audit.append(
                    "gateway", "case.decided",
                    {"job_id": job_id, "kind": "input", "approved": True,
                     "decided_by": principal.principal_id},
                )
                self.audit.append(
                    "gateway", "signature.accepted",
                    {"job_id": job_id, "vetter_id": sig.vetter_id,
                     "code_hash": sig.code_hash,
                     "nonce_value": sig.nonce_value},
                )
                record = self._apply(record, LifecycleEvent.APPROVED)
                self._execution_producer.enqueue(canonical_json_bytes({
                    "bundle": bundle.to_dict(),
                    "signature": sig.to_dict(),
                    "nonce": nonce.to_dict(),
                }))
                record = self._apply(record, LifecycleEvent.QUEUED)
            else:
                decision = {
                    "approved": False,
                    "reason": reason or "unspecified",
                    "decided_by": principal.principal_id,
                    "decided_at": ts_now(),
                }
                case["decision"] = decision
                self._write_json(self._case_path("input", job_id), case)
                self.audit.append(
                    "gateway", "case.decided",
                    {"job_id": job_id, "kind": "input", "approved": False,
                     "decided_by": principal.principal_id,
                     "reason": decision["reason"]},
                )
                record = self._apply(
                    record, LifecycleEvent.REJECTED, detail=decision["reason"]
                )
            return {"job_id": job_id, "state": record.state.value,
                    "decision": decision}

    def _check_approval_signature(
        self, principal: Principal, job_id: str, code_hash: str,
        signature_file: bytes | None,
    ) -> VettingSignature:
        """All input-approval checks; the nonce is NOT consumed here.

        Consumption is the executor's job: the gateway only establishes
        that the presented approval is plausible before queueing, so a
        compromised gateway still cannot burn or mint approvals.
        """
        if signature_file is None:
            raise SignatureInvalid("MissingSignature")
        try:
            sig = VettingSignature.from_file_bytes(signature_file)
        except (ValueError, KeyError, TypeError) as exc:
            raise SignatureInvalid("Malformed") from exc
        if sig.scheme != "ed25519":
            raise SignatureInvalid("BadSignature")
        if sig.job_id != job_id:
            raise SignatureInvalid("JobMismatch")
        if sig.code_hash != code_hash:
            raise SignatureInvalid("HashMismatch")
        if sig.vetter_id != principal.principal_id:
            raise SignatureInvalid("VetterMismatch")
        entry = self.keys.entry(sig.vetter_id)
        if entry is None or not entry.enabled:
            raise SignatureInvalid("VetterDisabled")
        try:
            signature = bytes.fromhex(sig.signature)
        except ValueError as exc:
            raise SignatureInvalid("BadSignature") from exc
        if not raw_verify(bytes.fromhex(entry.public_key), sig.message(),
                          signature):
            raise SignatureInvalid("BadSignature")
        nonce = self.nonces.status(sig.nonce_value)
        if nonce is None:
            raise SignatureInvalid("NonceUnknown")
        if nonce.issued_to != sig.vetter_id:
            raise SignatureInvalid("NonceMismatch")
        if nonce.state != "issued":
            raise SignatureInvalid("NonceConsumed")
        if not ts_before(ts_now(), nonce.expires_at):
            raise SignatureInvalid("NonceExpired")
        return sig

    def decide_output(self, principal: Principal, job_id: str, approved: bool,
                      reason: str | None = None) -> dict:
        self._require_role(principal, "vetter")
        with self._lock:
            case = self._load_case("output", job_id)
            if case is None:
                raise NotFound(job_id)
            if case.get("decision") is not None:
                raise CaseClosed(job_id)
            record = self._load_record(job_id)
            decision = {
                "approved": approved,
                "reason": reason or ("" if approved else "unspecified"),
                "decided_by": principal.principal_id,
                "decided_at": ts_now(),
            }
            case["decision"] = decision
            self._write_json(self._case_path("output", job_id), case)
            self.audit.append(
                "gateway", "case.decided",
                {"job_id": job_id, "kind": "output", "approved": approved,
                 "decided_by": principal.principal_id,
                 "reason": decision["reason"]},
            )
            if approved:
                record = self._apply(record, LifecycleEvent.APPROVED)
                self.audit.append(
                    "gateway", "results.released",
                    {"job_id": job_id, "decided_by": principal.principal_id},
                )
            else:
                record = self._apply(
                    record, LifecycleEvent.REJECTED, detail=decision["reason"]
                )
                self.audit.append(
                    "gateway", "results.rejected",
                    {"job_id": job_id, "decided_by": principal.principal_id,
                     "reason": decision["reason"]},
                )
            return {"job_id": job_id, "state": record.state.value,
                    "decision": decision}

    def request_nonce(self, principal: Principal) -> dict:
        self._require_role(principal, "vetter")
        try:
            nonce = self.nonces.issue(principal.principal_id, self.keys)
        except UnknownVetter as exc:
            raise Unauthorised(
                f"no enabled signing key registered for "
                f"{principal.principal_id!r}"
            ) from exc
        return {"value": nonce.value, "expires_at": nonce.expires_at}

    # -- queue pumps -----------------------------------------------------------

    def pump_input_cases_once(self) -> bool:
        # both the pump thread and submit_job's drain consume this queue;
        # dequeue-to-ack must be atomic or they double-ack one record
        with self._lock:
            record = self._vetting_consumer.dequeue()
            if record is None:
                return False
            job_id = json.loads(record.payload)["job_id"]
            if self._load_case("input", job_id) is None:
                job = self._load_record(job_id)
                self._write_json(self._case_path("input", job_id), {
                    "job_id": job_id, "kind": "input",
                    "opened_at": ts_now(), "decision": None,
                })
                self._apply(job, LifecycleEvent.INPUT_VETTING_OPENED)
                self.audit.append(
                    "gateway", "case.opened",
                    {"job_id": job_id, "kind": "input"},
                )
            self._vetting_consumer.ack(record.seq)
        return True

    def pump_results_once(self) -> bool:
        delivered = self._results_consumer.dequeue()
        if delivered is None:
            return False
        payload = json.loads(delivered.payload)
        job_id = payload["job_id"]
        with self._lock:
            record = self._load_record(job_id)
            # duplicates from redelivery (or results for unknown jobs) are
            # acknowledged and dropped; the first delivery already advanced
            # the record past QueuedForExecution
            if record is not None and record.state is JobState.QUEUED_FOR_EXECUTION:
                self._write_json(self._job_dir(job_id) / "results.json", payload)
                record = self._apply(record, LifecycleEvent.STARTED)
                report = payload["report"]
                if report["validated"] and report["rejection_reason"] is None:
                    record = self._apply(record, LifecycleEvent.COMPLETED)
                else:
                    detail = report["rejection_reason"] or "execution failed"
                    if not report["validated"]:
                        detail = f"not launched: {detail}"
                    record = self._apply(
                        record, LifecycleEvent.FAILED, detail=detail
                    )
                record = self._apply(record, LifecycleEvent.OUTPUT_VETTING_OPENED)
                self._write_json(self._case_path("output", job_id), {
                    "job_id": job_id, "kind": "output",
                    "opened_at": ts_now(), "decision": None,
                })
                self.audit.append(
                    "gateway", "case.opened",
                    {"job_id": job_id, "kind": "output"},
                )
        self._results_consumer.ack(delivered.seq)
        return True


class GatewayService:
    """Background pump thread for the gateway's two consumed queues."""

    def __init__(self, core: GatewayCore):
        self.core = core
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        self._stop.clear()
        self._thread = threading.Thread(
            target=self._loop, daemon=True, name="gateway-pumps"
        )
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=10)
            self._thread = None

    def _loop(self) -> None:
        while not self._stop.is_set():
            moved = self.core.pump_input_cases_once()
            moved = self.core.pump_results_once() or moved
            if not moved:
                self._stop.wait(0.05)


class DecisionBody(BaseModel):
    approved: bool
    reason: str | None = None
    signature_file_hex: str | None = None


def create_app(core: GatewayCore) -> FastAPI:
    """HTTP adapter over GatewayCore with bearer-token auth."""
    app = FastAPI(title="airlock-gateway", docs_url=None, redoc_url=None)

    status_map = [
        (Unauthorised, 401),
        (NotFound, 404),
        (TooLarge, 413),
        (CaseClosed, 409),
        (NotReleased, 409),
        (MalformedBundle, 422),
        (HashMismatch, 422),
        (SignatureInvalid, 422),
    ]

    def _error_response(exc: Exception):
        for kind, status in status_map:
            if isinstance(exc, kind):
                body = {"error": kind.__name__, "message": str(exc)}
                if isinstance(exc, SignatureInvalid):
                    body["reason"] = exc.reason
                return JSONResponse(body, status_code=status)
        raise exc

    for kind, _ in status_map:
        app.add_exception_handler(
            kind, lambda request, exc: _error_response(exc)
        )

    def _principal(authorization: str | None) -> Principal:
        if not authorization or not authorization.startswith("Bearer "):
            raise Unauthorised("missing bearer token")
        return core.authenticate(authorization[len("Bearer "):])

    @app.post("/v1/jobs")
    async def submit_job(
        request: Request,
        authorization: str | None = Header(default=None),
        x_code_hash: str | None = Header(default=None),
    ):
        principal = _principal(authorization)
        archive = await request.body()
        return core.submit_job(principal, archive, claimed_hash=x_code_hash)

    @app.get("/v1/jobs/{job_id}")
    def get_status(job_id: str,
                   authorization: str | None = Header(default=None)):
        return core.get_status(_principal(authorization), job_id)

    @app.get("/v1/jobs/{job_id}/results")
    def fetch_results(job_id: str,
                      authorization: str | None = Header(default=None)):
        archive = core.fetch_results(_principal(authorization), job_id)
        return Response(content=archive, media_type="application/zip")

    @app.get("/v1/vetting/{kind}")
    def list_cases(kind: str,
                   authorization: str | None = Header(default=None)):
        return {"cases": core.list_cases(_principal(authorization), kind)}

    @app.get("/v1/vetting/{kind}/{job_id}")
    def case_detail(kind: str, job_id: str,
                    full_artifact: str | None = None,
                    authorization: str | None = Header(default=None)):
        return core.case_detail(
            _principal(authorization), kind, job_id,
            full_artifact=full_artifact,
        )

    @app.post("/v1/vetting/input/{job_id}/decision")
    def decide_input(job_id: str, body: DecisionBody,
                     authorization: str | None = Header(default=None)):
        signature_file = (
            bytes.fromhex(body.signature_file_hex)
            if body.signature_file_hex else None
        )
        return core.decide_input(
            _principal(authorization), job_id, body.approved,
            reason=body.reason, signature_file=signature_file,
        )

    @app.post("/v1/vetting/output/{job_id}/decision")
    def decide_output(job_id: str, body: DecisionBody,
                      authorization: str | None = Header(default=None)):
        return core.decide_output(
            _principal(authorization), job_id, body.approved,
            reason=body.reason,
        )

    @app.post("/v1/nonces")
    def request_nonce(authorization: str | None = Header(default=None)):
        return core.request_nonce(_principal(authorization))

    return app
