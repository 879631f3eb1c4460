"""Gateway: auth, submission, vetting workflow, results retrieval."""

import hashlib
import io
import json
import zipfile

import pytest

from airlock.archive import build_zip, canonical_hash_of_zip, parse_zip
from airlock.attestation import (
    KeyRegistry,
    NonceRegistry,
    generate_seed,
    public_key_from_seed,
    sign_offline,
)
from airlock.audit import AuditLog
from airlock.canonical import canonical_json_bytes, sha256_hex, ts_now
from airlock.deployment import build_broker
from airlock.errors import (
    CaseClosed,
    HashMismatch,
    MalformedBundle,
    NotFound,
    NotReleased,
    SignatureInvalid,
    TooLarge,
    Unauthorised,
)
from airlock.executor import result_payload
from airlock.gateway import GatewayCore, create_app
from airlock.model import JobResultSet, ArtifactRef

JOB_SOURCE = "print('train the model')\n"


def toy_zip(entrypoint="main.py", runtime_ref="python3-batch",
            dataset_id="ds-1", extra=None, manifest_override=None):
    manifest = {
        "entrypoint": entrypoint,
        "runtime_ref": runtime_ref,
        "dataset_id": dataset_id,
        "resource_request": {"cpu_cores": 1, "memory_mb": 256,
                             "max_runtime_s": 30},
    }
    if manifest_override is not None:
        manifest = manifest_override
    entries = {"manifest.json": json.dumps(manifest).encode(),
               "main.py": JOB_SOURCE.encode()}
    entries.update(extra or {})
    return build_zip(entries)


class GatewayWorld:
    def __init__(self, tmp_path, **core_kwargs):
        self.broker = build_broker(tmp_path / "queues")
        self.audit = AuditLog(tmp_path / "public.log", "public")
        self.keys = KeyRegistry(tmp_path / "keys.json")
        self.nonces = NonceRegistry(tmp_path / "nonces.jsonl")
        self.core = GatewayCore(
            tmp_path / "gateway", self.audit, self.broker,
            self.keys, self.nonces, **core_kwargs,
        )
        self.alice = self.core.add_principal("alice", "consumer", "tok-alice")
        self.bob = self.core.add_principal("bob", "consumer", "tok-bob")
        self.victor = self.core.add_principal("victor", "vetter", "tok-victor")
        self.victor_seed = generate_seed()
        self.keys.register("victor", public_key_from_seed(self.victor_seed))
        # secure-zone handles for injecting results / observing execution
        self.execution = self.broker.consumer("execution", "secure")
        self.results_in = self.broker.producer("results", "secure")

    def submit(self, archive=None, principal=None, claimed=None):
        return self.core.submit_job(
            principal or self.alice, archive or toy_zip(), claimed_hash=claimed
        )

    def approve_input(self, job_id, vetter=None, seed=None, code_hash=None,
                      nonce_value=None, sig_job_id=None):
        principal = vetter or self.victor
        nonce_value = nonce_value or self.core.request_nonce(principal)["value"]
        code_hash = code_hash or self.core._load_bundle(job_id).code_hash
        sig = sign_offline(
            sig_job_id or job_id, principal.principal_id, code_hash,
            nonce_value, seed or self.victor_seed,
        )
        return self.core.decide_input(
            principal, job_id, True, signature_file=sig.file_bytes()
        )

    def inject_result(self, job_id, artifacts=None, log_text="run ok\n",
                      exit_status=0, validated=True, rejection_reason=None):
        artifacts = artifacts if artifacts is not None else {
            "report.txt": b"label_a: 3\nlabel_b: 5\n"
        }
        refs = tuple(
            ArtifactRef(relative_path=path, byte_size=len(content),
                        digest=sha256_hex(content))
            for path, content in sorted(artifacts.items())
        )
        result_set = JobResultSet(
            job_id=job_id, artifacts=refs,
            log_digest=sha256_hex(log_text.encode()),
            exit_status=exit_status, produced_at=ts_now(),
        )
        payload = result_payload(
            result_set, validated=validated,
            rejection_reason=rejection_reason, timed_out=False, attempts=1,
            log_text=log_text, artifact_data=artifacts,
            started_at=ts_now(), finished_at=ts_now(),
        )
        self.results_in.enqueue(canonical_json_bytes(payload))
        assert self.core.pump_results_once()
        return payload


@pytest.fixture
def world(tmp_path):
    return GatewayWorld(tmp_path)


# -- auth ---------------------------------------------------------------------


def test_tokens_are_stored_only_as_digests(world, tmp_path):
    principal = world.core.authenticate("tok-alice")
    assert principal.principal_id == "alice"
    assert principal.token_digest == hashlib.sha256(b"tok-alice").hexdigest()
    on_disk = (tmp_path / "gateway" / "principals.json").read_bytes()
    assert b"tok-alice" not in on_disk
    assert principal.token_digest.encode() in on_disk


def test_unknown_token_is_rejected(world):
    with pytest.raises(Unauthorised):
        world.core.authenticate("tok-mallory")


# -- submission ---------------------------------------------------------------


def test_submit_opens_input_case_and_reports_hash(world):
    archive = toy_zip()
    reply = world.submit(archive)
    assert reply["state"] == "PendingInputVetting"
    assert reply["code_hash"] == canonical_hash_of_zip(archive)
    cases = world.core.list_cases(world.victor, "input")
    assert [c["job_id"] for c in cases] == [reply["job_id"]]
    actions = [e.action for e in world.audit.read_all()]
    assert "job.submitted" in actions
    assert "case.opened" in actions


def test_submission_burst_with_live_pump_never_double_acks(world):
    # the background pump and submit_job's drain share the vetting queue;
    # a non-atomic dequeue/ack pair would crash one of them on a duplicate
    import threading

    from airlock.gateway import GatewayService

    service = GatewayService(world.core)
    service.start()
    failures = []
    try:
        def submit_some():
            try:
                for _ in range(8):
                    reply = world.core.submit_job(world.alice, toy_zip())
                    assert reply["state"] == "PendingInputVetting"
            except Exception as exc:
                failures.append(exc)

        threads = [threading.Thread(target=submit_some) for _ in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not failures
        assert service._thread.is_alive()
        assert len(world.core.list_cases(world.victor, "input")) == 32
    finally:
        service.stop()


def test_submit_rejects_missing_entrypoint(world):
    with pytest.raises(MalformedBundle):
        world.submit(toy_zip(entrypoint="not_there.py"))


def test_submit_rejects_missing_manifest(world):
    archive = build_zip({"main.py": JOB_SOURCE.encode()})
    with pytest.raises(MalformedBundle):
        world.submit(archive)


def test_submit_rejects_bad_resource_request(world):
    manifest = {
        "entrypoint": "main.py", "runtime_ref": "python3-batch",
        "dataset_id": "ds-1",
        "resource_request": {"cpu_cores": 0, "memory_mb": 256,
                             "max_runtime_s": 30},
    }
    with pytest.raises(MalformedBundle):
        world.submit(toy_zip(manifest_override=manifest))


def test_submit_verifies_client_claimed_hash(world):
    archive = toy_zip()
    with pytest.raises(HashMismatch):
        world.submit(archive, claimed="00" * 32)
    reply = world.submit(archive, claimed=canonical_hash_of_zip(archive))
    assert reply["job_id"]


def test_submit_enforces_size_cap(tmp_path):
    import random

    world = GatewayWorld(tmp_path, size_cap_bytes=1024)
    big = toy_zip(extra={"blob.bin": random.Random(9).randbytes(4096)})
    with pytest.raises(TooLarge):
        world.submit(big)


def test_vetter_cannot_submit_jobs(world):
    with pytest.raises(Unauthorised):
        world.submit(principal=world.victor)


# -- status and non-enumerability ----------------------------------------------


def test_owner_sees_status_and_history(world):
    job_id = world.submit()["job_id"]
    status = world.core.get_status(world.alice, job_id)
    assert status["state"] == "PendingInputVetting"
    states = [h["state"] for h in status["history"]]
    assert states == ["Submitted", "PendingInputVetting"]


def test_foreign_job_is_indistinguishable_from_absent(world):
    job_id = world.submit()["job_id"]
    with pytest.raises(NotFound) as someone_elses:
        world.core.get_status(world.bob, job_id)
    with pytest.raises(NotFound) as never_existed:
        world.core.get_status(world.bob, "f" * 32)
    assert type(someone_elses.value) is type(never_existed.value)


def test_every_visible_state_has_an_audit_event(world):
    job_id = world.submit()["job_id"]
    world.approve_input(job_id)
    world.inject_result(job_id)
    status = world.core.get_status(world.alice, job_id)
    transitions = [
        e for e in world.audit.read_all() if e.action == "job.transition"
    ]
    # one transition event per non-initial history entry
    assert len(transitions) == len(status["history"]) - 1


# -- input vetting --------------------------------------------------------------


def test_case_detail_shows_files_manifest_and_hash(world):
    archive = toy_zip(extra={"lib/util.py": b"VALUE = 3\n"})
    reply = world.submit(archive)
    detail = world.core.case_detail(world.victor, "input", reply["job_id"])
    assert detail["code_hash"] == reply["code_hash"]
    assert detail["manifest"]["entrypoint"] == "main.py"
    assert sorted(detail["files"]) == ["lib/util.py", "main.py", "manifest.json"]
    preview = detail["files"]["main.py"]["preview"]
    assert preview["kind"] == "text"
    assert preview["content"] == JOB_SOURCE
    digest = detail["files"]["lib/util.py"]["digest"]
    assert digest == hashlib.sha256(b"VALUE = 3\n").hexdigest()


def test_consumer_cannot_reach_vetting_endpoints(world):
    job_id = world.submit()["job_id"]
    with pytest.raises(Unauthorised):
        world.core.list_cases(world.alice, "input")
    with pytest.raises(Unauthorised):
        world.core.case_detail(world.alice, "input", job_id)
    with pytest.raises(Unauthorised):
        world.core.decide_input(world.alice, job_id, False, reason="no")
    with pytest.raises(Unauthorised):
        world.core.request_nonce(world.alice)


def test_rejection_reaches_consumer_with_reason(world):
    job_id = world.submit()["job_id"]
    world.core.decide_input(
        world.victor, job_id, False, reason="reads os.environ"
    )
    status = world.core.get_status(world.alice, job_id)
    assert status["state"] == "RejectedInput"
    assert status["detail"] == "reads os.environ"
    assert world.core.list_cases(world.victor, "input") == []


def test_decision_is_immutable(world):
    job_id = world.submit()["job_id"]
    world.core.decide_input(world.victor, job_id, False, reason="no")
    with pytest.raises(CaseClosed):
        world.core.decide_input(world.victor, job_id, False, reason="again")
    with pytest.raises(CaseClosed):
        world.approve_input(job_id)


def test_approval_requires_signature_file(world):
    job_id = world.submit()["job_id"]
    with pytest.raises(SignatureInvalid) as exc:
        world.core.decide_input(world.victor, job_id, True)
    assert exc.value.reason == "MissingSignature"
    # case remains open after a failed approval attempt
    assert world.core.list_cases(world.victor, "input") != []


def test_approval_signature_must_cover_the_stored_hash(world):
    job_id = world.submit()["job_id"]
    nonce = world.core.request_nonce(world.victor)["value"]
    sig = sign_offline(job_id, "victor", "11" * 32, nonce, world.victor_seed)
    with pytest.raises(SignatureInvalid) as exc:
        world.core.decide_input(
            world.victor, job_id, True, signature_file=sig.file_bytes()
        )
    assert exc.value.reason == "HashMismatch"


def test_approval_rejects_foreign_or_stale_nonces(world):
    wendy = world.core.add_principal("wendy", "vetter", "tok-wendy")
    wendy_seed = generate_seed()
    world.keys.register("wendy", public_key_from_seed(wendy_seed))

    job_id = world.submit()["job_id"]
    code_hash = world.core._load_bundle(job_id).code_hash

    # nonce issued to wendy, decision by victor with victor's own signature
    wendy_nonce = world.core.request_nonce(wendy)["value"]
    sig = sign_offline(job_id, "victor", code_hash, wendy_nonce,
                       world.victor_seed)
    with pytest.raises(SignatureInvalid) as exc:
        world.core.decide_input(
            world.victor, job_id, True, signature_file=sig.file_bytes()
        )
    assert exc.value.reason == "NonceMismatch"

    # entirely unknown nonce value
    sig = sign_offline(job_id, "victor", code_hash, "ab" * 32,
                       world.victor_seed)
    with pytest.raises(SignatureInvalid) as exc:
        world.core.decide_input(
            world.victor, job_id, True, signature_file=sig.file_bytes()
        )
    assert exc.value.reason == "NonceUnknown"

    # someone else's signature file presented by the deciding vetter
    victor_nonce = world.core.request_nonce(world.victor)["value"]
    sig = sign_offline(job_id, "wendy", code_hash, victor_nonce, wendy_seed)
    with pytest.raises(SignatureInvalid) as exc:
        world.core.decide_input(
            world.victor, job_id, True, signature_file=sig.file_bytes()
        )
    assert exc.value.reason == "VetterMismatch"


def test_approval_rejects_forged_signature_bytes(world):
    job_id = world.submit()["job_id"]
    code_hash = world.core._load_bundle(job_id).code_hash
    nonce = world.core.request_nonce(world.victor)["value"]
    mallory_seed = generate_seed()  # not victor's registered key
    sig = sign_offline(job_id, "victor", code_hash, nonce, mallory_seed)
    with pytest.raises(SignatureInvalid) as exc:
        world.core.decide_input(
            world.victor, job_id, True, signature_file=sig.file_bytes()
        )
    assert exc.value.reason == "BadSignature"


def test_good_approval_queues_the_signed_task(world):
    reply = world.submit()
    job_id = reply["job_id"]
    outcome = world.approve_input(job_id)
    assert outcome["state"] == "QueuedForExecution"
    status = world.core.get_status(world.alice, job_id)
    states = [h["state"] for h in status["history"]]
    assert states == ["Submitted", "PendingInputVetting", "ApprovedSigned",
                      "QueuedForExecution"]

    record = world.execution.dequeue()
    task = json.loads(record.payload)
    world.execution.ack(record.seq)
    assert task["bundle"]["job_id"] == job_id
    assert task["bundle"]["code_hash"] == reply["code_hash"]
    assert task["signature"]["vetter_id"] == "victor"
    assert task["nonce"]["value"] == task["signature"]["nonce_value"]
    actions = [e.action for e in world.audit.read_all()]
    assert "signature.accepted" in actions


def test_nonce_request_requires_registered_key(world):
    nigel = world.core.add_principal("nigel", "vetter", "tok-nigel")
    with pytest.raises(Unauthorised):
        world.core.request_nonce(nigel)
    first = world.core.request_nonce(world.victor)["value"]
    second = world.core.request_nonce(world.victor)["value"]
    assert first != second and len(first) == 64


# -- results flow ----------------------------------------------------------------


def _to_output_vetting(world, artifacts=None, **inject_kwargs):
    job_id = world.submit()["job_id"]
    world.approve_input(job_id)
    world.inject_result(job_id, artifacts=artifacts, **inject_kwargs)
    return job_id


def test_result_arrival_opens_output_case(world):
    job_id = _to_output_vetting(world)
    status = world.core.get_status(world.alice, job_id)
    assert status["state"] == "PendingOutputVetting"
    states = [h["state"] for h in status["history"]]
    assert states[-3:] == ["Executing", "Completed", "PendingOutputVetting"]
    cases = world.core.list_cases(world.victor, "output")
    assert [c["job_id"] for c in cases] == [job_id]


def test_duplicate_result_delivery_is_dropped(world):
    job_id = _to_output_vetting(world)
    before = world.core.get_status(world.alice, job_id)
    # redelivery of the same payload: acked, no state change, one case
    world.inject_result(job_id)
    after = world.core.get_status(world.alice, job_id)
    assert after["history"] == before["history"]
    assert len(world.core.list_cases(world.victor, "output")) == 1


def test_failed_execution_still_reaches_output_vetting(world):
    job_id = _to_output_vetting(
        world, artifacts={}, validated=False,
        rejection_reason="SignatureRejected: BadSignature",
        exit_status=-255, log_text="[executor] job was not executed\n",
    )
    status = world.core.get_status(world.alice, job_id)
    assert status["state"] == "PendingOutputVetting"
    states = [h["state"] for h in status["history"]]
    assert "ExecutionFailed" in states
    detail = world.core.case_detail(world.victor, "output", job_id)
    assert detail["report"]["validated"] is False


def test_output_case_detail_previews_and_full_download(world):
    binary = bytes(range(256))
    job_id = _to_output_vetting(
        world, artifacts={"plot.bin": binary, "summary.txt": b"count: 8\n"}
    )
    detail = world.core.case_detail(world.victor, "output", job_id)
    assert [a["relative_path"] for a in detail["artifacts"]] == [
        "plot.bin", "summary.txt"
    ]
    assert detail["previews"]["summary.txt"]["kind"] == "text"
    assert detail["previews"]["plot.bin"]["kind"] == "hex"
    assert detail["log_text"] == "run ok\n"
    full = world.core.case_detail(
        world.victor, "output", job_id, full_artifact="plot.bin"
    )
    assert bytes.fromhex(full["full_artifact"]["content_hex"]) == binary


def test_release_fetch_and_idempotent_redownload(world):
    content = {"report.txt": b"label_a: 3\nlabel_b: 5\n"}
    job_id = _to_output_vetting(world, artifacts=content)
    world.core.decide_output(world.victor, job_id, True)
    assert world.core.get_status(world.alice, job_id)["state"] == "Released"

    archive = world.core.fetch_results(world.alice, job_id)
    entries = parse_zip(archive)
    assert entries["artifacts/report.txt"] == content["report.txt"]
    assert entries["logs/job.log"] == b"run ok\n"
    assert world.core.get_status(world.alice, job_id)["state"] == "Retrieved"

    again = world.core.fetch_results(world.alice, job_id)
    assert again == archive  # re-download after Retrieved is permitted
    assert world.core.get_status(world.alice, job_id)["state"] == "Retrieved"
    actions = [e.action for e in world.audit.read_all()]
    assert actions.count("results.retrieved") == 1


def test_fetch_is_owner_only_and_gated_on_release(world):
    job_id = _to_output_vetting(world)
    with pytest.raises(NotReleased):
        world.core.fetch_results(world.alice, job_id)
    world.core.decide_output(world.victor, job_id, True)
    with pytest.raises(NotFound):
        world.core.fetch_results(world.bob, job_id)


def test_rejected_output_is_never_downloadable(world):
    job_id = _to_output_vetting(world)
    world.core.decide_output(
        world.victor, job_id, False, reason="row dump in artifact"
    )
    status = world.core.get_status(world.alice, job_id)
    assert status["state"] == "RejectedOutput"
    assert status["detail"] == "row dump in artifact"
    with pytest.raises(NotReleased):
        world.core.fetch_results(world.alice, job_id)
    with pytest.raises(CaseClosed):
        world.core.decide_output(world.victor, job_id, True)
    actions = [e.action for e in world.audit.read_all()]
    assert "results.rejected" in actions


def test_public_audit_chain_verifies_end_to_end(world):
    job_id = _to_output_vetting(world)
    world.core.decide_output(world.victor, job_id, True)
    world.core.fetch_results(world.alice, job_id)
    report = world.audit.verify()
    assert report.ok and report.length > 10


# -- HTTP adapter ------------------------------------------------------------------


@pytest.fixture
def client(world):
    from fastapi.testclient import TestClient

    return TestClient(create_app(world.core)), world


def test_http_requires_bearer_token(client):
    http, _ = client
    assert http.get("/v1/jobs/abc").status_code == 401
    assert http.post("/v1/jobs", content=b"zip").status_code == 401
    bad = http.get("/v1/jobs/abc", headers={"Authorization": "Bearer nope"})
    assert bad.status_code == 401


def test_http_submit_approve_release_fetch_roundtrip(client):
    http, world = client
    alice = {"Authorization": "Bearer tok-alice"}
    victor = {"Authorization": "Bearer tok-victor"}

    archive = toy_zip()
    reply = http.post(
        "/v1/jobs", content=archive, headers={
            **alice, "X-Code-Hash": canonical_hash_of_zip(archive),
        },
    )
    assert reply.status_code == 200, reply.text
    job_id = reply.json()["job_id"]
    code_hash = reply.json()["code_hash"]

    nonce = http.post("/v1/nonces", headers=victor).json()["value"]
    sig = sign_offline(job_id, "victor", code_hash, nonce, world.victor_seed)
    decided = http.post(
        f"/v1/vetting/input/{job_id}/decision", headers=victor,
        json={"approved": True,
              "signature_file_hex": sig.file_bytes().hex()},
    )
    assert decided.status_code == 200, decided.text
    assert decided.json()["state"] == "QueuedForExecution"

    world.inject_result(job_id)
    cases = http.get("/v1/vetting/output", headers=victor).json()["cases"]
    assert [c["job_id"] for c in cases] == [job_id]
    released = http.post(
        f"/v1/vetting/output/{job_id}/decision", headers=victor,
        json={"approved": True},
    )
    assert released.status_code == 200

    fetched = http.get(f"/v1/jobs/{job_id}/results", headers=alice)
    assert fetched.status_code == 200
    assert fetched.headers["content-type"] == "application/zip"
    entries = parse_zip(fetched.content)
    assert "artifacts/report.txt" in entries

    status = http.get(f"/v1/jobs/{job_id}", headers=alice).json()
    assert status["state"] == "Retrieved"


def test_http_error_statuses(client):
    http, world = client
    alice = {"Authorization": "Bearer tok-alice"}
    victor = {"Authorization": "Bearer tok-victor"}

    missing = http.get("/v1/jobs/" + "0" * 32, headers=alice)
    assert missing.status_code == 404

    bad_hash = http.post(
        "/v1/jobs", content=toy_zip(),
        headers={**alice, "X-Code-Hash": "11" * 32},
    )
    assert bad_hash.status_code == 422

    garbage = http.post("/v1/jobs", content=b"not a zip", headers=alice)
    assert garbage.status_code == 422

    job_id = world.submit()["job_id"]
    denied = http.post(
        f"/v1/vetting/input/{job_id}/decision", headers=victor,
        json={"approved": True},
    )
    assert denied.status_code == 422
    assert denied.json()["reason"] == "MissingSignature"

    rejected = http.post(
        f"/v1/vetting/input/{job_id}/decision", headers=victor,
        json={"approved": False, "reason": "no"},
    )
    assert rejected.status_code == 200
    twice = http.post(
        f"/v1/vetting/input/{job_id}/decision", headers=victor,
        json={"approved": False, "reason": "no"},
    )
    assert twice.status_code == 409

    not_released = http.get(f"/v1/jobs/{job_id}/results", headers=alice)
    assert not_released.status_code == 409

    as_consumer = http.get("/v1/vetting/input", headers=alice)
    assert as_consumer.status_code == 401
