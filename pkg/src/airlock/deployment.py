"""Zone wiring: the queue topology and the restricted-zone vault service.

The whole installation has exactly five one-way queues. Nothing else
crosses a zone boundary; in particular the vault's redeem interface is a
local handle constructed in the restricted zone and given only to the
executor process.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

from .attestation import KeyRegistry, NonceRegistry
from .audit import AuditLog
from .canonical import canonical_json_bytes
from .errors import RoleViolation, UnknownCredential
from .executor import Executor
from .gateway import GatewayCore, GatewayService
from .vault import DatasetStream, MountRequest, Vault
from .walqueue import QueueBroker, QueueSpec

INPUT_VETTING_QUEUE = "input-vetting"
EXECUTION_QUEUE = "execution"
RESULTS_QUEUE = "results"
MOUNT_QUEUE = "mount-requests"
CREDENTIAL_QUEUE = "credentials"

QUEUE_SPECS: dict[str, QueueSpec] = {
    INPUT_VETTING_QUEUE: QueueSpec(INPUT_VETTING_QUEUE, "public", "public"),
    EXECUTION_QUEUE: QueueSpec(EXECUTION_QUEUE, "public", "secure"),
    RESULTS_QUEUE: QueueSpec(RESULTS_QUEUE, "secure", "public"),
    MOUNT_QUEUE: QueueSpec(MOUNT_QUEUE, "secure", "restricted"),
    CREDENTIAL_QUEUE: QueueSpec(CREDENTIAL_QUEUE, "restricted", "secure"),
}


def build_broker(root: Path | str) -> QueueBroker:
    return QueueBroker(root, QUEUE_SPECS)


def verify_wiring(broker: QueueBroker) -> None:
    """Assert the deployed queue topology is exactly the five-queue layout.

    Raises RoleViolation on any extra queue, missing queue, or a queue
    whose producer/consumer zones differ from the reference table.
    """
    names = set(broker.specs)
    expected = set(QUEUE_SPECS)
    if names != expected:
        raise RoleViolation(
            f"queue set mismatch: extra={sorted(names - expected)} "
            f"missing={sorted(expected - names)}"
        )
    for name, spec in QUEUE_SPECS.items():
        actual = broker.specs[name]
        if (actual.producer_zone, actual.consumer_zone) != (
            spec.producer_zone,
            spec.consumer_zone,
        ):
            raise RoleViolation(
                f"queue {name!r} bound {actual.producer_zone}->"
                f"{actual.consumer_zone}, expected {spec.producer_zone}->"
                f"{spec.consumer_zone}"
            )


class VaultRedeemChannel:
    """Local, in-zone handle to credential redemption.

    Not a queue: redemption never crosses a zone boundary on its own. The
    restricted zone constructs this and hands it to the executor alone.
    """

    def __init__(self, vault: Vault):
        self._vault = vault

    def redeem(self, token: str) -> DatasetStream:
        return self._vault.redeem(token)


class VaultService:
    """Restricted-zone loop: mount requests in, credentials out.

    Each message on the mount queue is either a mount request (answered
    with a grant or a denial on the credential queue) or a revocation
    notice from the executor after a run finishes.
    """

    def __init__(self, vault: Vault, broker: QueueBroker, keys: KeyRegistry):
        self.vault = vault
        self.keys = keys
        self._consumer = broker.consumer(MOUNT_QUEUE, "restricted")
        self._producer = broker.producer(CREDENTIAL_QUEUE, "restricted")
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def pump_once(self) -> bool:
        record = self._consumer.dequeue()
        if record is None:
            return False
        message = json.loads(record.payload)
        kind = message.get("kind")
        if kind == "mount":
            request = MountRequest.from_dict(message["request"])
            credential, denial = self.vault.handle_mount_request(
                request, self.keys
            )
            if credential is not None:
                response = {
                    "job_id": request.job_id,
                    "granted": True,
                    "credential": credential.public_view(),
                }
            else:
                response = {
                    "job_id": request.job_id,
                    "granted": False,
                    "denial_reason": denial,
                }
            self._producer.enqueue(canonical_json_bytes(response))
        elif kind == "revoke":
            try:
                self.vault.revoke(message["credential_id"])
            except UnknownCredential:
                pass  # redelivered notice for a credential already gone
        self._consumer.ack(record.seq)
        return True

    def start(self) -> None:
        self._stop.clear()
        self._thread = threading.Thread(
            target=self._loop, daemon=True, name="vault-service"
        )
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=10)
            self._thread = None

    def _loop(self) -> None:
        while not self._stop.is_set():
            if not self.pump_once():
                self._stop.wait(0.05)


class AirlockSystem:
    """A whole desk-scale installation wired up in one process.

    Each zone keeps its own audit chain, registries, and storage under its
    own subdirectory; in production the three zones run on separate hosts
    and the broker root sits on the transfer medium. The object graph here
    enforces the same reachability: the gateway core never receives the
    vault or executor handles, and only the executor holds the redeem
    channel.
    """

    def __init__(
        self,
        root: Path | str,
        kdf=None,
        parallelism: int = 1,
        credential_timeout_s: int = 60,
        runner=None,
        size_cap_bytes: int | None = None,
    ):
        self.root = Path(root)
        self.broker = build_broker(self.root / "queues")
        verify_wiring(self.broker)

        self.public_audit = AuditLog(self.root / "public" / "audit.log", "public")
        self.secure_audit = AuditLog(self.root / "secure" / "audit.log", "secure")
        self.restricted_audit = AuditLog(
            self.root / "restricted" / "audit.log", "restricted"
        )

        self.keys = KeyRegistry(self.root / "public" / "keys.json",
                                audit=self.public_audit)
        self.gateway_nonces = NonceRegistry(
            self.root / "public" / "nonces.jsonl", audit=self.public_audit
        )
        self.executor_nonces = NonceRegistry(
            self.root / "secure" / "nonces.jsonl", audit=self.secure_audit
        )

        self.vault = Vault(self.root / "restricted" / "vault",
                           self.restricted_audit, kdf=kdf)
        gateway_kwargs = {}
        if size_cap_bytes is not None:
            gateway_kwargs["size_cap_bytes"] = size_cap_bytes
        self.gateway = GatewayCore(
            self.root / "public" / "gateway",
            self.public_audit,
            self.broker,
            self.keys,
            self.gateway_nonces,
            **gateway_kwargs,
        )
        self.executor = Executor(
            self.root / "secure",
            self.secure_audit,
            self.broker,
            self.keys,
            self.executor_nonces,
            VaultRedeemChannel(self.vault),
            runner=runner,
            parallelism=parallelism,
            credential_timeout_s=credential_timeout_s,
        )
        self.vault_service = VaultService(self.vault, self.broker, self.keys)
        self.gateway_service = GatewayService(self.gateway)
        self._running = False

    def start(self) -> None:
        self.vault_service.start()
        self.executor.start()
        self.gateway_service.start()
        self._running = True

    def stop(self) -> None:
        if self._running:
            self.gateway_service.stop()
            self.executor.stop()
            self.vault_service.stop()
            self._running = False

    def audits(self) -> dict[str, AuditLog]:
        return {
            "public": self.public_audit,
            "secure": self.secure_audit,
            "restricted": self.restricted_audit,
        }
