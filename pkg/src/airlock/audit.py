"""Tamper-evident, hash-chained audit logging, one chain per zone.

Zones share no writable medium, so each zone appends to its own chain; a
chain verifies from the fixed genesis value and any alteration of a historic
record invalidates every later event_hash.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass
from pathlib import Path

from .canonical import (
    GENESIS_HASH,
    canonical_json_bytes,
    digest_payload,
    sha256_hex,
    ts_now,
)

ZONES = ("public", "secure", "restricted")

# Every security-relevant action in any zone. AuditLog.append refuses names
# outside this set so chains stay machine-checkable.
ACTIONS = frozenset(
    {
        "job.submitted",
        "job.transition",
        "case.opened",
        "case.decided",
        "nonce.issued",
        "nonce.consumed",
        "vetter.registered",
        "vetter.disabled",
        "vetter.enabled",
        "signature.accepted",
        "signature.rejected",
        "mount.requested",
        "mount.granted",
        "mount.denied",
        "credential.issued",
        "credential.redeemed",
        "credential.rejected",
        "credential.revoked",
        "dataset.loaded",
        "dataset.quarantined",
        "vault.unlocked",
        "vault.unlock_failed",
        "queue.recovered",
        "queue.frozen",
        "airlock.launched",
        "airlock.destroyed",
        "results.collected",
        "results.released",
        "results.rejected",
        "results.retrieved",
    }
)


@dataclass(frozen=True)
class AuditEvent:
    seq: int
    timestamp: str
    zone: str
    actor: str
    action: str
    payload_digest: str
    prev_hash: str
    event_hash: str

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "timestamp": self.timestamp,
            "zone": self.zone,
            "actor": self.actor,
            "action": self.action,
            "payload_digest": self.payload_digest,
            "prev_hash": self.prev_hash,
            "event_hash": self.event_hash,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AuditEvent":
        return cls(
            seq=data["seq"],
            timestamp=data["timestamp"],
            zone=data["zone"],
            actor=data["actor"],
            action=data["action"],
            payload_digest=data["payload_digest"],
            prev_hash=data["prev_hash"],
            event_hash=data["event_hash"],
        )

    def serialised(self) -> bytes:
        return canonical_json_bytes(self.to_dict())


def compute_event_hash(
    seq: int, timestamp: str, zone: str, actor: str, action: str,
    payload_digest: str, prev_hash: str,
) -> str:
    material = canonical_json_bytes(
        {
            "seq": seq,
            "timestamp": timestamp,
            "zone": zone,
            "actor": actor,
            "action": action,
            "payload_digest": payload_digest,
            "prev_hash": prev_hash,
        }
    )
    return sha256_hex(material)


@dataclass(frozen=True)
class ChainReport:
    ok: bool
    length: int
    broken_at: int | None = None
    reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "length": self.length,
            "broken_at": self.broken_at,
            "reason": self.reason,
        }


def verify_audit_chain(events: list[AuditEvent]) -> ChainReport:
    """Walk an ordered chain; report ok+length or the first broken link.

    broken_at is the 1-based seq position of the first event whose linkage,
    hash, zone, or ordering fails. An empty list is a vacuously valid chain.
    """
    prev_hash = GENESIS_HASH
    zone = None
    for index, event in enumerate(events, start=1):
        if event.seq != index:
            return ChainReport(False, len(events), index, "seq gap")
        if zone is None:
            zone = event.zone
            if zone not in ZONES:
                return ChainReport(False, len(events), index, "unknown zone")
        elif event.zone != zone:
            return ChainReport(False, len(events), index, "zone mismatch")
        if event.prev_hash != prev_hash:
            return ChainReport(False, len(events), index, "prev_hash mismatch")
        expected = compute_event_hash(
            event.seq, event.timestamp, event.zone, event.actor,
            event.action, event.payload_digest, event.prev_hash,
        )
        if event.event_hash != expected:
            return ChainReport(False, len(events), index, "event_hash mismatch")
        prev_hash = sha256_hex(event.serialised())
    return ChainReport(True, len(events))


class AuditLog:
    """Append-only, file-backed audit chain for one zone.

    Storage is one canonical-JSON event per line; appends are flushed and
    fsynced before return.
    """

    def __init__(self, path: Path | str, zone: str):
        if zone not in ZONES:
            raise ValueError(f"unknown zone {zone!r}")
        self.path = Path(path)
        self.zone = zone
        self._lock = threading.Lock()
        self._seq = 0
        self._tip_hash = GENESIS_HASH
        self._tip_loaded = False
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def _load_tip(self) -> None:
        # deferred to first append: verify() must stay usable on a log whose
        # records no longer parse, and appending to one should fail loudly
        if self._tip_loaded:
            return
        if self.path.exists():
            events = self.read_all()
            if events:
                self._seq = events[-1].seq
                self._tip_hash = sha256_hex(events[-1].serialised())
        self._tip_loaded = True

    def append(self, actor: str, action: str, payload: dict) -> AuditEvent:
        if action not in ACTIONS:
            raise ValueError(f"unknown audit action {action!r}")
        with self._lock:
            self._load_tip()
            seq = self._seq + 1
            timestamp = ts_now()
            payload_digest = digest_payload(payload)
            event_hash = compute_event_hash(
                seq, timestamp, self.zone, actor, action, payload_digest, self._tip_hash
            )
            event = AuditEvent(
                seq=seq,
                timestamp=timestamp,
                zone=self.zone,
                actor=actor,
                action=action,
                payload_digest=payload_digest,
                prev_hash=self._tip_hash,
                event_hash=event_hash,
            )
            line = event.serialised() + b"\n"
            with open(self.path, "ab") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())
            self._seq = seq
            self._tip_hash = sha256_hex(event.serialised())
            return event

    def read_all(self) -> list[AuditEvent]:
        import json

        if not self.path.exists():
            return []
        events = []
        with open(self.path, "rb") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    events.append(AuditEvent.from_dict(json.loads(line)))
        return events

    def verify(self) -> ChainReport:
        """Walk the stored chain; tampering that breaks the line encoding
        itself is reported at that record, never raised past the caller."""
        import json

        if not self.path.exists():
            return verify_audit_chain([])
        with open(self.path, "rb") as fh:
            lines = [line.strip() for line in fh if line.strip()]
        events = []
        for index, line in enumerate(lines, start=1):
            try:
                events.append(AuditEvent.from_dict(json.loads(line)))
            except (ValueError, KeyError, TypeError):
                prefix = verify_audit_chain(events)
                if not prefix.ok:
                    return ChainReport(False, len(lines), prefix.broken_at,
                                       prefix.reason)
                return ChainReport(False, len(lines), index,
                                   "unparseable record")
        return verify_audit_chain(events)
