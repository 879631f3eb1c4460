"""Vetting attestations: code hashing sits in archive; this module covers
key registry, nonce lifecycle, offline signatures, and verification.

Signing happens only in the offline signer CLI on a vetter's own machine; no
zone service ever loads a private key. Zone services hold only 32-byte
public keys and verify detached signatures that are bound to a single-use
nonce, closing the replay window at the moment of verification.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, replace
from pathlib import Path

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .audit import AuditLog
from .canonical import (
    canonical_json_bytes,
    is_hex_digest,
    ts_add_seconds,
    ts_before,
    ts_now,
)
from .errors import BadKey, UnknownVetter

SCHEME = "ed25519"
NONCE_TTL_S = 24 * 60 * 60

# verification rejection reasons (returned, not raised: callers route
# rejected jobs onward rather than crashing)
BAD_SIGNATURE = "BadSignature"
HASH_MISMATCH = "HashMismatch"
NONCE_UNKNOWN = "NonceUnknown"
NONCE_CONSUMED = "NonceConsumed"
NONCE_EXPIRED = "NonceExpired"
NONCE_MISMATCH = "NonceMismatch"
VETTER_DISABLED = "VetterDisabled"


def generate_seed() -> bytes:
    return os.urandom(32)


def public_key_from_seed(seed: bytes) -> bytes:
    return _private_key(seed).public_key().public_bytes_raw()


def _private_key(seed: bytes) -> Ed25519PrivateKey:
    if not isinstance(seed, (bytes, bytearray)) or len(seed) != 32:
        raise BadKey("private key seed must be exactly 32 bytes")
    return Ed25519PrivateKey.from_private_bytes(bytes(seed))


def signing_message(
    job_id: str, vetter_id: str, code_hash: str, nonce_value: str, signed_at: str
) -> bytes:
    return canonical_json_bytes(
        {
            "job_id": job_id,
            "vetter_id": vetter_id,
            "code_hash": code_hash,
            "nonce_value": nonce_value,
            "signed_at": signed_at,
        }
    )


@dataclass(frozen=True)
class VettingSignature:
    job_id: str
    vetter_id: str
    code_hash: str
    nonce_value: str
    signed_at: str
    signature: str  # 64 bytes, hex
    scheme: str = SCHEME

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "vetter_id": self.vetter_id,
            "code_hash": self.code_hash,
            "nonce_value": self.nonce_value,
            "signed_at": self.signed_at,
            "scheme": self.scheme,
            "signature": self.signature,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VettingSignature":
        return cls(
            job_id=data["job_id"],
            vetter_id=data["vetter_id"],
            code_hash=data["code_hash"],
            nonce_value=data["nonce_value"],
            signed_at=data["signed_at"],
            signature=data["signature"],
            scheme=data.get("scheme", SCHEME),
        )

    def file_bytes(self) -> bytes:
        """The detached signature file: one canonical-JSON object."""
        return canonical_json_bytes(self.to_dict())

    @classmethod
    def from_file_bytes(cls, raw: bytes) -> "VettingSignature":
        return cls.from_dict(json.loads(raw))

    def message(self) -> bytes:
        return signing_message(
            self.job_id, self.vetter_id, self.code_hash,
            self.nonce_value, self.signed_at,
        )


def sign_offline(
    job_id: str,
    vetter_id: str,
    code_hash: str,
    nonce_value: str,
    seed: bytes,
    signed_at: str | None = None,
) -> VettingSignature:
    """Produce a detached signature. CLI-side only; deterministic per message."""
    if not is_hex_digest(code_hash):
        raise ValueError("code_hash must be a 64-char lowercase hex digest")
    signed_at = signed_at or ts_now()
    message = signing_message(job_id, vetter_id, code_hash, nonce_value, signed_at)
    signature = _private_key(seed).sign(message)
    return VettingSignature(
        job_id=job_id,
        vetter_id=vetter_id,
        code_hash=code_hash,
        nonce_value=nonce_value,
        signed_at=signed_at,
        signature=signature.hex(),
    )


def raw_verify(public_key: bytes, message: bytes, signature: bytes) -> bool:
    if len(public_key) != 32 or len(signature) != 64:
        return False
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
        return True
    except InvalidSignature:
        return False
    except ValueError:
        return False


@dataclass(frozen=True)
class KeyEntry:
    vetter_id: str
    public_key: str  # 32 bytes, hex
    enabled: bool
    registered_at: str

    def to_dict(self) -> dict:
        return {
            "vetter_id": self.vetter_id,
            "public_key": self.public_key,
            "enabled": self.enabled,
            "registered_at": self.registered_at,
        }


class KeyRegistry:
    """vetter_id -> public key + enabled flag, persisted as canonical JSON.

    Only enabled keys verify. Every mutation lands in the zone audit chain
    when one is attached.
    """

    def __init__(self, path: Path | str, audit: AuditLog | None = None):
        self.path = Path(path)
        self.audit = audit
        self._lock = threading.Lock()
        self._entries: dict[str, KeyEntry] = {}
        if self.path.exists():
            data = json.loads(self.path.read_bytes() or b"{}")
            for vetter_id, entry in data.items():
                self._entries[vetter_id] = KeyEntry(
                    vetter_id=vetter_id,
                    public_key=entry["public_key"],
                    enabled=entry["enabled"],
                    registered_at=entry["registered_at"],
                )

    def _persist(self) -> None:
        body = canonical_json_bytes(
            {vid: e.to_dict() for vid, e in self._entries.items()}
        )
        tmp = self.path.with_suffix(".tmp")
        tmp.parent.mkdir(parents=True, exist_ok=True)
        with open(tmp, "wb") as fh:
            fh.write(body)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self.path)

    def register(self, vetter_id: str, public_key: bytes) -> KeyEntry:
        if len(public_key) != 32:
            raise BadKey("public key must be exactly 32 bytes")
        with self._lock:
            entry = KeyEntry(
                vetter_id=vetter_id,
                public_key=public_key.hex(),
                enabled=True,
                registered_at=ts_now(),
            )
            self._entries[vetter_id] = entry
            self._persist()
        if self.audit:
            self.audit.append(
                "registry", "vetter.registered",
                {"vetter_id": vetter_id, "public_key": entry.public_key},
            )
        return entry

    def set_enabled(self, vetter_id: str, enabled: bool) -> KeyEntry:
        with self._lock:
            if vetter_id not in self._entries:
                raise UnknownVetter(vetter_id)
            entry = replace(self._entries[vetter_id], enabled=enabled)
            self._entries[vetter_id] = entry
            self._persist()
        if self.audit:
            self.audit.append(
                "registry",
                "vetter.enabled" if enabled else "vetter.disabled",
                {"vetter_id": vetter_id},
            )
        return entry

    def entry(self, vetter_id: str) -> KeyEntry | None:
        with self._lock:
            return self._entries.get(vetter_id)

    def entries(self) -> list[KeyEntry]:
        with self._lock:
            return sorted(self._entries.values(), key=lambda e: e.vetter_id)


@dataclass(frozen=True)
class Nonce:
    value: str  # 32 bytes, hex
    issued_to: str
    issued_at: str
    expires_at: str
    state: str  # issued | consumed | expired

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "issued_to": self.issued_to,
            "issued_at": self.issued_at,
            "expires_at": self.expires_at,
            "state": self.state,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Nonce":
        return cls(
            value=data["value"],
            issued_to=data["issued_to"],
            issued_at=data["issued_at"],
            expires_at=data["expires_at"],
            state=data["state"],
        )


class NonceRegistry:
    """Single-use nonce store with an append-only event journal.

    consume() is the linearisation point for replay immunity: it is a
    check-and-set under one lock, so for any nonce exactly one caller ever
    sees success.
    """

    def __init__(self, path: Path | str, audit: AuditLog | None = None):
        self.path = Path(path)
        self.audit = audit
        self._lock = threading.Lock()
        self._nonces: dict[str, Nonce] = {}
        if self.path.exists():
            with open(self.path, "rb") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    event = json.loads(line)
                    self._apply(event)

    def _apply(self, event: dict) -> None:
        kind = event["event"]
        if kind == "issued":
            nonce = Nonce.from_dict(event["nonce"])
            self._nonces[nonce.value] = nonce
        elif kind in ("consumed", "expired"):
            value = event["value"]
            if value in self._nonces:
                self._nonces[value] = replace(
                    self._nonces[value],
                    state="consumed" if kind == "consumed" else "expired",
                )

    def _journal(self, event: dict) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "ab") as fh:
            fh.write(canonical_json_bytes(event) + b"\n")
            fh.flush()
            os.fsync(fh.fileno())

    def issue(
        self,
        vetter_id: str,
        keys: KeyRegistry,
        ttl_s: int = NONCE_TTL_S,
        now: str | None = None,
    ) -> Nonce:
        entry = keys.entry(vetter_id)
        if entry is None or not entry.enabled:
            raise UnknownVetter(vetter_id)
        now = now or ts_now()
        with self._lock:
            while True:
                value = os.urandom(32).hex()
                if value not in self._nonces:
                    break
            nonce = Nonce(
                value=value,
                issued_to=vetter_id,
                issued_at=now,
                expires_at=ts_add_seconds(now, ttl_s),
                state="issued",
            )
            self._nonces[value] = nonce
            self._journal({"event": "issued", "nonce": nonce.to_dict()})
        if self.audit:
            self.audit.append(
                "registry", "nonce.issued",
                {"vetter_id": vetter_id, "nonce_value": value,
                 "expires_at": nonce.expires_at},
            )
        return nonce

    def import_issued(self, nonce: Nonce) -> None:
        """Adopt a nonce issued in another zone (it travels with the job).

        Idempotent for an identical record, so queue redelivery is safe; a
        conflicting record for the same value is refused.
        """
        with self._lock:
            existing = self._nonces.get(nonce.value)
            if existing is not None:
                if (existing.issued_to, existing.issued_at, existing.expires_at) != (
                    nonce.issued_to, nonce.issued_at, nonce.expires_at
                ):
                    raise ValueError(f"conflicting nonce record for {nonce.value}")
                return
            record = replace(nonce, state="issued")
            self._nonces[nonce.value] = record
            self._journal({"event": "issued", "nonce": record.to_dict()})

    def consume(self, value: str, now: str | None = None) -> str | None:
        """Atomically consume. None on success, otherwise a rejection reason."""
        now = now or ts_now()
        with self._lock:
            nonce = self._nonces.get(value)
            if nonce is None:
                return NONCE_UNKNOWN
            if nonce.state == "consumed":
                return NONCE_CONSUMED
            if nonce.state == "expired" or not ts_before(now, nonce.expires_at):
                if nonce.state != "expired":
                    self._nonces[value] = replace(nonce, state="expired")
                    self._journal({"event": "expired", "value": value})
                return NONCE_EXPIRED
            self._nonces[value] = replace(nonce, state="consumed")
            self._journal({"event": "consumed", "value": value})
        if self.audit:
            self.audit.append("registry", "nonce.consumed", {"nonce_value": value})
        return None

    def status(self, value: str) -> Nonce | None:
        with self._lock:
            return self._nonces.get(value)

    def count(self) -> int:
        with self._lock:
            return len(self._nonces)


@dataclass(frozen=True)
class VerificationResult:
    accepted: bool
    reason: str | None = None


def verify_signature(
    sig: VettingSignature,
    bundle_hash: str,
    keys: KeyRegistry,
    nonces: NonceRegistry,
    now: str | None = None,
) -> VerificationResult:
    """Full acceptance check for one detached signature.

    Accept requires, in order: enabled vetter key, valid signature bytes,
    code hash equal to the bundle's recomputed hash, and a live nonce that
    was issued to the signing vetter. The nonce is consumed only when
    everything else already passed, so a rejected presentation does not
    burn it.
    """
    entry = keys.entry(sig.vetter_id)
    if entry is None or not entry.enabled:
        return VerificationResult(False, VETTER_DISABLED)
    if sig.scheme != SCHEME:
        return VerificationResult(False, BAD_SIGNATURE)
    try:
        signature_bytes = bytes.fromhex(sig.signature)
        public_key = bytes.fromhex(entry.public_key)
    except ValueError:
        return VerificationResult(False, BAD_SIGNATURE)
    if not raw_verify(public_key, sig.message(), signature_bytes):
        return VerificationResult(False, BAD_SIGNATURE)
    if sig.code_hash != bundle_hash:
        return VerificationResult(False, HASH_MISMATCH)
    record = nonces.status(sig.nonce_value)
    # a nonce is usable only by the vetter it was issued to; issued_to is
    # immutable, so checking before the atomic consume is race-free
    if record is not None and record.issued_to != sig.vetter_id:
        return VerificationResult(False, NONCE_MISMATCH)
    reason = nonces.consume(sig.nonce_value, now=now)
    if reason is not None:
        return VerificationResult(False, reason)
    return VerificationResult(True)
