"""Restricted zone: encrypted dataset storage and one-time access credentials.

Datasets rest as AEAD-sealed blobs that only a boot-time passphrase can open.
The zone's entire inbound surface is the mount-request queue plus the local
admin console; the only plaintext egress is redeem(), whose handle the secure
zone holds as a local channel scoped to one credential.

Encrypted blob format:
    magic "ALV1" (4 bytes)
    header length   u32 big-endian
    header          canonical JSON: chunk_size, chunks, dataset_id, version,
                    kdf {name, memory_kib, iterations, lanes, salt},
                    keycheck {nonce, ct}, nonce_prefix, plaintext_size
    per chunk:      u32 big-endian ciphertext length,
                    12-byte nonce (8-byte random prefix + 4-byte big-endian
                    chunk counter), ciphertext with 16-byte tag appended

Every chunk is sealed with the header digest as associated data, so a chunk
cannot be transplanted, reordered, or replayed across blobs.
"""

from __future__ import annotations

import errno
import json
import os
import struct
import threading
from dataclasses import dataclass, replace
from pathlib import Path

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.argon2 import Argon2id

from .attestation import VettingSignature, raw_verify
from .audit import AuditLog
from .canonical import (
    canonical_json_bytes,
    sha256_hex,
    ts_add_seconds,
    ts_before,
    ts_now,
)
from .errors import (
    AlreadyConsumed,
    BadPassphrase,
    DuplicateVersion,
    Expired,
    Revoked,
    StorageFull,
    UnknownCredential,
    UnknownToken,
    VaultLocked,
)

BLOB_MAGIC = b"ALV1"
KEYCHECK_PLAINTEXT = b"ALV1\x00keycheck"
CHUNK_SIZE = 1024 * 1024
GRACE_S = 300

# mount denial reasons (returned, audited; the requesting job fails safe)
DENY_UNKNOWN_DATASET = "UnknownDataset"
DENY_BAD_SIGNATURE = "BadSignature"
DENY_VETTER_DISABLED = "VetterDisabled"
DENY_VAULT_LOCKED = "VaultLocked"
DENY_DUPLICATE_REQUEST = "DuplicateRequest"


@dataclass(frozen=True)
class KdfParams:
    memory_kib: int = 64 * 1024
    iterations: int = 3
    lanes: int = 4

    def to_dict(self) -> dict:
        return {
            "name": "argon2id",
            "memory_kib": self.memory_kib,
            "iterations": self.iterations,
            "lanes": self.lanes,
        }


def derive_key(passphrase: str, salt: bytes, params: KdfParams) -> bytes:
    return Argon2id(
        salt=salt,
        length=32,
        iterations=params.iterations,
        lanes=params.lanes,
        memory_cost=params.memory_kib,
    ).derive(passphrase.encode("utf-8"))


@dataclass(frozen=True)
class DatasetManifest:
    dataset_id: str
    version: int
    blob_path: str  # relative to the vault root
    plaintext_digest: str
    byte_size: int
    loaded_at: str
    loaded_by: str

    def to_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "version": self.version,
            "blob_path": self.blob_path,
            "plaintext_digest": self.plaintext_digest,
            "byte_size": self.byte_size,
            "loaded_at": self.loaded_at,
            "loaded_by": self.loaded_by,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetManifest":
        return cls(**{k: data[k] for k in (
            "dataset_id", "version", "blob_path", "plaintext_digest",
            "byte_size", "loaded_at", "loaded_by",
        )})


@dataclass(frozen=True)
class MountRequest:
    """Secure-zone request for dataset access, checked inside this zone.

    max_runtime_s rides along so the credential TTL can cover the job's
    whole execution window plus grace.
    """

    job_id: str
    dataset_id: str
    code_hash: str
    vetting_signature: VettingSignature
    requested_at: str
    max_runtime_s: int

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "dataset_id": self.dataset_id,
            "code_hash": self.code_hash,
            "vetting_signature": self.vetting_signature.to_dict(),
            "requested_at": self.requested_at,
            "max_runtime_s": self.max_runtime_s,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MountRequest":
        return cls(
            job_id=data["job_id"],
            dataset_id=data["dataset_id"],
            code_hash=data["code_hash"],
            vetting_signature=VettingSignature.from_dict(data["vetting_signature"]),
            requested_at=data["requested_at"],
            max_runtime_s=data["max_runtime_s"],
        )


@dataclass(frozen=True)
class OneTimeCredential:
    credential_id: str
    token: str  # 32 bytes, hex
    job_id: str
    dataset_id: str
    issued_at: str
    expires_at: str
    state: str  # unused | consumed | revoked | expired

    def to_dict(self) -> dict:
        return {
            "credential_id": self.credential_id,
            "token": self.token,
            "job_id": self.job_id,
            "dataset_id": self.dataset_id,
            "issued_at": self.issued_at,
            "expires_at": self.expires_at,
            "state": self.state,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OneTimeCredential":
        return cls(**{k: data[k] for k in (
            "credential_id", "token", "job_id", "dataset_id",
            "issued_at", "expires_at", "state",
        )})

    def public_view(self) -> dict:
        """What leaves the vault on the credential queue."""
        return {
            "credential_id": self.credential_id,
            "token": self.token,
            "job_id": self.job_id,
            "dataset_id": self.dataset_id,
            "expires_at": self.expires_at,
        }


@dataclass(frozen=True)
class UnlockReport:
    serviceable: tuple[str, ...]
    quarantined: tuple[str, ...]


def _seal_blob(
    content: bytes,
    passphrase: str,
    dataset_id: str,
    version: int,
    params: KdfParams,
    chunk_size: int = CHUNK_SIZE,
) -> bytes:
    salt = os.urandom(16)
    key = derive_key(passphrase, salt, params)
    aead = AESGCM(key)
    kc_nonce = os.urandom(12)
    keycheck_ct = aead.encrypt(kc_nonce, KEYCHECK_PLAINTEXT, None)
    nonce_prefix = os.urandom(8)
    chunks = [content[i:i + chunk_size] for i in range(0, len(content), chunk_size)]
    header = {
        "chunk_size": chunk_size,
        "chunks": len(chunks),
        "dataset_id": dataset_id,
        "version": version,
        "kdf": {**params.to_dict(), "salt": salt.hex()},
        "keycheck": {"nonce": kc_nonce.hex(), "ct": keycheck_ct.hex()},
        "nonce_prefix": nonce_prefix.hex(),
        "plaintext_size": len(content),
    }
    header_bytes = canonical_json_bytes(header)
    aad = bytes.fromhex(sha256_hex(header_bytes))
    out = [BLOB_MAGIC, struct.pack(">I", len(header_bytes)), header_bytes]
    for counter, chunk in enumerate(chunks):
        nonce = nonce_prefix + struct.pack(">I", counter)
        ct = aead.encrypt(nonce, chunk, aad)
        out.append(struct.pack(">I", len(ct)))
        out.append(nonce)
        out.append(ct)
    return b"".join(out)


class BlobReader:
    """Chunk-wise decryptor over one sealed blob file."""

    def __init__(self, path: Path, passphrase: str | None = None,
                 key: bytes | None = None):
        self.path = path
        with open(path, "rb") as fh:
            if fh.read(4) != BLOB_MAGIC:
                raise ValueError(f"{path.name}: bad blob magic")
            (header_len,) = struct.unpack(">I", fh.read(4))
            header_bytes = fh.read(header_len)
            if len(header_bytes) != header_len:
                raise ValueError(f"{path.name}: truncated header")
            self.header = json.loads(header_bytes)
            self._chunk_start = fh.tell()
        self._aad = bytes.fromhex(sha256_hex(canonical_json_bytes(self.header)))
        if key is None:
            if passphrase is None:
                raise ValueError("need a passphrase or a derived key")
            kdf = self.header["kdf"]
            key = derive_key(
                passphrase,
                bytes.fromhex(kdf["salt"]),
                KdfParams(kdf["memory_kib"], kdf["iterations"], kdf["lanes"]),
            )
        self.key = key
        aead = AESGCM(self.key)
        kc = self.header["keycheck"]
        try:
            probe = aead.decrypt(
                bytes.fromhex(kc["nonce"]), bytes.fromhex(kc["ct"]), None
            )
        except InvalidTag as exc:
            raise BadPassphrase(f"{path.name}: key check failed") from exc
        if probe != KEYCHECK_PLAINTEXT:
            raise BadPassphrase(f"{path.name}: key check failed")

    def chunks(self):
        """Yield plaintext chunks; InvalidTag propagates on corruption."""
        aead = AESGCM(self.key)
        prefix = bytes.fromhex(self.header["nonce_prefix"])
        expected_chunks = self.header["chunks"]
        with open(self.path, "rb") as fh:
            fh.seek(self._chunk_start)
            for counter in range(expected_chunks):
                frame = fh.read(4)
                if len(frame) != 4:
                    raise InvalidTag(f"{self.path.name}: missing chunk {counter}")
                (ct_len,) = struct.unpack(">I", frame)
                nonce = fh.read(12)
                ct = fh.read(ct_len)
                if len(nonce) != 12 or len(ct) != ct_len:
                    raise InvalidTag(f"{self.path.name}: truncated chunk {counter}")
                if nonce != prefix + struct.pack(">I", counter):
                    raise InvalidTag(f"{self.path.name}: chunk {counter} nonce out of sequence")
                yield aead.decrypt(nonce, ct, self._aad)
            if fh.read(1):
                raise InvalidTag(f"{self.path.name}: trailing bytes after final chunk")

    def digest(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for chunk in self.chunks():
            h.update(chunk)
        return h.hexdigest()


class DatasetStream:
    """Read-only plaintext stream scoped to one redeemed credential.

    Revocation takes effect between chunk reads: once revoked, the next
    read raises instead of returning data.
    """

    def __init__(self, reader: BlobReader, credential_id: str,
                 revoked: threading.Event, manifest: DatasetManifest):
        self._reader = reader
        self.credential_id = credential_id
        self._revoked = revoked
        self.manifest = manifest

    def chunks(self):
        for chunk in self._reader.chunks():
            if self._revoked.is_set():
                raise Revoked(f"credential {self.credential_id} was revoked mid-stream")
            yield chunk

    def read_all(self) -> bytes:
        return b"".join(self.chunks())


class Vault:
    """The restricted-zone service object.

    All state lives under one root directory: a passphrase sentinel,
    dataset manifests, sealed blobs, and the credential journal.
    """

    def __init__(self, root: Path | str, audit: AuditLog,
                 kdf: KdfParams | None = None, grace_s: int = GRACE_S):
        self.root = Path(root)
        self.audit = audit
        self.kdf = kdf or KdfParams()
        self.grace_s = grace_s
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "blobs").mkdir(exist_ok=True)
        self._lock = threading.Lock()
        self._passphrase: str | None = None
        self._blob_keys: dict[str, bytes] = {}  # manifest key -> derived key
        self._serviceable: set[str] = set()
        self._quarantined: set[str] = set()
        self._credentials: dict[str, OneTimeCredential] = {}  # by credential_id
        self._by_token: dict[str, str] = {}
        self._by_pair: dict[tuple[str, str], str] = {}
        self._revocation_flags: dict[str, threading.Event] = {}
        self._load_credentials()

    # -- setup and unlock --------------------------------------------------

    @property
    def unlocked(self) -> bool:
        return self._passphrase is not None

    def initialise(self, passphrase: str) -> None:
        """Create the vault sentinel. Refuses to overwrite an existing vault."""
        sentinel = self.root / "vault.json"
        if sentinel.exists():
            raise ValueError("vault already initialised")
        salt = os.urandom(16)
        key = derive_key(passphrase, salt, self.kdf)
        nonce = os.urandom(12)
        ct = AESGCM(key).encrypt(nonce, KEYCHECK_PLAINTEXT, None)
        body = canonical_json_bytes(
            {
                "kdf": {**self.kdf.to_dict(), "salt": salt.hex()},
                "keycheck": {"nonce": nonce.hex(), "ct": ct.hex()},
                "version": 1,
            }
        )
        tmp = self.root / "vault.json.tmp"
        with open(tmp, "wb") as fh:
            fh.write(body)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, sentinel)

    def unlock(self, passphrase: str) -> UnlockReport:
        """Check the passphrase, then verify every dataset end to end.

        A dataset whose blob fails authentication or whose plaintext digest
        disagrees with its manifest is quarantined, not served.
        """
        with self._lock:
            if self.unlocked:
                raise ValueError("vault already unlocked")
            sentinel = self.root / "vault.json"
            if not sentinel.exists():
                raise ValueError("vault not initialised")
            meta = json.loads(sentinel.read_bytes())
            kdf = meta["kdf"]
            key = derive_key(
                passphrase,
                bytes.fromhex(kdf["salt"]),
                KdfParams(kdf["memory_kib"], kdf["iterations"], kdf["lanes"]),
            )
            kc = meta["keycheck"]
            try:
                probe = AESGCM(key).decrypt(
                    bytes.fromhex(kc["nonce"]), bytes.fromhex(kc["ct"]), None
                )
                if probe != KEYCHECK_PLAINTEXT:
                    raise InvalidTag("sentinel mismatch")
            except InvalidTag:
                self.audit.append("vault", "vault.unlock_failed", {})
                raise BadPassphrase("vault passphrase rejected") from None

            serviceable, quarantined = [], []
            for manifest in self._manifests_unlocked():
                mkey = f"{manifest.dataset_id}:{manifest.version}"
                blob = self.root / manifest.blob_path
                try:
                    reader = BlobReader(blob, passphrase=passphrase)
                    if reader.digest() != manifest.plaintext_digest:
                        raise InvalidTag("plaintext digest mismatch")
                except (InvalidTag, BadPassphrase, ValueError, OSError) as exc:
                    quarantined.append(manifest.dataset_id)
                    self._quarantined.add(manifest.dataset_id)
                    self.audit.append(
                        "vault", "dataset.quarantined",
                        {"dataset_id": manifest.dataset_id,
                         "version": manifest.version, "reason": str(exc)},
                    )
                    continue
                self._blob_keys[mkey] = reader.key
                serviceable.append(manifest.dataset_id)
                self._serviceable.add(manifest.dataset_id)
            self._passphrase = passphrase
            self.audit.append(
                "vault", "vault.unlocked",
                {"serviceable": sorted(serviceable),
                 "quarantined": sorted(quarantined)},
            )
            return UnlockReport(tuple(serviceable), tuple(quarantined))

    def lock(self) -> None:
        with self._lock:
            self._passphrase = None
            self._blob_keys.clear()
            self._serviceable.clear()
            self._quarantined.clear()

    # -- dataset management ------------------------------------------------

    def _manifests_unlocked(self) -> list[DatasetManifest]:
        path = self.root / "datasets.json"
        if not path.exists():
            return []
        return [DatasetManifest.from_dict(d) for d in json.loads(path.read_bytes())]

    def manifests(self) -> list[DatasetManifest]:
        with self._lock:
            return self._manifests_unlocked()

    def load_dataset(
        self, content: bytes, dataset_id: str, version: int, loaded_by: str
    ) -> DatasetManifest:
        """Seal and register a dataset. Local admin console path only."""
        with self._lock:
            if not self.unlocked:
                raise VaultLocked("unlock the vault before loading datasets")
            existing = self._manifests_unlocked()
            if any(
                m.dataset_id == dataset_id and m.version == version
                for m in existing
            ):
                raise DuplicateVersion(f"{dataset_id} v{version} already loaded")
            blob_rel = f"blobs/{dataset_id}-v{version}.alv"
            blob = _seal_blob(
                content, self._passphrase, dataset_id, version, self.kdf
            )
            manifest = DatasetManifest(
                dataset_id=dataset_id,
                version=version,
                blob_path=blob_rel,
                plaintext_digest=sha256_hex(content),
                byte_size=len(content),
                loaded_at=ts_now(),
                loaded_by=loaded_by,
            )
            tmp = self.root / (blob_rel + ".tmp")
            try:
                with open(tmp, "wb") as fh:
                    fh.write(blob)
                    fh.flush()
                    os.fsync(fh.fileno())
                os.replace(tmp, self.root / blob_rel)
            except OSError as exc:
                if exc.errno == errno.ENOSPC:
                    raise StorageFull("vault storage full") from exc
                raise
            records = [m.to_dict() for m in existing] + [manifest.to_dict()]
            mtmp = self.root / "datasets.json.tmp"
            with open(mtmp, "wb") as fh:
                fh.write(canonical_json_bytes(records))
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(mtmp, self.root / "datasets.json")
            self._blob_keys.pop(f"{dataset_id}:{version}", None)
            reader = BlobReader(self.root / blob_rel, passphrase=self._passphrase)
            self._blob_keys[f"{dataset_id}:{version}"] = reader.key
            self._serviceable.add(dataset_id)
        self.audit.append(
            "vault", "dataset.loaded",
            {"dataset_id": dataset_id, "version": version,
             "byte_size": len(content),
             "plaintext_digest": manifest.plaintext_digest,
             "loaded_by": loaded_by},
        )
        return manifest

    def _latest_manifest(self, dataset_id: str) -> DatasetManifest | None:
        candidates = [
            m for m in self._manifests_unlocked() if m.dataset_id == dataset_id
        ]
        if not candidates:
            return None
        return max(candidates, key=lambda m: m.version)

    # -- credentials ---------------------------------------------------------

    def _load_credentials(self) -> None:
        path = self.root / "credentials.jsonl"
        if not path.exists():
            return
        with open(path, "rb") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                event = json.loads(line)
                if event["event"] == "issued":
                    cred = OneTimeCredential.from_dict(event["credential"])
                    self._credentials[cred.credential_id] = cred
                    self._by_token[cred.token] = cred.credential_id
                    self._by_pair[(cred.job_id, cred.dataset_id)] = cred.credential_id
                else:
                    cid = event["credential_id"]
                    if cid in self._credentials:
                        self._credentials[cid] = replace(
                            self._credentials[cid], state=event["event"]
                        )
        for cred in self._credentials.values():
            flag = threading.Event()
            if cred.state == "revoked":
                flag.set()
            self._revocation_flags[cred.credential_id] = flag

    def _journal_credential(self, event: dict) -> None:
        path = self.root / "credentials.jsonl"
        with open(path, "ab") as fh:
            fh.write(canonical_json_bytes(event) + b"\n")
            fh.flush()
            os.fsync(fh.fileno())

    def handle_mount_request(
        self, req: MountRequest, keys, now: str | None = None
    ) -> tuple[OneTimeCredential | None, str | None]:
        """Issue a one-time credential, or return an audited denial reason.

        The signature is re-verified here, inside the restricted zone, against
        the same public key registry contents the secure zone uses; the nonce
        single-use check is not repeated (the registry lives upstream), so
        replay is bounded instead by at-most-one credential per
        (job_id, dataset_id).
        """
        now = now or ts_now()
        self.audit.append(
            "vault", "mount.requested",
            {"job_id": req.job_id, "dataset_id": req.dataset_id,
             "code_hash": req.code_hash},
        )
        denial = self._check_mount(req, keys)
        credential = None
        if denial is None:
            with self._lock:
                pair = (req.job_id, req.dataset_id)
                if pair in self._by_pair:
                    denial = DENY_DUPLICATE_REQUEST
                else:
                    credential = OneTimeCredential(
                        credential_id=f"cred-{os.urandom(8).hex()}",
                        token=os.urandom(32).hex(),
                        job_id=req.job_id,
                        dataset_id=req.dataset_id,
                        issued_at=now,
                        expires_at=ts_add_seconds(
                            now, req.max_runtime_s + self.grace_s
                        ),
                        state="unused",
                    )
                    self._credentials[credential.credential_id] = credential
                    self._by_token[credential.token] = credential.credential_id
                    self._by_pair[pair] = credential.credential_id
                    self._revocation_flags[credential.credential_id] = (
                        threading.Event()
                    )
                    self._journal_credential(
                        {"event": "issued", "credential": credential.to_dict()}
                    )
        if denial is not None:
            self.audit.append(
                "vault", "mount.denied",
                {"job_id": req.job_id, "dataset_id": req.dataset_id,
                 "reason": denial},
            )
            return None, denial
        self.audit.append(
            "vault", "mount.granted",
            {"job_id": req.job_id, "dataset_id": req.dataset_id,
             "credential_id": credential.credential_id,
             "expires_at": credential.expires_at},
        )
        self.audit.append(
            "vault", "credential.issued",
            {"credential_id": credential.credential_id, "job_id": req.job_id,
             "dataset_id": req.dataset_id},
        )
        return credential, None

    def _check_mount(self, req: MountRequest, keys) -> str | None:
        if not self.unlocked:
            return DENY_VAULT_LOCKED
        if (
            req.dataset_id in self._quarantined
            or self._latest_manifest(req.dataset_id) is None
        ):
            return DENY_UNKNOWN_DATASET
        sig = req.vetting_signature
        if sig.code_hash != req.code_hash:
            return DENY_BAD_SIGNATURE
        entry = keys.entry(sig.vetter_id)
        if entry is None or not entry.enabled:
            return DENY_VETTER_DISABLED
        try:
            ok = raw_verify(
                bytes.fromhex(entry.public_key),
                sig.message(),
                bytes.fromhex(sig.signature),
            )
        except ValueError:
            ok = False
        if not ok:
            return DENY_BAD_SIGNATURE
        return None

    def redeem(self, token: str, now: str | None = None) -> DatasetStream:
        """Atomic single-use redemption: returns the plaintext stream once."""
        now = now or ts_now()
        with self._lock:
            if not self.unlocked:
                raise VaultLocked("vault is locked")
            cid = self._by_token.get(token)
            if cid is None:
                self.audit.append(
                    "vault", "credential.rejected",
                    {"reason": "UnknownToken"},
                )
                raise UnknownToken("no such credential token")
            cred = self._credentials[cid]
            if cred.state == "revoked":
                self._reject(cid, "Revoked")
                raise Revoked(f"credential {cid} is revoked")
            if cred.state == "consumed":
                self._reject(cid, "AlreadyConsumed")
                raise AlreadyConsumed(f"credential {cid} already redeemed")
            if cred.state == "expired" or not ts_before(now, cred.expires_at):
                if cred.state != "expired":
                    self._credentials[cid] = replace(cred, state="expired")
                    self._journal_credential(
                        {"event": "expired", "credential_id": cid}
                    )
                self._reject(cid, "Expired")
                raise Expired(f"credential {cid} expired at {cred.expires_at}")
            manifest = self._latest_manifest(cred.dataset_id)
            if manifest is None or cred.dataset_id in self._quarantined:
                self._reject(cid, "UnknownDataset")
                raise UnknownToken(f"dataset {cred.dataset_id} not serviceable")
            self._credentials[cid] = replace(cred, state="consumed")
            self._journal_credential({"event": "consumed", "credential_id": cid})
            key = self._blob_keys[f"{manifest.dataset_id}:{manifest.version}"]
            flag = self._revocation_flags[cid]
        reader = BlobReader(self.root / manifest.blob_path, key=key)
        self.audit.append(
            "vault", "credential.redeemed",
            {"credential_id": cid, "job_id": cred.job_id,
             "dataset_id": cred.dataset_id},
        )
        return DatasetStream(reader, cid, flag, manifest)

    def _reject(self, credential_id: str, reason: str) -> None:
        self.audit.append(
            "vault", "credential.rejected",
            {"credential_id": credential_id, "reason": reason},
        )

    def revoke(self, credential_id: str) -> None:
        """Terminal revocation; idempotent. Open streams stop at next read."""
        with self._lock:
            cred = self._credentials.get(credential_id)
            if cred is None:
                raise UnknownCredential(credential_id)
            self._revocation_flags[credential_id].set()
            if cred.state in ("revoked", "expired"):
                return
            self._credentials[credential_id] = replace(cred, state="revoked")
            self._journal_credential(
                {"event": "revoked", "credential_id": credential_id}
            )
        self.audit.append(
            "vault", "credential.revoked",
            {"credential_id": credential_id, "job_id": cred.job_id},
        )

    def credential_for(self, job_id: str, dataset_id: str) -> OneTimeCredential | None:
        with self._lock:
            cid = self._by_pair.get((job_id, dataset_id))
            return self._credentials.get(cid) if cid else None

    def credential(self, credential_id: str) -> OneTimeCredential | None:
        with self._lock:
            return self._credentials.get(credential_id)
