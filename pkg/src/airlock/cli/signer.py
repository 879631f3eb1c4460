"""Offline vetter signer: keygen, detached signing, standalone verification.

Runs on the vetter's own machine with no connectivity. This module makes no
network calls and imports no transport library; the nonce and code hash
arrive by hand (copied from the vetting console) and the signature file
travels back the same way.
"""

from __future__ import annotations

import argparse
import json
import os
import stat
import sys
from pathlib import Path

from ..attestation import (
    VettingSignature,
    generate_seed,
    public_key_from_seed,
    raw_verify,
    sign_offline,
)
from ..canonical import is_hex_digest
from ..errors import BadKey
from . import EXIT_OK, EXIT_VALIDATION


def _read_hex_file(path: Path, expected_bytes: int, label: str) -> bytes:
    try:
        raw = bytes.fromhex(path.read_text().strip())
    except (OSError, ValueError) as exc:
        raise ValueError(f"{label} file {path} is not readable hex: {exc}")
    if len(raw) != expected_bytes:
        raise ValueError(f"{label} must be {expected_bytes} bytes, "
                         f"got {len(raw)}")
    return raw


def _require_private_mode(path: Path) -> None:
    mode = stat.S_IMODE(path.stat().st_mode)
    if mode & 0o077:
        raise ValueError(
            f"refusing to use {path}: mode {mode:03o} is readable by others "
            f"(chmod 600 it first)"
        )


def cmd_keygen(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = generate_seed()
    seed_file = out_dir / f"{args.vetter_id}.seed"
    pub_file = out_dir / f"{args.vetter_id}.pub"
    if seed_file.exists() or pub_file.exists():
        print(f"error: key files for {args.vetter_id!r} already exist in "
              f"{out_dir}", file=sys.stderr)
        return EXIT_VALIDATION
    fd = os.open(seed_file, os.O_WRONLY | os.O_CREAT | os.O_EXCL, 0o600)
    with os.fdopen(fd, "w") as fh:
        fh.write(seed.hex() + "\n")
    pub_file.write_text(public_key_from_seed(seed).hex() + "\n")
    print(json.dumps({
        "vetter_id": args.vetter_id,
        "seed_file": str(seed_file),
        "public_key_file": str(pub_file),
        "public_key": public_key_from_seed(seed).hex(),
    }, indent=2))
    return EXIT_OK


def cmd_sign(args) -> int:
    key_path = Path(args.key)
    _require_private_mode(key_path)
    seed = _read_hex_file(key_path, 32, "seed")
    if not is_hex_digest(args.hash):
        raise ValueError("--hash must be a 64-char lowercase hex digest")
    vetter_id = args.vetter_id or key_path.stem
    sig = sign_offline(args.job_id, vetter_id, args.hash, args.nonce, seed)
    out = Path(args.out or f"{args.job_id}.sig")
    out.write_bytes(sig.file_bytes())
    print(json.dumps({
        "signature_file": str(out),
        "vetter_id": vetter_id,
        "job_id": args.job_id,
        "code_hash": args.hash,
    }, indent=2))
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        sig = VettingSignature.from_file_bytes(Path(args.sig).read_bytes())
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"reject: malformed signature file ({exc})", file=sys.stderr)
        return EXIT_VALIDATION
    public_key = _read_hex_file(Path(args.pubkey), 32, "public key")
    try:
        signature = bytes.fromhex(sig.signature)
    except ValueError:
        signature = b""
    if sig.scheme == "ed25519" and raw_verify(
        public_key, sig.message(), signature
    ):
        print(f"accept: {sig.vetter_id} over job {sig.job_id} "
              f"hash {sig.code_hash}")
        return EXIT_OK
    print("reject: signature does not verify over the file's fields",
          file=sys.stderr)
    return EXIT_VALIDATION


def main(argv=None) -> int:
    p = argparse.ArgumentParser(
        prog="airlock-signer",
        description="Offline approval signing for vetted job bundles",
    )
    sub = p.add_subparsers(dest="cmd", required=True)

    pk = sub.add_parser("keygen", help="generate a vetter signing keypair")
    pk.add_argument("--vetter-id", required=True)
    pk.add_argument("--out-dir", default=".")
    pk.set_defaults(fn=cmd_keygen)

    ps = sub.add_parser("sign", help="sign a code hash with a one-time nonce")
    ps.add_argument("--hash", required=True, help="bundle code hash (hex)")
    ps.add_argument("--nonce", required=True, help="nonce value from console")
    ps.add_argument("--job-id", required=True)
    ps.add_argument("--key", required=True, help="seed file from keygen")
    ps.add_argument("--vetter-id", help="defaults to the key file stem")
    ps.add_argument("--out", help="signature file (default <job-id>.sig)")
    ps.set_defaults(fn=cmd_sign)

    pv = sub.add_parser("verify", help="check a detached signature file")
    pv.add_argument("--sig", required=True)
    pv.add_argument("--pubkey", required=True, help="public key file (hex)")
    pv.set_defaults(fn=cmd_verify)

    args = p.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, BadKey, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
