"""Zone admin console: dataset loading, vetter registry, audit and queue checks.

Runs locally on the zone host against the site directory; there is no remote
admin API by design. The vault passphrase is read from a file or prompt,
never from an argument (argv is visible to every process on the host).
"""

from __future__ import annotations

import argparse
import getpass
import json
import os
import sys
from pathlib import Path

from ..attestation import KeyRegistry
from ..audit import AuditLog
from ..deployment import QUEUE_SPECS, build_broker
from ..errors import (
    BadKey,
    BadPassphrase,
    CorruptInterior,
    DuplicateVersion,
    QueueFrozen,
    UnknownQueue,
)
from ..vault import Vault
from . import EXIT_AUTH, EXIT_OK, EXIT_VALIDATION

ZONES = ("public", "secure", "restricted")


def _passphrase(args) -> str:
    if args.passphrase_file:
        return Path(args.passphrase_file).read_text().strip()
    env = os.environ.get("AIRLOCK_VAULT_PASSPHRASE")
    if env:
        return env
    return getpass.getpass("vault passphrase: ")


def _vault(site: Path) -> Vault:
    audit = AuditLog(site / "restricted" / "audit.log", "restricted")
    return Vault(site / "restricted" / "vault", audit)


def cmd_load_dataset(args) -> int:
    site = Path(args.site)
    vault = _vault(site)
    passphrase = _passphrase(args)
    if args.init:
        vault.initialise(passphrase)
    report = vault.unlock(passphrase)
    content = Path(args.file).read_bytes()
    manifest = vault.load_dataset(
        content, args.dataset_id, args.version,
        loaded_by=args.loaded_by,
    )
    print(json.dumps({
        "dataset_id": manifest.dataset_id,
        "version": manifest.version,
        "byte_size": manifest.byte_size,
        "plaintext_digest": manifest.plaintext_digest,
        "serviceable": sorted({*report.serviceable, manifest.dataset_id}),
    }, indent=2))
    return EXIT_OK


def cmd_register_vetter(args) -> int:
    site = Path(args.site)
    audit = AuditLog(site / "public" / "audit.log", "public")
    keys = KeyRegistry(site / "public" / "keys.json", audit=audit)
    public_key = bytes.fromhex(Path(args.pubkey_file).read_text().strip())
    entry = keys.register(args.vetter_id, public_key)
    print(json.dumps({
        "vetter_id": entry.vetter_id,
        "public_key": entry.public_key,
        "enabled": entry.enabled,
    }, indent=2))
    return EXIT_OK


def cmd_verify_audit(args) -> int:
    site = Path(args.site)
    report = AuditLog(site / args.zone / "audit.log", args.zone).verify()
    if report.ok:
        print(f"chain ok, {report.length} events")
        return EXIT_OK
    print(f"chain broken at event {report.broken_at}: {report.reason}",
          file=sys.stderr)
    return EXIT_VALIDATION


def cmd_queue_inspect(args) -> int:
    broker = build_broker(Path(args.site) / "queues")
    names = [args.queue] if args.queue else sorted(QUEUE_SPECS)
    status = EXIT_OK
    reports = {}
    for name in names:
        if args.recover:
            try:
                reports[name] = {"recovery": broker.recover(name).to_dict(),
                                 **broker.inspect(name)}
                continue
            except CorruptInterior as exc:
                reports[name] = {"error": str(exc)}
                status = EXIT_VALIDATION
                continue
        reports[name] = broker.inspect(name)
        if reports[name].get("frozen"):
            status = EXIT_VALIDATION
    print(json.dumps(reports, indent=2))
    return status


def main(argv=None) -> int:
    p = argparse.ArgumentParser(
        prog="airlock-admin",
        description="Local console for zone maintenance and integrity checks",
    )
    sub = p.add_subparsers(dest="cmd", required=True)

    pl = sub.add_parser("load-dataset", help="seal a dataset into the vault")
    pl.add_argument("--site", required=True, help="installation root")
    pl.add_argument("--dataset-id", required=True)
    pl.add_argument("--version", type=int, required=True)
    pl.add_argument("--file", required=True, help="plaintext dataset file")
    pl.add_argument("--passphrase-file",
                    help="file holding the vault passphrase (else prompt)")
    pl.add_argument("--init", action="store_true",
                    help="initialise a brand-new vault first")
    pl.add_argument("--loaded-by", default=getpass.getuser())
    pl.set_defaults(fn=cmd_load_dataset)

    pr = sub.add_parser("register-vetter", help="add a vetter public key")
    pr.add_argument("--site", required=True)
    pr.add_argument("--vetter-id", required=True)
    pr.add_argument("--pubkey-file", required=True)
    pr.set_defaults(fn=cmd_register_vetter)

    pa = sub.add_parser("verify-audit", help="walk one zone's hash chain")
    pa.add_argument("--site", required=True)
    pa.add_argument("--zone", required=True, choices=ZONES)
    pa.set_defaults(fn=cmd_verify_audit)

    pq = sub.add_parser("queue-inspect", help="report queue state")
    pq.add_argument("--site", required=True)
    pq.add_argument("--queue", choices=sorted(QUEUE_SPECS))
    pq.add_argument("--recover", action="store_true",
                    help="scan and repair torn tails first (quiesced queues)")
    pq.set_defaults(fn=cmd_queue_inspect)

    args = p.parse_args(argv)
    try:
        return args.fn(args)
    except BadPassphrase as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_AUTH
    except (ValueError, OSError, BadKey, DuplicateVersion, UnknownQueue,
            QueueFrozen) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
