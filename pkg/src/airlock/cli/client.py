"""Consumer client: pack and submit job bundles, poll, fetch released results.

Talks only to the gateway HTTP API. The bearer token is held in memory for
the duration of one command and is never echoed; result archives are written
to disk verbatim, never printed.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import httpx

from ..archive import MANIFEST_NAME, build_zip, canonical_hash_of_zip
from . import EXIT_AUTH, EXIT_OK, EXIT_REMOTE, EXIT_TRANSPORT, EXIT_VALIDATION

SUCCESS_STATES = {"Released", "Retrieved"}
REJECTION_STATES = {"RejectedInput", "RejectedOutput"}


@dataclass
class ClientConfig:
    gateway_url: str
    bearer_token: str
    default_runtime_ref: str = "python3-batch"
    polling_interval_s: float = 2.0

    def __repr__(self) -> str:  # token never echoed to logs
        return (f"ClientConfig(gateway_url={self.gateway_url!r}, "
                f"bearer_token='***', "
                f"default_runtime_ref={self.default_runtime_ref!r}, "
                f"polling_interval_s={self.polling_interval_s})")

    def headers(self) -> dict:
        return {"Authorization": f"Bearer {self.bearer_token}"}


class RemoteError(Exception):
    def __init__(self, status_code: int, body: dict):
        super().__init__(body.get("message", f"HTTP {status_code}"))
        self.status_code = status_code
        self.body = body


def _request(config: ClientConfig, method: str, path: str, **kwargs):
    url = config.gateway_url.rstrip("/") + path
    headers = {**config.headers(), **kwargs.pop("headers", {})}
    with httpx.Client(timeout=30.0) as client:
        response = client.request(method, url, headers=headers, **kwargs)
    if response.status_code >= 400:
        try:
            body = response.json()
        except ValueError:
            body = {"message": response.text[:200]}
        raise RemoteError(response.status_code, body)
    return response


def pack_bundle_dir(bundle_dir: Path, overrides: dict) -> tuple[bytes, dict]:
    """Pack a directory into a canonical bundle ZIP, local checks first."""
    manifest_path = bundle_dir / MANIFEST_NAME
    if not manifest_path.is_file():
        raise ValueError(f"{MANIFEST_NAME} not found in {bundle_dir}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"{MANIFEST_NAME} is not valid JSON: {exc}") from exc
    manifest.update({k: v for k, v in overrides.items() if v is not None})

    entrypoint = manifest.get("entrypoint")
    if not entrypoint or not (bundle_dir / entrypoint).is_file():
        raise ValueError(f"entrypoint {entrypoint!r} not found in {bundle_dir}")

    entries = {}
    for path in sorted(bundle_dir.rglob("*")):
        if path.is_file() and not path.is_symlink():
            entries[path.relative_to(bundle_dir).as_posix()] = path.read_bytes()
    entries[MANIFEST_NAME] = json.dumps(manifest, sort_keys=True).encode()
    return build_zip(entries), manifest


def cmd_submit(config: ClientConfig, args) -> int:
    try:
        archive, manifest = pack_bundle_dir(
            Path(args.dir),
            {"runtime_ref": args.runtime_ref, "dataset_id": args.dataset_id},
        )
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    local_hash = canonical_hash_of_zip(archive)

    response = _request(
        config, "POST", "/v1/jobs", content=archive,
        headers={"X-Code-Hash": local_hash},
    )
    reply = response.json()
    print(json.dumps({
        "job_id": reply["job_id"],
        "code_hash": reply["code_hash"],
        "state": reply["state"],
        "dataset_id": manifest.get("dataset_id"),
    }, indent=2))
    return EXIT_OK


def cmd_poll(config: ClientConfig, args) -> int:
    import time

    last_state = None
    while True:
        status = _request(
            config, "GET", f"/v1/jobs/{args.job_id}"
        ).json()
        state = status["state"]
        if state != last_state:
            print(f"{args.job_id} {state}", flush=True)
            last_state = state
        terminal = state in SUCCESS_STATES or state in REJECTION_STATES
        if not args.until_terminal or terminal:
            if status.get("detail"):
                print(f"detail: {status['detail']}")
            if state in REJECTION_STATES:
                return EXIT_REMOTE
            if args.until_terminal and state not in SUCCESS_STATES:
                return EXIT_REMOTE
            return EXIT_OK
        time.sleep(args.interval)


def cmd_fetch(config: ClientConfig, args) -> int:
    response = _request(config, "GET", f"/v1/jobs/{args.job_id}/results")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(response.content)
    print(json.dumps({"out": str(out), "bytes": len(response.content)}))
    return EXIT_OK


def main(argv=None) -> int:
    p = argparse.ArgumentParser(
        prog="airlock-client",
        description="Submit vetted batch jobs and retrieve released results",
    )
    p.add_argument("--gateway", required=True, help="gateway base URL")
    p.add_argument("--token", required=True, help="bearer token")
    sub = p.add_subparsers(dest="cmd", required=True)

    ps = sub.add_parser("submit", help="pack a bundle directory and submit it")
    ps.add_argument("--dir", required=True)
    ps.add_argument("--runtime-ref", help="override manifest runtime_ref")
    ps.add_argument("--dataset-id", help="override manifest dataset_id")
    ps.set_defaults(fn=cmd_submit)

    pp = sub.add_parser("poll", help="report job state")
    pp.add_argument("--job-id", required=True)
    pp.add_argument("--until-terminal", action="store_true")
    pp.add_argument("--interval", type=float, default=2.0)
    pp.set_defaults(fn=cmd_poll)

    pf = sub.add_parser("fetch", help="download the released result archive")
    pf.add_argument("--job-id", required=True)
    pf.add_argument("--out", required=True)
    pf.set_defaults(fn=cmd_fetch)

    args = p.parse_args(argv)
    config = ClientConfig(gateway_url=args.gateway, bearer_token=args.token)

    try:
        return args.fn(config, args)
    except RemoteError as exc:
        print(f"error: {exc} (HTTP {exc.status_code})", file=sys.stderr)
        return EXIT_AUTH if exc.status_code == 401 else EXIT_REMOTE
    except httpx.HTTPError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT


if __name__ == "__main__":
    sys.exit(main())
