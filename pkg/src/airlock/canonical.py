"""Canonical serialisation: the wire, storage, and digest format for every zone.

All structures cross zone boundaries and enter digests in exactly one form:
JSON with lexicographically sorted keys, no insignificant whitespace, and all
byte strings pre-rendered as lowercase hex. Timestamps are UTC at millisecond
resolution, RFC 3339 with a trailing "Z".
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone

GENESIS_HASH = "0" * 64


def canonical_json_bytes(obj) -> bytes:
    """Serialise to the canonical JSON byte form.

    Floats are rejected: every quantity in the protocol is an integer or a
    string, and float formatting is not stable enough to sit under a digest.
    Byte strings are rendered as lowercase hex.
    """
    return json.dumps(
        _canonicalise(obj),
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
        allow_nan=False,
    ).encode("utf-8")


def canonical_json_str(obj) -> str:
    return canonical_json_bytes(obj).decode("utf-8")


def _canonicalise(obj):
    if isinstance(obj, float):
        raise ValueError("floats are not representable in canonical JSON")
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, (bytes, bytearray)):
        return bytes(obj).hex()
    if isinstance(obj, dict):
        out = {}
        for key, value in obj.items():
            if not isinstance(key, str):
                raise ValueError("canonical JSON object keys must be strings")
            out[key] = _canonicalise(value)
        return out
    if isinstance(obj, (list, tuple)):
        return [_canonicalise(value) for value in obj]
    raise ValueError(f"type {type(obj).__name__} is not representable in canonical JSON")


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest_payload(obj) -> str:
    """256-bit digest of an object's canonical JSON form, as lowercase hex."""
    return sha256_hex(canonical_json_bytes(obj))


def is_hex_digest(value) -> bool:
    return (
        isinstance(value, str)
        and len(value) == 64
        and all(c in "0123456789abcdef" for c in value)
    )


def ts_now() -> str:
    """Current UTC time, millisecond resolution, RFC 3339 ("...Z")."""
    return format_ts(datetime.now(timezone.utc))


def format_ts(dt: datetime) -> str:
    if dt.tzinfo is None:
        raise ValueError("timestamps must be timezone-aware")
    dt = dt.astimezone(timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond // 1000:03d}Z"


def parse_ts(value: str) -> datetime:
    if not value.endswith("Z"):
        raise ValueError(f"timestamp is not canonical UTC form: {value!r}")
    dt = datetime.strptime(value, "%Y-%m-%dT%H:%M:%S.%fZ")
    return dt.replace(tzinfo=timezone.utc)


def ts_add_seconds(value: str, seconds: int) -> str:
    from datetime import timedelta

    return format_ts(parse_ts(value) + timedelta(seconds=seconds))


def ts_before(a: str, b: str) -> bool:
    """True if timestamp a is strictly earlier than b."""
    return parse_ts(a) < parse_ts(b)
