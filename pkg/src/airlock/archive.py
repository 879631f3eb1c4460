"""Code bundle handling: ZIP intake and canonical re-serialisation.

Uploads arrive as ZIP archives; every digest is computed over a canonical
re-serialisation instead of the upload bytes, so it depends only on file
paths and contents, never on compression, entry order, or timestamps.

Canonical stream layout (all integers big-endian):
    magic "ALB1" (4 bytes), then for each entry in ascending path byte order:
        path length   u32
        path          UTF-8 bytes, "/" separators
        mode          u32, fixed 0o100644
        mtime         u64, fixed 0
        content length u64
        content bytes
"""

from __future__ import annotations

import io
import stat
import struct
import zipfile
from pathlib import Path

from .canonical import sha256_hex
from .errors import MalformedArchive

MAGIC = b"ALB1"
ENTRY_MODE = 0o100644
MAX_ENTRIES = 10_000
MAX_TOTAL_BYTES = 1 * 1024 * 1024 * 1024  # decompressed cap; upload cap is lower
MANIFEST_NAME = "manifest.json"


def validate_entry_path(path: str) -> str:
    if not path or len(path) > 4096:
        raise MalformedArchive(f"bad entry path length: {path!r}")
    if "\\" in path or "\x00" in path:
        raise MalformedArchive(f"illegal characters in entry path: {path!r}")
    if path.startswith("/"):
        raise MalformedArchive(f"absolute entry path: {path!r}")
    parts = path.split("/")
    if any(part in ("", ".", "..") for part in parts):
        raise MalformedArchive(f"non-normalised entry path: {path!r}")
    return path


def parse_zip(data: bytes) -> dict[str, bytes]:
    """Extract a ZIP upload into {path: content}, enforcing path hygiene."""
    try:
        zf = zipfile.ZipFile(io.BytesIO(data))
    except (zipfile.BadZipFile, ValueError) as exc:
        raise MalformedArchive(f"not a readable ZIP archive: {exc}") from exc
    entries: dict[str, bytes] = {}
    total = 0
    with zf:
        infos = zf.infolist()
        if len(infos) > MAX_ENTRIES:
            raise MalformedArchive(f"archive has more than {MAX_ENTRIES} entries")
        for info in infos:
            if info.is_dir():
                continue
            mode = info.external_attr >> 16
            if mode and stat.S_ISLNK(mode):
                raise MalformedArchive(f"symlink entry refused: {info.filename!r}")
            path = validate_entry_path(info.filename)
            if path in entries:
                raise MalformedArchive(f"duplicate entry path: {path!r}")
            total += info.file_size
            if total > MAX_TOTAL_BYTES:
                raise MalformedArchive("archive decompresses past the size cap")
            try:
                content = zf.read(info)
            except Exception as exc:  # zlib errors, truncated members
                raise MalformedArchive(f"unreadable entry {path!r}: {exc}") from exc
            if len(content) != info.file_size:
                raise MalformedArchive(f"entry size mismatch for {path!r}")
            entries[path] = content
    return entries


def canonical_stream(entries: dict[str, bytes]) -> bytes:
    """Re-serialise an entry map into the canonical byte stream."""
    out = [MAGIC]
    for path in sorted(entries, key=lambda p: p.encode("utf-8")):
        validate_entry_path(path)
        raw_path = path.encode("utf-8")
        content = entries[path]
        out.append(struct.pack(">I", len(raw_path)))
        out.append(raw_path)
        out.append(struct.pack(">I", ENTRY_MODE))
        out.append(struct.pack(">Q", 0))
        out.append(struct.pack(">Q", len(content)))
        out.append(content)
    return b"".join(out)


def canonical_hash(entries: dict[str, bytes]) -> str:
    return sha256_hex(canonical_stream(entries))


def canonical_hash_of_zip(data: bytes) -> str:
    return canonical_hash(parse_zip(data))


def build_zip(entries: dict[str, bytes]) -> bytes:
    """Assemble a ZIP upload from an entry map (client-side helper)."""
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        for path in sorted(entries):
            validate_entry_path(path)
            zf.writestr(path, entries[path])
    return buf.getvalue()


def extract_entries(entries: dict[str, bytes], target: Path) -> None:
    """Materialise an entry map under target; paths were validated at parse."""
    for path, content in entries.items():
        validate_entry_path(path)
        dest = target / path
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_bytes(content)
