"""Crash-safe, strictly one-way persistent queues between zones.

These queues are the only communication channel between zones. Per-queue
configuration binds exactly one producer zone and one consumer zone; a
consumer holds no handle that can write to the queue it consumes.

Segment file format (bit-exact):
    magic "ALQ1" (4 bytes), then repeated records:
        seq      8-byte big-endian
        length   4-byte big-endian (payload byte count)
        crc32    4-byte big-endian, CRC-32/ISO-HDLC of the payload
        payload  canonical-JSON bytes

Cursor sidecar ("cursor"): canonical-JSON {queue_name, committed_cursor}
followed by the 4-byte big-endian CRC32 of those JSON bytes. Updated by
atomic replace.

Delivery is at-least-once: dequeue peeks the lowest unacknowledged record
without removing it; only ack advances the committed cursor. At most one
record is ever outstanding-unacknowledged per queue.
"""

from __future__ import annotations

import errno
import os
import struct
import threading
import zlib
from dataclasses import dataclass
from pathlib import Path

from .canonical import canonical_json_bytes
from .errors import (
    CorruptInterior,
    OutOfOrderAck,
    QueueFrozen,
    RoleViolation,
    StorageFull,
    UnknownQueue,
)

MAGIC = b"ALQ1"
RECORD_HEADER = struct.Struct(">QII")  # seq, length, crc32
SEGMENT_MAX_BYTES = 64 * 1024 * 1024
CURSOR_FILE = "cursor"
FROZEN_MARKER = "FROZEN"


def crc32(data: bytes) -> int:
    return zlib.crc32(data) & 0xFFFFFFFF


@dataclass(frozen=True)
class QueueSpec:
    name: str
    producer_zone: str
    consumer_zone: str


@dataclass(frozen=True)
class DeliveredRecord:
    seq: int
    payload: bytes


@dataclass(frozen=True)
class RecoveryReport:
    queue_name: str
    records_recovered: int
    records_truncated: int
    truncated_bytes: int
    committed_cursor: int
    pending: int
    cursor_rebuilt: bool

    def to_dict(self) -> dict:
        return {
            "queue_name": self.queue_name,
            "records_recovered": self.records_recovered,
            "records_truncated": self.records_truncated,
            "truncated_bytes": self.truncated_bytes,
            "committed_cursor": self.committed_cursor,
            "pending": self.pending,
            "cursor_rebuilt": self.cursor_rebuilt,
        }


@dataclass
class _IndexEntry:
    seq: int
    segment: Path
    payload_offset: int
    payload_len: int
    crc: int


def _fsync_dir(path: Path) -> None:
    fd = os.open(path, os.O_RDONLY)
    try:
        os.fsync(fd)
    finally:
        os.close(fd)


class PersistentQueue:
    """One append-only log under its own directory.

    Thread-safe within a process. The producer side repairs a torn tail
    before its first append; the consumer side treats an incomplete tail as
    not-yet-visible. A checksum failure on a complete record is interior
    corruption: the queue freezes and refuses service until an operator
    intervenes (removes the FROZEN marker after inspection).
    """

    def __init__(self, directory: Path | str, name: str):
        self.name = name
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._index: list[_IndexEntry] = []
        self._next_seq = 1
        self._scan_segment: Path | None = None
        self._scan_offset = 0
        self._torn_tail: tuple[Path, int] | None = None
        self._delivered: int | None = None
        self._cursor = 0
        self._cursor_ok = True
        self._load_cursor()
        self._rescan()

    # -- state -----------------------------------------------------------

    @property
    def frozen(self) -> bool:
        return (self.dir / FROZEN_MARKER).exists()

    def _freeze(self, reason: str) -> None:
        marker = self.dir / FROZEN_MARKER
        if not marker.exists():
            marker.write_text(reason + "\n")

    def _check_service(self) -> None:
        if self.frozen:
            raise QueueFrozen(f"queue {self.name} is frozen: "
                              f"{(self.dir / FROZEN_MARKER).read_text().strip()}")

    def _segments(self) -> list[Path]:
        return sorted(self.dir.glob("*.seg"))

    # -- cursor sidecar ----------------------------------------------------

    def _load_cursor(self) -> None:
        path = self.dir / CURSOR_FILE
        if not path.exists():
            self._cursor = 0
            return
        raw = path.read_bytes()
        if len(raw) < 4:
            self._cursor, self._cursor_ok = 0, False
            return
        body, stored = raw[:-4], struct.unpack(">I", raw[-4:])[0]
        if crc32(body) != stored:
            self._cursor, self._cursor_ok = 0, False
            return
        import json

        data = json.loads(body)
        if data.get("queue_name") != self.name:
            self._cursor, self._cursor_ok = 0, False
            return
        self._cursor = int(data["committed_cursor"])

    def _store_cursor(self, value: int) -> None:
        body = canonical_json_bytes(
            {"queue_name": self.name, "committed_cursor": value}
        )
        blob = body + struct.pack(">I", crc32(body))
        tmp = self.dir / (CURSOR_FILE + ".tmp")
        with open(tmp, "wb") as fh:
            fh.write(blob)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self.dir / CURSOR_FILE)
        _fsync_dir(self.dir)
        self._cursor = value
        self._cursor_ok = True

    # -- log scanning --------------------------------------------------------

    def _rescan(self) -> None:
        """Read any bytes appended since the last scan into the index.

        Stops at an incomplete tail record (remembered, not repaired); a
        complete record with a bad checksum freezes the queue.
        """
        segments = self._segments()
        if not segments:
            return
        start = 0
        if self._scan_segment is not None:
            start = segments.index(self._scan_segment)
        for pos in range(start, len(segments)):
            segment = segments[pos]
            offset = self._scan_offset if segment == self._scan_segment else 0
            size = segment.stat().st_size
            with open(segment, "rb") as fh:
                if offset == 0:
                    head = fh.read(len(MAGIC))
                    if head != MAGIC:
                        if pos == len(segments) - 1 and MAGIC.startswith(head):
                            # crash during segment creation: torn, repairable
                            self._torn_tail = (segment, 0)
                            self._scan_segment = segment
                            self._scan_offset = 0
                            return
                        self._freeze(f"bad magic in {segment.name}")
                        raise CorruptInterior(
                            f"queue {self.name}: bad segment magic in {segment.name}"
                        )
                    offset = len(MAGIC)
                while True:
                    if offset + RECORD_HEADER.size > size:
                        break
                    fh.seek(offset)
                    seq, length, stored_crc = RECORD_HEADER.unpack(
                        fh.read(RECORD_HEADER.size)
                    )
                    payload_offset = offset + RECORD_HEADER.size
                    if payload_offset + length > size:
                        break
                    payload = fh.read(length)
                    if crc32(payload) != stored_crc:
                        self._freeze(
                            f"checksum failure at seq {seq} in {segment.name}"
                        )
                        raise CorruptInterior(
                            f"queue {self.name}: checksum failure at seq {seq}"
                        )
                    if seq != self._next_seq:
                        self._freeze(
                            f"sequence break at {segment.name}:{offset} "
                            f"(expected {self._next_seq}, found {seq})"
                        )
                        raise CorruptInterior(
                            f"queue {self.name}: sequence break (expected "
                            f"{self._next_seq}, found {seq})"
                        )
                    self._index.append(
                        _IndexEntry(seq, segment, payload_offset, length, stored_crc)
                    )
                    self._next_seq = seq + 1
                    offset = payload_offset + length
            is_last = pos == len(segments) - 1
            if offset < size:
                if not is_last:
                    self._freeze(f"incomplete record inside {segment.name}")
                    raise CorruptInterior(
                        f"queue {self.name}: incomplete record before log tail"
                    )
                if self._record_beyond_tear(segment, offset, size):
                    # a real torn append is the final bytes ever written; a
                    # verifiable record after the tear point means the length
                    # field here is corrupt, not short
                    self._freeze(
                        f"corrupt record interior at {segment.name}:{offset}"
                    )
                    raise CorruptInterior(
                        f"queue {self.name}: complete record past a malformed "
                        f"one at offset {offset}"
                    )
                self._torn_tail = (segment, offset)
            elif is_last:
                self._torn_tail = None
            self._scan_segment = segment
            self._scan_offset = offset

    def _record_beyond_tear(self, segment: Path, offset: int, size: int) -> bool:
        """Resync scan distinguishing a torn append from length-field damage.

        Tries every byte position after the apparent tear as a record start;
        a header whose sequence continues the log and whose checksum matches
        its payload is overwhelming evidence of a complete later record.
        """
        with open(segment, "rb") as fh:
            fh.seek(offset)
            tail = fh.read(size - offset)
        for pos in range(1, len(tail) - RECORD_HEADER.size + 1):
            seq, length, stored_crc = RECORD_HEADER.unpack_from(tail, pos)
            if not self._next_seq < seq <= self._next_seq + len(tail):
                continue
            body = pos + RECORD_HEADER.size
            if body + length > len(tail):
                continue
            if crc32(tail[body : body + length]) == stored_crc:
                return True
        return False

    def _repair_tail(self) -> int:
        """Truncate a torn trailing record. Producer-side only."""
        if self._torn_tail is None:
            return 0
        segment, offset = self._torn_tail
        removed = segment.stat().st_size - offset
        with open(segment, "rb+") as fh:
            fh.truncate(offset)
            if offset == 0:
                # segment died during creation: restore the magic header
                fh.write(MAGIC)
            fh.flush()
            os.fsync(fh.fileno())
        self._torn_tail = None
        self._scan_offset = offset if offset else len(MAGIC)
        return removed

    # -- operations ----------------------------------------------------------

    def enqueue(self, payload: bytes) -> int:
        if not payload:
            raise ValueError("payload must be non-empty")
        with self._lock:
            self._check_service()
            self._rescan()
            self._repair_tail()
            seq = self._next_seq
            record = (
                RECORD_HEADER.pack(seq, len(payload), crc32(payload)) + payload
            )
            segment = self._segment_for_append(len(record))
            try:
                with open(segment, "ab") as fh:
                    fh.write(record)
                    fh.flush()
                    os.fsync(fh.fileno())
            except OSError as exc:
                if exc.errno == errno.ENOSPC:
                    raise StorageFull(f"queue {self.name}: storage full") from exc
                raise
            self._index.append(
                _IndexEntry(
                    seq,
                    segment,
                    segment.stat().st_size - len(payload),
                    len(payload),
                    crc32(payload),
                )
            )
            self._next_seq = seq + 1
            self._scan_segment = segment
            self._scan_offset = segment.stat().st_size
            return seq

    def _segment_for_append(self, record_len: int) -> Path:
        segments = self._segments()
        if segments:
            current = segments[-1]
            if current.stat().st_size + record_len <= SEGMENT_MAX_BYTES:
                return current
        path = self.dir / f"{self._next_seq:016d}.seg"
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.flush()
            os.fsync(fh.fileno())
        _fsync_dir(self.dir)
        return path

    def dequeue(self) -> DeliveredRecord | None:
        """Peek the lowest unacknowledged record; None when nothing pends.

        Repeated calls without an ack return the same record.
        """
        with self._lock:
            self._check_service()
            self._rescan()
            if self._delivered is not None:
                entry = self._entry_for(self._delivered)
                return DeliveredRecord(entry.seq, self._read_payload(entry))
            for entry in self._index:
                if entry.seq > self._cursor:
                    self._delivered = entry.seq
                    return DeliveredRecord(entry.seq, self._read_payload(entry))
            return None

    def ack(self, seq: int) -> None:
        with self._lock:
            self._check_service()
            if self._delivered is None or seq != self._delivered:
                raise OutOfOrderAck(
                    f"queue {self.name}: ack({seq}) but delivered="
                    f"{self._delivered}, cursor={self._cursor}"
                )
            self._store_cursor(seq)
            self._delivered = None
            # acked records stay on disk until an operator compacts
            self._index = [e for e in self._index if e.seq > seq]

    def recover(self) -> RecoveryReport:
        """Full scan and repair: truncate a torn tail, restore the cursor.

        Must run while the queue is quiescent (no live producer). A checksum
        failure before the tail is tampering, never a torn write: the queue
        freezes and this raises CorruptInterior.
        """
        with self._lock:
            if self.frozen:
                raise CorruptInterior(
                    f"queue {self.name} is frozen: "
                    f"{(self.dir / FROZEN_MARKER).read_text().strip()}"
                )
            self._rescan()
            truncated = 1 if self._torn_tail is not None else 0
            removed = self._repair_tail()
            cursor_rebuilt = not self._cursor_ok
            highest = self._index[-1].seq if self._index else 0
            cursor = self._cursor
            if cursor > highest:
                cursor = highest
                cursor_rebuilt = True
            if cursor_rebuilt:
                self._store_cursor(cursor)
            self._delivered = None
            pending = sum(1 for e in self._index if e.seq > cursor)
            return RecoveryReport(
                queue_name=self.name,
                records_recovered=len(self._index),
                records_truncated=truncated,
                truncated_bytes=removed,
                committed_cursor=cursor,
                pending=pending,
                cursor_rebuilt=cursor_rebuilt,
            )

    def inspect(self) -> dict:
        with self._lock:
            if not self.frozen:
                self._rescan()
            return {
                "queue_name": self.name,
                "segments": [p.name for p in self._segments()],
                "highest_seq": self._next_seq - 1,
                "committed_cursor": self._cursor,
                "pending": sum(1 for e in self._index if e.seq > self._cursor),
                "frozen": self.frozen,
                "torn_tail": self._torn_tail is not None,
            }

    # -- helpers ---------------------------------------------------------

    def _entry_for(self, seq: int) -> _IndexEntry:
        for entry in self._index:
            if entry.seq == seq:
                return entry
        raise KeyError(seq)

    def _read_payload(self, entry: _IndexEntry) -> bytes:
        with open(entry.segment, "rb") as fh:
            fh.seek(entry.payload_offset)
            payload = fh.read(entry.payload_len)
        if len(payload) != entry.payload_len or crc32(payload) != entry.crc:
            self._freeze(f"checksum failure at seq {entry.seq} on delivery")
            raise CorruptInterior(
                f"queue {self.name}: seq {entry.seq} corrupt at delivery"
            )
        return payload


class QueueProducer:
    """Write half of a queue. Never exposes dequeue or ack."""

    def __init__(self, queue: PersistentQueue):
        self._queue = queue

    def enqueue(self, payload: bytes) -> int:
        return self._queue.enqueue(payload)


class QueueConsumer:
    """Read half of a queue. Never exposes enqueue."""

    def __init__(self, queue: PersistentQueue):
        self._queue = queue

    def dequeue(self) -> DeliveredRecord | None:
        return self._queue.dequeue()

    def ack(self, seq: int) -> None:
        self._queue.ack(seq)


class QueueBroker:
    """Factory handing each zone only the queue roles it is bound to."""

    def __init__(self, root: Path | str, specs: dict[str, QueueSpec]):
        self.root = Path(root)
        self.specs = dict(specs)
        self._queues: dict[str, PersistentQueue] = {}
        self._lock = threading.Lock()

    def _queue(self, name: str) -> PersistentQueue:
        if name not in self.specs:
            raise UnknownQueue(f"queue {name!r} is not configured")
        with self._lock:
            if name not in self._queues:
                self._queues[name] = PersistentQueue(self.root / name, name)
            return self._queues[name]

    def producer(self, name: str, zone: str) -> QueueProducer:
        spec = self._spec(name)
        if zone != spec.producer_zone:
            raise RoleViolation(
                f"zone {zone!r} is not the producer for queue {name!r}"
            )
        return QueueProducer(self._queue(name))

    def consumer(self, name: str, zone: str) -> QueueConsumer:
        spec = self._spec(name)
        if zone != spec.consumer_zone:
            raise RoleViolation(
                f"zone {zone!r} is not the consumer for queue {name!r}"
            )
        return QueueConsumer(self._queue(name))

    def recover(self, name: str) -> RecoveryReport:
        return self._queue(name).recover()

    def inspect(self, name: str) -> dict:
        return self._queue(name).inspect()

    def _spec(self, name: str) -> QueueSpec:
        if name not in self.specs:
            raise UnknownQueue(f"queue {name!r} is not configured")
        return self.specs[name]
