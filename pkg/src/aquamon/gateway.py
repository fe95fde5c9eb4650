"""Sensor wire protocol and network gateway.

Frames are 25 bytes, big-endian:

    0-1   magic 0xAC 0x51
    2     version (0x01)
    3-4   node_id (u16)
    5     metric_id (u8)
    6     flags (bit0 = sensor self-test failed)
    7-14  timestamp, epoch seconds (u64)
    15-22 value (IEEE-754 binary64)
    23-24 CRC-16/CCITT-FALSE over bytes 2..22

The listener accepts concurrent byte-stream connections, resynchronizes
on the magic after corruption, and groups frames sharing
(node_id, timestamp) into SampleRecords for the pipeline.
"""

from __future__ import annotations

import asyncio
import logging
import math
import struct
import time
from dataclasses import dataclass, field
from typing import Awaitable, Callable, Iterator, Optional, Union

from .metrics import MetricKind, SampleRecord

log = logging.getLogger(__name__)

MAGIC = b"\xac\x51"
PROTOCOL_VERSION = 1
FRAME_SIZE = 25
FLAG_SELF_TEST_FAILED = 0x01
GROUP_FLUSH_TIMEOUT = 2.0  # seconds a partial (node, timestamp) group may wait


class FrameError(ValueError):
    pass


class NotAFrameError(FrameError):
    pass


class FrameCorruptionError(FrameError):
    pass


class FrameVersionError(FrameError):
    pass


class FrameSemanticError(FrameError):
    pass


class FrameEncodeError(ValueError):
    pass


def _crc16_table() -> list[int]:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) & 0xFFFF if crc & 0x8000 else (crc << 1) & 0xFFFF
        table.append(crc)
    return table


_CRC_TABLE = _crc16_table()


def crc16_ccitt_false(data: bytes) -> int:
    """CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xor-out."""
    crc = 0xFFFF
    for byte in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC_TABLE[(crc >> 8) ^ byte]
    return crc


@dataclass(frozen=True)
class SensorFrame:
    node_id: int
    metric_id: int
    timestamp: int
    value: float
    flags: int = 0

    def __post_init__(self):
        if not 0 <= self.node_id <= 0xFFFF:
            raise FrameEncodeError(f"node_id {self.node_id} out of u16 range")
        if not 0 <= self.metric_id <= 10:
            raise FrameEncodeError(f"metric_id {self.metric_id} out of range 0..10")
        if self.flags & ~FLAG_SELF_TEST_FAILED:
            raise FrameEncodeError(f"reserved flag bits set: {self.flags:#04x}")
        if not 0 <= self.timestamp < 2 ** 64:
            raise FrameEncodeError(f"timestamp {self.timestamp} out of u64 range")
        if not (self.flags & FLAG_SELF_TEST_FAILED) and not math.isfinite(self.value):
            raise FrameEncodeError("non-finite value without self-test flag")

    @property
    def self_test_failed(self) -> bool:
        return bool(self.flags & FLAG_SELF_TEST_FAILED)

    @property
    def metric(self) -> MetricKind:
        return MetricKind.from_id(self.metric_id)


def encode_frame(frame: SensorFrame) -> bytes:
    body = struct.pack(">BHBBQd", PROTOCOL_VERSION, frame.node_id, frame.metric_id,
                       frame.flags, frame.timestamp, frame.value)
    return MAGIC + body + struct.pack(">H", crc16_ccitt_false(body))


def decode_frame(data: bytes) -> SensorFrame:
    if len(data) != FRAME_SIZE:
        raise NotAFrameError(f"expected {FRAME_SIZE} bytes, got {len(data)}")
    if data[:2] != MAGIC:
        raise NotAFrameError("bad magic")
    body, crc = data[2:23], struct.unpack(">H", data[23:25])[0]
    if crc16_ccitt_false(body) != crc:
        raise FrameCorruptionError("CRC mismatch")
    version, node_id, metric_id, flags, timestamp, value = struct.unpack(">BHBBQd", body)
    if version != PROTOCOL_VERSION:
        raise FrameVersionError(f"unknown protocol version {version}")
    if metric_id > 10:
        raise FrameSemanticError(f"metric_id {metric_id} out of range")
    if flags & ~FLAG_SELF_TEST_FAILED:
        raise FrameSemanticError(f"reserved flag bits set: {flags:#04x}")
    if not (flags & FLAG_SELF_TEST_FAILED) and not math.isfinite(value):
        raise FrameSemanticError("non-finite value without self-test flag")
    return SensorFrame(node_id=node_id, metric_id=metric_id, timestamp=timestamp,
                       value=value, flags=flags)


@dataclass
class GatewayCounters:
    frames_ok: int = 0
    frames_corrupt: int = 0
    frames_self_test_dropped: int = 0
    resyncs: int = 0
    records_emitted: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


class FrameReassembler:
    """Incremental scanner over an arbitrarily chunked byte stream.

    Yields decoded frames; on corruption it counts one resync event and
    scans forward to the next magic.
    """

    def __init__(self, counters: Optional[GatewayCounters] = None):
        self.counters = counters or GatewayCounters()
        self._buf = bytearray()
        self._in_sync = True

    def feed(self, data: bytes) -> Iterator[SensorFrame]:
        self._buf += data
        while True:
            if not self._in_sync:
                idx = self._buf.find(MAGIC)
                if idx < 0:
                    del self._buf[:max(0, len(self._buf) - 1)]
                    return
                del self._buf[:idx]
                self._in_sync = True
            if len(self._buf) < FRAME_SIZE:
                return
            try:
                frame = decode_frame(bytes(self._buf[:FRAME_SIZE]))
            except FrameError:
                self.counters.frames_corrupt += 1
                self.counters.resyncs += 1
                del self._buf[:1]
                self._in_sync = False
                continue
            del self._buf[:FRAME_SIZE]
            self.counters.frames_ok += 1
            yield frame


class FrameGrouper:
    """Groups frames by (node_id, timestamp) into SampleRecords.

    A group is emitted when a frame for a different timestamp of the same
    node arrives, or when ``flush_older_than`` expires it.
    """

    def __init__(self, counters: Optional[GatewayCounters] = None,
                 flush_timeout: float = GROUP_FLUSH_TIMEOUT):
        self.counters = counters or GatewayCounters()
        self.flush_timeout = flush_timeout
        self._groups: dict[tuple[int, int], dict[MetricKind, float]] = {}
        self._first_seen: dict[tuple[int, int], float] = {}

    def add(self, frame: SensorFrame, wall_now: Optional[float] = None
            ) -> list[SampleRecord]:
        wall_now = time.monotonic() if wall_now is None else wall_now
        if frame.self_test_failed:
            self.counters.frames_self_test_dropped += 1
            return self.flush_expired(wall_now)
        key = (frame.node_id, frame.timestamp)
        emitted: list[SampleRecord] = []
        # a newer timestamp from the same node closes its older groups
        older = sorted(k for k in self._groups
                       if k[0] == frame.node_id and k[1] < frame.timestamp)
        for other in older:
            emitted.append(self._emit(other))
        self._groups.setdefault(key, {})[frame.metric] = frame.value
        self._first_seen.setdefault(key, wall_now)
        return emitted + self.flush_expired(wall_now)

    def flush_expired(self, wall_now: Optional[float] = None) -> list[SampleRecord]:
        wall_now = time.monotonic() if wall_now is None else wall_now
        expired = [k for k, seen in self._first_seen.items()
                   if wall_now - seen >= self.flush_timeout]
        return [self._emit(k) for k in sorted(expired, key=lambda k: k[1])]

    def flush_all(self) -> list[SampleRecord]:
        return [self._emit(k) for k in sorted(self._groups, key=lambda k: k[1])]

    def _emit(self, key: tuple[int, int]) -> SampleRecord:
        values = self._groups.pop(key)
        self._first_seen.pop(key, None)
        self.counters.records_emitted += 1
        return SampleRecord(timestamp=key[1], values=values)


RecordSink = Callable[[SampleRecord], Union[None, Awaitable[None]]]


class GatewayServer:
    """TCP listener turning frame streams into SampleRecords."""

    def __init__(self, host: str, port: int, sink: RecordSink,
                 flush_timeout: float = GROUP_FLUSH_TIMEOUT):
        self.host = host
        self.port = port
        self.sink = sink
        self.counters = GatewayCounters()
        self._grouper = FrameGrouper(self.counters, flush_timeout)
        self._server: Optional[asyncio.base_events.Server] = None
        self._flusher: Optional[asyncio.Task] = None

    @property
    def bound_port(self) -> int:
        assert self._server is not None
        return self._server.sockets[0].getsockname()[1]

    async def start(self) -> None:
        self._server = await asyncio.start_server(self._handle, self.host, self.port)
        self._flusher = asyncio.create_task(self._flush_loop())

    async def stop(self) -> None:
        if self._flusher:
            self._flusher.cancel()
        if self._server:
            self._server.close()
            await self._server.wait_closed()
        for record in self._grouper.flush_all():
            await self._deliver(record)

    async def _deliver(self, record: SampleRecord) -> None:
        result = self.sink(record)
        if asyncio.iscoroutine(result):
            await result

    async def _flush_loop(self) -> None:
        while True:
            await asyncio.sleep(self._grouper.flush_timeout / 2)
            for record in self._grouper.flush_expired():
                await self._deliver(record)

    async def _handle(self, reader: asyncio.StreamReader,
                      writer: asyncio.StreamWriter) -> None:
        peer = writer.get_extra_info("peername")
        reassembler = FrameReassembler(self.counters)
        try:
            while True:
                chunk = await reader.read(4096)
                if not chunk:
                    break
                for frame in reassembler.feed(chunk):
                    for record in self._grouper.add(frame):
                        await self._deliver(record)
        except (ConnectionError, asyncio.IncompleteReadError):
            pass
        except Exception:
            log.exception("gateway connection %s failed", peer)
        finally:
            writer.close()
