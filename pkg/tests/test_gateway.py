import asyncio
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aquamon.gateway import (FRAME_SIZE, FrameCorruptionError, FrameEncodeError,
                             FrameError, FrameGrouper, FrameReassembler,
                             FrameSemanticError, FrameVersionError, GatewayServer,
                             NotAFrameError, SensorFrame, crc16_ccitt_false,
                             decode_frame, encode_frame)
from aquamon.metrics import MetricKind


def frame(node=7, metric=0, ts=1624060805, value=24.875, flags=0):
    return SensorFrame(node_id=node, metric_id=metric, timestamp=ts,
                       value=value, flags=flags)


class TestCrc:
    def test_check_string(self):
        assert crc16_ccitt_false(b"123456789") == 0x29B1

    def test_empty_is_init(self):
        assert crc16_ccitt_false(b"") == 0xFFFF

    def test_single_bit_sensitivity(self):
        base = crc16_ccitt_false(b"hello, pond")
        flipped = bytearray(b"hello, pond")
        flipped[3] ^= 0x04
        assert crc16_ccitt_false(bytes(flipped)) != base


class TestCodec:
    def test_frame_is_25_bytes_with_magic(self):
        blob = encode_frame(frame())
        assert len(blob) == FRAME_SIZE == 25
        assert blob[:2] == b"\xac\x51"
        assert blob[2] == 1  # protocol version

    def test_roundtrip_fields(self):
        f = frame(node=513, metric=4, ts=1624060805, value=-0.125, flags=0)
        assert decode_frame(encode_frame(f)) == f

    def test_known_layout(self):
        blob = encode_frame(frame(node=0x0102, metric=3, ts=5, value=1.0))
        version, node, metric, flags, ts, value = struct.unpack(">BHBBQd", blob[2:23])
        assert (version, node, metric, flags, ts, value) == (1, 0x0102, 3, 0, 5, 1.0)

    @given(st.integers(0, 0xFFFF), st.integers(0, 10),
           st.integers(0, 2**64 - 1),
           st.floats(allow_nan=False, allow_infinity=False),
           st.integers(0, 1))
    @settings(max_examples=2000)
    def test_roundtrip_property(self, node, metric, ts, value, flags):
        f = frame(node=node, metric=metric, ts=ts, value=value, flags=flags)
        assert decode_frame(encode_frame(f)) == f

    def test_every_single_bit_flip_rejected(self):
        blob = encode_frame(frame())
        for bit in range(FRAME_SIZE * 8):
            mutated = bytearray(blob)
            mutated[bit // 8] ^= 1 << (bit % 8)
            with pytest.raises(FrameError):
                decode_frame(bytes(mutated))

    def test_bad_magic(self):
        blob = bytearray(encode_frame(frame()))
        blob[0] = 0x00
        with pytest.raises(NotAFrameError):
            decode_frame(bytes(blob))

    def test_wrong_length(self):
        with pytest.raises(NotAFrameError):
            decode_frame(encode_frame(frame())[:-1])

    def test_crc_mismatch(self):
        blob = bytearray(encode_frame(frame()))
        blob[16] ^= 0xFF
        with pytest.raises(FrameCorruptionError):
            decode_frame(bytes(blob))

    def test_unknown_version(self):
        body = struct.pack(">BHBBQd", 2, 7, 0, 0, 5, 1.0)
        blob = b"\xac\x51" + body + struct.pack(">H", crc16_ccitt_false(body))
        with pytest.raises(FrameVersionError):
            decode_frame(blob)

    def test_semantic_rejections(self):
        for body in (struct.pack(">BHBBQd", 1, 7, 11, 0, 5, 1.0),      # metric 11
                     struct.pack(">BHBBQd", 1, 7, 0, 0x02, 5, 1.0),    # reserved flag
                     struct.pack(">BHBBQd", 1, 7, 0, 0, 5, float("nan"))):
            blob = b"\xac\x51" + body + struct.pack(">H", crc16_ccitt_false(body))
            with pytest.raises(FrameSemanticError):
                decode_frame(blob)

    def test_nan_allowed_with_self_test_flag(self):
        f = frame(value=float("nan"), flags=1)
        decoded = decode_frame(encode_frame(f))
        assert decoded.self_test_failed

    def test_encode_validation(self):
        with pytest.raises(FrameEncodeError):
            frame(node=70000)
        with pytest.raises(FrameEncodeError):
            frame(metric=11)
        with pytest.raises(FrameEncodeError):
            frame(flags=4)
        with pytest.raises(FrameEncodeError):
            frame(value=float("inf"))


class TestReassembler:
    def test_clean_stream(self):
        frames = [frame(ts=1000 + i) for i in range(5)]
        blob = b"".join(encode_frame(f) for f in frames)
        r = FrameReassembler()
        assert list(r.feed(blob)) == frames
        assert r.counters.frames_ok == 5
        assert r.counters.resyncs == 0

    def test_resync_after_garbage(self):
        frames = [frame(ts=1000 + i) for i in range(5)]
        garbage = bytes([0x00, 0x11, 0x22, 0x33, 0x44, 0x55, 0x66])
        blob = (b"".join(encode_frame(f) for f in frames[:3]) + garbage
                + b"".join(encode_frame(f) for f in frames[3:]))
        r = FrameReassembler()
        assert list(r.feed(blob)) == frames
        assert r.counters.resyncs == 1
        assert r.counters.frames_corrupt == 1

    def test_corrupted_frame_skipped(self):
        good = frame(ts=1000)
        bad = bytearray(encode_frame(frame(ts=2000)))
        bad[10] ^= 0xFF
        r = FrameReassembler()
        out = list(r.feed(bytes(bad) + encode_frame(good)))
        assert out == [good]
        assert r.counters.resyncs >= 1

    @given(st.lists(st.integers(1000, 2000), min_size=1, max_size=30, unique=True),
           st.randoms())
    @settings(max_examples=100, deadline=None)
    def test_arbitrary_chunking(self, timestamps, rnd):
        frames = [frame(ts=t) for t in timestamps]
        blob = b"".join(encode_frame(f) for f in frames)
        r = FrameReassembler()
        out = []
        i = 0
        while i < len(blob):
            n = rnd.randint(1, 40)
            out += list(r.feed(blob[i:i + n]))
            i += n
        assert out == frames

    def test_split_magic_across_chunks(self):
        blob = encode_frame(frame())
        r = FrameReassembler()
        # force loss of sync, then deliver magic one byte at a time
        assert list(r.feed(b"\x00" * 3)) == []
        out = list(r.feed(blob[:1]))
        out += list(r.feed(blob[1:]))
        assert out == [frame()]


class TestGrouper:
    def test_groups_by_node_and_timestamp(self):
        g = FrameGrouper()
        assert g.add(frame(metric=0, value=28.0), wall_now=0.0) == []
        assert g.add(frame(metric=2, value=6.5), wall_now=0.1) == []
        records = g.add(frame(metric=0, value=28.1, ts=1624060806), wall_now=0.2)
        assert len(records) == 1
        rec = records[0]
        assert rec.timestamp == 1624060805
        assert rec.values == {MetricKind.temperature: 28.0,
                              MetricKind.dissolved_oxygen: 6.5}

    def test_nodes_are_independent(self):
        g = FrameGrouper()
        g.add(frame(node=1, ts=100), wall_now=0.0)
        assert g.add(frame(node=2, ts=200), wall_now=0.1) == []
        assert len(g.flush_all()) == 2

    def test_timeout_flush(self):
        g = FrameGrouper(flush_timeout=2.0)
        g.add(frame(ts=100), wall_now=0.0)
        assert g.flush_expired(wall_now=1.9) == []
        records = g.flush_expired(wall_now=2.0)
        assert len(records) == 1 and records[0].timestamp == 100

    def test_self_test_frames_dropped(self):
        g = FrameGrouper()
        g.add(frame(flags=1, value=float("nan")), wall_now=0.0)
        assert g.flush_all() == []
        assert g.counters.frames_self_test_dropped == 1

    def test_flush_all_ordered_by_timestamp(self):
        g = FrameGrouper()
        for ts in (300, 100, 200):
            g.add(frame(node=ts, ts=ts), wall_now=0.0)
        assert [r.timestamp for r in g.flush_all()] == [100, 200, 300]


class TestServer:
    def run(self, coro):
        return asyncio.run(asyncio.wait_for(coro, timeout=10))

    def test_end_to_end_tcp(self):
        async def scenario():
            records = []
            server = GatewayServer("127.0.0.1", 0, records.append,
                                   flush_timeout=0.1)
            await server.start()
            try:
                _, writer = await asyncio.open_connection("127.0.0.1",
                                                          server.bound_port)
                writer.write(encode_frame(frame(metric=0, value=28.0, ts=100)))
                writer.write(b"\x00\x01junk")
                writer.write(encode_frame(frame(metric=1, value=7.5, ts=100)))
                await writer.drain()
                writer.close()
                for _ in range(100):
                    if records:
                        break
                    await asyncio.sleep(0.05)
            finally:
                await server.stop()
            return records, server.counters

        records, counters = self.run(scenario())
        assert len(records) == 1
        assert records[0].values == {MetricKind.temperature: 28.0,
                                     MetricKind.ph: 7.5}
        assert counters.frames_ok == 2
        assert counters.resyncs >= 1

    def test_bad_connection_does_not_stop_listener(self):
        async def scenario():
            records = []
            server = GatewayServer("127.0.0.1", 0, records.append,
                                   flush_timeout=0.1)
            await server.start()
            try:
                _, w1 = await asyncio.open_connection("127.0.0.1", server.bound_port)
                w1.write(b"\xff" * 200)
                await w1.drain()
                w1.close()
                _, w2 = await asyncio.open_connection("127.0.0.1", server.bound_port)
                w2.write(encode_frame(frame(ts=100)))
                w2.write(encode_frame(frame(ts=101)))
                await w2.drain()
                w2.close()
                for _ in range(100):
                    if records:
                        break
                    await asyncio.sleep(0.05)
            finally:
                await server.stop()
            return records

        records = self.run(scenario())
        assert [r.timestamp for r in records] == [100, 101]

    def test_async_sink_supported(self):
        async def scenario():
            records = []

            async def sink(record):
                records.append(record)

            server = GatewayServer("127.0.0.1", 0, sink, flush_timeout=0.05)
            await server.start()
            try:
                _, writer = await asyncio.open_connection("127.0.0.1",
                                                          server.bound_port)
                writer.write(encode_frame(frame(ts=100)))
                await writer.drain()
                writer.close()
                for _ in range(100):
                    if records:
                        break
                    await asyncio.sleep(0.05)
            finally:
                await server.stop()
            return records

        assert len(self.run(scenario())) == 1
