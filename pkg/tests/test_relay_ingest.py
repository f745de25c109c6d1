"""Relay ingest protocol: admission, validation, segment rotation, fan-out.

These tests speak the wire format directly over TCP with tiny hand-crafted
frames, so a 650-frame stream runs in milliseconds instead of real time.
"""

import asyncio
import uuid
from contextlib import asynccontextmanager
from pathlib import Path

import numpy as np

from caplab.gateway.core import SessionEntry
from caplab.model import (
    EventKind,
    FrameEncoding,
    FrameRecord,
    SessionStatus,
    StreamHeader,
    encode_frame_record,
    encode_stream_header,
    read_segment,
    rle_encode,
    write_index_strip,
)
from caplab.relay.server import Relay

from tests.support import make_core, make_entry, run

W, H = 64, 8


@asynccontextmanager
async def running_relay(tmp_path: Path, **relay_kwargs):
    core = make_core(tmp_path)
    relay = Relay(core, **relay_kwargs)
    await relay.start("127.0.0.1", 0)
    try:
        yield core, relay
    finally:
        await relay.stop()
        await core.aclose()


def craft_frame(entry: SessionEntry, frame_index: int, *, session_id=None, device_id=None) -> bytes:
    pixels = np.full((H, W, 3), 128, dtype=np.uint8)
    write_index_strip(pixels, frame_index)
    record = FrameRecord(
        session_id=session_id or entry.session_id,
        device_id=device_id if device_id is not None else entry.device_id,
        frame_index=frame_index,
        capture_ts_micros=frame_index * 1_000_000 // 30,
        width=W,
        height=H,
        encoding=FrameEncoding.RLE_RGB24,
        payload=rle_encode(pixels.tobytes()),
    )
    return encode_frame_record(record)


def stream_header(entry: SessionEntry, *, device_id=None) -> bytes:
    return encode_stream_header(
        StreamHeader(
            session_id=entry.session_id,
            device_id=device_id if device_id is not None else entry.device_id,
            fps=30,
            resolution="360p",
            deterministic_clock=True,
        )
    )


async def send_stream(relay: Relay, entry: SessionEntry, chunks: list[bytes]) -> None:
    """Open one ingest connection, send everything, close, wait for teardown."""
    _, writer = await asyncio.open_connection("127.0.0.1", relay.port)
    for chunk in chunks:
        writer.write(chunk)
    await writer.drain()
    writer.close()
    await asyncio.wait_for(entry.ingest_done.wait(), timeout=5.0)


def violation_states(entry: SessionEntry) -> list[str]:
    out = []
    for event in entry.events:
        if event.kind is EventKind.LIFECYCLE:
            body = event.payload_dict()
            if body.get("state") in ("ingest_error", "ingest_rejected"):
                out.append(f"{body['state']}: {body.get('detail', '')}")
    return out


def test_segments_rotate_every_300_delivered_frames(tmp_path: Path) -> None:
    async def scenario() -> None:
        async with running_relay(tmp_path) as (core, relay):
            entry = make_entry(core)
            frames = [craft_frame(entry, i) for i in range(650)]
            await send_stream(relay, entry, [stream_header(entry), *frames])

            assert [s.file for s in entry.segments] == [
                "segments/00000000.seg",
                "segments/00000300.seg",
                "segments/00000600.seg",
            ]
            assert [s.frame_count for s in entry.segments] == [300, 300, 50]
            assert [s.first_frame_index for s in entry.segments] == [0, 300, 600]

            stats = entry.ingest_stats
            assert stats is not None
            assert stats.delivered == 650
            assert stats.captured_hint == 650
            assert stats.bytes_in == sum(len(f) for f in frames)
            assert stats.first_arrival_micros is not None
            assert stats.last_arrival_micros is not None

            # round trip: the stored records are byte-for-byte what was sent
            stored = []
            for seg in entry.segments:
                stored.extend(
                    encode_frame_record(r)
                    for r in read_segment(entry.container_dir / seg.file)
                )
            assert stored == frames
            assert violation_states(entry) == []

    run(scenario())


def test_sparse_indices_rotate_by_delivered_count(tmp_path: Path) -> None:
    async def scenario() -> None:
        async with running_relay(tmp_path, segment_frames=4) as (core, relay):
            entry = make_entry(core)
            indices = [0, 3, 4, 9, 10, 11, 15, 100, 101, 102]
            frames = [craft_frame(entry, i) for i in indices]
            await send_stream(relay, entry, [stream_header(entry), *frames])
            # rotation counts delivered frames, not index arithmetic
            assert [s.file for s in entry.segments] == [
                "segments/00000000.seg",
                "segments/00000010.seg",
                "segments/00000101.seg",
            ]
            assert [s.frame_count for s in entry.segments] == [4, 4, 2]
            assert entry.ingest_stats.captured_hint == 103

    run(scenario())


def test_rejects_session_that_is_not_live(tmp_path: Path) -> None:
    async def scenario() -> None:
        async with running_relay(tmp_path) as (core, relay):
            entry = make_entry(core, status=SessionStatus.STARTING)
            reader, writer = await asyncio.open_connection("127.0.0.1", relay.port)
            writer.write(stream_header(entry))
            writer.write(craft_frame(entry, 0))
            await writer.drain()
            assert await asyncio.wait_for(reader.read(), timeout=5.0) == b""  # closed on us
            assert entry.ingest_stats is None
            assert entry.segments == []
            writer.close()

    run(scenario())


def test_rejects_device_mismatch_with_event(tmp_path: Path) -> None:
    async def scenario() -> None:
        async with running_relay(tmp_path) as (core, relay):
            entry = make_entry(core)  # device 1
            reader, writer = await asyncio.open_connection("127.0.0.1", relay.port)
            writer.write(stream_header(entry, device_id=2))
            await writer.drain()
            assert await asyncio.wait_for(reader.read(), timeout=5.0) == b""
            assert entry.ingest_stats is None
            states = violation_states(entry)
            assert len(states) == 1 and states[0].startswith("ingest_rejected")
            writer.close()

    run(scenario())


def test_non_monotone_index_drops_stream(tmp_path: Path) -> None:
    async def scenario() -> None:
        async with running_relay(tmp_path) as (core, relay):
            entry = make_entry(core)
            frames = [craft_frame(entry, i) for i in (0, 1, 2, 2, 3)]
            await send_stream(relay, entry, [stream_header(entry), *frames])
            assert entry.ingest_stats.delivered == 3  # 0, 1, 2; dropped at the repeat
            assert [s.frame_count for s in entry.segments] == [3]
            (state,) = violation_states(entry)
            assert "non-monotone" in state

    run(scenario())


def test_truncated_header_logs_violation(tmp_path: Path) -> None:
    async def scenario() -> None:
        async with running_relay(tmp_path) as (core, relay):
            entry = make_entry(core)
            await send_stream(
                relay, entry, [stream_header(entry), craft_frame(entry, 0), b"\x00" * 20]
            )
            assert entry.ingest_stats.delivered == 1
            (state,) = violation_states(entry)
            assert "truncated record header" in state

    run(scenario())


def test_undecodable_record_logs_violation(tmp_path: Path) -> None:
    async def scenario() -> None:
        async with running_relay(tmp_path) as (core, relay):
            entry = make_entry(core)
            bad = bytearray(craft_frame(entry, 1))
            bad[0] = ord("X")  # break the magic
            await send_stream(
                relay, entry, [stream_header(entry), craft_frame(entry, 0), bytes(bad)]
            )
            assert entry.ingest_stats.delivered == 1
            (state,) = violation_states(entry)
            assert "undecodable record" in state

    run(scenario())


def test_record_for_another_session_is_rejected(tmp_path: Path) -> None:
    async def scenario() -> None:
        async with running_relay(tmp_path) as (core, relay):
            entry = make_entry(core)
            imposter = craft_frame(entry, 1, session_id=uuid.uuid4())
            await send_stream(
                relay, entry, [stream_header(entry), craft_frame(entry, 0), imposter]
            )
            assert entry.ingest_stats.delivered == 1
            (state,) = violation_states(entry)
            assert "names session" in state

    run(scenario())


def test_clean_eof_finalizes_partial_segment(tmp_path: Path) -> None:
    async def scenario() -> None:
        async with running_relay(tmp_path) as (core, relay):
            entry = make_entry(core)
            frames = [craft_frame(entry, i) for i in range(5)]
            await send_stream(relay, entry, [stream_header(entry), *frames])
            assert violation_states(entry) == []
            assert [s.frame_count for s in entry.segments] == [5]
            assert entry.ingest_stats.delivered == 5
            assert entry.ingest_done.is_set()

    run(scenario())


def test_viewer_feed_drops_oldest_but_stays_ordered(tmp_path: Path) -> None:
    async def scenario() -> None:
        async with running_relay(tmp_path) as (core, relay):
            entry = make_entry(core)
            feed = relay.hub(entry.session_id).subscribe_view(maxsize=4)
            frames = [craft_frame(entry, i) for i in range(10)]
            await send_stream(relay, entry, [stream_header(entry), *frames])
            seen = [record.frame_index async for record in feed]  # hub closed by ingest end
            assert len(seen) <= 10
            assert seen == sorted(seen)
            assert seen[-1] == 9  # newest survives

    run(scenario())


def test_processor_tap_splits_from_viewers(tmp_path: Path) -> None:
    async def scenario() -> None:
        async with running_relay(tmp_path) as (core, relay):
            entry = make_entry(core)
            hub = relay.hub(entry.session_id)
            viewer = hub.subscribe_view(maxsize=100)
            tap = hub.subscribe_tap()
            hub.processor_attached = True
            frames = [craft_frame(entry, i) for i in range(6)]
            await send_stream(relay, entry, [stream_header(entry), *frames])
            # taps got the raw stream; viewers saw nothing from ingest
            assert [r.frame_index async for r in tap] == list(range(6))
            assert [r.frame_index async for r in viewer] == []

    run(scenario())
