"""Frame relay: one TCP ingest connection per live session.

Protocol: the agent sends a 64-byte stream header, then back-to-back frame
records until it closes the socket.  The relay validates every record,
requires frame_index to strictly increase, appends raw record bytes to
rotating segment files inside the session container, counts ingest stats,
and fans decoded frames out to live subscribers (viewers and processors)
through bounded drop-oldest feeds.

Violations never crash the stream half of the system: a malformed record or
a non-monotone index drops that connection and leaves a LIFECYCLE event in
the session log.
"""

from __future__ import annotations

import asyncio
import logging
import time
import uuid

from caplab.bus import BoundedFeed
from caplab.gateway.core import GatewayCore, SessionEntry
from caplab.model import (
    EventKind,
    FrameCodecError,
    FrameRecord,
    IngestStats,
    SegmentEntry,
    SegmentWriter,
    SessionStatus,
    decode_frame_record,
    decode_stream_header,
    frame_payload_length,
    segment_file_name,
)
from caplab.model.codec import FRAME_HEADER_SIZE, STREAM_HEADER_SIZE

log = logging.getLogger(__name__)

SEGMENT_FRAMES = 300  # rotate segment files after this many delivered frames
VIEWER_QUEUE_FRAMES = 8  # per-viewer live buffer; oldest dropped first
TAP_QUEUE_FRAMES = 256  # processors tolerate bursts rather than losing frames


def _wall_micros() -> int:
    return time.time_ns() // 1000


class SessionHub:
    """Live fan-out point for one session's frames.

    Ingest publishes every delivered frame.  Viewers normally see the ingest
    stream directly; once a processor attaches, viewers see only what the
    processor republishes (annotated or passed through), so the two paths
    never interleave.
    """

    def __init__(self) -> None:
        self.viewers: list[BoundedFeed[FrameRecord]] = []
        self.taps: list[BoundedFeed[FrameRecord]] = []
        self.processor_attached = False
        self.closed = False

    def subscribe_view(self, maxsize: int = VIEWER_QUEUE_FRAMES) -> BoundedFeed[FrameRecord]:
        feed: BoundedFeed[FrameRecord] = BoundedFeed(maxsize)
        if self.closed:
            feed.close()
        else:
            self.viewers.append(feed)
        return feed

    def subscribe_tap(self, maxsize: int = TAP_QUEUE_FRAMES) -> BoundedFeed[FrameRecord]:
        """Raw ingest tap, unaffected by processors (processors read these)."""
        feed: BoundedFeed[FrameRecord] = BoundedFeed(maxsize)
        if self.closed:
            feed.close()
        else:
            self.taps.append(feed)
        return feed

    def unsubscribe(self, feed: BoundedFeed[FrameRecord]) -> None:
        for group in (self.viewers, self.taps):
            if feed in group:
                group.remove(feed)
        feed.close()

    def publish_ingest(self, frame: FrameRecord) -> None:
        for feed in self.taps:
            feed.put(frame)
        if not self.processor_attached:
            for feed in self.viewers:
                feed.put(frame)

    def publish_view(self, frame: FrameRecord) -> None:
        for feed in self.viewers:
            feed.put(frame)

    def close(self) -> None:
        self.closed = True
        for feed in (*self.viewers, *self.taps):
            feed.close()


class Relay:
    def __init__(self, core: GatewayCore, *, segment_frames: int = SEGMENT_FRAMES) -> None:
        self.core = core
        self.segment_frames = segment_frames
        self.hubs: dict[uuid.UUID, SessionHub] = {}
        self.active_ingests = 0
        self.peak_ingests = 0
        self._server: asyncio.base_events.Server | None = None

    async def start(self, host: str, port: int) -> None:
        self._server = await asyncio.start_server(self._handle, host, port)

    @property
    def port(self) -> int:
        assert self._server is not None and self._server.sockets
        return self._server.sockets[0].getsockname()[1]

    async def stop(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None
        for hub in self.hubs.values():
            hub.close()

    def hub(self, session_id: uuid.UUID) -> SessionHub:
        hub = self.hubs.get(session_id)
        if hub is None:
            hub = self.hubs[session_id] = SessionHub()
        return hub

    # -- ingest ----------------------------------------------------------------

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        entry: SessionEntry | None = None
        try:
            entry = await self._admit(reader)
            if entry is not None:
                await self._ingest(reader, entry)
        finally:
            writer.close()

    async def _admit(self, reader: asyncio.StreamReader) -> SessionEntry | None:
        """Validate the stream header against a LIVE session, or reject."""
        try:
            raw = await reader.readexactly(STREAM_HEADER_SIZE)
        except asyncio.IncompleteReadError:
            return None
        try:
            header = decode_stream_header(raw)
        except FrameCodecError as exc:
            log.warning("ingest: rejected stream header: %s", exc)
            return None
        entry = self.core.sessions.get(header.session_id)
        if entry is None:
            log.warning("ingest: unknown session %s", header.session_id)
            return None
        if entry.status is not SessionStatus.LIVE:
            log.warning("ingest: session %s is %s, not LIVE", entry.session_id, entry.status.value)
            return None
        if header.device_id != entry.device_id:
            self.core.append_event(
                entry.session_id,
                EventKind.LIFECYCLE,
                0,
                {"state": "ingest_rejected", "detail": f"stream claims device {header.device_id}"},
            )
            return None
        return entry

    async def _ingest(self, reader: asyncio.StreamReader, entry: SessionEntry) -> None:
        stats = IngestStats(session_id=entry.session_id)
        entry.ingest_stats = stats
        entry.ingest_started = True
        hub = self.hub(entry.session_id)
        seg_dir = entry.container_dir / "segments"
        writer: SegmentWriter | None = None
        last_index: int | None = None
        self.active_ingests += 1
        self.peak_ingests = max(self.peak_ingests, self.active_ingests)
        try:
            while True:
                try:
                    head = await reader.readexactly(FRAME_HEADER_SIZE)
                except asyncio.IncompleteReadError as exc:
                    if exc.partial:
                        self._log_violation(entry, last_index, "truncated record header")
                    break  # clean end of stream
                try:
                    payload_len = frame_payload_length(head)
                    payload = await reader.readexactly(payload_len)
                    record = decode_frame_record(head + payload)
                except asyncio.IncompleteReadError:
                    self._log_violation(entry, last_index, "truncated record payload")
                    break
                except FrameCodecError as exc:
                    self._log_violation(entry, last_index, f"undecodable record: {exc}")
                    break
                if record.session_id != entry.session_id:
                    self._log_violation(
                        entry, last_index, f"record names session {record.session_id}"
                    )
                    break
                if last_index is not None and record.frame_index <= last_index:
                    self._log_violation(
                        entry,
                        last_index,
                        f"non-monotone frame_index {record.frame_index} after {last_index}",
                    )
                    break
                last_index = record.frame_index

                now = _wall_micros()
                if stats.first_arrival_micros is None:
                    stats.first_arrival_micros = now
                stats.last_arrival_micros = now
                stats.delivered += 1
                stats.bytes_in += FRAME_HEADER_SIZE + payload_len
                stats.captured_hint = max(stats.captured_hint, record.frame_index + 1)

                if writer is not None and writer.frame_count >= self.segment_frames:
                    self._finalize_segment(entry, writer)
                    writer = None
                if writer is None:
                    writer = SegmentWriter(seg_dir / segment_file_name(record.frame_index))
                writer.append(head + payload, record.frame_index)

                hub.publish_ingest(record)
        finally:
            if writer is not None and writer.frame_count > 0:
                self._finalize_segment(entry, writer)
            elif writer is not None:
                writer.finalize()
            self.active_ingests -= 1
            hub.close()
            entry.ingest_done.set()

    def _finalize_segment(self, entry: SessionEntry, writer: SegmentWriter) -> None:
        crc = writer.finalize()
        assert writer.first_frame_index is not None
        entry.segments.append(
            SegmentEntry(
                file=f"segments/{writer.path.name}",
                first_frame_index=writer.first_frame_index,
                frame_count=writer.frame_count,
                crc32=crc,
            )
        )

    def _log_violation(self, entry: SessionEntry, last_index: int | None, detail: str) -> None:
        frame_index = max(last_index or 0, 0)
        self.core.append_event(
            entry.session_id,
            EventKind.LIFECYCLE,
            frame_index,
            {"state": "ingest_error", "detail": detail},
        )
        log.warning("ingest %s: %s", entry.session_id, detail)
