"""Packing: turn a stopped session's gateway state into a sealed container.

The Packer service listens on the gateway bus for sessions entering
STOPPING and seals each one: writes manifest.json (frame_count comes from
the relay's captured_hint) and session.srt (the full event log rendered as
subtitles), then advances the session to PACKED.  pack_session is idempotent
— packing a PACKED session returns its manifest unchanged.
"""

from __future__ import annotations

import logging
import uuid

from caplab.gateway.core import PACKING_CHANNEL, GatewayCore
from caplab.gateway.errors import SessionNotStopped
from caplab.model import EventKind, SessionManifest, SessionStatus, build_srt

from .container import MANIFEST_NAME, SRT_NAME

log = logging.getLogger(__name__)


def pack_session(core: GatewayCore, session_id: uuid.UUID) -> SessionManifest:
    entry = core.get_session(session_id)
    if entry.status is SessionStatus.PACKED:
        assert entry.manifest is not None
        return entry.manifest
    if entry.status is not SessionStatus.STOPPING:
        raise SessionNotStopped(f"session is {entry.status.value}")

    captured = entry.ingest_stats.captured_hint if entry.ingest_stats is not None else 0

    # Snapshot before the "packed" event below so it never lands in the SRT.
    events = sorted(entry.events, key=lambda e: (e.frame_index, e.seq))
    # Never-started sessions have no fps; they pack to an empty sidecar.
    if entry.fps > 0 and events:
        # An event may reference a frame past the last delivered one (e.g. a
        # marker set beyond a dropped tail); stretch the subtitle timeline
        # just enough to keep every cue representable.
        srt_frames = max(captured, max(e.frame_index for e in events) + 1)
        srt_text = build_srt(events, entry.fps, srt_frames)
    else:
        srt_text = ""

    manifest = SessionManifest(
        session_id=entry.session_id,
        scene_id=entry.scene_id,
        device_id=entry.device_id,
        fps=entry.fps,
        resolution=entry.resolution,
        start_ts_micros=entry.start_ts_micros,
        frame_count=captured,
        segments=tuple(entry.segments),
        deterministic_clock=entry.deterministic_clock,
    )
    (entry.container_dir / MANIFEST_NAME).write_text(manifest.to_json(), encoding="utf-8")
    (entry.container_dir / SRT_NAME).write_text(srt_text, encoding="utf-8")

    entry.manifest = manifest
    entry.advance(SessionStatus.PACKED)
    core.append_event(
        entry.session_id,
        EventKind.LIFECYCLE,
        max(captured - 1, 0),
        {"state": "packed"},
    )
    entry.packed_event.set()
    log.info("packed session %s: %d frames, %d segments", session_id, captured, len(entry.segments))
    return manifest


class Packer:
    """Bus-driven packing service; one instance per backend process."""

    def __init__(self, core: GatewayCore) -> None:
        self.core = core

    def start(self) -> None:
        self.core.spawn(self._run(), name="packer")

    async def _run(self) -> None:
        feed = self.core.bus.subscribe(PACKING_CHANNEL)
        async for message in feed:
            session_id = uuid.UUID(message["session_id"])
            try:
                pack_session(self.core, session_id)
            except SessionNotStopped as exc:
                log.warning("packer: session %s not ready: %s", session_id, exc)
            except Exception:
                log.exception("packer: failed to pack %s", session_id)
