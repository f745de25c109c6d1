"""Live processor pipeline: run a detector over a session's frame stream.

A processor is a pure function (pixels, meta) -> (pixels, detections).  The
pipeline taps the relay's raw ingest feed, logs one INFERENCE event per
frame it sees, and republishes frames to viewers — annotated when the
processor beat the per-frame deadline (one frame interval), untouched
otherwise.  Processor failures and deadline misses only ever affect viewer
pixels; the event log and the on-disk segments are never modified.
"""

from __future__ import annotations

import asyncio
import uuid
from dataclasses import dataclass
from typing import Callable

import numpy as np

from caplab.bus import BoundedFeed
from caplab.gateway.core import GatewayCore, SessionEntry
from caplab.gateway.errors import SessionNotLive, UnknownProcessor
from caplab.model import Detection, EventKind, FrameRecord, SessionStatus, frame_pixels
from caplab.relay.server import Relay, SessionHub

from .annotate import draw_outline, reencode
from .detect import detect_marker


@dataclass(frozen=True)
class FrameMeta:
    """Per-frame header fields handed to processors alongside the pixels."""

    frame_index: int
    capture_ts_micros: int
    width: int
    height: int


Processor = Callable[[np.ndarray, FrameMeta], tuple[np.ndarray, list[Detection]]]


def marker_processor(pixels: np.ndarray, meta: FrameMeta) -> tuple[np.ndarray, list[Detection]]:
    """Detect the white marker and outline it."""
    detections = detect_marker(pixels)
    for det in detections:
        draw_outline(pixels, det)
    return pixels, detections


PROCESSORS: dict[str, Processor] = {
    "marker": marker_processor,
}


def get_processor(name: str) -> Processor:
    try:
        return PROCESSORS[name]
    except KeyError:
        raise UnknownProcessor(f"no processor {name!r}; available: {sorted(PROCESSORS)}") from None


async def attach_processor(
    core: GatewayCore, relay: Relay, session_id: uuid.UUID, name: str
) -> asyncio.Task:
    """Attach a named processor to a live session's frame stream."""
    processor = get_processor(name)
    entry = core.get_session(session_id)
    if entry.status is not SessionStatus.LIVE:
        raise SessionNotLive(f"session is {entry.status.value}")
    hub = relay.hub(session_id)
    feed = hub.subscribe_tap()
    hub.processor_attached = True
    task = core.spawn(
        _run_processor(core, entry, hub, feed, name, processor),
        name=f"processor-{name}-{session_id}",
    )
    core.append_event(
        session_id,
        EventKind.LIFECYCLE,
        0,
        {"state": "processor_attached", "processor": name},
    )
    return task


async def _run_processor(
    core: GatewayCore,
    entry: SessionEntry,
    hub: SessionHub,
    feed: BoundedFeed[FrameRecord],
    name: str,
    processor: Processor,
) -> None:
    interval = 1.0 / entry.fps if entry.fps > 0 else 1.0
    loop = asyncio.get_running_loop()
    async for frame in feed:
        started = loop.time()
        meta = FrameMeta(
            frame_index=frame.frame_index,
            capture_ts_micros=frame.capture_ts_micros,
            width=frame.width,
            height=frame.height,
        )
        try:
            out_pixels, detections = processor(frame_pixels(frame), meta)
            annotated = reencode(frame, out_pixels)
        except Exception as exc:  # a broken processor must not kill the stream
            core.append_event(
                entry.session_id,
                EventKind.LIFECYCLE,
                frame.frame_index,
                {"state": "processor_error", "processor": name, "detail": repr(exc)},
            )
            hub.publish_view(frame)
            continue
        core.append_event(
            entry.session_id,
            EventKind.INFERENCE,
            frame.frame_index,
            {"frame": frame.frame_index, "detections": [d.to_payload() for d in detections]},
        )
        if loop.time() - started > interval:
            hub.publish_view(frame)  # missed the deadline: pixels pass through
        else:
            hub.publish_view(annotated)
