"""SubRip (SRT) sidecar generation and parsing.

Each session event becomes one cue whose body is the event kind followed by
the event's canonical JSON payload on a single line.  Cue timing is derived
purely from frame indices and fps, so the same event log always produces the
same bytes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .types import EventRecord

# 99 hours in milliseconds; timestamps must stay below this to fit HH:MM:SS.
MAX_SRT_MILLIS = 99 * 3600 * 1000

# Cap on a cue's display duration when no later event ends it earlier.
CUE_CAP_MILLIS = 1000


class OutOfRange(ValueError):
    """Timestamp would exceed the two-digit hour field."""


class UnsortedEvents(ValueError):
    """build_srt requires events ordered by (frame_index, seq)."""


class SrtParseError(ValueError):
    pass


def frame_millis(frame_index: int, fps: int) -> int:
    """Millisecond timestamp of a frame boundary (floor, never rounded up)."""
    return frame_index * 1000 // fps


def srt_timestamp(frame_index: int, fps: int) -> str:
    if fps < 1:
        raise ValueError(f"fps must be >= 1, got {fps}")
    return format_millis(frame_millis(frame_index, fps))


def format_millis(total_millis: int) -> str:
    if total_millis >= MAX_SRT_MILLIS:
        raise OutOfRange(f"{total_millis} ms is beyond 99 hours")
    seconds, millis = divmod(total_millis, 1000)
    minutes, secs = divmod(seconds, 60)
    hours, mins = divmod(minutes, 60)
    return f"{hours:02d}:{mins:02d}:{secs:02d},{millis:03d}"


def build_srt(events: Sequence[EventRecord], fps: int, frame_count: int) -> str:
    """Render an event log as SRT text.

    Cue rules: start at the event's frame timestamp; end at the earliest of
    the next event's frame timestamp, start + 1 s, and the end-of-session
    timestamp.  Cues are numbered from 1 and separated by one blank line.
    """
    order = [(e.frame_index, e.seq) for e in events]
    if order != sorted(order):
        raise UnsortedEvents("events must be sorted by (frame_index, seq)")
    if events and frame_count < max(e.frame_index for e in events):
        raise ValueError("frame_count smaller than an event's frame_index")

    end_of_session = frame_millis(frame_count, fps)
    blocks: list[str] = []
    for pos, event in enumerate(events):
        start = frame_millis(event.frame_index, fps)
        end = min(start + CUE_CAP_MILLIS, end_of_session)
        if pos + 1 < len(events):
            end = min(end, frame_millis(events[pos + 1].frame_index, fps))
        blocks.append(
            f"{pos + 1}\n"
            f"{format_millis(start)} --> {format_millis(end)}\n"
            f"{event.kind.value} {event.payload}\n"
        )
    if not blocks:
        return ""
    return "\n".join(blocks) + "\n"


@dataclass(frozen=True)
class SrtCue:
    index: int
    start_millis: int
    end_millis: int
    kind: str
    payload: str

    def covers_millis(self, ts_millis: int) -> bool:
        return self.start_millis <= ts_millis < self.end_millis


_TIMING_RE = re.compile(
    r"^(\d{2,}):(\d{2}):(\d{2}),(\d{3}) --> (\d{2,}):(\d{2}):(\d{2}),(\d{3})$"
)


def _parse_timestamp(h: str, m: str, s: str, ms: str) -> int:
    return ((int(h) * 60 + int(m)) * 60 + int(s)) * 1000 + int(ms)


def parse_srt(text: str) -> list[SrtCue]:
    """Parse SRT text produced by build_srt back into cues."""
    if text == "":
        return []
    cues: list[SrtCue] = []
    blocks = [b for b in text.split("\n\n") if b.strip()]
    for block in blocks:
        lines = block.split("\n")
        if len(lines) < 3:
            raise SrtParseError(f"cue block with {len(lines)} lines: {block!r}")
        try:
            index = int(lines[0])
        except ValueError:
            raise SrtParseError(f"bad cue number {lines[0]!r}") from None
        timing = _TIMING_RE.match(lines[1])
        if not timing:
            raise SrtParseError(f"bad timing line {lines[1]!r}")
        start = _parse_timestamp(*timing.groups()[:4])
        end = _parse_timestamp(*timing.groups()[4:])
        body = "\n".join(lines[2:])
        kind, _, payload = body.partition(" ")
        cues.append(SrtCue(index=index, start_millis=start, end_millis=end, kind=kind, payload=payload))
    return cues


def active_cues(cues: Iterable[SrtCue], frame_index: int, fps: int) -> tuple[SrtCue, ...]:
    """Cues whose [start, end) interval covers the frame's timestamp."""
    ts = frame_millis(frame_index, fps)
    return tuple(c for c in cues if c.covers_millis(ts))
