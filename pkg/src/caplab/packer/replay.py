"""Replay: walk a packed container as (frame, active subtitle cues) pairs.

Frames stream lazily segment by segment, so replaying a long recording never
materializes it in memory.  Cues come from session.srt; a cue is active for
a frame when the frame's millisecond timestamp falls inside [start, end).
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterator

from caplab.model import FrameRecord, SrtCue, active_cues, iter_segment_records, parse_srt
from caplab.packer.container import load_manifest, read_container_srt


class FrameOutOfRange(ValueError):
    """Requested start frame is past the last delivered frame."""


def last_delivered_index(container: Path) -> int:
    """Highest frame_index in the container, or -1 when nothing was delivered."""
    manifest = load_manifest(container)
    if not manifest.segments:
        return -1
    last_seg = manifest.segments[-1]
    records = list(iter_segment_records(Path(container) / last_seg.file))
    return records[-1].frame_index if records else -1


def replay(
    container: Path, from_frame: int = 0
) -> Iterator[tuple[FrameRecord, tuple[SrtCue, ...]]]:
    """Yield every recorded frame at or after from_frame with its live cues."""
    container = Path(container)
    manifest = load_manifest(container)
    last = last_delivered_index(container)
    if from_frame < 0 or from_frame > last:
        raise FrameOutOfRange(f"from_frame {from_frame}, last delivered frame is {last}")
    cues = parse_srt(read_container_srt(container))
    for seg in manifest.segments:
        for record in iter_segment_records(container / seg.file):
            if record.frame_index < from_frame:
                continue
            yield record, active_cues(cues, record.frame_index, manifest.fps)
