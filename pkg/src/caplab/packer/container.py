"""Reading packed session containers from disk.

A container directory holds:

    manifest.json    session parameters + segment index (see SessionManifest)
    session.srt      subtitle sidecar rendered from the event log
    events.jsonl     one JSON object per event, in seq order
    segments/        crc-trailed segment files of raw frame records
"""

from __future__ import annotations

import json
import uuid
from pathlib import Path

from caplab.model import EventKind, EventRecord, SessionManifest, canonical_json

MANIFEST_NAME = "manifest.json"
SRT_NAME = "session.srt"
EVENTS_NAME = "events.jsonl"
SEGMENTS_DIR = "segments"


class NotAContainer(ValueError):
    """The path does not hold a packed session container."""


def load_manifest(container: Path) -> SessionManifest:
    path = Path(container) / MANIFEST_NAME
    if not path.is_file():
        raise NotAContainer(f"{container}: no {MANIFEST_NAME}")
    return SessionManifest.from_json(path.read_text(encoding="utf-8"))


def read_container_events(container: Path, session_id: uuid.UUID) -> list[EventRecord]:
    """Events from events.jsonl, in file (= seq) order."""
    path = Path(container) / EVENTS_NAME
    if not path.is_file():
        return []
    events: list[EventRecord] = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        events.append(
            EventRecord(
                session_id=session_id,
                seq=int(doc["seq"]),
                kind=EventKind(doc["kind"]),
                frame_index=int(doc["frame_index"]),
                ts_micros=int(doc["ts_micros"]),
                payload=canonical_json(doc["payload"]),
            )
        )
    return events


def read_container_srt(container: Path) -> str:
    path = Path(container) / SRT_NAME
    if not path.is_file():
        raise NotAContainer(f"{container}: no {SRT_NAME}")
    return path.read_text(encoding="utf-8")
