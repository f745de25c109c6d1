"""Core domain types shared by the agent, relay, gateway, packer and bench.

Everything here is a plain dataclass or enum with no I/O.  Wire encodings for
these types live in codec.py; subtitle rendering lives in srt.py.
"""

from __future__ import annotations

import enum
import json
import uuid
from dataclasses import dataclass, field
from typing import Any

# Named capture resolutions -> (width, height) in pixels.
RESOLUTION_PRESETS: dict[str, tuple[int, int]] = {
    "360p": (640, 360),
    "720p": (1280, 720),
    "1080p": (1920, 1080),
}

BYTES_PER_PIXEL = 3  # RGB24 everywhere


def frame_payload_size(resolution: str) -> int:
    """Raw (uncompressed) payload size in bytes for one frame at a preset."""
    w, h = RESOLUTION_PRESETS[resolution]
    return w * h * BYTES_PER_PIXEL


class FrameEncoding(enum.IntEnum):
    RAW_RGB24 = 0
    RLE_RGB24 = 1


class CommandKind(str, enum.Enum):
    SET_SPEED = "SET_SPEED"
    SET_STEERING = "SET_STEERING"
    SET_CAM_PAN = "SET_CAM_PAN"
    SET_CAM_TILT = "SET_CAM_TILT"
    STOP = "STOP"


# Inclusive argument ranges per command kind.  SET_SPEED is a percentage of
# the device's maximum speed; the angle commands are degrees.  STOP takes no
# argument.
COMMAND_RANGES: dict[CommandKind, tuple[float, float]] = {
    CommandKind.SET_SPEED: (-100, 100),
    CommandKind.SET_STEERING: (-30, 30),
    CommandKind.SET_CAM_PAN: (-90, 90),
    CommandKind.SET_CAM_TILT: (-35, 65),
}


def clamp_command_value(kind: CommandKind, value: float | int | None) -> float | int | None:
    """Clamp a command argument into its allowed range.

    Devices never reject an out-of-range argument; they clamp it and report
    the clamped value, so the event log always shows what was actually
    applied.  STOP carries no argument and passes through as None.
    """
    if kind is CommandKind.STOP:
        return None
    if value is None:
        raise ValueError(f"{kind.value} requires a numeric argument")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{kind.value} argument must be a number, got {value!r}")
    lo, hi = COMMAND_RANGES[kind]
    return min(max(value, lo), hi)


@dataclass(frozen=True)
class ControlCommand:
    """A command as issued by a controlling client.

    client_seq strictly increases per control connection; the issuing
    boundary (HTTP handler, UI socket, script player) assigns it.
    """

    client_seq: int
    kind: CommandKind
    value: float | int | None
    issued_ts_micros: int


@dataclass(frozen=True)
class AppliedCommand:
    """A command after the device applied it: value clamped, frame pinned.

    applied_frame_index is the index of the first frame rendered under the
    new control values; applied_ts_micros is the device clock at that tick.
    """

    command: ControlCommand
    applied_frame_index: int
    applied_ts_micros: int

    def payload(self) -> dict[str, Any]:
        body: dict[str, Any] = {"kind": self.command.kind.value}
        if self.command.value is not None:
            body["value"] = self.command.value
        return body


@dataclass(frozen=True)
class FrameRecord:
    """One captured frame plus the metadata that rides with it on the wire."""

    session_id: uuid.UUID
    device_id: int
    frame_index: int
    capture_ts_micros: int
    width: int
    height: int
    encoding: FrameEncoding
    payload: bytes

    def raw_size(self) -> int:
        return self.width * self.height * BYTES_PER_PIXEL


class EventKind(str, enum.Enum):
    COMMAND = "COMMAND"
    INFERENCE = "INFERENCE"
    MARKER = "MARKER"
    LIFECYCLE = "LIFECYCLE"


@dataclass(frozen=True)
class EventRecord:
    """One entry in a session's append-only event log.

    seq is gapless and starts at 1 within a session.  frame_index anchors the
    event to the capture timeline; payload is canonical JSON text (see
    canonical_json) so that logs and subtitle sidecars are byte-reproducible.
    """

    session_id: uuid.UUID
    seq: int
    kind: EventKind
    frame_index: int
    ts_micros: int
    payload: str

    def payload_dict(self) -> dict[str, Any]:
        return json.loads(self.payload)


class SessionStatus(str, enum.Enum):
    STARTING = "STARTING"
    LIVE = "LIVE"
    STOPPING = "STOPPING"
    PACKED = "PACKED"


# Forward-only lifecycle order.
_STATUS_ORDER = [
    SessionStatus.STARTING,
    SessionStatus.LIVE,
    SessionStatus.STOPPING,
    SessionStatus.PACKED,
]


def status_rank(status: SessionStatus) -> int:
    return _STATUS_ORDER.index(status)


@dataclass(frozen=True)
class SegmentEntry:
    """Manifest entry for one segment file inside a container."""

    file: str
    first_frame_index: int
    frame_count: int
    crc32: int


@dataclass(frozen=True)
class SessionManifest:
    session_id: uuid.UUID
    scene_id: str
    device_id: int
    fps: int
    resolution: str
    start_ts_micros: int
    frame_count: int
    segments: tuple[SegmentEntry, ...]
    deterministic_clock: bool

    def to_json(self) -> str:
        # Key order is part of the on-disk format; keep it stable.
        doc = {
            "session_id": str(self.session_id),
            "scene_id": self.scene_id,
            "device_id": self.device_id,
            "fps": self.fps,
            "resolution": self.resolution,
            "start_ts_micros": self.start_ts_micros,
            "frame_count": self.frame_count,
            "segments": [
                {
                    "file": s.file,
                    "first_frame_index": s.first_frame_index,
                    "frame_count": s.frame_count,
                    "crc32": s.crc32,
                }
                for s in self.segments
            ],
            "deterministic_clock": self.deterministic_clock,
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SessionManifest":
        doc = json.loads(text)
        try:
            return cls(
                session_id=uuid.UUID(doc["session_id"]),
                scene_id=doc["scene_id"],
                device_id=int(doc["device_id"]),
                fps=int(doc["fps"]),
                resolution=doc["resolution"],
                start_ts_micros=int(doc["start_ts_micros"]),
                frame_count=int(doc["frame_count"]),
                segments=tuple(
                    SegmentEntry(
                        file=s["file"],
                        first_frame_index=int(s["first_frame_index"]),
                        frame_count=int(s["frame_count"]),
                        crc32=int(s["crc32"]),
                    )
                    for s in doc["segments"]
                ),
                deterministic_clock=bool(doc["deterministic_clock"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestParseError(str(exc)) from exc


class ManifestParseError(ValueError):
    """manifest.json exists but does not parse into a SessionManifest."""


@dataclass(frozen=True)
class SceneLease:
    """Exclusive hold on a scene by one researcher, bounded by a TTL."""

    scene_id: str
    holder: str
    acquired_ts_micros: int
    ttl_seconds: int

    def expires_at_micros(self) -> int:
        return self.acquired_ts_micros + self.ttl_seconds * 1_000_000

    def expired(self, now_micros: int) -> bool:
        return now_micros >= self.expires_at_micros()


@dataclass(frozen=True)
class DeviceConfig:
    device_id: int
    capabilities: str = ""


@dataclass(frozen=True)
class SceneConfig:
    """Static description of one capture scene and its devices."""

    scene_id: str
    devices: tuple[DeviceConfig, ...]
    description: str = ""

    def __post_init__(self) -> None:
        ids = [d.device_id for d in self.devices]
        if len(ids) != len(set(ids)):
            raise ValueError(f"duplicate device ids in scene {self.scene_id!r}")

    def device_ids(self) -> list[int]:
        return [d.device_id for d in self.devices]


@dataclass
class Detection:
    """One detected object in a frame, pixel coordinates, origin top-left."""

    x: int
    y: int
    w: int
    h: int
    label: str
    score: float

    def to_payload(self) -> dict[str, Any]:
        return {
            "x": self.x,
            "y": self.y,
            "w": self.w,
            "h": self.h,
            "label": self.label,
            "score": self.score,
        }


def canonical_json(obj: Any) -> str:
    """Single-line JSON with sorted keys and no whitespace.

    Event payloads are stored in this form so SRT cue bodies stay on one line
    and identical payloads compare byte-equal.
    """
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass
class IngestStats:
    """Relay-side counters for one session's ingest stream."""

    session_id: uuid.UUID
    captured_hint: int = 0  # max frame_index seen + 1
    delivered: int = 0
    bytes_in: int = 0
    first_arrival_micros: int | None = None
    last_arrival_micros: int | None = None

    def achieved_fps(self) -> float:
        if self.delivered < 2:
            return 0.0
        assert self.first_arrival_micros is not None and self.last_arrival_micros is not None
        span = self.last_arrival_micros - self.first_arrival_micros
        if span <= 0:
            return 0.0
        return self.delivered / (span / 1_000_000)

    def to_payload(self) -> dict[str, Any]:
        return {
            "session_id": str(self.session_id),
            "captured_hint": self.captured_hint,
            "delivered": self.delivered,
            "bytes_in": self.bytes_in,
            "achieved_fps": self.achieved_fps(),
        }


@dataclass
class SessionSummary:
    """Agent-side counters reported when a capture run finishes.

    achieved_fps is delivered frames over the wall-clock run duration, which
    differs from the relay's arrival-based figure only by network jitter.
    """

    session_id: uuid.UUID
    captured: int = 0
    delivered: int = 0
    dropped: int = 0
    last_frame_index: int = -1
    achieved_fps: float = 0.0

    def to_payload(self) -> dict[str, Any]:
        return {
            "session_id": str(self.session_id),
            "captured": self.captured,
            "delivered": self.delivered,
            "dropped": self.dropped,
            "last_frame_index": self.last_frame_index,
            "achieved_fps": self.achieved_fps,
        }
