"""Container verification: prove a recording is intact and self-consistent.

Four checks, reported individually with the first offending frame:

  segments       every segment file decodes, its crc32 trailer matches both
                 the bytes and the manifest entry, and record identity/count
                 agree with the manifest
  frame-indices  pixel-embedded indices equal header indices, and indices
                 strictly increase across the recording
  command-range  every COMMAND event's frame_index lies in [0, frame_count)
  resimulation   for deterministic-clock sessions, re-running the logged
                 commands through the kinematics and renderer reproduces
                 every recorded frame byte-for-byte (marker position and
                 index strip included) plus every capture timestamp

The verifier never raises on bad content — only on paths that are not a
container at all.  Bad content comes back as failed checks.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from caplab.agent.kinematics import DEFAULT_WHEELBASE_M
from caplab.agent.render import render_pixels
from caplab.model import (
    CommandKind,
    EventKind,
    FrameCodecError,
    FrameRecord,
    SegmentError,
    SessionManifest,
    decoded_payload,
    extract_frame_index,
    frame_pixels,
    read_segment,
)
from caplab.packer.container import load_manifest, read_container_events
from caplab.packer.simulate import simulate_poses

# Re-simulation replays every tick up to the highest recorded frame_index; a
# corrupt header could claim an absurd index, so bound the work instead of
# trusting it (1M ticks ≈ a 9-hour session at 30 fps).
MAX_RESIM_FRAMES = 1_000_000


@dataclass
class CheckResult:
    name: str
    ok: bool = True
    checked: int = 0
    first_bad_frame: int | None = None
    detail: str = ""

    def fail(self, detail: str, frame_index: int | None = None) -> None:
        if self.ok:
            self.detail = detail
            self.first_bad_frame = frame_index
        self.ok = False


@dataclass
class VerificationReport:
    container: Path
    manifest: SessionManifest
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary(self) -> str:
        lines = [f"container {self.container}: {'OK' if self.ok else 'FAILED'}"]
        for c in self.checks:
            status = "pass" if c.ok else "FAIL"
            line = f"  {c.name:<14} {status}  ({c.checked} checked)"
            if not c.ok:
                line += f"  first bad frame: {c.first_bad_frame}  {c.detail}"
            elif c.detail:
                line += f"  {c.detail}"
            lines.append(line)
        return "\n".join(lines)


def _iter_frames(container: Path, manifest: SessionManifest, segments_check: CheckResult) -> Iterator[FrameRecord]:
    for seg in manifest.segments:
        path = Path(container) / seg.file
        if not path.is_file():
            segments_check.fail(f"missing segment {seg.file}", seg.first_frame_index)
            continue
        raw = path.read_bytes()
        try:
            records = read_segment(path)
        except (SegmentError, FrameCodecError) as exc:
            segments_check.fail(f"{seg.file}: {exc}", seg.first_frame_index)
            continue
        (stored_crc,) = struct.unpack("<I", raw[-4:])
        if stored_crc != seg.crc32:
            segments_check.fail(
                f"{seg.file}: trailer crc {stored_crc:#010x} != manifest {seg.crc32:#010x}",
                seg.first_frame_index,
            )
        if len(records) != seg.frame_count:
            segments_check.fail(
                f"{seg.file}: {len(records)} records, manifest says {seg.frame_count}",
                seg.first_frame_index,
            )
        if records and records[0].frame_index != seg.first_frame_index:
            segments_check.fail(
                f"{seg.file}: first frame {records[0].frame_index}, manifest says {seg.first_frame_index}",
                seg.first_frame_index,
            )
        for rec in records:
            if rec.session_id != manifest.session_id or rec.device_id != manifest.device_id:
                segments_check.fail(
                    f"{seg.file}: frame {rec.frame_index} belongs to another session",
                    rec.frame_index,
                )
            segments_check.checked += 1
            yield rec


def verify_container(container: Path, *, wheelbase: float = DEFAULT_WHEELBASE_M) -> VerificationReport:
    """Run all integrity checks on a packed container."""
    container = Path(container)
    manifest = load_manifest(container)

    segments_check = CheckResult("segments")
    indices_check = CheckResult("frame-indices")
    commands_check = CheckResult("command-range")
    resim_check = CheckResult("resimulation")
    report = VerificationReport(
        container=container,
        manifest=manifest,
        checks=[segments_check, indices_check, commands_check, resim_check],
    )

    frames = list(_iter_frames(container, manifest, segments_check))

    last_index: int | None = None
    for rec in frames:
        embedded = int(extract_frame_index(frame_pixels(rec)))
        if embedded != rec.frame_index:
            indices_check.fail(
                f"pixel strip says {embedded}, header says {rec.frame_index}", rec.frame_index
            )
        if last_index is not None and rec.frame_index <= last_index:
            indices_check.fail(
                f"frame_index {rec.frame_index} after {last_index}", rec.frame_index
            )
        last_index = rec.frame_index
        indices_check.checked += 1

    events = read_container_events(container, manifest.session_id)
    command_events = [e for e in events if e.kind is EventKind.COMMAND]
    for event in command_events:
        if not 0 <= event.frame_index < manifest.frame_count:
            commands_check.fail(
                f"COMMAND at frame {event.frame_index}, frame_count {manifest.frame_count}",
                event.frame_index,
            )
        commands_check.checked += 1

    max_index = max((rec.frame_index for rec in frames), default=-1)
    if not manifest.deterministic_clock:
        resim_check.detail = "skipped: wall-clock session"
    elif max_index >= MAX_RESIM_FRAMES:
        resim_check.fail(f"frame_index {max_index} too large to re-simulate", max_index)
    elif frames:
        commands_by_frame: dict[int, list[tuple[CommandKind, float | int | None]]] = {}
        for event in command_events:
            body = event.payload_dict()
            commands_by_frame.setdefault(event.frame_index, []).append(
                (CommandKind(body["kind"]), body.get("value"))
            )
        poses = simulate_poses(commands_by_frame, manifest.fps, max_index + 1, wheelbase)
        for rec in frames:
            pose = poses[rec.frame_index]
            expected = render_pixels(pose.x, pose.y, rec.frame_index, rec.width, rec.height)
            if expected.tobytes() != decoded_payload(rec):
                resim_check.fail("recorded pixels differ from re-simulation", rec.frame_index)
            expected_ts = (
                manifest.start_ts_micros + rec.frame_index * 1_000_000 // manifest.fps
            )
            if rec.capture_ts_micros != expected_ts:
                resim_check.fail(
                    f"capture ts {rec.capture_ts_micros}, re-simulation says {expected_ts}",
                    rec.frame_index,
                )
            resim_check.checked += 1

    return report
