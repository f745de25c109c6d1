"""Packing, verification, and replay over synthetic recorded sessions."""

import json
import struct
from pathlib import Path

import pytest

from caplab.agent.render import render_pixels
from caplab.gateway.core import GatewayCore, SessionEntry
from caplab.gateway.errors import SessionNotStopped
from caplab.model import (
    CommandKind,
    EventKind,
    FrameEncoding,
    FrameRecord,
    IngestStats,
    SegmentEntry,
    SegmentWriter,
    SessionStatus,
    clamp_command_value,
    encode_frame_record,
    frame_millis,
    parse_srt,
    read_segment,
    rle_encode,
    segment_file_name,
)
from caplab.packer import (
    FrameOutOfRange,
    last_delivered_index,
    load_manifest,
    pack_session,
    read_container_srt,
    replay,
    verify_container,
)
from caplab.packer.simulate import simulate_poses

from tests.support import make_core, make_entry

FPS = 30
W, H = 640, 360


def build_recorded_session(
    core: GatewayCore,
    *,
    frames: int = 130,
    commands: dict[int, list[tuple[CommandKind, float | int | None]]] | None = None,
    markers: tuple[tuple[int, str], ...] = (),
    segment_frames: int = 50,
    deterministic: bool = True,
) -> SessionEntry:
    """Synthesize the gateway-side state of a finished deterministic capture.

    Renders the same pixels the device would have rendered for the logged
    commands, writes them into rotating segments, and logs the event stream —
    a finished session without the wall-clock cost of streaming one.
    """
    commands = commands or {}
    entry = make_entry(core, status=SessionStatus.LIVE, fps=FPS)
    entry.deterministic_clock = deterministic
    entry.start_ts_micros = 0

    clamped: dict[int, list[tuple[CommandKind, float | int | None]]] = {
        frame: [(kind, clamp_command_value(kind, value)) for kind, value in cmds]
        for frame, cmds in commands.items()
    }

    core.append_event(entry.session_id, EventKind.LIFECYCLE, 0, {"state": "started"}, ts_micros=0)
    for frame, cmds in sorted(clamped.items()):
        for kind, value in cmds:
            payload: dict = {"kind": kind.value}
            if value is not None:
                payload["value"] = value
            core.append_event(
                entry.session_id,
                EventKind.COMMAND,
                frame,
                payload,
                ts_micros=frame * 1_000_000 // FPS,
            )
    for frame, text in markers:
        core.append_event(
            entry.session_id,
            EventKind.MARKER,
            frame,
            {"text": text},
            ts_micros=frame * 1_000_000 // FPS,
        )

    poses = simulate_poses(clamped, FPS, frames)
    seg_dir = entry.container_dir / "segments"
    writer: SegmentWriter | None = None
    total_bytes = 0
    for i in range(frames):
        pixels = render_pixels(poses[i].x, poses[i].y, i, W, H)
        record = FrameRecord(
            session_id=entry.session_id,
            device_id=entry.device_id,
            frame_index=i,
            capture_ts_micros=i * 1_000_000 // FPS,
            width=W,
            height=H,
            encoding=FrameEncoding.RLE_RGB24,
            payload=rle_encode(pixels.tobytes()),
        )
        encoded = encode_frame_record(record)
        total_bytes += len(encoded)
        if writer is not None and writer.frame_count >= segment_frames:
            _finish_segment(entry, writer)
            writer = None
        if writer is None:
            writer = SegmentWriter(seg_dir / segment_file_name(i))
        writer.append(encoded, i)
    if writer is not None and writer.frame_count > 0:
        _finish_segment(entry, writer)

    core.append_event(
        entry.session_id,
        EventKind.LIFECYCLE,
        max(frames - 1, 0),
        {"state": "stopped"},
        ts_micros=max(frames - 1, 0) * 1_000_000 // FPS,
    )
    entry.ingest_stats = IngestStats(
        session_id=entry.session_id,
        captured_hint=frames,
        delivered=frames,
        bytes_in=total_bytes,
        first_arrival_micros=1,
        last_arrival_micros=1 + frames * 1_000_000 // FPS,
    )
    entry.ingest_started = True
    entry.ingest_done.set()
    entry.advance(SessionStatus.STOPPING)
    return entry


def _finish_segment(entry: SessionEntry, writer: SegmentWriter) -> None:
    crc = writer.finalize()
    entry.segments.append(
        SegmentEntry(
            file=f"segments/{writer.path.name}",
            first_frame_index=writer.first_frame_index,
            frame_count=writer.frame_count,
            crc32=crc,
        )
    )


COMMANDS: dict[int, list[tuple[CommandKind, float | int | None]]] = {
    2: [(CommandKind.SET_SPEED, 100)],
    40: [(CommandKind.SET_STEERING, 15)],
    80: [(CommandKind.SET_SPEED, -50)],
    110: [(CommandKind.STOP, None)],
}
MARKERS = ((25, "first look"), (95, "second look"))


def packed_container(tmp_path: Path, **kwargs):
    core = make_core(tmp_path)
    entry = build_recorded_session(core, commands=COMMANDS, markers=MARKERS, **kwargs)
    manifest = pack_session(core, entry.session_id)
    return core, entry, manifest


# -- pack ----------------------------------------------------------------------


def test_pack_writes_manifest_and_srt(tmp_path: Path) -> None:
    core, entry, manifest = packed_container(tmp_path)
    assert entry.status is SessionStatus.PACKED
    assert entry.packed_event.is_set()
    assert manifest.frame_count == 130
    assert manifest.fps == FPS
    assert manifest.deterministic_clock is True
    assert [s.first_frame_index for s in manifest.segments] == [0, 50, 100]
    assert [s.frame_count for s in manifest.segments] == [50, 50, 30]
    assert load_manifest(entry.container_dir) == manifest

    cues = parse_srt(read_container_srt(entry.container_dir))
    # started + 4 commands + 2 markers + stopped; the later "packed" lifecycle
    # event must not appear because it postdates the pack snapshot
    assert len(cues) == 8
    assert [c.kind for c in cues] == [
        "LIFECYCLE",
        "COMMAND",
        "MARKER",
        "COMMAND",
        "COMMAND",
        "MARKER",
        "COMMAND",
        "LIFECYCLE",
    ]
    assert all("packed" not in c.payload for c in cues)
    packed_events = [e for e in entry.events if '"state":"packed"' in e.payload]
    assert len(packed_events) == 1


def test_pack_is_idempotent(tmp_path: Path) -> None:
    core, entry, manifest = packed_container(tmp_path)
    events_before = len(entry.events)
    again = pack_session(core, entry.session_id)
    assert again == manifest
    assert len(entry.events) == events_before


def test_pack_requires_stopping(tmp_path: Path) -> None:
    core = make_core(tmp_path)
    entry = make_entry(core, status=SessionStatus.LIVE)
    with pytest.raises(SessionNotStopped):
        pack_session(core, entry.session_id)


def test_pack_never_started_session(tmp_path: Path) -> None:
    core = make_core(tmp_path)
    entry = make_entry(core, status=SessionStatus.LIVE, fps=0)
    entry.status = SessionStatus.STOPPING
    manifest = pack_session(core, entry.session_id)
    assert manifest.frame_count == 0
    assert manifest.segments == ()
    assert read_container_srt(entry.container_dir) == ""


def test_pack_stretches_srt_for_late_marker(tmp_path: Path) -> None:
    core = make_core(tmp_path)
    entry = build_recorded_session(
        core, frames=60, markers=((75, "beyond the last delivered frame"),)
    )
    pack_session(core, entry.session_id)
    cues = parse_srt(read_container_srt(entry.container_dir))
    marker_cue = next(c for c in cues if c.kind == "MARKER")
    assert marker_cue.start_millis == frame_millis(75, FPS)
    # the timeline was stretched to frame 76 so the cue stays representable
    assert marker_cue.end_millis == frame_millis(76, FPS)


# -- verify ---------------------------------------------------------------------


def test_verify_passes_on_clean_container(tmp_path: Path) -> None:
    _, entry, _ = packed_container(tmp_path)
    report = verify_container(entry.container_dir)
    assert report.ok, report.summary()
    assert report.check("segments").checked == 130
    assert report.check("frame-indices").checked == 130
    assert report.check("command-range").checked == 4
    assert report.check("resimulation").checked == 130
    assert "OK" in report.summary()


def test_verify_skips_resimulation_for_wall_clock(tmp_path: Path) -> None:
    core = make_core(tmp_path)
    entry = build_recorded_session(core, frames=20, deterministic=False)
    pack_session(core, entry.session_id)
    report = verify_container(entry.container_dir)
    assert report.ok
    resim = report.check("resimulation")
    assert resim.checked == 0
    assert "skipped" in resim.detail


def test_verify_flags_corrupt_segment_bytes(tmp_path: Path) -> None:
    _, entry, manifest = packed_container(tmp_path)
    seg = manifest.segments[1]
    path = entry.container_dir / seg.file
    raw = bytearray(path.read_bytes())
    raw[100] ^= 0xFF  # flip one payload byte; the crc trailer now lies
    path.write_bytes(bytes(raw))

    report = verify_container(entry.container_dir)
    assert not report.ok
    seg_check = report.check("segments")
    assert not seg_check.ok
    assert seg_check.first_bad_frame == seg.first_frame_index


def test_verify_flags_missing_segment(tmp_path: Path) -> None:
    _, entry, manifest = packed_container(tmp_path)
    (entry.container_dir / manifest.segments[2].file).unlink()
    report = verify_container(entry.container_dir)
    assert not report.ok
    assert not report.check("segments").ok
    assert report.check("segments").first_bad_frame == 100


def _rewrite_segment(container: Path, seg: SegmentEntry, records: list[FrameRecord]) -> None:
    """Replace a segment's records, keeping crc and manifest consistent."""
    path = container / seg.file
    path.unlink()
    writer = SegmentWriter(path)
    for record in records:
        writer.append(encode_frame_record(record), record.frame_index)
    crc = writer.finalize()
    manifest_doc = json.loads((container / "manifest.json").read_text())
    for item in manifest_doc["segments"]:
        if item["file"] == seg.file:
            item["crc32"] = crc
            item["frame_count"] = len(records)
            item["first_frame_index"] = records[0].frame_index
    (container / "manifest.json").write_text(json.dumps(manifest_doc, indent=2) + "\n")


def test_verify_flags_reordered_frames(tmp_path: Path) -> None:
    _, entry, manifest = packed_container(tmp_path)
    seg = manifest.segments[1]
    records = read_segment(entry.container_dir / seg.file)
    records[3], records[4] = records[4], records[3]
    _rewrite_segment(entry.container_dir, seg, records)

    report = verify_container(entry.container_dir)
    assert report.check("segments").ok  # the files themselves are coherent
    indices = report.check("frame-indices")
    assert not indices.ok
    assert indices.first_bad_frame == seg.first_frame_index + 3


def test_verify_flags_mislabeled_frame_header(tmp_path: Path) -> None:
    from dataclasses import replace

    _, entry, manifest = packed_container(tmp_path)
    seg = manifest.segments[0]
    records = read_segment(entry.container_dir / seg.file)
    # header claims a later index than the pixels embed; reindex the tail so
    # the sequence stays strictly increasing and only the strip disagrees
    records[10] = replace(records[10], frame_index=records[10].frame_index + 1000)
    records[11:] = [replace(r, frame_index=r.frame_index + 2000) for r in records[11:]]
    _rewrite_segment(entry.container_dir, seg, records)

    report = verify_container(entry.container_dir)
    indices = report.check("frame-indices")
    assert not indices.ok
    assert indices.first_bad_frame == 1010


def test_verify_flags_command_outside_recording(tmp_path: Path) -> None:
    _, entry, _ = packed_container(tmp_path)
    manifest_path = entry.container_dir / "manifest.json"
    doc = json.loads(manifest_path.read_text())
    doc["frame_count"] = 100  # the STOP command at frame 110 is now out of range
    manifest_path.write_text(json.dumps(doc, indent=2) + "\n")

    report = verify_container(entry.container_dir)
    commands = report.check("command-range")
    assert not commands.ok
    assert commands.first_bad_frame == 110


def test_verify_flags_pixel_divergence(tmp_path: Path) -> None:
    from dataclasses import replace

    from caplab.model import frame_pixels

    _, entry, manifest = packed_container(tmp_path)
    seg = manifest.segments[2]
    records = read_segment(entry.container_dir / seg.file)
    pixels = frame_pixels(records[7])
    pixels[5, 100] = (1, 2, 3)  # row 5: the index strip stays untouched
    records[7] = replace(records[7], payload=rle_encode(pixels.tobytes()))
    _rewrite_segment(entry.container_dir, seg, records)

    report = verify_container(entry.container_dir)
    assert report.check("segments").ok
    assert report.check("frame-indices").ok
    resim = report.check("resimulation")
    assert not resim.ok
    assert resim.first_bad_frame == seg.first_frame_index + 7


def test_verify_flags_capture_ts_drift(tmp_path: Path) -> None:
    from dataclasses import replace

    _, entry, manifest = packed_container(tmp_path)
    seg = manifest.segments[0]
    records = read_segment(entry.container_dir / seg.file)
    records[5] = replace(records[5], capture_ts_micros=records[5].capture_ts_micros + 1)
    _rewrite_segment(entry.container_dir, seg, records)

    report = verify_container(entry.container_dir)
    resim = report.check("resimulation")
    assert not resim.ok
    assert resim.first_bad_frame == 5


# -- replay ----------------------------------------------------------------------


def test_replay_walks_all_frames_with_cues(tmp_path: Path) -> None:
    _, entry, _ = packed_container(tmp_path)
    steps = list(replay(entry.container_dir))
    assert [record.frame_index for record, _ in steps] == list(range(130))
    # the SET_SPEED command cue is active exactly on its own frames
    record, cues = steps[2]
    assert any(c.kind == "COMMAND" and "SET_SPEED" in c.payload for c in cues)
    record, cues = steps[25]
    assert any(c.kind == "MARKER" for c in cues)
    record, cues = steps[70]
    assert cues == ()


def test_replay_honors_from_frame(tmp_path: Path) -> None:
    _, entry, _ = packed_container(tmp_path)
    assert last_delivered_index(entry.container_dir) == 129
    steps = list(replay(entry.container_dir, from_frame=120))
    assert [record.frame_index for record, _ in steps] == list(range(120, 130))


def test_replay_rejects_out_of_range_start(tmp_path: Path) -> None:
    _, entry, _ = packed_container(tmp_path)
    with pytest.raises(FrameOutOfRange):
        list(replay(entry.container_dir, from_frame=130))
    with pytest.raises(FrameOutOfRange):
        list(replay(entry.container_dir, from_frame=-1))
