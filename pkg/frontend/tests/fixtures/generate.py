#!/usr/bin/env python3
"""Regenerate the console's binary and JSON test fixtures.

Run from this directory with the backend package installed:

    python3 generate.py

Outputs are committed so `npm test` never needs Python for the unit suite:

    records.bin        concatenated frame records (raw and RLE payloads)
    records.json       expected header fields + pixel digests per record
    golden_session.srt copy of the repo's hand-derived reference sidecar
    golden_cues.json   expected parse of that file
"""

from __future__ import annotations

import hashlib
import json
import uuid
from pathlib import Path

from caplab.agent.render import marker_origin, render_pixels
from caplab.model import (
    FrameEncoding,
    FrameRecord,
    encode_frame_record,
    parse_srt,
    rle_encode,
)

HERE = Path(__file__).parent
GOLDEN_SRT = HERE / ".." / ".." / ".." / "tests" / "data" / "golden_session.srt"

SESSION = uuid.UUID("00112233-4455-6677-8899-aabbccddeeff")
DEVICE = 7
WIDTH, HEIGHT = 64, 48


def rendered(frame_index: int, x: float, y: float, ts: int) -> FrameRecord:
    pixels = render_pixels(x, y, frame_index, WIDTH, HEIGHT)
    return FrameRecord(
        session_id=SESSION,
        device_id=DEVICE,
        frame_index=frame_index,
        capture_ts_micros=ts,
        width=WIDTH,
        height=HEIGHT,
        encoding=FrameEncoding.RAW_RGB24,
        payload=pixels.tobytes(),
    )


def main() -> None:
    records: list[tuple[FrameRecord, dict]] = []

    def add(record: FrameRecord, **extra) -> None:
        records.append((record, extra))

    poses = [(0, 0.0, 0.0), (1, 0.5, 0.25), (123_456_789, 3.7, 9.9)]
    for index, x, y in poses:
        ox, oy = marker_origin(x, y, WIDTH, HEIGHT)
        add(rendered(index, x, y, ts=1_786_846_959_000_000 + index), strip_index=index, marker_origin=[ox, oy])

    # Same pixels as the first rendered frame, run-length encoded.
    first = records[0][0]
    add(
        FrameRecord(
            session_id=SESSION,
            device_id=DEVICE,
            frame_index=first.frame_index,
            capture_ts_micros=first.capture_ts_micros,
            width=first.width,
            height=first.height,
            encoding=FrameEncoding.RLE_RGB24,
            payload=rle_encode(first.payload),
        ),
        strip_index=first.frame_index,
        raw_twin=0,
    )

    # Tiny handcrafted frame: every payload byte distinct.
    add(
        FrameRecord(
            session_id=uuid.UUID(int=0),
            device_id=0,
            frame_index=0,
            capture_ts_micros=0,
            width=2,
            height=2,
            encoding=FrameEncoding.RAW_RGB24,
            payload=bytes(range(12)),
        )
    )

    # Largest frame index JavaScript numbers can hold exactly.
    add(
        FrameRecord(
            session_id=uuid.UUID("ffffffff-ffff-ffff-ffff-ffffffffffff"),
            device_id=65_535,
            frame_index=2**53 - 1,
            capture_ts_micros=2**53 - 1,
            width=1,
            height=1,
            encoding=FrameEncoding.RAW_RGB24,
            payload=b"\xff\x00\x80",
        )
    )

    blob = bytearray()
    meta = []
    for record, extra in records:
        encoded = encode_frame_record(record)
        raw = (
            record.payload
            if record.encoding is FrameEncoding.RAW_RGB24
            else records[extra["raw_twin"]][0].payload
        )
        meta.append(
            {
                "offset": len(blob),
                "length": len(encoded),
                "session_id": str(record.session_id),
                "device_id": record.device_id,
                "frame_index": record.frame_index,
                "capture_ts_micros": record.capture_ts_micros,
                "width": record.width,
                "height": record.height,
                "encoding": int(record.encoding),
                "payload_len": len(record.payload),
                "rgb_sha256": hashlib.sha256(raw).hexdigest(),
                **extra,
            }
        )
        blob.extend(encoded)

    (HERE / "records.bin").write_bytes(bytes(blob))
    (HERE / "records.json").write_text(json.dumps(meta, indent=2) + "\n")

    srt_text = GOLDEN_SRT.read_text(encoding="utf-8")
    (HERE / "golden_session.srt").write_text(srt_text, encoding="utf-8")
    cues = [
        {
            "index": c.index,
            "start_millis": c.start_millis,
            "end_millis": c.end_millis,
            "kind": c.kind,
            "payload": c.payload,
        }
        for c in parse_srt(srt_text)
    ]
    (HERE / "golden_cues.json").write_text(json.dumps(cues, indent=2) + "\n")
    print(f"wrote {len(records)} records ({len(blob)} bytes), {len(cues)} cues")


if __name__ == "__main__":
    main()
