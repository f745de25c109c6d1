"""Binary wire and file formats: frame records, stream headers, segment files.

Everything is little-endian. Three formats live here:

* frame record — "EXFR" header (48 bytes) followed by the pixel payload;
  the unit that crosses the ingest socket and sits inside segment files.
* stream header — "EXHS" (64 bytes), sent once when an agent connects to
  the relay, announcing session identity and capture parameters.
* segment file — "EXSG" magic, version byte, concatenated frame records,
  and a trailing crc32 (zlib) over all preceding bytes.

RLE_RGB24 payloads are byte-level run-length encoded as (count u8 >= 1,
value u8) pairs; runs longer than 255 are split.
"""

from __future__ import annotations

import struct
import uuid
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterator

import numpy as np

from .types import RESOLUTION_PRESETS, FrameEncoding, FrameRecord

FRAME_MAGIC = b"EXFR"
FRAME_VERSION = 1
# magic, version, session_id, device_id, frame_index, capture_ts_micros,
# width, height, encoding, payload_len
_FRAME_HEADER = struct.Struct("<4sB16sHQQHHBI")
FRAME_HEADER_SIZE = _FRAME_HEADER.size
assert FRAME_HEADER_SIZE == 48

STREAM_MAGIC = b"EXHS"
# magic, session_id, device_id, fps, resolution name (zero-padded ASCII),
# flags, zero padding
_STREAM_HEADER = struct.Struct("<4s16sHB8sB32s")
STREAM_HEADER_SIZE = _STREAM_HEADER.size
assert STREAM_HEADER_SIZE == 64
FLAG_DETERMINISTIC_CLOCK = 0x01

SEGMENT_MAGIC = b"EXSG"
SEGMENT_VERSION = 1


class FrameCodecError(ValueError):
    """Base for malformed frame records; message names the violated field."""


class BadMagic(FrameCodecError):
    pass


class BadVersion(FrameCodecError):
    pass


class TruncatedRecord(FrameCodecError):
    pass


class PayloadMismatch(FrameCodecError):
    pass


class UnsupportedEncoding(FrameCodecError):
    pass


class SegmentError(ValueError):
    """Base for malformed segment files."""


class SegmentChecksumMismatch(SegmentError):
    pass


def rle_encode(raw: bytes) -> bytes:
    """Encode bytes as (count, value) pairs, runs capped at 255.

    A run of length L becomes L // 255 pairs of count 255 followed by one
    remainder pair, so every count is in 1..255.
    """
    if not raw:
        return b""
    arr = np.frombuffer(raw, dtype=np.uint8)
    change = np.flatnonzero(arr[1:] != arr[:-1])
    starts = np.concatenate(([0], change + 1))
    ends = np.concatenate((change + 1, [arr.size]))
    lengths = ends - starts
    values = arr[starts]

    full, rem = np.divmod(lengths, 255)
    chunks_per_run = full + (rem > 0)
    total_pairs = int(chunks_per_run.sum())
    counts = np.full(total_pairs, 255, dtype=np.uint8)
    # The last chunk of each run with a remainder carries that remainder.
    last_chunk_pos = np.cumsum(chunks_per_run) - 1
    has_rem = rem > 0
    counts[last_chunk_pos[has_rem]] = rem[has_rem].astype(np.uint8)

    pairs = np.empty((total_pairs, 2), dtype=np.uint8)
    pairs[:, 0] = counts
    pairs[:, 1] = np.repeat(values, chunks_per_run)
    return pairs.tobytes()


def rle_decode(data: bytes, expected_len: int) -> bytes:
    """Expand (count, value) pairs; must produce exactly expected_len bytes."""
    if len(data) % 2 != 0:
        raise PayloadMismatch(f"RLE payload has odd length {len(data)}")
    arr = np.frombuffer(data, dtype=np.uint8).reshape(-1, 2)
    counts = arr[:, 0].astype(np.int64)
    if arr.size and int(counts.min()) == 0:
        raise PayloadMismatch("RLE run with count 0")
    total = int(counts.sum())
    if total != expected_len:
        raise PayloadMismatch(f"RLE expands to {total} bytes, expected {expected_len}")
    return np.repeat(arr[:, 1], counts).tobytes()


def encode_frame_record(frame: FrameRecord) -> bytes:
    header = _FRAME_HEADER.pack(
        FRAME_MAGIC,
        FRAME_VERSION,
        frame.session_id.bytes,
        frame.device_id,
        frame.frame_index,
        frame.capture_ts_micros,
        frame.width,
        frame.height,
        int(frame.encoding),
        len(frame.payload),
    )
    return header + frame.payload


def decode_frame_record(data: bytes) -> FrameRecord:
    """Parse one complete frame record; data must be exactly one record."""
    if len(data) >= 4 and data[:4] != FRAME_MAGIC:
        raise BadMagic(f"magic {data[:4]!r}")
    if len(data) < FRAME_HEADER_SIZE:
        raise TruncatedRecord(f"header needs {FRAME_HEADER_SIZE} bytes, got {len(data)}")
    (
        magic,
        version,
        session_bytes,
        device_id,
        frame_index,
        capture_ts,
        width,
        height,
        encoding_raw,
        payload_len,
    ) = _FRAME_HEADER.unpack_from(data)
    if magic != FRAME_MAGIC:
        raise BadMagic(f"magic {magic!r}")
    if version != FRAME_VERSION:
        raise BadVersion(f"version {version}")
    try:
        encoding = FrameEncoding(encoding_raw)
    except ValueError:
        raise UnsupportedEncoding(f"encoding {encoding_raw}") from None
    if len(data) != FRAME_HEADER_SIZE + payload_len:
        raise TruncatedRecord(
            f"payload_len {payload_len} but {len(data) - FRAME_HEADER_SIZE} payload bytes present"
        )
    payload = data[FRAME_HEADER_SIZE:]
    frame = FrameRecord(
        session_id=uuid.UUID(bytes=session_bytes),
        device_id=device_id,
        frame_index=frame_index,
        capture_ts_micros=capture_ts,
        width=width,
        height=height,
        encoding=encoding,
        payload=payload,
    )
    # Validate payload length consistency now so corrupt records never
    # propagate past the decode boundary.
    decoded_payload(frame)
    return frame


def frame_payload_length(header: bytes) -> int:
    """payload_len from a 48-byte record header, validating magic and version.

    Streaming readers call this to learn how many payload bytes follow before
    the complete record can be decoded.
    """
    if len(header) != FRAME_HEADER_SIZE:
        raise TruncatedRecord(f"header needs {FRAME_HEADER_SIZE} bytes, got {len(header)}")
    if header[:4] != FRAME_MAGIC:
        raise BadMagic(f"magic {header[:4]!r}")
    if header[4] != FRAME_VERSION:
        raise BadVersion(f"version {header[4]}")
    return struct.unpack_from("<I", header, FRAME_HEADER_SIZE - 4)[0]


def decoded_payload(frame: FrameRecord) -> bytes:
    """Raw RGB24 bytes of a frame, expanding RLE; validates sizes."""
    expected = frame.width * frame.height * 3
    if frame.encoding is FrameEncoding.RAW_RGB24:
        if len(frame.payload) != expected:
            raise PayloadMismatch(
                f"payload_len {len(frame.payload)} != width*height*3 = {expected}"
            )
        return frame.payload
    if frame.encoding is FrameEncoding.RLE_RGB24:
        return rle_decode(frame.payload, expected)
    raise UnsupportedEncoding(f"encoding {frame.encoding}")


def frame_pixels(frame: FrameRecord) -> np.ndarray:
    """Frame pixels as an (h, w, 3) uint8 array (a copy, safe to mutate)."""
    raw = decoded_payload(frame)
    return np.frombuffer(raw, dtype=np.uint8).reshape(frame.height, frame.width, 3).copy()


@dataclass(frozen=True)
class StreamHeader:
    """Per-connection ingest announcement preceding frame records."""

    session_id: uuid.UUID
    device_id: int
    fps: int
    resolution: str
    deterministic_clock: bool


def encode_stream_header(header: StreamHeader) -> bytes:
    name = header.resolution.encode("ascii")
    if len(name) > 8:
        raise ValueError(f"resolution name too long: {header.resolution!r}")
    flags = FLAG_DETERMINISTIC_CLOCK if header.deterministic_clock else 0
    return _STREAM_HEADER.pack(
        STREAM_MAGIC,
        header.session_id.bytes,
        header.device_id,
        header.fps,
        name,
        flags,
        b"",
    )


def decode_stream_header(data: bytes) -> StreamHeader:
    if len(data) != STREAM_HEADER_SIZE:
        raise TruncatedRecord(f"stream header needs {STREAM_HEADER_SIZE} bytes, got {len(data)}")
    magic, session_bytes, device_id, fps, name, flags, _pad = _STREAM_HEADER.unpack(data)
    if magic != STREAM_MAGIC:
        raise BadMagic(f"magic {magic!r}")
    resolution = name.rstrip(b"\x00").decode("ascii")
    if resolution not in RESOLUTION_PRESETS:
        raise PayloadMismatch(f"unknown resolution {resolution!r}")
    return StreamHeader(
        session_id=uuid.UUID(bytes=session_bytes),
        device_id=device_id,
        fps=fps,
        resolution=resolution,
        deterministic_clock=bool(flags & FLAG_DETERMINISTIC_CLOCK),
    )


class SegmentWriter:
    """Incrementally writes one segment file; finalize() appends the crc."""

    def __init__(self, path: Path) -> None:
        self.path = path
        self.frame_count = 0
        self.first_frame_index: int | None = None
        self._crc = 0
        self._file: BinaryIO = open(path, "wb")
        prefix = SEGMENT_MAGIC + bytes([SEGMENT_VERSION])
        self._file.write(prefix)
        self._crc = zlib.crc32(prefix, self._crc)

    def append(self, encoded_record: bytes, frame_index: int) -> None:
        if self.first_frame_index is None:
            self.first_frame_index = frame_index
        self._file.write(encoded_record)
        self._crc = zlib.crc32(encoded_record, self._crc)
        self.frame_count += 1

    def finalize(self) -> int:
        """Write the crc trailer, close the file, return the crc value."""
        self._file.write(struct.pack("<I", self._crc))
        self._file.close()
        return self._crc


def iter_segment_records(path: Path) -> Iterator[FrameRecord]:
    """Yield frame records from a segment, validating magic and crc."""
    data = Path(path).read_bytes()
    if len(data) < 9:  # magic + version + crc
        raise SegmentError(f"{path}: too short to be a segment ({len(data)} bytes)")
    if data[:4] != SEGMENT_MAGIC:
        raise BadMagic(f"{path}: magic {data[:4]!r}")
    if data[4] != SEGMENT_VERSION:
        raise BadVersion(f"{path}: version {data[4]}")
    body, trailer = data[:-4], data[-4:]
    (stored_crc,) = struct.unpack("<I", trailer)
    actual_crc = zlib.crc32(body)
    if stored_crc != actual_crc:
        raise SegmentChecksumMismatch(
            f"{path}: stored crc {stored_crc:#010x} != computed {actual_crc:#010x}"
        )
    offset = 5
    while offset < len(body):
        if len(body) - offset < FRAME_HEADER_SIZE:
            raise TruncatedRecord(f"{path}: dangling {len(body) - offset} bytes at end")
        payload_len = struct.unpack_from("<I", body, offset + FRAME_HEADER_SIZE - 4)[0]
        end = offset + FRAME_HEADER_SIZE + payload_len
        if end > len(body):
            raise TruncatedRecord(f"{path}: record at offset {offset} overruns segment")
        yield decode_frame_record(body[offset:end])
        offset = end


def read_segment(path: Path) -> list[FrameRecord]:
    return list(iter_segment_records(path))


def segment_file_name(first_frame_index: int) -> str:
    return f"{first_frame_index:08d}.seg"
