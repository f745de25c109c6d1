"""Shared domain types and bit-exact encodings used by every other module."""

from .codec import (
    FLAG_DETERMINISTIC_CLOCK,
    FRAME_HEADER_SIZE,
    FRAME_MAGIC,
    FRAME_VERSION,
    SEGMENT_MAGIC,
    SEGMENT_VERSION,
    STREAM_HEADER_SIZE,
    STREAM_MAGIC,
    BadMagic,
    BadVersion,
    FrameCodecError,
    PayloadMismatch,
    SegmentChecksumMismatch,
    SegmentError,
    SegmentWriter,
    StreamHeader,
    TruncatedRecord,
    UnsupportedEncoding,
    decode_frame_record,
    decode_stream_header,
    decoded_payload,
    encode_frame_record,
    encode_stream_header,
    frame_payload_length,
    frame_pixels,
    iter_segment_records,
    read_segment,
    rle_decode,
    rle_encode,
    segment_file_name,
)
from .pixels import (
    BACKGROUND_LEVEL,
    STRIP_BITS,
    extract_frame_index,
    write_index_strip,
)
from .srt import (
    CUE_CAP_MILLIS,
    MAX_SRT_MILLIS,
    OutOfRange,
    SrtCue,
    SrtParseError,
    UnsortedEvents,
    active_cues,
    build_srt,
    format_millis,
    frame_millis,
    parse_srt,
    srt_timestamp,
)
from .types import (
    BYTES_PER_PIXEL,
    COMMAND_RANGES,
    RESOLUTION_PRESETS,
    AppliedCommand,
    CommandKind,
    ControlCommand,
    Detection,
    DeviceConfig,
    EventKind,
    EventRecord,
    FrameEncoding,
    FrameRecord,
    IngestStats,
    ManifestParseError,
    SceneConfig,
    SceneLease,
    SegmentEntry,
    SessionManifest,
    SessionStatus,
    SessionSummary,
    canonical_json,
    clamp_command_value,
    frame_payload_size,
    status_rank,
)

__all__ = [name for name in dir() if not name.startswith("_")]
