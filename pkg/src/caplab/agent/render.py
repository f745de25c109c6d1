"""Deterministic synthetic frame renderer.

Every frame is a mid-gray canvas with two features:

* a 32x32 pure-white marker square whose position is a fixed function of the
  car's (x, y) — the world wraps every 10 m in each axis so the marker stays
  on screen forever;
* the row-0 index strip encoding frame_index (drawn last so it is readable
  even when the marker passes underneath).

Identical (state, frame_index, preset) inputs produce byte-identical frames,
which is what makes offline re-simulation able to verify a recording.
"""

from __future__ import annotations

import math
import uuid

import numpy as np

from caplab.model import (
    RESOLUTION_PRESETS,
    FrameEncoding,
    FrameRecord,
    write_index_strip,
)

BACKGROUND_LEVEL = 128
MARKER_SIZE = 32
WORLD_WRAP_M = 10.0


def marker_origin(x: float, y: float, width: int, height: int) -> tuple[int, int]:
    """Top-left pixel of the marker for a car at world position (x, y)."""
    fx = (x / WORLD_WRAP_M) % 1.0  # non-negative fractional part
    fy = (y / WORLD_WRAP_M) % 1.0
    u = math.floor(fx * (width - MARKER_SIZE - 1))
    v = math.floor(fy * (height - MARKER_SIZE - 1))
    return u, v


def render_pixels(x: float, y: float, frame_index: int, width: int, height: int) -> np.ndarray:
    pixels = np.full((height, width, 3), BACKGROUND_LEVEL, dtype=np.uint8)
    u, v = marker_origin(x, y, width, height)
    pixels[v : v + MARKER_SIZE, u : u + MARKER_SIZE] = 255
    write_index_strip(pixels, frame_index)
    return pixels


def render_frame(
    state,
    frame_index: int,
    preset: str,
    *,
    session_id: uuid.UUID,
    device_id: int,
    capture_ts_micros: int,
) -> FrameRecord:
    width, height = RESOLUTION_PRESETS[preset]
    pixels = render_pixels(state.x, state.y, frame_index, width, height)
    return FrameRecord(
        session_id=session_id,
        device_id=device_id,
        frame_index=frame_index,
        capture_ts_micros=capture_ts_micros,
        width=width,
        height=height,
        encoding=FrameEncoding.RAW_RGB24,
        payload=pixels.tobytes(),
    )
