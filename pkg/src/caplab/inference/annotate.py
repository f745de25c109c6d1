"""Annotation: draw a one-pixel red outline around each detection.

The outline sits just outside the detection box so the detected pixels stay
untouched; parts of the outline that fall off the frame are clipped.  The
box itself must lie inside the frame — a detection that doesn't fit is a
caller bug, reported as BoxOutOfBounds.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from caplab.model import Detection, FrameEncoding, FrameRecord, frame_pixels, rle_encode

OUTLINE_COLOR = (255, 0, 0)


class BoxOutOfBounds(ValueError):
    """A detection box does not fit inside the frame it annotates."""


def draw_outline(pixels: np.ndarray, det: Detection) -> None:
    """Draw the outline for one detection in place."""
    height, width = pixels.shape[:2]
    if det.w <= 0 or det.h <= 0:
        raise BoxOutOfBounds(f"degenerate box {det.w}x{det.h}")
    if det.x < 0 or det.y < 0 or det.x + det.w > width or det.y + det.h > height:
        raise BoxOutOfBounds(
            f"box ({det.x},{det.y},{det.w},{det.h}) outside {width}x{height} frame"
        )
    color = np.array(OUTLINE_COLOR, dtype=np.uint8)
    left, right = det.x - 1, det.x + det.w  # outline columns
    top, bottom = det.y - 1, det.y + det.h  # outline rows
    col_lo, col_hi = max(left, 0), min(right, width - 1)
    if top >= 0:
        pixels[top, col_lo : col_hi + 1] = color
    if bottom <= height - 1:
        pixels[bottom, col_lo : col_hi + 1] = color
    row_lo, row_hi = max(det.y, 0), min(det.y + det.h - 1, height - 1)
    if left >= 0:
        pixels[row_lo : row_hi + 1, left] = color
    if right <= width - 1:
        pixels[row_lo : row_hi + 1, right] = color


def reencode(frame: FrameRecord, pixels: np.ndarray) -> FrameRecord:
    """New record with the given pixels, preserving the frame's encoding."""
    raw = np.ascontiguousarray(pixels, dtype=np.uint8).tobytes()
    if frame.encoding is FrameEncoding.RLE_RGB24:
        payload = rle_encode(raw)
    else:
        payload = raw
    return replace(frame, payload=payload)


def annotate(frame: FrameRecord, detections: list[Detection]) -> FrameRecord:
    """Outlined copy of a frame; encoding and header fields are preserved."""
    pixels = frame_pixels(frame)
    for det in detections:
        draw_outline(pixels, det)
    return reencode(frame, pixels)
