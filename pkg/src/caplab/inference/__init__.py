"""Frame processors: detection, annotation, and the live attach pipeline."""

from caplab.inference.annotate import BoxOutOfBounds, annotate, draw_outline
from caplab.inference.detect import MARKER_SIZE, detect_marker
from caplab.inference.pipeline import (
    PROCESSORS,
    FrameMeta,
    attach_processor,
    get_processor,
    marker_processor,
)

__all__ = [
    "BoxOutOfBounds",
    "FrameMeta",
    "MARKER_SIZE",
    "PROCESSORS",
    "annotate",
    "attach_processor",
    "detect_marker",
    "draw_outline",
    "get_processor",
    "marker_processor",
]
