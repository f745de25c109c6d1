"""Marker detection: find the one solid white square a device renders.

The detector never looks at row 0, because the frame-index strip lives there
and may overwrite part of a marker that touches the top edge.  A marker with
its body in rows 1..31 and width 32 can only be a 32x32 square whose top row
was hidden by the strip, so it is reported at y=0.
"""

from __future__ import annotations

import numpy as np

from caplab.model import Detection

MARKER_SIZE = 32
MARKER_LABEL = "marker"


def detect_marker(pixels: np.ndarray) -> list[Detection]:
    """Find the 32x32 pure-white marker in an (h, w, 3) uint8 frame.

    Returns one Detection per marker found (zero or one for frames our
    devices render).  Candidate regions that are white but not an exact
    32-wide square are not markers and yield nothing.
    """
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ValueError(f"expected (h, w, 3) pixels, got shape {pixels.shape}")
    white = (pixels == 255).all(axis=2)
    white[0, :] = False  # row 0 belongs to the index strip

    rows = np.flatnonzero(white.any(axis=1))
    if rows.size == 0:
        return []
    cols = np.flatnonzero(white.any(axis=0))
    r0, r1 = int(rows[0]), int(rows[-1])
    c0, c1 = int(cols[0]), int(cols[-1])
    hh = r1 - r0 + 1
    ww = c1 - c0 + 1

    if ww != MARKER_SIZE:
        return []
    if hh == MARKER_SIZE:
        y = r0
    elif hh == MARKER_SIZE - 1 and r0 == 1:
        y = 0  # top row hidden under the index strip
    else:
        return []
    if not white[r0 : r1 + 1, c0 : c1 + 1].all():
        return []
    return [Detection(x=c0, y=y, w=MARKER_SIZE, h=MARKER_SIZE, label=MARKER_LABEL, score=1.0)]
