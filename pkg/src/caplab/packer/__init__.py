"""Packing, verification, and replay of recorded session containers."""

from caplab.packer.container import (
    EVENTS_NAME,
    MANIFEST_NAME,
    SEGMENTS_DIR,
    SRT_NAME,
    NotAContainer,
    load_manifest,
    read_container_events,
    read_container_srt,
)
from caplab.packer.pack import Packer, pack_session
from caplab.packer.replay import FrameOutOfRange, last_delivered_index, replay
from caplab.packer.simulate import simulate_marker_positions, simulate_poses
from caplab.packer.verify import CheckResult, VerificationReport, verify_container

__all__ = [
    "CheckResult",
    "EVENTS_NAME",
    "FrameOutOfRange",
    "MANIFEST_NAME",
    "NotAContainer",
    "Packer",
    "SEGMENTS_DIR",
    "SRT_NAME",
    "VerificationReport",
    "last_delivered_index",
    "load_manifest",
    "pack_session",
    "read_container_events",
    "read_container_srt",
    "replay",
    "simulate_marker_positions",
    "simulate_poses",
    "verify_container",
]
