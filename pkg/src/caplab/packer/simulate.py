"""Offline re-simulation of a recorded session's motion.

Replays COMMAND events through the same kinematics and render-placement code
the agent runs, reproducing the marker position of every tick.  Used by the
container verifier to prove that the recorded pixels are exactly what the
logged commands imply — the end-to-end synchronization oracle.

The tick order here must stay in lockstep with AgentRuntime._stream:
apply commands due at tick i, step (ticks after the first), then place.
"""

from __future__ import annotations

from caplab.agent.kinematics import (
    DEFAULT_WHEELBASE_M,
    PoseState,
    apply_command_to_pose,
    step_kinematics,
)
from caplab.agent.render import marker_origin
from caplab.model import CommandKind


def simulate_poses(
    commands_by_frame: dict[int, list[tuple[CommandKind, float | int | None]]],
    fps: int,
    frame_count: int,
    wheelbase: float = DEFAULT_WHEELBASE_M,
) -> list[PoseState]:
    """Pose used to render each frame 0..frame_count-1."""
    dt = 1.0 / fps
    pose = PoseState()
    poses: list[PoseState] = []
    for i in range(frame_count):
        for kind, value in commands_by_frame.get(i, ()):
            pose = apply_command_to_pose(pose, kind, value)
        if i > 0:
            pose = step_kinematics(pose, dt, wheelbase)
        poses.append(pose)
    return poses


def simulate_marker_positions(
    commands_by_frame: dict[int, list[tuple[CommandKind, float | int | None]]],
    fps: int,
    frame_count: int,
    width: int,
    height: int,
    wheelbase: float = DEFAULT_WHEELBASE_M,
) -> list[tuple[int, int]]:
    """Expected marker top-left pixel for each frame 0..frame_count-1."""
    return [
        marker_origin(p.x, p.y, width, height)
        for p in simulate_poses(commands_by_frame, fps, frame_count, wheelbase)
    ]
