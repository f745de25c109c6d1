"""Kinematic bicycle model for the simulated capture car.

Forward-Euler integration; the position update uses the heading from before
the step, and the heading update uses the steering set at the same tick, so
one step with speed v and steering s moves the car v*dt along the old
heading and then turns it by (v/wheelbase)*tan(s)*dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from caplab.model import CommandKind

MAX_SPEED_MPS = 0.5
MAX_STEERING_RAD = math.radians(30.0)
DEFAULT_WHEELBASE_M = 0.25


@dataclass(frozen=True)
class PoseState:
    """Car pose and control values; a value object, steps return new ones."""

    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0
    speed: float = 0.0
    steering: float = 0.0
    cam_pan: float = 0.0
    cam_tilt: float = 0.0


def step_kinematics(state: PoseState, dt: float, wheelbase: float = DEFAULT_WHEELBASE_M) -> PoseState:
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if wheelbase <= 0:
        raise ValueError(f"wheelbase must be positive, got {wheelbase}")
    return replace(
        state,
        x=state.x + state.speed * math.cos(state.heading) * dt,
        y=state.y + state.speed * math.sin(state.heading) * dt,
        heading=state.heading + (state.speed / wheelbase) * math.tan(state.steering) * dt,
    )


def apply_command_to_pose(state: PoseState, kind: CommandKind, value: float | int | None) -> PoseState:
    """Set control fields from an already-clamped command value.

    SET_SPEED is a percentage of MAX_SPEED_MPS; angles arrive in degrees.
    The change takes effect at the tick where this is called, i.e. the next
    rendered frame reflects it.
    """
    if kind is CommandKind.SET_SPEED:
        assert value is not None
        return replace(state, speed=(value / 100.0) * MAX_SPEED_MPS)
    if kind is CommandKind.SET_STEERING:
        assert value is not None
        return replace(state, steering=math.radians(value))
    if kind is CommandKind.SET_CAM_PAN:
        assert value is not None
        return replace(state, cam_pan=math.radians(value))
    if kind is CommandKind.SET_CAM_TILT:
        assert value is not None
        return replace(state, cam_tilt=math.radians(value))
    if kind is CommandKind.STOP:
        return replace(state, speed=0.0, steering=0.0)
    raise ValueError(f"unknown command kind {kind!r}")
