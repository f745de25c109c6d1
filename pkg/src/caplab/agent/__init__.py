"""Simulated capture device: kinematics, renderer, and streaming loop."""

from .bucket import TokenBucket
from .kinematics import (
    DEFAULT_WHEELBASE_M,
    MAX_SPEED_MPS,
    MAX_STEERING_RAD,
    PoseState,
    apply_command_to_pose,
    step_kinematics,
)
from .render import MARKER_SIZE, WORLD_WRAP_M, marker_origin, render_frame, render_pixels
from .runtime import (
    AgentConfig,
    AgentError,
    AgentRuntime,
    GatewayUnreachable,
    RegistrationRefused,
    RelayDisconnected,
    SessionNotRunning,
)
from .script import ScriptedCommand, format_script, load_script, parse_script

__all__ = [name for name in dir() if not name.startswith("_")]
