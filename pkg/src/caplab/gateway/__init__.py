"""Coordination service: scene leases, session lifecycle, device control,
event log, and the HTTP/WebSocket client surface."""

from caplab.gateway.core import GatewayCore, SessionEntry
from caplab.gateway.errors import (
    AgentTimeout,
    DeviceBusy,
    DeviceOffline,
    GatewayError,
    LeaseInvalid,
    MalformedPayload,
    NotPacked,
    SceneBusy,
    SessionNotLive,
    SessionNotStopped,
    UnknownDevice,
    UnknownProcessor,
    UnknownScene,
    UnknownSession,
)

__all__ = [
    "AgentTimeout",
    "DeviceBusy",
    "DeviceOffline",
    "GatewayCore",
    "GatewayError",
    "LeaseInvalid",
    "MalformedPayload",
    "NotPacked",
    "SceneBusy",
    "SessionEntry",
    "SessionNotLive",
    "SessionNotStopped",
    "UnknownDevice",
    "UnknownProcessor",
    "UnknownScene",
    "UnknownSession",
]
