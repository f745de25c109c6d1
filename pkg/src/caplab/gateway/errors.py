"""Gateway error hierarchy.

Every error carries the HTTP status the client surface should map it to, so
the FastAPI layer can translate uniformly instead of maintaining a table.
"""

from __future__ import annotations


class GatewayError(Exception):
    """Base class for all gateway-reported failures."""

    http_status = 500

    def __init__(self, detail: str = "", **extra: object) -> None:
        super().__init__(detail or self.__class__.__name__)
        self.detail = detail or self.__class__.__name__
        self.extra = extra

    def payload(self) -> dict[str, object]:
        body: dict[str, object] = {"error": self.__class__.__name__, "detail": self.detail}
        body.update(self.extra)
        return body


class UnknownScene(GatewayError):
    http_status = 404


class UnknownDevice(GatewayError):
    http_status = 404


class UnknownSession(GatewayError):
    http_status = 404


class UnknownProcessor(GatewayError):
    http_status = 404


class SceneBusy(GatewayError):
    """Another researcher holds an unexpired lease on the scene."""

    http_status = 409


class DeviceBusy(GatewayError):
    """The device is already bound to an unfinished session."""

    http_status = 409


class DeviceOffline(GatewayError):
    """The device exists in the scene config but no agent is connected."""

    http_status = 409


class LeaseInvalid(GatewayError):
    """Caller does not hold a live lease on the scene."""

    http_status = 403


class SessionNotLive(GatewayError):
    """Operation requires a LIVE session."""

    http_status = 409


class SessionNotStopped(GatewayError):
    """Packing requires the session to have reached STOPPING."""

    http_status = 409


class NotPacked(GatewayError):
    """Container artifacts exist only after packing completes."""

    http_status = 409


class AgentTimeout(GatewayError):
    """The device agent did not answer within the deadline."""

    http_status = 504


class MalformedPayload(GatewayError):
    http_status = 400
