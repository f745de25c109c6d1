"""Frame ingest and fan-out: devices stream in over TCP, viewers and
processors subscribe to bounded live feeds, segments land on disk."""

from caplab.relay.server import Relay, SessionHub

__all__ = ["Relay", "SessionHub"]
