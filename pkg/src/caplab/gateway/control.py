"""Device control port: newline-delimited JSON over TCP.

Each connected agent speaks messages of the form
``{"type": <str>, "payload": {...}}``.  The conversation is:

    agent  -> register {scene_id, device_id}
    server -> registered {} | error {reason}
    server -> start {session_id}
    agent  -> started {session_id, fps, resolution, deterministic_clock, start_ts_micros}
    server -> live {session_id}
    server -> command {request_id, client_seq, kind, value, issued_ts_micros}
    agent  -> applied {session_id, client_seq, kind, value, applied_frame_index,
                       applied_ts_micros, request_id?}
    agent  -> command_failed {request_id, error}
    agent  -> lifecycle {state, frame_index, detail}
    server -> stop {}
    agent  -> stopped {<session summary>}

The server side of each message is handled by GatewayCore; this module only
frames, parses, and routes.
"""

from __future__ import annotations

import asyncio
import json
import logging
from typing import Any

from caplab.model import SessionStatus, EventKind

from .core import DeviceLink, GatewayCore
from .errors import GatewayError

log = logging.getLogger(__name__)


class ControlServer:
    def __init__(self, core: GatewayCore) -> None:
        self.core = core
        self._server: asyncio.base_events.Server | None = None

    async def start(self, host: str, port: int) -> None:
        self._server = await asyncio.start_server(self._handle, host, port)

    @property
    def port(self) -> int:
        assert self._server is not None and self._server.sockets
        return self._server.sockets[0].getsockname()[1]

    async def stop(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        link: DeviceLink | None = None
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                try:
                    msg = json.loads(line)
                except json.JSONDecodeError:
                    log.warning("control: dropping connection on unparseable line")
                    break
                type_ = msg.get("type")
                payload = msg.get("payload") or {}
                if link is None:
                    if type_ != "register":
                        await self._send(writer, "error", {"reason": "expected register first"})
                        break
                    try:
                        link = self.core.register_device(
                            str(payload["scene_id"]), int(payload["device_id"]), writer
                        )
                    except (GatewayError, KeyError, TypeError, ValueError) as exc:
                        await self._send(writer, "error", {"reason": str(exc)})
                        break
                    await self._send(writer, "registered", {})
                    continue
                try:
                    await self._dispatch(link, type_, payload)
                except (GatewayError, KeyError, TypeError, ValueError) as exc:
                    log.warning("control: %s from device %s rejected: %s", type_, link.device_id, exc)
        except ConnectionError:
            pass
        finally:
            if link is not None:
                self._reap(link)
            writer.close()

    async def _dispatch(self, link: DeviceLink, type_: str, payload: dict[str, Any]) -> None:
        core = self.core
        if type_ == "started":
            await core.on_device_started(link, payload)
        elif type_ == "applied":
            core.on_device_applied(link, payload)
        elif type_ == "command_failed":
            core.on_device_command_failed(link, payload)
        elif type_ == "lifecycle":
            core.on_device_lifecycle(link, payload)
        elif type_ == "stopped":
            core.on_device_stopped(link, payload)
        else:
            log.warning("control: unknown message type %r", type_)

    def _reap(self, link: DeviceLink) -> None:
        """Connection gone: release the registry slot and orphaned session."""
        entry = link.session
        self.core.unregister_device(link)
        if entry is not None and entry.status in (SessionStatus.STARTING, SessionStatus.LIVE):
            link.session = None
            self.core.append_event(
                entry.session_id,
                EventKind.LIFECYCLE,
                0,
                {"state": "device_disconnected", "detail": "control connection lost"},
            )
            self.core.spawn(
                self.core._finalize_session(entry), name=f"finalize-{entry.session_id}"
            )

    @staticmethod
    async def _send(writer: asyncio.StreamWriter, type_: str, payload: dict[str, Any]) -> None:
        writer.write((json.dumps({"type": type_, "payload": payload}) + "\n").encode())
        await writer.drain()
