"""The simulated capture device: control client + capture/streaming loop.

Lifecycle: connect to the gateway's device control port, register, wait for
a session start, announce capture parameters, then stream rendered frames to
the relay until stopped or the configured duration elapses.

Tick discipline (the synchronization contract): at tick i the loop first
applies every command queued before the tick (scripted or remote), then
steps the kinematics by one dt (ticks after the first), then renders frame i
— so frame i is the first frame whose pose reflects a command applied at
tick i, and the counter advances every tick whether or not the frame is
actually delivered.
"""

from __future__ import annotations

import asyncio
import json
import time
import uuid
from collections import deque
from dataclasses import dataclass, field, replace

from caplab.model import (
    RESOLUTION_PRESETS,
    AppliedCommand,
    CommandKind,
    ControlCommand,
    FrameRecord,
    SessionSummary,
    StreamHeader,
    clamp_command_value,
    encode_frame_record,
    encode_stream_header,
    frame_payload_size,
)
from caplab.model.codec import FRAME_HEADER_SIZE

from .bucket import TokenBucket
from .kinematics import DEFAULT_WHEELBASE_M, PoseState, apply_command_to_pose, step_kinematics
from .script import ScriptedCommand


class AgentError(Exception):
    pass


class GatewayUnreachable(AgentError):
    pass


class RelayDisconnected(AgentError):
    pass


class SessionNotRunning(AgentError):
    pass


class RegistrationRefused(AgentError):
    pass


@dataclass
class AgentConfig:
    scene_id: str
    device_id: int
    gateway_host: str = "127.0.0.1"
    gateway_port: int = 8091
    relay_host: str = "127.0.0.1"
    relay_port: int = 8092
    fps: int = 30
    resolution: str = "360p"
    wheelbase_m: float = DEFAULT_WHEELBASE_M
    deterministic_clock: bool = False
    send_budget_bytes_per_sec: float | None = None
    duration_s: float | None = None  # None: stream until told to stop
    script: tuple[ScriptedCommand, ...] = ()

    def __post_init__(self) -> None:
        if not 1 <= self.fps <= 120:
            raise ValueError(f"fps must be in 1..120, got {self.fps}")
        if self.resolution not in RESOLUTION_PRESETS:
            raise ValueError(f"unknown resolution {self.resolution!r}")
        if self.wheelbase_m <= 0:
            raise ValueError("wheelbase must be positive")
        if self.send_budget_bytes_per_sec is not None and self.send_budget_bytes_per_sec < 0:
            raise ValueError("budget must be >= 0")


@dataclass
class _PendingCommand:
    request_id: str | None
    command: ControlCommand


def _wall_micros() -> int:
    return time.time_ns() // 1000


class AgentRuntime:
    """One simulated device.  run() drives a full session and returns its summary."""

    def __init__(self, config: AgentConfig) -> None:
        self.config = config
        self.pose = PoseState()
        self.session_id: uuid.UUID | None = None
        self.start_ts_micros = 0
        self.summary: SessionSummary | None = None
        self.live = asyncio.Event()
        self.finished = asyncio.Event()
        self._pending: deque[_PendingCommand] = deque()
        self._stop_requested = asyncio.Event()
        self._started_payload: asyncio.Future[dict] | None = None
        self._register_reply: asyncio.Future[dict] | None = None
        self._script_cursor = 0
        self._script_seq = 0
        self._control_writer: asyncio.StreamWriter | None = None
        self._reader_task: asyncio.Task | None = None
        self._running = False

    # -- control channel -----------------------------------------------------

    async def _send_control(self, type_: str, payload: dict) -> None:
        assert self._control_writer is not None
        line = json.dumps({"type": type_, "payload": payload}) + "\n"
        self._control_writer.write(line.encode())

    async def _control_reader(self, reader: asyncio.StreamReader) -> None:
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                msg = json.loads(line)
                self._dispatch(msg.get("type"), msg.get("payload") or {})
        except (ConnectionError, json.JSONDecodeError):
            pass
        finally:
            # Gateway gone: stop streaming; nobody is listening anymore.
            self._stop_requested.set()

    def _dispatch(self, type_: str, payload: dict) -> None:
        if type_ == "registered" or type_ == "error":
            if self._register_reply is not None and not self._register_reply.done():
                self._register_reply.set_result({"type": type_, **payload})
        elif type_ == "start":
            if self._started_payload is not None and not self._started_payload.done():
                self._started_payload.set_result(payload)
        elif type_ == "live":
            self.live.set()
        elif type_ == "command":
            self._queue_remote_command(payload)
        elif type_ == "stop":
            self._stop_requested.set()

    def _queue_remote_command(self, payload: dict) -> None:
        request_id = payload.get("request_id")
        if not self._running:
            # Too late (or too early): report failure instead of applying.
            if self._control_writer is not None and request_id is not None:
                line = json.dumps(
                    {
                        "type": "command_failed",
                        "payload": {"request_id": request_id, "error": "SessionNotRunning"},
                    }
                ) + "\n"
                self._control_writer.write(line.encode())
            return
        command = ControlCommand(
            client_seq=int(payload["client_seq"]),
            kind=CommandKind(payload["kind"]),
            value=payload.get("value"),
            issued_ts_micros=int(payload.get("issued_ts_micros", 0)),
        )
        self._pending.append(_PendingCommand(request_id=request_id, command=command))

    # -- session run ----------------------------------------------------------

    async def run(self) -> SessionSummary:
        cfg = self.config
        try:
            reader, writer = await asyncio.open_connection(cfg.gateway_host, cfg.gateway_port)
        except OSError as exc:
            raise GatewayUnreachable(f"{cfg.gateway_host}:{cfg.gateway_port}: {exc}") from exc
        self._control_writer = writer
        self._register_reply = asyncio.get_running_loop().create_future()
        self._started_payload = asyncio.get_running_loop().create_future()
        self._reader_task = asyncio.create_task(self._control_reader(reader))
        try:
            await self._send_control(
                "register", {"scene_id": cfg.scene_id, "device_id": cfg.device_id}
            )
            reply = await self._register_reply
            if reply.get("type") != "registered":
                raise RegistrationRefused(str(reply))

            start = await self._started_payload
            self.session_id = uuid.UUID(start["session_id"])
            self.start_ts_micros = 0 if cfg.deterministic_clock else _wall_micros()
            await self._send_control(
                "started",
                {
                    "session_id": str(self.session_id),
                    "fps": cfg.fps,
                    "resolution": cfg.resolution,
                    "deterministic_clock": cfg.deterministic_clock,
                    "start_ts_micros": self.start_ts_micros,
                },
            )
            # Wait for the go-live ack, but honor a stop (or a vanished
            # gateway) that arrives first instead of waiting forever.
            live_wait = asyncio.ensure_future(self.live.wait())
            stop_wait = asyncio.ensure_future(self._stop_requested.wait())
            try:
                await asyncio.wait({live_wait, stop_wait}, return_when=asyncio.FIRST_COMPLETED)
            finally:
                live_wait.cancel()
                stop_wait.cancel()
            if not self.live.is_set():
                summary = SessionSummary(session_id=self.session_id)
                self.summary = summary
                await self._send_control("stopped", summary.to_payload())
                return summary

            summary = await self._stream()
            self.summary = summary
            await self._send_control("stopped", summary.to_payload())
            return summary
        finally:
            self._running = False
            self.finished.set()
            if self._reader_task is not None:
                self._reader_task.cancel()
            writer.close()

    async def _stream(self) -> SessionSummary:
        cfg = self.config
        assert self.session_id is not None
        try:
            relay_reader, relay_writer = await asyncio.open_connection(cfg.relay_host, cfg.relay_port)
        except OSError as exc:
            await self._send_control(
                "lifecycle",
                {"state": "relay_disconnected", "frame_index": 0, "detail": str(exc)},
            )
            raise RelayDisconnected(f"{cfg.relay_host}:{cfg.relay_port}: {exc}") from exc

        header = StreamHeader(
            session_id=self.session_id,
            device_id=cfg.device_id,
            fps=cfg.fps,
            resolution=cfg.resolution,
            deterministic_clock=cfg.deterministic_clock,
        )
        relay_writer.write(encode_stream_header(header))

        loop = asyncio.get_running_loop()
        dt = 1.0 / cfg.fps
        frame_bytes = FRAME_HEADER_SIZE + frame_payload_size(cfg.resolution)
        total = round(cfg.duration_s * cfg.fps) if cfg.duration_s is not None else None
        epoch = loop.time()
        bucket = (
            TokenBucket(cfg.send_budget_bytes_per_sec, 2 * frame_bytes, now=epoch)
            if cfg.send_budget_bytes_per_sec is not None
            else None
        )
        summary = SessionSummary(session_id=self.session_id)
        self._running = True
        i = 0
        try:
            while not self._stop_requested.is_set() and (total is None or i < total):
                acks = self._apply_tick_commands(i)
                if i > 0:
                    self.pose = step_kinematics(self.pose, dt, cfg.wheelbase_m)
                frame = self._render(i)
                encoded = encode_frame_record(frame)

                deadline = epoch + (i + 1) * dt
                now = loop.time()
                if bucket is None:
                    relay_writer.write(encoded)
                    await relay_writer.drain()
                    summary.delivered += 1
                else:
                    ready = bucket.ready_time(len(encoded), now)
                    if ready is not None and ready <= deadline:
                        if ready > now:
                            await asyncio.sleep(ready - now)
                        bucket.consume(len(encoded), max(ready, loop.time()))
                        relay_writer.write(encoded)
                        await relay_writer.drain()
                        summary.delivered += 1
                    else:
                        summary.dropped += 1
                summary.captured += 1
                summary.last_frame_index = i

                for ack in acks:
                    await self._send_control("applied", self._ack_payload(ack))

                i += 1
                delay = epoch + i * dt - loop.time()
                if delay > 0:
                    await asyncio.sleep(delay)
        except ConnectionError as exc:
            await self._send_control(
                "lifecycle",
                {"state": "relay_disconnected", "frame_index": i, "detail": str(exc)},
            )
            raise RelayDisconnected(str(exc)) from exc
        finally:
            self._running = False
            duration = loop.time() - epoch
            summary.achieved_fps = summary.delivered / duration if duration > 0 else 0.0
            relay_writer.close()

        return summary

    def _apply_tick_commands(self, frame_index: int) -> list[tuple[str | None, AppliedCommand]]:
        """Apply script commands due at this tick plus queued remote ones."""
        due: list[_PendingCommand] = []
        script = self.config.script
        while self._script_cursor < len(script) and script[self._script_cursor].at_or_after_frame <= frame_index:
            cmd = script[self._script_cursor]
            self._script_cursor += 1
            self._script_seq += 1
            due.append(
                _PendingCommand(
                    request_id=None,
                    command=ControlCommand(
                        client_seq=self._script_seq,
                        kind=cmd.kind,
                        value=cmd.value,
                        issued_ts_micros=self._tick_micros(frame_index),
                    ),
                )
            )
        while self._pending:
            due.append(self._pending.popleft())

        acks: list[tuple[str | None, AppliedCommand]] = []
        for pending in due:
            cmd = pending.command
            clamped = clamp_command_value(cmd.kind, cmd.value)
            self.pose = apply_command_to_pose(self.pose, cmd.kind, clamped)
            applied = AppliedCommand(
                command=replace(cmd, value=clamped),
                applied_frame_index=frame_index,
                applied_ts_micros=self._tick_micros(frame_index),
            )
            acks.append((pending.request_id, applied))
        return acks

    def _ack_payload(self, ack: tuple[str | None, AppliedCommand]) -> dict:
        request_id, applied = ack
        payload = {
            "session_id": str(self.session_id),
            "client_seq": applied.command.client_seq,
            "kind": applied.command.kind.value,
            "value": applied.command.value,
            "applied_frame_index": applied.applied_frame_index,
            "applied_ts_micros": applied.applied_ts_micros,
        }
        if request_id is not None:
            payload["request_id"] = request_id
        return payload

    def _tick_micros(self, frame_index: int) -> int:
        if self.config.deterministic_clock:
            return self.start_ts_micros + frame_index * 1_000_000 // self.config.fps
        return _wall_micros()

    def _render(self, frame_index: int) -> FrameRecord:
        from .render import render_frame

        assert self.session_id is not None
        return render_frame(
            self.pose,
            frame_index,
            self.config.resolution,
            session_id=self.session_id,
            device_id=self.config.device_id,
            capture_ts_micros=self._tick_micros(frame_index),
        )

    def request_stop(self) -> None:
        self._stop_requested.set()
