"""Gateway state machine: scenes, leases, sessions, events, device links.

All mutating operations run on the event loop and contain no awaits between
check and update, so lease acquisition and session creation are atomic with
respect to concurrent client requests.  Network adapters (the device control
server and the HTTP/WebSocket surface) live in sibling modules and call into
this class.
"""

from __future__ import annotations

import asyncio
import json
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any

from caplab.bus import Bus
from caplab.model import (
    RESOLUTION_PRESETS,
    AppliedCommand,
    CommandKind,
    ControlCommand,
    EventKind,
    EventRecord,
    IngestStats,
    SceneConfig,
    SceneLease,
    SegmentEntry,
    SessionManifest,
    SessionStatus,
    canonical_json,
    status_rank,
)

from .errors import (
    AgentTimeout,
    DeviceBusy,
    DeviceOffline,
    LeaseInvalid,
    MalformedPayload,
    SceneBusy,
    SessionNotLive,
    UnknownDevice,
    UnknownScene,
    UnknownSession,
)

PACKING_CHANNEL = "packing"
DEFAULT_LEASE_TTL_S = 300
MAX_LEASE_TTL_S = 24 * 3600


def _wall_micros() -> int:
    return time.time_ns() // 1000


def session_events_channel(session_id: uuid.UUID) -> str:
    return f"session.{session_id}.events"


@dataclass
class DeviceLink:
    """One connected device agent on the control port."""

    scene_id: str
    device_id: int
    writer: asyncio.StreamWriter
    alive: bool = True
    session: "SessionEntry | None" = None
    # request_id -> future resolved by the device's applied / command_failed
    pending: dict[str, asyncio.Future] = field(default_factory=dict)

    async def send(self, type_: str, payload: dict[str, Any]) -> None:
        if not self.alive:
            raise ConnectionError("device link closed")
        line = json.dumps({"type": type_, "payload": payload}) + "\n"
        self.writer.write(line.encode())
        await self.writer.drain()


@dataclass
class SessionEntry:
    """All gateway-side state for one capture session."""

    session_id: uuid.UUID
    scene_id: str
    device_id: int
    container_dir: Path
    status: SessionStatus = SessionStatus.STARTING
    fps: int = 0
    resolution: str = ""
    deterministic_clock: bool = False
    start_ts_micros: int = 0

    events: list[EventRecord] = field(default_factory=list)
    next_seq: int = 1
    http_seq: int = 0

    segments: list[SegmentEntry] = field(default_factory=list)
    ingest_stats: IngestStats | None = None
    ingest_started: bool = False
    manifest: SessionManifest | None = None
    agent_summary: dict[str, Any] | None = None

    link: DeviceLink | None = None
    live_event: asyncio.Event = field(default_factory=asyncio.Event)
    stopped_event: asyncio.Event = field(default_factory=asyncio.Event)
    ingest_done: asyncio.Event = field(default_factory=asyncio.Event)
    packed_event: asyncio.Event = field(default_factory=asyncio.Event)
    _events_file: IO[str] | None = None

    def advance(self, new_status: SessionStatus) -> None:
        """Move the lifecycle forward; going backwards is a bug, not a request."""
        if status_rank(new_status) < status_rank(self.status):
            raise ValueError(f"cannot move {self.status.value} -> {new_status.value}")
        self.status = new_status

    def state_payload(self) -> dict[str, Any]:
        body: dict[str, Any] = {
            "session_id": str(self.session_id),
            "scene_id": self.scene_id,
            "device_id": self.device_id,
            "status": self.status.value,
            "fps": self.fps,
            "resolution": self.resolution,
            "deterministic_clock": self.deterministic_clock,
            "start_ts_micros": self.start_ts_micros,
            "event_count": self.next_seq - 1,
            "segment_count": len(self.segments),
        }
        if self.ingest_stats is not None:
            body["stats"] = self.ingest_stats.to_payload()
        if self.agent_summary is not None:
            body["summary"] = self.agent_summary
        return body


class GatewayCore:
    def __init__(
        self,
        scenes: list[SceneConfig],
        data_dir: Path,
        *,
        agent_timeout_s: float = 2.0,
    ) -> None:
        self.scenes: dict[str, SceneConfig] = {s.scene_id: s for s in scenes}
        self.data_dir = Path(data_dir)
        self.agent_timeout_s = agent_timeout_s
        self.leases: dict[str, SceneLease] = {}
        self.devices: dict[tuple[str, int], DeviceLink] = {}
        self.sessions: dict[uuid.UUID, SessionEntry] = {}
        self.bus = Bus()
        self._tasks: set[asyncio.Task] = set()

    # -- leases ---------------------------------------------------------------

    def acquire_lease(self, researcher: str, scene_id: str, ttl_seconds: int = DEFAULT_LEASE_TTL_S) -> SceneLease:
        """Grant (or renew) the exclusive lease on a scene.

        At most one unexpired lease exists per scene; an expired lease is
        reclaimable by anyone, and the current holder may renew early.
        """
        if scene_id not in self.scenes:
            raise UnknownScene(f"no scene {scene_id!r}")
        if not researcher or not isinstance(researcher, str):
            raise MalformedPayload("researcher must be a non-empty string")
        if not isinstance(ttl_seconds, int) or not 1 <= ttl_seconds <= MAX_LEASE_TTL_S:
            raise MalformedPayload(f"ttl_seconds must be an integer in 1..{MAX_LEASE_TTL_S}")
        now = _wall_micros()
        current = self.leases.get(scene_id)
        if current is not None and not current.expired(now) and current.holder != researcher:
            raise SceneBusy(
                f"scene {scene_id!r} is leased by {current.holder!r}",
                holder=current.holder,
                expires_at_micros=current.expires_at_micros(),
            )
        lease = SceneLease(
            scene_id=scene_id,
            holder=researcher,
            acquired_ts_micros=now,
            ttl_seconds=ttl_seconds,
        )
        self.leases[scene_id] = lease
        return lease

    def release_lease(self, researcher: str, scene_id: str) -> None:
        if scene_id not in self.scenes:
            raise UnknownScene(f"no scene {scene_id!r}")
        current = self.leases.get(scene_id)
        if current is None or current.holder != researcher:
            raise LeaseInvalid(f"{researcher!r} does not hold the lease on {scene_id!r}")
        del self.leases[scene_id]

    def check_lease(self, researcher: str, scene_id: str) -> SceneLease:
        current = self.leases.get(scene_id)
        if current is None or current.holder != researcher or current.expired(_wall_micros()):
            raise LeaseInvalid(f"{researcher!r} holds no live lease on {scene_id!r}")
        return current

    def lease_of(self, scene_id: str) -> SceneLease | None:
        current = self.leases.get(scene_id)
        if current is None or current.expired(_wall_micros()):
            return None
        return current

    # -- device registry ------------------------------------------------------

    def register_device(self, scene_id: str, device_id: int, writer: asyncio.StreamWriter) -> DeviceLink:
        if scene_id not in self.scenes:
            raise UnknownScene(f"no scene {scene_id!r}")
        if device_id not in self.scenes[scene_id].device_ids():
            raise UnknownDevice(f"scene {scene_id!r} has no device {device_id}")
        existing = self.devices.get((scene_id, device_id))
        if existing is not None and existing.alive:
            raise DeviceBusy(f"device {device_id} in scene {scene_id!r} already registered")
        link = DeviceLink(scene_id=scene_id, device_id=device_id, writer=writer)
        self.devices[(scene_id, device_id)] = link
        return link

    def unregister_device(self, link: DeviceLink) -> None:
        link.alive = False
        for fut in link.pending.values():
            if not fut.done():
                fut.set_exception(AgentTimeout("device disconnected"))
        link.pending.clear()
        if self.devices.get((link.scene_id, link.device_id)) is link:
            del self.devices[(link.scene_id, link.device_id)]

    def scene_snapshot(self) -> list[dict[str, Any]]:
        out = []
        for scene in self.scenes.values():
            lease = self.lease_of(scene.scene_id)
            devices = []
            for dev in scene.devices:
                link = self.devices.get((scene.scene_id, dev.device_id))
                online = link is not None and link.alive
                busy = (
                    online
                    and link.session is not None
                    and link.session.status in (SessionStatus.STARTING, SessionStatus.LIVE)
                )
                devices.append(
                    {
                        "device_id": dev.device_id,
                        "capabilities": dev.capabilities,
                        "online": online,
                        "busy": busy,
                    }
                )
            out.append(
                {
                    "scene_id": scene.scene_id,
                    "description": scene.description,
                    "devices": devices,
                    "lease": None
                    if lease is None
                    else {
                        "holder": lease.holder,
                        "expires_at_micros": lease.expires_at_micros(),
                    },
                }
            )
        return out

    # -- event log ------------------------------------------------------------

    def append_event(
        self,
        session_id: uuid.UUID,
        kind: EventKind,
        frame_index: int,
        payload: dict[str, Any],
        *,
        ts_micros: int | None = None,
    ) -> EventRecord:
        """Append one event: gapless seq, durable line in events.jsonl, bus fanout."""
        entry = self._entry(session_id)
        if frame_index < 0:
            raise MalformedPayload("frame_index must be >= 0")
        record = EventRecord(
            session_id=session_id,
            seq=entry.next_seq,
            kind=kind,
            frame_index=frame_index,
            ts_micros=_wall_micros() if ts_micros is None else ts_micros,
            payload=canonical_json(payload),
        )
        entry.next_seq += 1
        entry.events.append(record)
        if entry._events_file is not None:
            entry._events_file.write(
                json.dumps(
                    {
                        "seq": record.seq,
                        "kind": record.kind.value,
                        "frame_index": record.frame_index,
                        "ts_micros": record.ts_micros,
                        "payload": payload,
                    },
                    sort_keys=True,
                    separators=(",", ":"),
                    ensure_ascii=False,
                )
                + "\n"
            )
            entry._events_file.flush()
        self.bus.publish(session_events_channel(session_id), record)
        return record

    def read_events(self, session_id: uuid.UUID, from_seq: int = 1) -> list[EventRecord]:
        entry = self._entry(session_id)
        if from_seq < 1:
            raise MalformedPayload("from_seq starts at 1")
        # seq is gapless from 1, so events[k] has seq k+1.
        return entry.events[from_seq - 1 :]

    # -- sessions -------------------------------------------------------------

    def _entry(self, session_id: uuid.UUID) -> SessionEntry:
        entry = self.sessions.get(session_id)
        if entry is None:
            raise UnknownSession(f"no session {session_id}")
        return entry

    def get_session(self, session_id: uuid.UUID) -> SessionEntry:
        return self._entry(session_id)

    async def start_parallel_capture(
        self,
        researcher: str,
        scene_id: str,
        device_ids: list[int],
        session_ids: list[uuid.UUID] | None = None,
    ) -> list[SessionEntry]:
        """Start one session per device; all go live or the batch is rolled back."""
        if scene_id not in self.scenes:
            raise UnknownScene(f"no scene {scene_id!r}")
        self.check_lease(researcher, scene_id)
        if not device_ids:
            raise MalformedPayload("device_ids must be non-empty")
        if len(set(device_ids)) != len(device_ids):
            raise MalformedPayload("device_ids must be distinct")
        if session_ids is not None:
            if len(session_ids) != len(device_ids):
                raise MalformedPayload("session_ids must match device_ids in length")
            if len(set(session_ids)) != len(session_ids):
                raise MalformedPayload("session_ids must be distinct")
            for sid in session_ids:
                if sid in self.sessions:
                    raise MalformedPayload(f"session id {sid} already used")

        scene = self.scenes[scene_id]
        links: list[DeviceLink] = []
        for device_id in device_ids:
            if device_id not in scene.device_ids():
                raise UnknownDevice(f"scene {scene_id!r} has no device {device_id}")
            link = self.devices.get((scene_id, device_id))
            if link is None or not link.alive:
                raise DeviceOffline(f"device {device_id} in scene {scene_id!r} has no agent connected")
            if link.session is not None and link.session.status in (
                SessionStatus.STARTING,
                SessionStatus.LIVE,
            ):
                raise DeviceBusy(f"device {device_id} is captured by session {link.session.session_id}")
            links.append(link)

        # No awaits since validation began: create the whole batch atomically.
        entries: list[SessionEntry] = []
        for index, link in enumerate(links):
            sid = session_ids[index] if session_ids is not None else uuid.uuid4()
            container = self.data_dir / str(sid)
            (container / "segments").mkdir(parents=True, exist_ok=True)
            entry = SessionEntry(
                session_id=sid,
                scene_id=scene_id,
                device_id=link.device_id,
                container_dir=container,
            )
            entry._events_file = (container / "events.jsonl").open("a", encoding="utf-8")
            entry.link = link
            link.session = entry
            self.sessions[sid] = entry
            entries.append(entry)

        try:
            for entry in entries:
                await entry.link.send("start", {"session_id": str(entry.session_id)})
            await asyncio.wait_for(
                asyncio.gather(*(e.live_event.wait() for e in entries)),
                timeout=self.agent_timeout_s,
            )
        except (asyncio.TimeoutError, ConnectionError) as exc:
            await self._rollback_start(entries)
            raise AgentTimeout(f"not all devices went live: {exc}") from exc
        return entries

    async def _rollback_start(self, entries: list[SessionEntry]) -> None:
        """A batch start failed: stop whatever went live, retire the rest."""
        for entry in entries:
            link = entry.link
            if entry.live_event.is_set() and link is not None and link.alive:
                try:
                    await link.send("stop", {})
                except ConnectionError:
                    pass
            else:
                if entry.status is SessionStatus.STARTING:
                    entry.advance(SessionStatus.STOPPING)
                self.append_event(
                    entry.session_id,
                    EventKind.LIFECYCLE,
                    0,
                    {"state": "start_failed", "detail": "device did not go live"},
                )
                if link is not None and link.session is entry:
                    link.session = None
                self.bus.publish(PACKING_CHANNEL, {"session_id": str(entry.session_id)})

    # Device-reported milestones (called by the control server).

    async def on_device_started(self, link: DeviceLink, payload: dict[str, Any]) -> None:
        entry = self._entry(uuid.UUID(payload["session_id"]))
        fps = int(payload["fps"])
        resolution = str(payload["resolution"])
        if not 1 <= fps <= 120 or resolution not in RESOLUTION_PRESETS:
            self.append_event(
                entry.session_id,
                EventKind.LIFECYCLE,
                0,
                {"state": "start_failed", "detail": f"bad capture parameters fps={fps} resolution={resolution!r}"},
            )
            return
        entry.fps = fps
        entry.resolution = resolution
        entry.deterministic_clock = bool(payload.get("deterministic_clock", False))
        entry.start_ts_micros = int(payload.get("start_ts_micros", 0))
        entry.advance(SessionStatus.LIVE)
        self.append_event(entry.session_id, EventKind.LIFECYCLE, 0, {"state": "started"})
        # Status is LIVE before the ack goes out: the agent opens its ingest
        # connection immediately after, and the relay admits only LIVE sessions.
        await link.send("live", {"session_id": str(entry.session_id)})
        entry.live_event.set()

    def on_device_applied(self, link: DeviceLink, payload: dict[str, Any]) -> None:
        session_id = uuid.UUID(payload["session_id"])
        entry = self._entry(session_id)
        kind = CommandKind(payload["kind"])
        applied = AppliedCommand(
            command=ControlCommand(
                client_seq=int(payload["client_seq"]),
                kind=kind,
                value=payload.get("value"),
                issued_ts_micros=int(payload.get("issued_ts_micros", 0)),
            ),
            applied_frame_index=int(payload["applied_frame_index"]),
            applied_ts_micros=int(payload["applied_ts_micros"]),
        )
        # Exactly one COMMAND event per applied command, scripted or remote,
        # appended before any waiting client sees the ack.
        self.append_event(
            session_id,
            EventKind.COMMAND,
            applied.applied_frame_index,
            applied.payload(),
            ts_micros=applied.applied_ts_micros,
        )
        request_id = payload.get("request_id")
        if request_id is not None:
            fut = link.pending.pop(request_id, None)
            if fut is not None and not fut.done():
                fut.set_result(applied)

    def on_device_command_failed(self, link: DeviceLink, payload: dict[str, Any]) -> None:
        request_id = payload.get("request_id")
        if request_id is None:
            return
        fut = link.pending.pop(request_id, None)
        if fut is not None and not fut.done():
            fut.set_exception(SessionNotLive(str(payload.get("error", "command failed"))))

    def on_device_lifecycle(self, link: DeviceLink, payload: dict[str, Any]) -> None:
        entry = link.session
        if entry is None:
            return
        body = {"state": str(payload.get("state", "unknown"))}
        if payload.get("detail"):
            body["detail"] = str(payload["detail"])
        self.append_event(
            entry.session_id,
            EventKind.LIFECYCLE,
            max(int(payload.get("frame_index", 0)), 0),
            body,
        )

    def on_device_stopped(self, link: DeviceLink, payload: dict[str, Any]) -> None:
        entry = link.session
        if entry is None:
            return
        entry.agent_summary = payload
        entry.stopped_event.set()
        link.session = None
        self.spawn(self._finalize_session(entry), name=f"finalize-{entry.session_id}")

    async def _finalize_session(self, entry: SessionEntry) -> None:
        """After the device reports done: wait for ingest to settle, then hand to the packer."""
        if entry.ingest_started:
            try:
                await asyncio.wait_for(entry.ingest_done.wait(), timeout=10.0)
            except asyncio.TimeoutError:
                self.append_event(
                    entry.session_id,
                    EventKind.LIFECYCLE,
                    0,
                    {"state": "ingest_timeout", "detail": "relay did not finish reading the stream"},
                )
        if entry.status is not SessionStatus.PACKED:
            entry.advance(SessionStatus.STOPPING)
        last = -1
        if entry.agent_summary is not None:
            last = int(entry.agent_summary.get("last_frame_index", -1))
        self.append_event(entry.session_id, EventKind.LIFECYCLE, max(last, 0), {"state": "stopped"})
        self.bus.publish(PACKING_CHANNEL, {"session_id": str(entry.session_id)})

    # Client-facing session operations.

    async def submit_command(
        self,
        researcher: str,
        session_id: uuid.UUID,
        kind: CommandKind,
        value: float | int | None,
        *,
        client_seq: int | None = None,
    ) -> tuple[AppliedCommand, float]:
        """Send one command to the session's device and await its ack.

        Returns the applied command and the gateway-side round trip in
        milliseconds.  The COMMAND event is already in the log when this
        returns (the ack handler appends it before resolving the future).
        """
        entry = self._entry(session_id)
        if entry.status is not SessionStatus.LIVE:
            raise SessionNotLive(f"session is {entry.status.value}")
        self.check_lease(researcher, entry.scene_id)
        link = entry.link
        if link is None or not link.alive:
            raise SessionNotLive("device link lost")
        if kind is not CommandKind.STOP:
            if value is None:
                raise MalformedPayload(f"{kind.value} requires a numeric value")
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise MalformedPayload(f"{kind.value} value must be a number")
        if client_seq is None:
            entry.http_seq += 1
            client_seq = entry.http_seq
        request_id = uuid.uuid4().hex
        loop = asyncio.get_running_loop()
        fut: asyncio.Future = loop.create_future()
        link.pending[request_id] = fut
        t0 = loop.time()
        try:
            await link.send(
                "command",
                {
                    "request_id": request_id,
                    "client_seq": client_seq,
                    "kind": kind.value,
                    "value": value,
                    "issued_ts_micros": _wall_micros(),
                },
            )
            applied = await asyncio.wait_for(fut, timeout=self.agent_timeout_s)
        except asyncio.TimeoutError as exc:
            raise AgentTimeout("device did not acknowledge the command") from exc
        except ConnectionError as exc:
            raise SessionNotLive(f"device link lost: {exc}") from exc
        finally:
            link.pending.pop(request_id, None)
        round_trip_ms = (loop.time() - t0) * 1000.0
        return applied, round_trip_ms

    def add_marker(self, session_id: uuid.UUID, frame_index: int, text: str) -> EventRecord:
        if not isinstance(frame_index, int) or isinstance(frame_index, bool) or frame_index < 0:
            raise MalformedPayload("frame_index must be an integer >= 0")
        if not isinstance(text, str):
            raise MalformedPayload("text must be a string")
        return self.append_event(session_id, EventKind.MARKER, frame_index, {"text": text})

    async def stop_session(self, researcher: str, session_id: uuid.UUID) -> SessionEntry:
        """Ask the device to stop; returns once the session has left LIVE."""
        entry = self._entry(session_id)
        if entry.status in (SessionStatus.STOPPING, SessionStatus.PACKED):
            return entry
        self.check_lease(researcher, entry.scene_id)
        link = entry.link
        if link is not None and link.alive:
            try:
                await link.send("stop", {})
            except ConnectionError:
                pass
            try:
                await asyncio.wait_for(entry.stopped_event.wait(), timeout=self.agent_timeout_s + 10.0)
            except asyncio.TimeoutError as exc:
                raise AgentTimeout("device did not confirm stop") from exc
        else:
            # Device vanished without a summary: finalize with what we have.
            if entry.status is SessionStatus.STARTING or entry.status is SessionStatus.LIVE:
                self.spawn(self._finalize_session(entry), name=f"finalize-{entry.session_id}")
        return entry

    # -- plumbing ---------------------------------------------------------------

    def spawn(self, coro: Any, *, name: str) -> asyncio.Task:
        task = asyncio.get_running_loop().create_task(coro, name=name)
        self._tasks.add(task)
        task.add_done_callback(self._tasks.discard)
        return task

    async def aclose(self) -> None:
        for task in list(self._tasks):
            task.cancel()
        if self._tasks:
            await asyncio.gather(*self._tasks, return_exceptions=True)
        for entry in self.sessions.values():
            if entry._events_file is not None:
                entry._events_file.close()
                entry._events_file = None
        self.bus.close()
