"""Client surface: HTTP request/response API plus the WebSocket channel.

HTTP endpoints (all JSON unless noted):

    GET    /ping                           liveness + server clock
    GET    /scenes                         scene/device/lease snapshot
    POST   /leases                         acquire or renew a scene lease
    DELETE /leases/{scene_id}?researcher=  release a lease
    POST   /sessions                       start parallel capture
    GET    /sessions                       list sessions
    GET    /sessions/{id}                  one session's state
    POST   /sessions/{id}/commands         send a control command, await ack
    POST   /sessions/{id}/markers          append a MARKER event
    GET    /sessions/{id}/events?from=N    read the event log from seq N
    POST   /sessions/{id}/stop             stop capture (and wait briefly for packing)
    POST   /sessions/{id}/processors      attach a named frame processor
    GET    /sessions/{id}/stats            relay ingest statistics
    GET    /sessions/{id}/container        manifest.json of a packed session
    GET    /sessions/{id}/srt              session.srt of a packed session (text)
    GET    /sessions/{id}/frames?from=N    replay feed (binary, see below)

The replay feed is a stream of (meta, record) pairs: a little-endian u32
byte length, that many bytes of UTF-8 JSON metadata ({"frame_index", "cues"}),
then one complete frame record.  Clients resynchronize for free because
record boundaries are explicit.

The WebSocket at /ws carries JSON text messages {"type", "payload"} for
control plus raw binary frame records for live/replay pixels:

    client -> {"type": "ping"}                         -> {"type": "pong"}
    client -> {"type": "watch", payload: {session_id}} -> binary frames until stream end
    client -> {"type": "subscribe_events", payload: {session_id, from_seq?}}
                -> {"type": "event", ...} per event (backlog first, then live)
    client -> {"type": "command", payload: {session_id, researcher, kind, value?, tag?}}
                -> {"type": "ack"|"error", ...} with the tag echoed
    client -> {"type": "marker", payload: {session_id, frame_index, text}}
    client -> {"type": "stop", payload: {session_id, researcher}}
    client -> {"type": "replay", payload: {session_id, from_frame?}}
                -> {"type": "replay_frame", ...} + one binary frame each,
                   then {"type": "replay_end"}
"""

from __future__ import annotations

import asyncio
import json
import struct
import time
import uuid
from typing import Any, Iterator

from fastapi import FastAPI, Request, Response, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse

from caplab.bus import BoundedFeed
from caplab.inference.pipeline import attach_processor
from caplab.model import (
    CommandKind,
    EventRecord,
    IngestStats,
    SessionStatus,
    SrtCue,
    encode_frame_record,
)
from caplab.packer.container import read_container_srt
from caplab.packer.replay import last_delivered_index, replay
from caplab.relay.server import Relay

from .core import GatewayCore, SessionEntry, session_events_channel
from .errors import GatewayError, MalformedPayload, NotPacked

PACK_WAIT_S = 5.0  # how long POST /stop waits for the packer before returning


def _wall_micros() -> int:
    return time.time_ns() // 1000


def _event_payload(event: EventRecord) -> dict[str, Any]:
    return {
        "seq": event.seq,
        "kind": event.kind.value,
        "frame_index": event.frame_index,
        "ts_micros": event.ts_micros,
        "payload": event.payload_dict(),
    }


def _cue_payload(cue: SrtCue) -> dict[str, Any]:
    return {
        "index": cue.index,
        "start_millis": cue.start_millis,
        "end_millis": cue.end_millis,
        "kind": cue.kind,
        "payload": cue.payload,
    }


def _applied_payload(applied, session_id: uuid.UUID) -> dict[str, Any]:
    return {
        "session_id": str(session_id),
        "client_seq": applied.command.client_seq,
        "kind": applied.command.kind.value,
        "value": applied.command.value,
        "applied_frame_index": applied.applied_frame_index,
        "applied_ts_micros": applied.applied_ts_micros,
    }


def build_app(core: GatewayCore, relay: Relay) -> FastAPI:
    app = FastAPI(title="capture lab gateway", docs_url=None, redoc_url=None)
    # Browser clients (the console) are served from their own origin.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    def _error_response(exc: GatewayError) -> JSONResponse:
        return JSONResponse(status_code=exc.http_status, content=exc.payload())

    @app.exception_handler(GatewayError)
    async def _gateway_error(_request: Request, exc: GatewayError) -> JSONResponse:
        return _error_response(exc)

    async def _body(request: Request) -> dict[str, Any]:
        try:
            doc = await request.json()
        except Exception:
            raise MalformedPayload("request body must be JSON") from None
        if not isinstance(doc, dict):
            raise MalformedPayload("request body must be a JSON object")
        return doc

    def _require(doc: dict[str, Any], key: str) -> Any:
        if key not in doc:
            raise MalformedPayload(f"missing field {key!r}")
        return doc[key]

    def _session_id(raw: str) -> uuid.UUID:
        try:
            return uuid.UUID(raw)
        except ValueError:
            raise MalformedPayload(f"bad session id {raw!r}") from None

    def _entry(raw: str) -> SessionEntry:
        return core.get_session(_session_id(raw))

    def _command_kind(raw: Any) -> CommandKind:
        try:
            return CommandKind(str(raw))
        except ValueError:
            raise MalformedPayload(f"unknown command kind {raw!r}") from None

    # -- plain endpoints -----------------------------------------------------

    @app.get("/ping")
    async def ping() -> dict[str, Any]:
        return {"ok": True, "ts_micros": _wall_micros()}

    @app.get("/scenes")
    async def scenes() -> dict[str, Any]:
        return {"scenes": core.scene_snapshot()}

    @app.post("/leases")
    async def acquire_lease(request: Request) -> dict[str, Any]:
        doc = await _body(request)
        ttl = doc.get("ttl_seconds", 300)
        if isinstance(ttl, float) and ttl.is_integer():
            ttl = int(ttl)
        lease = core.acquire_lease(str(_require(doc, "researcher")), str(_require(doc, "scene_id")), ttl)
        return {
            "scene_id": lease.scene_id,
            "holder": lease.holder,
            "acquired_ts_micros": lease.acquired_ts_micros,
            "ttl_seconds": lease.ttl_seconds,
            "expires_at_micros": lease.expires_at_micros(),
        }

    @app.delete("/leases/{scene_id}")
    async def release_lease(scene_id: str, researcher: str = "") -> dict[str, Any]:
        if not researcher:
            raise MalformedPayload("researcher query parameter required")
        core.release_lease(researcher, scene_id)
        return {"released": True, "scene_id": scene_id}

    # -- session lifecycle ---------------------------------------------------

    @app.post("/sessions")
    async def start_sessions(request: Request) -> dict[str, Any]:
        doc = await _body(request)
        device_ids = _require(doc, "device_ids")
        if not isinstance(device_ids, list) or not all(isinstance(d, int) for d in device_ids):
            raise MalformedPayload("device_ids must be a list of integers")
        session_ids = None
        if doc.get("session_ids") is not None:
            raw = doc["session_ids"]
            if not isinstance(raw, list):
                raise MalformedPayload("session_ids must be a list")
            session_ids = [_session_id(str(s)) for s in raw]
        entries = await core.start_parallel_capture(
            str(_require(doc, "researcher")),
            str(_require(doc, "scene_id")),
            device_ids,
            session_ids,
        )
        return {"sessions": [e.state_payload() for e in entries]}

    @app.get("/sessions")
    async def list_sessions() -> dict[str, Any]:
        return {"sessions": [e.state_payload() for e in core.sessions.values()]}

    @app.get("/sessions/{sid}")
    async def session_state(sid: str) -> dict[str, Any]:
        return _entry(sid).state_payload()

    @app.post("/sessions/{sid}/stop")
    async def stop_session(sid: str, request: Request) -> dict[str, Any]:
        doc = await _body(request)
        entry = await core.stop_session(str(_require(doc, "researcher")), _session_id(sid))
        # Packing runs asynchronously; give it a moment so most callers see
        # the final state in one round trip.
        try:
            await asyncio.wait_for(entry.packed_event.wait(), timeout=PACK_WAIT_S)
        except asyncio.TimeoutError:
            pass
        return entry.state_payload()

    # -- in-session operations -------------------------------------------------

    @app.post("/sessions/{sid}/commands")
    async def submit_command(sid: str, request: Request) -> dict[str, Any]:
        doc = await _body(request)
        kind = _command_kind(_require(doc, "kind"))
        applied, round_trip_ms = await core.submit_command(
            str(_require(doc, "researcher")),
            _session_id(sid),
            kind,
            doc.get("value"),
        )
        return {
            "applied": _applied_payload(applied, _session_id(sid)),
            "round_trip_ms": round_trip_ms,
        }

    @app.post("/sessions/{sid}/markers")
    async def add_marker(sid: str, request: Request) -> dict[str, Any]:
        doc = await _body(request)
        record = core.add_marker(
            _session_id(sid),
            _require(doc, "frame_index"),
            _require(doc, "text"),
        )
        return {"seq": record.seq, "frame_index": record.frame_index}

    @app.get("/sessions/{sid}/events")
    async def read_events(sid: str, request: Request) -> dict[str, Any]:
        raw = request.query_params.get("from", "1")
        try:
            from_seq = int(raw)
        except ValueError:
            raise MalformedPayload(f"bad from={raw!r}") from None
        events = core.read_events(_session_id(sid), from_seq)
        return {"events": [_event_payload(e) for e in events]}

    @app.post("/sessions/{sid}/processors")
    async def attach(sid: str, request: Request) -> dict[str, Any]:
        doc = await _body(request)
        name = str(_require(doc, "name"))
        await attach_processor(core, relay, _session_id(sid), name)
        return {"attached": name}

    @app.get("/sessions/{sid}/stats")
    async def stats(sid: str) -> dict[str, Any]:
        entry = _entry(sid)
        if entry.ingest_stats is None:
            return IngestStats(session_id=entry.session_id).to_payload()
        return entry.ingest_stats.to_payload()

    # -- packed artifacts --------------------------------------------------------

    def _packed_entry(sid: str) -> SessionEntry:
        entry = _entry(sid)
        if entry.status is not SessionStatus.PACKED:
            raise NotPacked(f"session is {entry.status.value}")
        return entry

    @app.get("/sessions/{sid}/container")
    async def container(sid: str) -> Response:
        entry = _packed_entry(sid)
        assert entry.manifest is not None
        return Response(content=entry.manifest.to_json(), media_type="application/json")

    @app.get("/sessions/{sid}/srt")
    async def srt(sid: str) -> PlainTextResponse:
        entry = _packed_entry(sid)
        return PlainTextResponse(read_container_srt(entry.container_dir))

    @app.get("/sessions/{sid}/frames")
    async def frames(sid: str, request: Request) -> Response:
        entry = _packed_entry(sid)
        raw = request.query_params.get("from", "0")
        try:
            from_frame = int(raw)
        except ValueError:
            raise MalformedPayload(f"bad from={raw!r}") from None
        # Validate the start eagerly so the error is an HTTP status, not a
        # stream that dies mid-flight.
        last = last_delivered_index(entry.container_dir)
        if from_frame < 0 or from_frame > last:
            return JSONResponse(
                status_code=416,
                content={
                    "error": "FrameOutOfRange",
                    "detail": f"from_frame {from_frame}, last delivered frame is {last}",
                },
            )

        def _stream() -> Iterator[bytes]:
            for record, cues in replay(entry.container_dir, from_frame):
                meta = json.dumps(
                    {
                        "frame_index": record.frame_index,
                        "cues": [_cue_payload(c) for c in cues],
                    }
                ).encode()
                yield struct.pack("<I", len(meta)) + meta + encode_frame_record(record)

        return StreamingResponse(_stream(), media_type="application/octet-stream")

    # -- websocket ---------------------------------------------------------------

    @app.websocket("/ws")
    async def websocket(ws: WebSocket) -> None:
        await ws.accept()
        handler = _WsClient(core, relay, ws)
        try:
            await handler.run()
        finally:
            await handler.aclose()

    return app


class _WsClient:
    """State for one connected WebSocket client."""

    def __init__(self, core: GatewayCore, relay: Relay, ws: WebSocket) -> None:
        self.core = core
        self.relay = relay
        self.ws = ws
        self._tasks: dict[str, asyncio.Task] = {}
        self._feeds: list[tuple[Any, BoundedFeed]] = []
        self._send_lock = asyncio.Lock()

    async def _send_json(self, type_: str, payload: dict[str, Any]) -> None:
        async with self._send_lock:
            await self.ws.send_text(json.dumps({"type": type_, "payload": payload}))

    async def _send_binary(self, data: bytes) -> None:
        async with self._send_lock:
            await self.ws.send_bytes(data)

    async def run(self) -> None:
        while True:
            try:
                text = await self.ws.receive_text()
            except (WebSocketDisconnect, RuntimeError):
                return
            payload: dict[str, Any] = {}
            try:
                msg = json.loads(text)
                type_ = msg.get("type")
                if isinstance(msg.get("payload"), dict):
                    payload = msg["payload"]
                await self._dispatch(type_, payload)
            except GatewayError as exc:
                await self._send_json("error", {**exc.payload(), "tag": _tag(payload)})
            except (KeyError, TypeError, ValueError) as exc:
                await self._send_json(
                    "error",
                    {"error": "MalformedPayload", "detail": str(exc), "tag": _tag(payload)},
                )

    async def _dispatch(self, type_: str, payload: dict[str, Any]) -> None:
        if type_ == "ping":
            await self._send_json("pong", {"ts_micros": _wall_micros()})
        elif type_ == "watch":
            self._start_watch(uuid.UUID(payload["session_id"]))
        elif type_ == "subscribe_events":
            self._start_events(uuid.UUID(payload["session_id"]), int(payload.get("from_seq", 1)))
        elif type_ == "command":
            await self._command(payload)
        elif type_ == "marker":
            record = self.core.add_marker(
                uuid.UUID(payload["session_id"]),
                payload["frame_index"],
                payload["text"],
            )
            await self._send_json("marker_added", {"seq": record.seq, "tag": _tag(payload)})
        elif type_ == "stop":
            entry = await self.core.stop_session(
                str(payload["researcher"]), uuid.UUID(payload["session_id"])
            )
            await self._send_json("stopping", entry.state_payload())
        elif type_ == "replay":
            self._start_replay(
                uuid.UUID(payload["session_id"]), int(payload.get("from_frame", 0))
            )
        else:
            await self._send_json("error", {"error": "MalformedPayload", "detail": f"unknown type {type_!r}"})

    # Live frame forwarding.

    def _start_watch(self, session_id: uuid.UUID) -> None:
        entry = self.core.get_session(session_id)
        hub = self.relay.hub(entry.session_id)
        feed = hub.subscribe_view()
        self._feeds.append((hub, feed))
        self._spawn("watch", self._forward_frames(feed))

    async def _forward_frames(self, feed: BoundedFeed) -> None:
        try:
            async for frame in feed:
                await self._send_binary(encode_frame_record(frame))
            await self._send_json("stream_end", {})
        except (WebSocketDisconnect, RuntimeError, ConnectionError):
            pass

    # Event forwarding: backlog from the log, then live from the bus.

    def _start_events(self, session_id: uuid.UUID, from_seq: int) -> None:
        entry = self.core.get_session(session_id)
        feed = self.core.bus.subscribe(session_events_channel(entry.session_id))
        self._feeds.append((None, feed))
        backlog = self.core.read_events(entry.session_id, from_seq)
        self._spawn("events", self._forward_events(backlog, feed))

    async def _forward_events(self, backlog: list[EventRecord], feed: BoundedFeed) -> None:
        try:
            last_seq = 0
            for event in backlog:
                await self._send_json("event", _event_payload(event))
                last_seq = event.seq
            async for event in feed:
                if event.seq <= last_seq:
                    continue  # was already sent as backlog
                await self._send_json("event", _event_payload(event))
        except (WebSocketDisconnect, RuntimeError, ConnectionError):
            pass

    # Command round trip.

    async def _command(self, payload: dict[str, Any]) -> None:
        session_id = uuid.UUID(payload["session_id"])
        try:
            kind = CommandKind(str(payload["kind"]))
        except ValueError:
            raise MalformedPayload(f"unknown command kind {payload.get('kind')!r}") from None
        applied, round_trip_ms = await self.core.submit_command(
            str(payload["researcher"]), session_id, kind, payload.get("value")
        )
        body = _applied_payload(applied, session_id)
        body["round_trip_ms"] = round_trip_ms
        body["tag"] = _tag(payload)
        await self._send_json("ack", body)

    # Replay of a packed container.

    def _start_replay(self, session_id: uuid.UUID, from_frame: int) -> None:
        entry = self.core.get_session(session_id)
        if entry.status is not SessionStatus.PACKED:
            raise NotPacked(f"session is {entry.status.value}")
        if from_frame < 0 or from_frame > last_delivered_index(entry.container_dir):
            raise MalformedPayload(f"from_frame {from_frame} out of range")
        self._spawn("replay", self._forward_replay(entry, from_frame))

    async def _forward_replay(self, entry: SessionEntry, from_frame: int) -> None:
        try:
            for record, cues in replay(entry.container_dir, from_frame):
                await self._send_json(
                    "replay_frame",
                    {
                        "frame_index": record.frame_index,
                        "cues": [_cue_payload(c) for c in cues],
                    },
                )
                await self._send_binary(encode_frame_record(record))
            await self._send_json("replay_end", {})
        except (WebSocketDisconnect, RuntimeError, ConnectionError):
            pass

    # Plumbing.

    def _spawn(self, name: str, coro: Any) -> None:
        old = self._tasks.get(name)
        if old is not None:
            old.cancel()
        self._tasks[name] = asyncio.get_running_loop().create_task(coro)

    async def aclose(self) -> None:
        for task in self._tasks.values():
            task.cancel()
        if self._tasks:
            await asyncio.gather(*self._tasks.values(), return_exceptions=True)
        for hub, feed in self._feeds:
            if hub is not None:
                hub.unsubscribe(feed)
            else:
                feed.close()


def _tag(payload: dict[str, Any]) -> Any:
    return payload.get("tag")
