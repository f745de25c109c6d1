"""Shared helpers for integration and acceptance tests.

Tests are plain pytest functions that drive asyncio via run(); the helpers
here boot a full in-process backend on ephemeral ports and script agents
and HTTP clients against it.
"""

from __future__ import annotations

import asyncio
import json
import uuid
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Any, Awaitable, Callable, Sequence

import httpx

from caplab.agent.runtime import AgentConfig, AgentRuntime
from caplab.agent.script import ScriptedCommand
from caplab.backend import DEFAULT_SCENES, Backend, BackendConfig
from caplab.gateway.core import GatewayCore, SessionEntry
from caplab.model import DeviceConfig, SceneConfig, SessionStatus


def run(coro: Awaitable[Any]) -> Any:
    """Drive one async test scenario to completion."""
    return asyncio.run(coro)


class FakeWriter:
    """Stands in for a control-connection StreamWriter in core-level tests."""

    def __init__(self) -> None:
        self.messages: list[dict] = []
        self.closed = False

    def write(self, data: bytes) -> None:
        for line in data.decode().splitlines():
            self.messages.append(json.loads(line))

    async def drain(self) -> None:
        pass

    def close(self) -> None:
        self.closed = True


def make_core(tmp_path: Path, **kwargs: Any) -> GatewayCore:
    """GatewayCore over one two-device scene, rooted in a temp dir."""
    scenes = [
        SceneConfig(
            scene_id="s",
            devices=(DeviceConfig(1, "sim-car"), DeviceConfig(2, "sim-car")),
            description="test scene",
        )
    ]
    return GatewayCore(scenes, Path(tmp_path) / "data", **kwargs)


def make_entry(
    core: GatewayCore,
    *,
    device_id: int = 1,
    status: SessionStatus = SessionStatus.LIVE,
    fps: int = 30,
) -> SessionEntry:
    """Fabricate a registered session with an open container directory."""
    session_id = uuid.uuid4()
    container = core.data_dir / str(session_id)
    (container / "segments").mkdir(parents=True)
    entry = SessionEntry(
        session_id=session_id,
        scene_id="s",
        device_id=device_id,
        container_dir=container,
    )
    entry.status = status
    entry.fps = fps
    entry.resolution = "360p"
    entry._events_file = (container / "events.jsonl").open("a", encoding="utf-8")
    core.sessions[session_id] = entry
    return entry


@asynccontextmanager
async def running_backend(
    tmp_path: Path,
    *,
    scenes: Sequence[SceneConfig] = DEFAULT_SCENES,
    agent_timeout_s: float = 2.0,
):
    backend = Backend(
        BackendConfig(
            data_dir=Path(tmp_path) / "data",
            scenes=tuple(scenes),
            http_port=0,
            control_port=0,
            ingest_port=0,
            agent_timeout_s=agent_timeout_s,
        )
    )
    await backend.start()
    try:
        yield backend
    finally:
        await backend.stop()


@asynccontextmanager
async def http_client(backend: Backend):
    async with httpx.AsyncClient(
        base_url=f"http://127.0.0.1:{backend.http_port}", timeout=30.0
    ) as client:
        yield client


def agent_config(
    backend: Backend,
    *,
    scene: str = "lab-a",
    device: int = 1,
    fps: int = 30,
    resolution: str = "360p",
    deterministic: bool = True,
    duration_s: float | None = None,
    budget: float | None = None,
    script: Sequence[ScriptedCommand] = (),
    wheelbase: float | None = None,
) -> AgentConfig:
    kwargs: dict[str, Any] = {}
    if wheelbase is not None:
        kwargs["wheelbase_m"] = wheelbase
    return AgentConfig(
        scene_id=scene,
        device_id=device,
        gateway_port=backend.control_port,
        relay_port=backend.ingest_port,
        fps=fps,
        resolution=resolution,
        deterministic_clock=deterministic,
        duration_s=duration_s,
        send_budget_bytes_per_sec=budget,
        script=tuple(script),
        **kwargs,
    )


def spawn_agent(config: AgentConfig) -> tuple[AgentRuntime, asyncio.Task]:
    runtime = AgentRuntime(config)
    task = asyncio.get_running_loop().create_task(runtime.run(), name=f"agent-{config.device_id}")
    return runtime, task


async def wait_for(
    predicate: Callable[[], Awaitable[bool]], *, timeout: float = 10.0, interval: float = 0.05
) -> None:
    deadline = asyncio.get_running_loop().time() + timeout
    while True:
        if await predicate():
            return
        if asyncio.get_running_loop().time() > deadline:
            raise AssertionError("condition not reached in time")
        await asyncio.sleep(interval)


async def wait_device_online(client: httpx.AsyncClient, scene: str, device: int) -> None:
    async def _online() -> bool:
        doc = (await client.get("/scenes")).json()
        for s in doc["scenes"]:
            if s["scene_id"] == scene:
                return any(d["device_id"] == device and d["online"] for d in s["devices"])
        return False

    await wait_for(_online)


async def acquire_lease(
    client: httpx.AsyncClient, researcher: str, scene: str, ttl_seconds: int = 300
) -> dict:
    resp = await client.post(
        "/leases", json={"researcher": researcher, "scene_id": scene, "ttl_seconds": ttl_seconds}
    )
    assert resp.status_code == 200, resp.text
    return resp.json()

async def start_sessions(
    client: httpx.AsyncClient,
    researcher: str,
    scene: str,
    device_ids: list[int],
    session_ids: list[str] | None = None,
) -> list[str]:
    body: dict[str, Any] = {"researcher": researcher, "scene_id": scene, "device_ids": device_ids}
    if session_ids is not None:
        body["session_ids"] = session_ids
    resp = await client.post("/sessions", json=body)
    assert resp.status_code == 200, resp.text
    return [s["session_id"] for s in resp.json()["sessions"]]


async def session_status(client: httpx.AsyncClient, session_id: str) -> str:
    resp = await client.get(f"/sessions/{session_id}")
    assert resp.status_code == 200, resp.text
    return resp.json()["status"]


async def wait_status(
    client: httpx.AsyncClient, session_id: str, status: str, *, timeout: float = 30.0
) -> None:
    async def _at() -> bool:
        return await session_status(client, session_id) == status

    await wait_for(_at, timeout=timeout)


async def add_marker(
    client: httpx.AsyncClient, session_id: str, frame_index: int, text: str
) -> int:
    resp = await client.post(
        f"/sessions/{session_id}/markers", json={"frame_index": frame_index, "text": text}
    )
    assert resp.status_code == 200, resp.text
    return resp.json()["seq"]


async def submit_command(
    client: httpx.AsyncClient,
    researcher: str,
    session_id: str,
    kind: str,
    value: float | int | None = None,
) -> dict:
    body: dict[str, Any] = {"researcher": researcher, "kind": kind}
    if value is not None:
        body["value"] = value
    resp = await client.post(f"/sessions/{session_id}/commands", json=body)
    assert resp.status_code == 200, resp.text
    return resp.json()


async def stop_session(client: httpx.AsyncClient, researcher: str, session_id: str) -> dict:
    resp = await client.post(f"/sessions/{session_id}/stop", json={"researcher": researcher})
    assert resp.status_code == 200, resp.text
    return resp.json()


def container_dir(backend: Backend, session_id: str) -> Path:
    return backend.config.data_dir / session_id


@asynccontextmanager
async def ws_client(backend: Backend):
    from websockets.asyncio.client import connect

    async with connect(
        f"ws://127.0.0.1:{backend.http_port}/ws", max_size=2**24, open_timeout=10
    ) as ws:
        yield ws


async def ws_send(ws: Any, type_: str, **payload: Any) -> None:
    await ws.send(json.dumps({"type": type_, "payload": payload}))


async def ws_recv_json(ws: Any, *, timeout: float = 10.0) -> dict:
    """Next text message; fails the test on an unexpected binary frame."""
    message = await asyncio.wait_for(ws.recv(), timeout=timeout)
    assert isinstance(message, str), f"expected a JSON message, got {len(message)} binary bytes"
    return json.loads(message)


async def ws_recv_binary(ws: Any, *, timeout: float = 10.0) -> bytes:
    message = await asyncio.wait_for(ws.recv(), timeout=timeout)
    assert isinstance(message, (bytes, bytearray)), f"expected binary, got {message!r}"
    return bytes(message)


def parse_replay_stream(data: bytes) -> list[tuple[dict, Any]]:
    """Split a /frames response into (metadata, FrameRecord) pairs."""
    import struct as _struct

    from caplab.model import decode_frame_record, frame_payload_length
    from caplab.model.codec import FRAME_HEADER_SIZE

    pairs = []
    offset = 0
    while offset < len(data):
        (meta_len,) = _struct.unpack_from("<I", data, offset)
        offset += 4
        meta = json.loads(data[offset : offset + meta_len].decode())
        offset += meta_len
        header = data[offset : offset + FRAME_HEADER_SIZE]
        payload_len = frame_payload_length(header)
        record = decode_frame_record(data[offset : offset + FRAME_HEADER_SIZE + payload_len])
        offset += FRAME_HEADER_SIZE + payload_len
        pairs.append((meta, record))
    return pairs


class GatedProxy:
    """TCP proxy that buffers upstream bytes until released.

    Lets a test pin event order against the relay: the agent connects and
    streams immediately, but nothing reaches the real ingest port until the
    test calls release() — e.g. after attaching a processor, so the processor
    provably sees every delivered frame from frame 0.
    """

    def __init__(self, upstream_host: str, upstream_port: int) -> None:
        self.upstream_host = upstream_host
        self.upstream_port = upstream_port
        self.gate = asyncio.Event()
        self._server: asyncio.base_events.Server | None = None
        self._tasks: list[asyncio.Task] = []

    async def start(self) -> int:
        self._server = await asyncio.start_server(self._handle, "127.0.0.1", 0)
        return self._server.sockets[0].getsockname()[1]

    def release(self) -> None:
        self.gate.set()

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        task = asyncio.get_running_loop().create_task(self._pipe(reader, writer))
        self._tasks.append(task)

    async def _pipe(self, reader: asyncio.StreamReader, client_writer: asyncio.StreamWriter) -> None:
        await self.gate.wait()
        upstream_reader, upstream_writer = await asyncio.open_connection(
            self.upstream_host, self.upstream_port
        )
        try:
            while True:
                chunk = await reader.read(65536)
                if not chunk:
                    break
                upstream_writer.write(chunk)
                await upstream_writer.drain()
        finally:
            upstream_writer.close()
            client_writer.close()

    async def stop(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
        for task in self._tasks:
            task.cancel()
        if self._tasks:
            await asyncio.gather(*self._tasks, return_exceptions=True)


REFERENCE_SCRIPT = """\
# deterministic 10 s reference drive, 30 fps
2 SET_SPEED 100
45 SET_STEERING 15
90 SET_CAM_PAN -30
150 SET_SPEED -100
200 SET_STEERING -28
240 STOP
"""

REFERENCE_MARKERS: tuple[tuple[int, str], ...] = (
    (1, "run started"),
    (60, "checkpoint one"),
    (120, "checkpoint two"),
    (280, "survey prompt"),
)


async def record_reference_session(
    backend: Backend,
    client: httpx.AsyncClient,
    *,
    researcher: str = "ref-runner",
    scene: str = "lab-a",
    device: int = 1,
    session_id: str | None = None,
) -> str:
    """Run the frozen 10 s / 30 fps deterministic session; returns its id (PACKED)."""
    from caplab.agent.script import parse_script

    config = agent_config(
        backend,
        scene=scene,
        device=device,
        fps=30,
        duration_s=10.0,
        deterministic=True,
        script=parse_script(REFERENCE_SCRIPT),
    )
    _, agent_task = spawn_agent(config)
    await acquire_lease(client, researcher, scene)
    await wait_device_online(client, scene, device)
    session_ids = [session_id] if session_id is not None else None
    (sid,) = await start_sessions(client, researcher, scene, [device], session_ids)
    for frame_index, text in REFERENCE_MARKERS:
        await add_marker(client, sid, frame_index, text)
    await agent_task  # agent runs its 10 s duration and stops itself
    await wait_status(client, sid, "PACKED", timeout=30.0)
    return sid
