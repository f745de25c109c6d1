"""A self-contained capture stack for benchmark runs.

Every measurement targets a dedicated in-process backend on ephemeral
localhost ports: no external services, no port collisions, and nothing
shared between the FPS and latency suites.
"""

from __future__ import annotations

import asyncio
from contextlib import asynccontextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Awaitable, Callable

import httpx

from caplab.backend import Backend, BackendConfig
from caplab.model import DeviceConfig, SceneConfig

from .errors import StackUnreachable

BENCH_SCENE = "bench"
CAPTURE_DEVICE_ID = 1
PROBE_DEVICE_BASE = 100  # registration-probe ids, disjoint from the capture device
PING_TIMEOUT_S = 5.0


@dataclass
class BenchStack:
    """Handle to a running backend plus the scene layout benchmarks use."""

    backend: Backend
    client: httpx.AsyncClient
    scene_id: str = BENCH_SCENE
    capture_device_id: int = CAPTURE_DEVICE_ID
    probe_device_ids: tuple[int, ...] = ()

    @property
    def base_url(self) -> str:
        return f"http://127.0.0.1:{self.backend.http_port}"

    @property
    def control_port(self) -> int:
        return self.backend.control_port

    @property
    def ingest_port(self) -> int:
        return self.backend.ingest_port

    async def ensure_up(self) -> None:
        try:
            resp = await self.client.get("/ping", timeout=PING_TIMEOUT_S)
            resp.raise_for_status()
        except (httpx.HTTPError, OSError) as exc:
            raise StackUnreachable(f"{self.base_url}: {exc}") from exc

    async def wait_until(
        self, predicate: Callable[[], Awaitable[bool]], *, timeout: float = 30.0
    ) -> None:
        loop = asyncio.get_running_loop()
        deadline = loop.time() + timeout
        while not await predicate():
            if loop.time() > deadline:
                raise StackUnreachable(f"stack did not reach expected state in {timeout}s")
            await asyncio.sleep(0.05)


@asynccontextmanager
async def launch_stack(data_dir: Path, *, probe_devices: int = 0):
    """Boot a backend with one capture device and `probe_devices` probe slots."""
    probe_ids = tuple(PROBE_DEVICE_BASE + i for i in range(probe_devices))
    scene = SceneConfig(
        scene_id=BENCH_SCENE,
        devices=(
            DeviceConfig(CAPTURE_DEVICE_ID, "sim-car"),
            *(DeviceConfig(pid, "probe") for pid in probe_ids),
        ),
        description="benchmark scene",
    )
    backend = Backend(
        BackendConfig(
            data_dir=Path(data_dir),
            scenes=(scene,),
            http_port=0,
            control_port=0,
            ingest_port=0,
        )
    )
    try:
        await backend.start()
    except OSError as exc:
        raise StackUnreachable(f"backend failed to start: {exc}") from exc
    client = httpx.AsyncClient(
        base_url=f"http://127.0.0.1:{backend.http_port}", timeout=30.0
    )
    stack = BenchStack(
        backend=backend, client=client, probe_device_ids=probe_ids
    )
    try:
        await stack.ensure_up()
        yield stack
    finally:
        await client.aclose()
        await backend.stop()
