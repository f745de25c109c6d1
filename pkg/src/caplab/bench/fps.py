"""Streaming-FPS measurement: what frame rate survives a bandwidth budget.

One measurement = one deterministic agent streaming for a fixed duration
with the given send budget, against a dedicated stack.  The relay's ingest
counters are the ground truth for what actually arrived; the agent's own
summary supplies the drop count (frames the budget forced it to skip).
"""

from __future__ import annotations

import asyncio
import json
from dataclasses import asdict, dataclass
from typing import Any

from caplab.agent.runtime import AgentConfig, AgentRuntime
from caplab.model import RESOLUTION_PRESETS, SessionStatus, frame_payload_size
from caplab.model.codec import FRAME_HEADER_SIZE

from .errors import StackUnreachable
from .stack import BenchStack

MIN_DURATION_S = 5.0  # below this, startup transients dominate the mean
DEFAULT_SOURCE_FPS = 30
BENCH_RESEARCHER = "bench"


@dataclass(frozen=True)
class FpsReport:
    """Outcome of one streaming run at a fixed resolution and budget."""

    resolution: str
    budget_bytes_per_sec: float | None
    source_fps: int
    achieved_fps: float
    expected_fps: float
    duration_s: float
    dropped: int

    def to_payload(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_payload(), indent=2, sort_keys=True) + "\n"


def encoded_frame_bytes(resolution: str) -> int:
    """On-the-wire size of one raw frame record at a resolution preset."""
    return FRAME_HEADER_SIZE + frame_payload_size(resolution)


def expected_fps(
    resolution: str, budget_bytes_per_sec: float | None, source_fps: int
) -> float:
    """Frame rate the budget admits: the source rate, capped by bytes/frame."""
    if budget_bytes_per_sec is None:
        return float(source_fps)
    return min(float(source_fps), budget_bytes_per_sec / encoded_frame_bytes(resolution))


async def measure_fps(
    stack: BenchStack,
    resolution: str,
    budget_bytes_per_sec: float | None,
    duration_s: float,
    *,
    source_fps: int = DEFAULT_SOURCE_FPS,
) -> FpsReport:
    """Stream for `duration_s` and report achieved vs expected frame rate."""
    if resolution not in RESOLUTION_PRESETS:
        raise ValueError(f"unknown resolution {resolution!r}; choose from {sorted(RESOLUTION_PRESETS)}")
    if duration_s < MIN_DURATION_S:
        raise ValueError(f"duration_s must be >= {MIN_DURATION_S}, got {duration_s}")
    if budget_bytes_per_sec is not None and budget_bytes_per_sec <= 0:
        raise ValueError("budget_bytes_per_sec must be positive (or None for unconstrained)")
    if source_fps < 1:
        raise ValueError("source_fps must be >= 1")
    await stack.ensure_up()

    client = stack.client
    lease = await client.post(
        "/leases", json={"researcher": BENCH_RESEARCHER, "scene_id": stack.scene_id}
    )
    if lease.status_code != 200:
        raise StackUnreachable(f"could not lease the bench scene: {lease.text}")
    try:

        async def _device_state(want_online: bool) -> bool:
            doc = (await client.get("/scenes")).json()
            devices = next(s["devices"] for s in doc["scenes"] if s["scene_id"] == stack.scene_id)
            return any(
                d["device_id"] == stack.capture_device_id and d["online"] == want_online
                for d in devices
            )

        # back-to-back runs on one stack: wait out the previous agent's
        # deregistration before claiming the device slot again
        await stack.wait_until(lambda: _device_state(False))
        runtime = AgentRuntime(
            AgentConfig(
                scene_id=stack.scene_id,
                device_id=stack.capture_device_id,
                gateway_port=stack.control_port,
                relay_port=stack.ingest_port,
                fps=source_fps,
                resolution=resolution,
                deterministic_clock=True,
                duration_s=duration_s,
                send_budget_bytes_per_sec=budget_bytes_per_sec,
            )
        )
        agent_task = asyncio.get_running_loop().create_task(runtime.run())
        await stack.wait_until(lambda: _device_state(True))
        resp = await client.post(
            "/sessions",
            json={
                "researcher": BENCH_RESEARCHER,
                "scene_id": stack.scene_id,
                "device_ids": [stack.capture_device_id],
            },
        )
        if resp.status_code != 200:
            raise StackUnreachable(f"session start failed: {resp.text}")
        sid = resp.json()["sessions"][0]["session_id"]

        summary = await agent_task  # the agent stops itself after duration_s

        async def _packed() -> bool:
            doc = (await client.get(f"/sessions/{sid}")).json()
            return doc["status"] == SessionStatus.PACKED.value

        await stack.wait_until(_packed)
        stats = (await client.get(f"/sessions/{sid}/stats")).json()
    finally:
        await client.delete(f"/leases/{stack.scene_id}", params={"researcher": BENCH_RESEARCHER})

    return FpsReport(
        resolution=resolution,
        budget_bytes_per_sec=budget_bytes_per_sec,
        source_fps=source_fps,
        # mean over the run; delivery can never outrun the tick counter, so
        # this stays <= source_fps by construction
        achieved_fps=stats["delivered"] / duration_s,
        expected_fps=expected_fps(resolution, budget_bytes_per_sec, source_fps),
        duration_s=duration_s,
        dropped=summary.dropped,
    )
