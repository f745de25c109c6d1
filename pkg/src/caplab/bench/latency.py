"""Task-latency measurement: four interactive operations, timed over N runs.

Each run uses a fresh HTTP connection so the event-store read is a true
first round trip, then times a device registration on the control port, a
bare ping, and a full command round trip.  Command execution time is
reported net of ping RTT so it isolates the device-side share.
"""

from __future__ import annotations

import asyncio
import json
import statistics
import time
from dataclasses import dataclass
from typing import Any

import httpx

from caplab.agent.runtime import AgentConfig, AgentRuntime

from .errors import BenchError, StackUnreachable
from .stack import BenchStack

TASK_NAMES = (
    "loading the system",
    "setting up the device",
    "client-server latency",
    "executing control command",
)
MIN_RUNS = 10
BENCH_RESEARCHER = "bench"


@dataclass(frozen=True)
class TaskLatency:
    name: str
    mean_ms: float
    std_ms: float
    runs: int

    def to_payload(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "mean_ms": self.mean_ms,
            "std_ms": self.std_ms,
            "runs": self.runs,
        }


@dataclass(frozen=True)
class LatencyReport:
    runs: int
    tasks: tuple[TaskLatency, ...]  # always the four TASK_NAMES, in order

    def to_payload(self) -> dict[str, Any]:
        return {"runs": self.runs, "tasks": [t.to_payload() for t in self.tasks]}

    def to_json(self) -> str:
        return json.dumps(self.to_payload(), indent=2) + "\n"


def _aggregate(runs: int, samples: dict[str, list[float]]) -> LatencyReport:
    rows = tuple(
        TaskLatency(
            name=name,
            mean_ms=statistics.fmean(samples[name]),
            std_ms=statistics.pstdev(samples[name]),
            runs=runs,
        )
        for name in TASK_NAMES
    )
    return LatencyReport(runs=runs, tasks=rows)


async def _time_registration(stack: BenchStack, device_id: int) -> float:
    """Milliseconds for one register write to be acknowledged."""
    reader, writer = await asyncio.open_connection("127.0.0.1", stack.control_port)
    try:
        message = json.dumps(
            {
                "type": "register",
                "payload": {"scene_id": stack.scene_id, "device_id": device_id},
            }
        )
        started = time.perf_counter()
        writer.write(message.encode() + b"\n")
        await writer.drain()
        reply = json.loads(await reader.readline())
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        if reply.get("type") != "registered":
            raise BenchError(f"registration probe refused: {reply}")
        return elapsed_ms
    finally:
        writer.close()


async def measure_task_latencies(stack: BenchStack, runs: int) -> LatencyReport:
    """Time the four interactive tasks `runs` times against a live session."""
    if runs < MIN_RUNS:
        raise ValueError(f"need at least {MIN_RUNS} runs for a stable spread, got {runs}")
    if len(stack.probe_device_ids) < runs:
        raise ValueError(
            f"stack has {len(stack.probe_device_ids)} probe device slots, need {runs}"
        )
    await stack.ensure_up()

    client = stack.client
    lease = await client.post(
        "/leases", json={"researcher": BENCH_RESEARCHER, "scene_id": stack.scene_id}
    )
    if lease.status_code != 200:
        raise StackUnreachable(f"could not lease the bench scene: {lease.text}")
    samples: dict[str, list[float]] = {name: [] for name in TASK_NAMES}
    try:
        runtime = AgentRuntime(
            AgentConfig(
                scene_id=stack.scene_id,
                device_id=stack.capture_device_id,
                gateway_port=stack.control_port,
                relay_port=stack.ingest_port,
                fps=30,
                resolution="360p",
                deterministic_clock=True,
            )
        )
        agent_task = asyncio.get_running_loop().create_task(runtime.run())

        async def _online() -> bool:
            doc = (await client.get("/scenes")).json()
            devices = next(s["devices"] for s in doc["scenes"] if s["scene_id"] == stack.scene_id)
            return any(d["device_id"] == stack.capture_device_id and d["online"] for d in devices)

        await stack.wait_until(_online)
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

        for run_index in range(runs):
            # a fresh client per run: the event-store fetch below really is
            # this connection's first round trip
            async with httpx.AsyncClient(base_url=stack.base_url, timeout=30.0) as probe:
                started = time.perf_counter()
                (await probe.get(f"/sessions/{sid}/events")).raise_for_status()
                samples["loading the system"].append((time.perf_counter() - started) * 1000.0)

                samples["setting up the device"].append(
                    await _time_registration(stack, stack.probe_device_ids[run_index])
                )

                started = time.perf_counter()
                (await probe.get("/ping")).raise_for_status()
                ping_ms = (time.perf_counter() - started) * 1000.0
                samples["client-server latency"].append(ping_ms)

                started = time.perf_counter()
                command = await probe.post(
                    f"/sessions/{sid}/commands",
                    json={"researcher": BENCH_RESEARCHER, "kind": "SET_CAM_PAN", "value": 0},
                )
                command.raise_for_status()
                command_ms = (time.perf_counter() - started) * 1000.0
                samples["executing control command"].append(max(0.0, command_ms - ping_ms))

        stop = await client.post(f"/sessions/{sid}/stop", json={"researcher": BENCH_RESEARCHER})
        stop.raise_for_status()
        await agent_task
    finally:
        await client.delete(f"/leases/{stack.scene_id}", params={"researcher": BENCH_RESEARCHER})

    return _aggregate(runs, samples)
