#!/usr/bin/env python3
"""Record one scripted deterministic capture end to end, then verify it.

Boots a private stack, drives a scripted agent for the given duration,
anchors a couple of markers, waits for packing, and runs the container
verifier.  The packed container (manifest, segments, events, SRT) is left
under --data-dir for inspection or replay.

    python3 scripts/record_session.py --data-dir ./recordings --duration 10
"""

from __future__ import annotations

import argparse
import asyncio
from pathlib import Path

import httpx

from caplab.agent.runtime import AgentConfig, AgentRuntime
from caplab.agent.script import parse_script
from caplab.backend import Backend, BackendConfig
from caplab.packer import verify_container

DEMO_SCRIPT = """\
# demo drive: accelerate, weave, reverse, stop
2 SET_SPEED 100
45 SET_STEERING 15
90 SET_CAM_PAN -30
150 SET_SPEED -100
200 SET_STEERING -28
240 STOP
"""

DEMO_MARKERS = ((1, "run started"), (60, "checkpoint one"), (120, "checkpoint two"))


async def record(args: argparse.Namespace) -> Path:
    backend = Backend(
        BackendConfig(data_dir=args.data_dir, http_port=0, control_port=0, ingest_port=0)
    )
    await backend.start()
    try:
        script = parse_script(
            Path(args.script).read_text() if args.script else DEMO_SCRIPT
        )
        runtime = AgentRuntime(
            AgentConfig(
                scene_id="lab-a",
                device_id=1,
                gateway_port=backend.control_port,
                relay_port=backend.ingest_port,
                fps=args.fps,
                resolution=args.resolution,
                deterministic_clock=True,
                duration_s=args.duration,
                script=tuple(script),
            )
        )
        agent_task = asyncio.ensure_future(runtime.run())
        async with httpx.AsyncClient(
            base_url=f"http://127.0.0.1:{backend.http_port}", timeout=30.0
        ) as client:
            (await client.post(
                "/leases", json={"researcher": "recorder", "scene_id": "lab-a"}
            )).raise_for_status()
            while True:
                scenes = (await client.get("/scenes")).json()["scenes"]
                lab = next(s for s in scenes if s["scene_id"] == "lab-a")
                if any(d["device_id"] == 1 and d["online"] for d in lab["devices"]):
                    break
                await asyncio.sleep(0.05)
            resp = await client.post(
                "/sessions",
                json={"researcher": "recorder", "scene_id": "lab-a", "device_ids": [1]},
            )
            resp.raise_for_status()
            sid = resp.json()["sessions"][0]["session_id"]
            for frame_index, text in DEMO_MARKERS:
                await client.post(
                    f"/sessions/{sid}/markers",
                    json={"frame_index": frame_index, "text": text},
                )
            summary = await agent_task
            print(f"captured {summary.captured} frames, delivered {summary.delivered}")
            while (await client.get(f"/sessions/{sid}")).json()["status"] != "PACKED":
                await asyncio.sleep(0.05)
        return args.data_dir / sid
    finally:
        await backend.stop()


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--data-dir", type=Path, default=Path("./recordings"))
    parser.add_argument("--duration", type=float, default=10.0)
    parser.add_argument("--fps", type=int, default=30)
    parser.add_argument("--resolution", choices=["360p", "720p", "1080p"], default="360p")
    parser.add_argument("--script", type=Path, default=None,
                        help="command script file (default: built-in demo drive)")
    args = parser.parse_args()

    container = asyncio.run(record(args))
    print(f"container: {container}")
    report = verify_container(container)
    print(report.summary())
    return 0 if report.ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
