#!/usr/bin/env python3
"""Boot a fully live playground: backend plus one simulated agent per device.

Prints the HTTP base URL (REST + /ws WebSocket) and keeps everything running
until Ctrl-C.  This is the stack the console UI connects to.

    python3 scripts/run_stack.py --data-dir ./caplab-data
"""

from __future__ import annotations

import argparse
import asyncio
from pathlib import Path

from caplab.agent.runtime import AgentConfig, AgentRuntime
from caplab.backend import DEFAULT_SCENES, Backend, BackendConfig


async def serve(args: argparse.Namespace) -> None:
    backend = Backend(
        BackendConfig(
            data_dir=args.data_dir,
            http_port=args.http_port,
            control_port=args.control_port,
            ingest_port=args.ingest_port,
        )
    )
    await backend.start()
    agents = []
    for scene in DEFAULT_SCENES:
        for device in scene.devices:
            runtime = AgentRuntime(
                AgentConfig(
                    scene_id=scene.scene_id,
                    device_id=device.device_id,
                    gateway_port=backend.control_port,
                    relay_port=backend.ingest_port,
                    fps=args.fps,
                    resolution=args.resolution,
                    deterministic_clock=args.deterministic,
                )
            )
            agents.append(asyncio.ensure_future(runtime.run()))
    print(f"http/ws  : http://127.0.0.1:{backend.http_port}  (WebSocket at /ws)")
    print(f"control  : 127.0.0.1:{backend.control_port}")
    print(f"ingest   : 127.0.0.1:{backend.ingest_port}")
    print(f"scenes   : {', '.join(s.scene_id for s in DEFAULT_SCENES)}")
    print("Ctrl-C to stop.")
    try:
        await asyncio.Event().wait()
    finally:
        for task in agents:
            task.cancel()
        await asyncio.gather(*agents, return_exceptions=True)
        await backend.stop()


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--data-dir", type=Path, default=Path("./caplab-data"))
    parser.add_argument("--http-port", type=int, default=8090)
    parser.add_argument("--control-port", type=int, default=8091)
    parser.add_argument("--ingest-port", type=int, default=8092)
    parser.add_argument("--fps", type=int, default=30)
    parser.add_argument("--resolution", choices=["360p", "720p", "1080p"], default="360p")
    parser.add_argument("--deterministic", action="store_true", default=True)
    parser.add_argument("--wall-clock", dest="deterministic", action="store_false",
                        help="use wall-clock timestamps instead of the deterministic clock")
    args = parser.parse_args()
    try:
        asyncio.run(serve(args))
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
