"""One-process backend: control port, relay ingest, HTTP/WebSocket, packer.

Everything shares a single event loop and a single GatewayCore, which keeps
lease and session operations naturally atomic.  Ports may be given as 0 to
bind ephemerally; the bound ports are printed as one JSON line on stdout so
scripts and tests can discover them.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import uvicorn

from caplab.gateway.control import ControlServer
from caplab.gateway.core import GatewayCore
from caplab.gateway.http import build_app
from caplab.model import DeviceConfig, SceneConfig
from caplab.packer.pack import Packer
from caplab.relay.server import Relay

DEFAULT_SCENES: tuple[SceneConfig, ...] = (
    SceneConfig(
        scene_id="lab-a",
        devices=(DeviceConfig(1, "sim-car"), DeviceConfig(2, "sim-car")),
        description="two-device capture bay",
    ),
    SceneConfig(
        scene_id="lab-b",
        devices=(DeviceConfig(1, "sim-car"), DeviceConfig(2, "sim-car"), DeviceConfig(3, "sim-car")),
        description="three-device capture bay",
    ),
)


@dataclass
class BackendConfig:
    data_dir: Path
    scenes: tuple[SceneConfig, ...] = DEFAULT_SCENES
    host: str = "127.0.0.1"
    http_port: int = 8090
    control_port: int = 8091
    ingest_port: int = 8092
    agent_timeout_s: float = 2.0


class _QuietServer(uvicorn.Server):
    """uvicorn server that leaves signal handling to the embedding process."""

    def install_signal_handlers(self) -> None:  # pragma: no cover
        pass


class Backend:
    """Boots and owns all backend services on the current event loop."""

    def __init__(self, config: BackendConfig) -> None:
        self.config = config
        self.core = GatewayCore(
            list(config.scenes), config.data_dir, agent_timeout_s=config.agent_timeout_s
        )
        self.relay = Relay(self.core)
        self.control = ControlServer(self.core)
        self.packer = Packer(self.core)
        self.app = build_app(self.core, self.relay)
        self.http_port = config.http_port
        self.control_port = config.control_port
        self.ingest_port = config.ingest_port
        self._http_server: _QuietServer | None = None
        self._http_task: asyncio.Task | None = None

    async def start(self) -> None:
        cfg = self.config
        cfg.data_dir.mkdir(parents=True, exist_ok=True)
        await self.control.start(cfg.host, cfg.control_port)
        await self.relay.start(cfg.host, cfg.ingest_port)
        self.packer.start()

        uv_config = uvicorn.Config(
            self.app,
            host=cfg.host,
            port=cfg.http_port,
            log_level="warning",
            access_log=False,
        )
        self._http_server = _QuietServer(uv_config)
        self._http_task = asyncio.get_running_loop().create_task(
            self._http_server.serve(), name="http-server"
        )
        while not self._http_server.started:
            if self._http_task.done():
                self._http_task.result()  # surfaces the bind error
                raise RuntimeError("HTTP server exited before startup")
            await asyncio.sleep(0.01)

        self.control_port = self.control.port
        self.ingest_port = self.relay.port
        self.http_port = self._http_server.servers[0].sockets[0].getsockname()[1]

    async def stop(self) -> None:
        if self._http_server is not None:
            self._http_server.should_exit = True
        if self._http_task is not None:
            await self._http_task
        await self.control.stop()
        await self.relay.stop()
        await self.core.aclose()

    def ports(self) -> dict[str, int]:
        return {
            "http_port": self.http_port,
            "control_port": self.control_port,
            "ingest_port": self.ingest_port,
        }


def load_scenes(path: Path) -> tuple[SceneConfig, ...]:
    """Scene config file: a JSON list of {scene_id, devices, description}."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    scenes = []
    for item in doc:
        scenes.append(
            SceneConfig(
                scene_id=item["scene_id"],
                devices=tuple(
                    DeviceConfig(int(d["device_id"]), d.get("capabilities", ""))
                    for d in item["devices"]
                ),
                description=item.get("description", ""),
            )
        )
    return tuple(scenes)


async def _serve(config: BackendConfig) -> None:
    backend = Backend(config)
    await backend.start()
    print(json.dumps(backend.ports()), flush=True)
    try:
        await asyncio.Event().wait()  # run until interrupted
    finally:
        await backend.stop()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="caplab-backend",
        description="Run the capture-lab backend (control, ingest, HTTP, packer).",
    )
    parser.add_argument("--data-dir", type=Path, default=Path("./caplab-data"))
    parser.add_argument("--scenes", type=Path, default=None, help="JSON scene config file")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--http-port", type=int, default=8090)
    parser.add_argument("--control-port", type=int, default=8091)
    parser.add_argument("--ingest-port", type=int, default=8092)
    parser.add_argument("--agent-timeout", type=float, default=2.0)
    args = parser.parse_args(argv)

    config = BackendConfig(
        data_dir=args.data_dir,
        scenes=load_scenes(args.scenes) if args.scenes else DEFAULT_SCENES,
        host=args.host,
        http_port=args.http_port,
        control_port=args.control_port,
        ingest_port=args.ingest_port,
        agent_timeout_s=args.agent_timeout,
    )
    try:
        asyncio.run(_serve(config))
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())
