"""Command-line entry point for running one simulated capture device."""

from __future__ import annotations

import argparse
import asyncio
import json
import sys

from .runtime import AgentConfig, AgentError, AgentRuntime
from .script import load_script


def _host_port(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {text!r}")
    return host, int(port)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="caplab-agent",
        description="Simulated capture device: registers with the gateway, then "
        "streams rendered frames to the relay until stopped.",
    )
    parser.add_argument("--scene", required=True, help="scene id this device belongs to")
    parser.add_argument("--device", required=True, type=int, help="device id within the scene")
    parser.add_argument("--fps", type=int, default=30)
    parser.add_argument("--resolution", choices=["360p", "720p", "1080p"], default="360p")
    parser.add_argument("--relay", type=_host_port, default=("127.0.0.1", 8092), metavar="HOST:PORT")
    parser.add_argument("--gateway", type=_host_port, default=("127.0.0.1", 8091), metavar="HOST:PORT")
    parser.add_argument("--budget", type=float, default=None, metavar="BYTES_PER_SEC",
                        help="send budget; omit for unconstrained")
    parser.add_argument("--deterministic", action="store_true",
                        help="deterministic clock: timestamps derived from frame index")
    parser.add_argument("--script", default=None, metavar="FILE",
                        help="command script file (one '<frame> <KIND> [<value>]' per line)")
    parser.add_argument("--duration", type=float, default=None, metavar="SECONDS",
                        help="stop after this long instead of waiting for the gateway")
    parser.add_argument("--wheelbase", type=float, default=0.25, metavar="METERS")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    script = tuple(load_script(args.script)) if args.script else ()
    config = AgentConfig(
        scene_id=args.scene,
        device_id=args.device,
        gateway_host=args.gateway[0],
        gateway_port=args.gateway[1],
        relay_host=args.relay[0],
        relay_port=args.relay[1],
        fps=args.fps,
        resolution=args.resolution,
        wheelbase_m=args.wheelbase,
        deterministic_clock=args.deterministic,
        send_budget_bytes_per_sec=args.budget,
        duration_s=args.duration,
        script=script,
    )
    runtime = AgentRuntime(config)
    try:
        summary = asyncio.run(runtime.run())
    except AgentError as exc:
        print(f"agent error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130
    print(json.dumps(summary.to_payload(), indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
