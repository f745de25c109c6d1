"""Benchmark CLI: streaming FPS, task latencies, and resource sampling.

Each invocation that needs a capture stack boots its own on ephemeral
localhost ports and tears it down afterward; nothing is shared between
measurements.  Reports are JSON, resource samples are CSV, written to
stdout or --out.
"""

from __future__ import annotations

import argparse
import asyncio
import sys
import tempfile
from pathlib import Path

from caplab.model import RESOLUTION_PRESETS

from .errors import BenchError
from .fps import DEFAULT_SOURCE_FPS, measure_fps
from .latency import measure_task_latencies
from .resources import sample_resources
from .stack import launch_stack


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="caplab-bench",
        description="benchmarks against a self-hosted capture stack",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fps = sub.add_parser("fps", help="achieved streaming FPS under a bandwidth budget")
    fps.add_argument("--resolution", required=True, choices=sorted(RESOLUTION_PRESETS))
    fps.add_argument(
        "--budget", type=float, default=None,
        help="send budget in bytes/second (omit for unconstrained)",
    )
    fps.add_argument("--duration", type=float, default=10.0, help="run length in seconds")
    fps.add_argument("--fps", type=int, default=DEFAULT_SOURCE_FPS, help="source frame rate")
    fps.add_argument("--out", type=Path, default=None)

    latency = sub.add_parser("latency", help="interactive task latencies over N runs")
    latency.add_argument("--runs", type=int, default=10)
    latency.add_argument("--out", type=Path, default=None)

    resources = sub.add_parser("resources", help="sample cpu/rss of named processes")
    resources.add_argument(
        "--procs", required=True,
        help="comma-separated process names (exact name or command-line substring)",
    )
    resources.add_argument("--interval", type=int, default=500, help="sample interval in ms")
    resources.add_argument("--duration", type=float, default=10.0, help="sampling window in s")
    resources.add_argument("--out", type=Path, default=None)

    return parser


async def _run_fps(args: argparse.Namespace) -> str:
    with tempfile.TemporaryDirectory(prefix="caplab-bench-") as tmp:
        async with launch_stack(Path(tmp)) as stack:
            report = await measure_fps(
                stack, args.resolution, args.budget, args.duration, source_fps=args.fps
            )
    return report.to_json()


async def _run_latency(args: argparse.Namespace) -> str:
    with tempfile.TemporaryDirectory(prefix="caplab-bench-") as tmp:
        async with launch_stack(Path(tmp), probe_devices=args.runs) as stack:
            report = await measure_task_latencies(stack, args.runs)
    return report.to_json()


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "fps":
            text = asyncio.run(_run_fps(args))
        elif args.command == "latency":
            text = asyncio.run(_run_latency(args))
        else:
            text = sample_resources(
                [name.strip() for name in args.procs.split(",") if name.strip()],
                args.interval,
                args.duration,
            )
    except (BenchError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.out is not None:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
