#!/usr/bin/env python3
"""Streaming-FPS sweep: achieved frame rate per resolution under one budget.

Runs every resolution preset against the same send budget (default: twelve
raw 720p frames per second, which leaves 360p unconstrained and bites hard
at 1080p), several repetitions each, and prints the trend table.

    python3 scripts/fps_sweep.py --duration 5 --reps 3 --out sweep.json
"""

from __future__ import annotations

import argparse
import asyncio
import json
import statistics
import tempfile
from pathlib import Path

from caplab.bench import encoded_frame_bytes, launch_stack, measure_fps
from caplab.model import RESOLUTION_PRESETS

RESOLUTIONS = sorted(RESOLUTION_PRESETS, key=lambda r: RESOLUTION_PRESETS[r][0])


async def sweep(budget: float, duration: float, reps: int) -> dict:
    rows = []
    with tempfile.TemporaryDirectory(prefix="caplab-sweep-") as tmp:
        async with launch_stack(Path(tmp)) as stack:
            for resolution in RESOLUTIONS:
                reports = [
                    await measure_fps(stack, resolution, budget, duration)
                    for _ in range(reps)
                ]
                achieved = [r.achieved_fps for r in reports]
                rows.append(
                    {
                        "resolution": resolution,
                        "expected_fps": reports[0].expected_fps,
                        "achieved_fps_mean": statistics.fmean(achieved),
                        "achieved_fps_all": achieved,
                        "dropped_total": sum(r.dropped for r in reports),
                    }
                )
    return {"budget_bytes_per_sec": budget, "duration_s": duration, "reps": reps, "rows": rows}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--budget", type=float, default=12 * encoded_frame_bytes("720p"),
                        help="send budget in bytes/second")
    parser.add_argument("--duration", type=float, default=5.0)
    parser.add_argument("--reps", type=int, default=3)
    parser.add_argument("--out", type=Path, default=None, help="also write JSON here")
    args = parser.parse_args()

    result = asyncio.run(sweep(args.budget, args.duration, args.reps))

    print(f"budget {args.budget:,.0f} B/s, {args.reps} reps x {args.duration:.0f}s\n")
    print(f"{'resolution':<12}{'expected':>10}{'achieved':>10}{'dropped':>9}")
    for row in result["rows"]:
        print(
            f"{row['resolution']:<12}{row['expected_fps']:>10.2f}"
            f"{row['achieved_fps_mean']:>10.2f}{row['dropped_total']:>9}"
        )
    means = [row["achieved_fps_mean"] for row in result["rows"]]
    trend = "strictly decreasing" if all(a > b for a, b in zip(means, means[1:])) else "NOT monotone"
    print(f"\ntrend across resolutions: {trend}")

    if args.out is not None:
        args.out.write_text(json.dumps(result, indent=2) + "\n")
        print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
