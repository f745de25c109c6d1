#!/usr/bin/env python3
"""Compare agent resource usage across resolutions (360p vs 1080p).

Runs one streaming session per resolution with the agent in a separate
process, samples its CPU and RSS while it streams, and prints the means.
Higher resolutions should cost more CPU; the ordering is checked at the
end.  Kept as a script (not a CI test) because absolute load ordering
depends on the machine.

    python3 scripts/resource_profile.py --duration 6
"""

from __future__ import annotations

import argparse
import asyncio
import csv
import io
import statistics
import subprocess
import sys
import tempfile
import uuid
from pathlib import Path

import httpx

from caplab.backend import Backend, BackendConfig
from caplab.bench import sample_resources

AGENT_SHIM = "import sys; from caplab.agent.cli import main; sys.exit(main(sys.argv[2:]))"


async def profile_resolution(
    backend: Backend, client: httpx.AsyncClient, resolution: str, duration: float,
    interval_ms: int,
) -> dict[str, float]:
    token = f"agent-probe-{uuid.uuid4().hex[:8]}"
    agent = subprocess.Popen(
        [
            sys.executable, "-c", AGENT_SHIM, token,
            "--scene", "lab-a", "--device", "1",
            "--gateway", f"127.0.0.1:{backend.control_port}",
            "--relay", f"127.0.0.1:{backend.ingest_port}",
            "--resolution", resolution, "--deterministic",
            "--duration", str(duration),
        ],
        stdout=subprocess.DEVNULL,
    )
    try:
        while True:
            scenes = (await client.get("/scenes")).json()["scenes"]
            lab = next(s for s in scenes if s["scene_id"] == "lab-a")
            if any(d["device_id"] == 1 and d["online"] for d in lab["devices"]):
                break
            await asyncio.sleep(0.05)
        resp = await client.post(
            "/sessions",
            json={"researcher": "profiler", "scene_id": "lab-a", "device_ids": [1]},
        )
        resp.raise_for_status()
        # sample while the agent streams; sampling sleeps, so push it off-loop
        text = await asyncio.to_thread(
            sample_resources, [token], interval_ms, max(1.0, duration - 1.0)
        )
        await asyncio.to_thread(agent.wait)
    finally:
        if agent.poll() is None:
            agent.kill()
            agent.wait()

    rows = list(csv.DictReader(io.StringIO(text)))
    return {
        "cpu_mean": statistics.fmean(float(r["cpu"]) for r in rows),
        "rss_mean": statistics.fmean(int(r["rss"]) for r in rows),
        "samples": len(rows),
    }


async def profile(duration: float, interval_ms: int) -> dict[str, dict[str, float]]:
    results: dict[str, dict[str, float]] = {}
    with tempfile.TemporaryDirectory(prefix="caplab-profile-") as tmp:
        backend = Backend(
            BackendConfig(data_dir=Path(tmp), http_port=0, control_port=0, ingest_port=0)
        )
        await backend.start()
        try:
            async with httpx.AsyncClient(
                base_url=f"http://127.0.0.1:{backend.http_port}", timeout=30.0
            ) as client:
                (await client.post(
                    "/leases",
                    json={"researcher": "profiler", "scene_id": "lab-a",
                          "ttl_seconds": 3600},
                )).raise_for_status()
                for resolution in ("360p", "1080p"):
                    results[resolution] = await profile_resolution(
                        backend, client, resolution, duration, interval_ms
                    )
        finally:
            await backend.stop()
    return results


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--duration", type=float, default=6.0, help="seconds per resolution")
    parser.add_argument("--interval", type=int, default=250, help="sample interval in ms")
    args = parser.parse_args()

    results = asyncio.run(profile(args.duration, args.interval))
    print(f"{'resolution':<12}{'cpu % mean':>12}{'rss MiB mean':>14}{'samples':>9}")
    for resolution, row in results.items():
        print(
            f"{resolution:<12}{row['cpu_mean']:>12.1f}"
            f"{row['rss_mean'] / (1024 * 1024):>14.1f}{row['samples']:>9}"
        )
    ordered = results["1080p"]["cpu_mean"] > results["360p"]["cpu_mean"]
    print(f"\ncpu(1080p) > cpu(360p): {ordered}")
    return 0 if ordered else 1


if __name__ == "__main__":
    raise SystemExit(main())
