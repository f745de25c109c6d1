"""Process resource sampling: CPU and memory of named processes over time.

Output is CSV with one row per (tick, process): timestamp in microseconds,
the requested process name, instantaneous CPU percent since the previous
tick, and resident set size in bytes.
"""

from __future__ import annotations

import csv
import io
import os
import time

import psutil

from .errors import ProcessNotFound

CSV_HEADER = ("ts", "process", "cpu", "rss")


def _resolve(name: str) -> psutil.Process:
    """Find the process a name refers to: exact name or command-line match."""
    own_pid = os.getpid()
    matches = []
    for proc in psutil.process_iter(["pid", "name", "cmdline"]):
        if proc.info["pid"] == own_pid:
            continue  # the sampler's own command line mentions the names
        try:
            if proc.info["name"] == name or name in " ".join(proc.info["cmdline"] or ()):
                matches.append(proc)
        except (psutil.NoSuchProcess, psutil.AccessDenied):
            continue
    if not matches:
        raise ProcessNotFound(f"no running process matches {name!r}")
    return min(matches, key=lambda p: p.pid)


def sample_resources(
    process_names: list[str] | tuple[str, ...],
    interval_ms: int,
    duration_s: float,
) -> str:
    """Sample cpu/rss of each named process at a fixed interval; return CSV."""
    if not process_names:
        raise ValueError("need at least one process name")
    if interval_ms <= 0:
        raise ValueError("interval_ms must be positive")
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")

    procs = {name: _resolve(name) for name in process_names}
    for proc in procs.values():
        proc.cpu_percent(None)  # prime the per-process CPU counter

    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)

    ticks = max(1, round(duration_s * 1000.0 / interval_ms))
    for _ in range(ticks):
        time.sleep(interval_ms / 1000.0)
        ts_micros = time.time_ns() // 1000
        for name, proc in procs.items():
            try:
                cpu = proc.cpu_percent(None)
                rss = proc.memory_info().rss
            except psutil.NoSuchProcess:
                raise ProcessNotFound(f"{name!r} exited during sampling") from None
            writer.writerow((ts_micros, name, cpu, rss))
    return out.getvalue()
