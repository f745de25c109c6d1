"""Benchmark harness: streaming FPS, task latencies, resource sampling."""

from .errors import BenchError, ProcessNotFound, StackUnreachable
from .fps import (
    DEFAULT_SOURCE_FPS,
    MIN_DURATION_S,
    FpsReport,
    encoded_frame_bytes,
    expected_fps,
    measure_fps,
)
from .latency import (
    MIN_RUNS,
    TASK_NAMES,
    LatencyReport,
    TaskLatency,
    measure_task_latencies,
)
from .resources import CSV_HEADER, sample_resources
from .stack import BenchStack, launch_stack

__all__ = [
    "BenchError",
    "BenchStack",
    "CSV_HEADER",
    "DEFAULT_SOURCE_FPS",
    "FpsReport",
    "LatencyReport",
    "MIN_DURATION_S",
    "MIN_RUNS",
    "ProcessNotFound",
    "StackUnreachable",
    "TASK_NAMES",
    "TaskLatency",
    "encoded_frame_bytes",
    "expected_fps",
    "launch_stack",
    "measure_fps",
    "measure_task_latencies",
    "sample_resources",
]
