class BenchError(Exception):
    """Base class for benchmark harness failures."""


class StackUnreachable(BenchError):
    """The capture stack did not answer on the expected local ports."""


class ProcessNotFound(BenchError):
    """No observable process matched a requested name."""
