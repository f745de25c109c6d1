"""Token bucket used by the agent's sender to enforce a byte budget.

The bucket starts empty and fills at `rate` bytes/second up to `capacity`
(two encoded frames).  A frame is sent only if its full size can be covered
by tokens no later than the frame's send deadline (the next capture tick);
otherwise the frame is dropped and no tokens are consumed.  Starting empty
means a zero budget delivers nothing, and a generous budget pays at most one
tick of warm-up.
"""

from __future__ import annotations


class TokenBucket:
    def __init__(self, rate_bytes_per_sec: float, capacity_bytes: float, now: float) -> None:
        if rate_bytes_per_sec < 0:
            raise ValueError("rate must be >= 0")
        self.rate = float(rate_bytes_per_sec)
        self.capacity = float(capacity_bytes)
        self.tokens = 0.0
        self.updated_at = now

    def _refill(self, now: float) -> None:
        if now > self.updated_at:
            self.tokens = min(self.capacity, self.tokens + (now - self.updated_at) * self.rate)
            self.updated_at = now

    def ready_time(self, size: int, now: float) -> float | None:
        """Earliest time at or after `now` when `size` tokens are available.

        None when the bucket can never cover `size` (zero rate or size
        beyond capacity).
        """
        self._refill(now)
        if self.tokens >= size:
            return now
        if self.rate == 0 or size > self.capacity:
            return None
        return now + (size - self.tokens) / self.rate

    def consume(self, size: int, now: float) -> None:
        self._refill(now)
        # Tolerate float round-off when consuming exactly at ready_time().
        if self.tokens < size - 1e-6:
            raise RuntimeError(f"consuming {size} with only {self.tokens:.1f} tokens")
        self.tokens = max(0.0, self.tokens - size)
