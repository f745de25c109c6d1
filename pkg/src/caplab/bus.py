"""In-process pub/sub and bounded fan-out feeds.

One Bus instance carries the gateway's event channels (`session.<id>.events`,
`packing`); BoundedFeed is the drop-oldest queue used for every live
subscriber — relay viewers, inference processors, bus subscriptions — so a
slow consumer loses old items instead of back-pressuring the producer.
"""

from __future__ import annotations

import asyncio
from collections import deque
from typing import Any, AsyncIterator, Generic, TypeVar

T = TypeVar("T")


class BoundedFeed(Generic[T]):
    """Single-consumer queue: put() drops the oldest item when full."""

    def __init__(self, maxsize: int) -> None:
        if maxsize < 1:
            raise ValueError("maxsize must be >= 1")
        self.maxsize = maxsize
        self.dropped = 0
        self._items: deque[T] = deque()
        self._wakeup = asyncio.Event()
        self._closed = False

    def put(self, item: T) -> None:
        if self._closed:
            return
        if len(self._items) >= self.maxsize:
            self._items.popleft()
            self.dropped += 1
        self._items.append(item)
        self._wakeup.set()

    def close(self) -> None:
        self._closed = True
        self._wakeup.set()

    @property
    def closed(self) -> bool:
        return self._closed

    async def get(self) -> T | None:
        """Next item, or None once the feed is closed and drained."""
        while True:
            if self._items:
                return self._items.popleft()
            if self._closed:
                return None
            self._wakeup.clear()
            await self._wakeup.wait()

    def __aiter__(self) -> AsyncIterator[T]:
        return self._iterate()

    async def _iterate(self) -> AsyncIterator[T]:
        while True:
            item = await self.get()
            if item is None:
                return
            yield item


class Bus:
    """Named channels with independent bounded subscriptions.

    publish() is synchronous and never blocks: each subscriber has its own
    BoundedFeed, so delivery is at-most-once per subscriber and slow
    subscribers only ever lose their own oldest messages.
    """

    def __init__(self, default_maxsize: int = 256) -> None:
        self._default_maxsize = default_maxsize
        self._channels: dict[str, list[BoundedFeed[Any]]] = {}

    def subscribe(self, channel: str, maxsize: int | None = None) -> BoundedFeed[Any]:
        feed: BoundedFeed[Any] = BoundedFeed(maxsize or self._default_maxsize)
        self._channels.setdefault(channel, []).append(feed)
        return feed

    def unsubscribe(self, channel: str, feed: BoundedFeed[Any]) -> None:
        feeds = self._channels.get(channel)
        if feeds and feed in feeds:
            feeds.remove(feed)
            feed.close()

    def publish(self, channel: str, message: Any) -> int:
        feeds = self._channels.get(channel, ())
        for feed in feeds:
            feed.put(message)
        return len(feeds)

    def close(self) -> None:
        for feeds in self._channels.values():
            for feed in feeds:
                feed.close()
        self._channels.clear()
