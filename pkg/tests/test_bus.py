"""BoundedFeed drop-oldest semantics and Bus channel fan-out."""

import asyncio

import pytest
from hypothesis import given
from hypothesis import strategies as st

from caplab.bus import BoundedFeed, Bus

from tests.support import run


def test_feed_requires_positive_capacity() -> None:
    with pytest.raises(ValueError):
        BoundedFeed(0)


def test_feed_drops_oldest_when_full() -> None:
    async def scenario() -> None:
        feed: BoundedFeed[int] = BoundedFeed(3)
        for i in range(7):
            feed.put(i)
        assert feed.dropped == 4
        feed.close()
        assert [item async for item in feed] == [4, 5, 6]

    run(scenario())


def test_feed_get_returns_none_after_close_and_drain() -> None:
    async def scenario() -> None:
        feed: BoundedFeed[str] = BoundedFeed(4)
        feed.put("a")
        feed.close()
        assert await feed.get() == "a"
        assert await feed.get() is None
        assert await feed.get() is None  # stays drained
        feed.put("late")  # ignored after close
        assert await feed.get() is None

    run(scenario())


def test_feed_wakes_blocked_consumer_on_put() -> None:
    async def scenario() -> None:
        feed: BoundedFeed[int] = BoundedFeed(2)

        async def producer() -> None:
            await asyncio.sleep(0.01)
            feed.put(42)

        task = asyncio.get_running_loop().create_task(producer())
        assert await asyncio.wait_for(feed.get(), timeout=1.0) == 42
        await task

    run(scenario())


def test_feed_wakes_blocked_consumer_on_close() -> None:
    async def scenario() -> None:
        feed: BoundedFeed[int] = BoundedFeed(2)

        async def closer() -> None:
            await asyncio.sleep(0.01)
            feed.close()

        task = asyncio.get_running_loop().create_task(closer())
        assert await asyncio.wait_for(feed.get(), timeout=1.0) is None
        await task

    run(scenario())


@given(
    capacity=st.integers(min_value=1, max_value=8),
    items=st.lists(st.integers(), max_size=40),
)
def test_feed_keeps_newest_suffix(capacity: int, items: list[int]) -> None:
    """Whatever was put, the survivors are exactly the newest `capacity` items."""

    async def scenario() -> None:
        feed: BoundedFeed[int] = BoundedFeed(capacity)
        for item in items:
            feed.put(item)
        feed.close()
        survivors = [item async for item in feed]
        assert survivors == items[-capacity:]
        assert feed.dropped == max(len(items) - capacity, 0)

    run(scenario())


def test_bus_publish_reaches_each_subscriber_once() -> None:
    async def scenario() -> None:
        bus = Bus()
        a = bus.subscribe("ch")
        b = bus.subscribe("ch")
        other = bus.subscribe("other")
        assert bus.publish("ch", "hello") == 2
        assert bus.publish("nobody-listens", "x") == 0
        a.close()
        b.close()
        other.close()
        assert [m async for m in a] == ["hello"]
        assert [m async for m in b] == ["hello"]
        assert [m async for m in other] == []
        bus.close()

    run(scenario())


def test_bus_unsubscribe_stops_delivery_and_closes_feed() -> None:
    async def scenario() -> None:
        bus = Bus()
        feed = bus.subscribe("ch")
        bus.unsubscribe("ch", feed)
        assert feed.closed
        assert bus.publish("ch", 1) == 0
        assert await feed.get() is None
        bus.unsubscribe("ch", feed)  # idempotent
        bus.close()

    run(scenario())


def test_bus_close_closes_all_feeds() -> None:
    async def scenario() -> None:
        bus = Bus()
        feeds = [bus.subscribe(f"ch{i}") for i in range(3)]
        bus.close()
        for feed in feeds:
            assert feed.closed
            assert await feed.get() is None
        assert bus.publish("ch0", 1) == 0

    run(scenario())


def test_bus_respects_per_subscription_capacity() -> None:
    async def scenario() -> None:
        bus = Bus(default_maxsize=2)
        small = bus.subscribe("ch")
        big = bus.subscribe("ch", maxsize=10)
        for i in range(5):
            bus.publish("ch", i)
        bus.close()
        assert [m async for m in small] == [3, 4]
        assert [m async for m in big] == [0, 1, 2, 3, 4]

    run(scenario())
