"""Transport session: routing, queue policy, heartbeats, latency."""

import asyncio
import statistics
import time

import numpy as np
import pytest

from telemanip.protocol import (
    Ack,
    FrameDecoder,
    RobotStateMessage,
    SkeletonFrame,
    decode,
    encode,
)
from telemanip.session import FreshestWins, SessionError, TcpSession
from telemanip.teleop import BODY_SEGMENTS, HAND_SEGMENTS


def make_state(timestamp=0.0):
    return RobotStateMessage(
        timestamp=timestamp,
        base_pos=np.zeros(3),
        base_quat=np.array([1.0, 0.0, 0.0, 0.0]),
        q=np.zeros(4),
        qd=np.zeros(4),
        tau=np.zeros(4),
        contact_forces=np.zeros((4, 3)),
    )


def make_skeleton(timestamp=0.0):
    return SkeletonFrame(
        timestamp=timestamp,
        body_pos=np.zeros((BODY_SEGMENTS, 3)),
        body_quat=np.tile([1.0, 0, 0, 0], (BODY_SEGMENTS, 1)),
        left_hand_pos=np.zeros((HAND_SEGMENTS, 3)),
        left_hand_quat=np.tile([1.0, 0, 0, 0], (HAND_SEGMENTS, 1)),
        right_hand_pos=np.zeros((HAND_SEGMENTS, 3)),
        right_hand_quat=np.tile([1.0, 0, 0, 0], (HAND_SEGMENTS, 1)),
    )


class FakeClock:
    def __init__(self):
        self.now = 0.0

    def __call__(self):
        return self.now


def test_freshest_wins_consumer_sees_newest():
    clock = FakeClock()
    channel = FreshestWins(stale_after=0.1, clock=clock)
    # producer at 100 Hz, consumer at 50 Hz: every poll sees the newest
    seen = []
    for i in range(20):
        clock.now = i * 0.01
        channel.offer(make_skeleton(timestamp=clock.now))
        if i % 2 == 1:
            seen.append(channel.take().timestamp)
    assert seen == [pytest.approx(i * 0.01) for i in range(1, 20, 2)]
    assert channel.take() is None  # nothing new since last poll


def test_freshest_wins_ignores_out_of_order():
    channel = FreshestWins(clock=FakeClock())
    channel.offer(make_skeleton(timestamp=2.0))
    assert not channel.offer(make_skeleton(timestamp=1.0))
    assert channel.take().timestamp == 2.0


def test_stale_frame_dropped_not_queued():
    clock = FakeClock()
    channel = FreshestWins(stale_after=0.1, clock=clock)
    channel.offer(make_skeleton(timestamp=0.0))
    clock.now = 0.25
    assert channel.take() is None


async def _start_session(**kwargs):
    session = TcpSession(port=0, **kwargs)
    await session.start()
    return session


async def _connect(session):
    return await asyncio.open_connection("127.0.0.1", session.port)


async def _read_message(reader, timeout=2.0):
    decoder = FrameDecoder()
    while True:
        data = await asyncio.wait_for(reader.read(4096), timeout)
        if not data:
            raise ConnectionError("peer closed")
        messages = decoder.feed(data)
        if messages:
            return messages[0]


def test_skeleton_lands_in_control_slot():
    async def scenario():
        session = await _start_session()
        reader, writer = await _connect(session)
        writer.write(encode(make_skeleton(timestamp=4.5)))
        await writer.drain()
        for _ in range(100):
            await asyncio.sleep(0.005)
            taken = session.take_control()
            if taken is not None:
                break
        assert taken.timestamp == 4.5
        writer.close()
        await session.stop()

    asyncio.run(scenario())


def test_state_routed_between_peers_not_echoed():
    async def scenario():
        session = await _start_session()
        console_r, console_w = await _connect(session)
        sim_r, sim_w = await _connect(session)
        await asyncio.sleep(0.05)
        sim_w.write(encode(make_state(timestamp=7.0)))
        await sim_w.drain()
        received = await _read_message(console_r)
        assert isinstance(received, RobotStateMessage)
        assert received.timestamp == 7.0
        # the sender must not get its own message back
        with pytest.raises(asyncio.TimeoutError):
            await _read_message(sim_r, timeout=0.15)
        console_w.close()
        sim_w.close()
        await session.stop()

    asyncio.run(scenario())


def test_publish_reaches_connected_console():
    async def scenario():
        session = await _start_session()
        reader, writer = await _connect(session)
        await asyncio.sleep(0.05)
        session.publish(make_state(timestamp=3.25))
        received = await _read_message(reader)
        assert received.timestamp == 3.25
        writer.close()
        await session.stop()

    asyncio.run(scenario())


def test_heartbeats_without_clients_route_nothing():
    async def scenario():
        session = await _start_session(heartbeat_interval=0.02)
        await asyncio.sleep(0.15)
        assert session.heartbeats >= 3
        assert session.routed == 0
        await session.stop()

    asyncio.run(scenario())


def test_heartbeat_acks_reach_idle_peer():
    async def scenario():
        session = await _start_session(heartbeat_interval=0.05)
        reader, writer = await _connect(session)
        received = await _read_message(reader)
        assert isinstance(received, Ack)
        writer.close()
        await session.stop()

    asyncio.run(scenario())


def test_third_connection_refused():
    async def scenario():
        session = await _start_session()
        peers = [await _connect(session) for _ in range(2)]
        await asyncio.sleep(0.05)
        extra_r, extra_w = await _connect(session)
        data = await asyncio.wait_for(extra_r.read(64), 2.0)
        assert data == b""  # closed without traffic
        assert any("connection_refused" in name for _, name in session.events)
        for _, w in peers:
            w.close()
        extra_w.close()
        await session.stop()

    asyncio.run(scenario())


def test_disconnect_is_event_not_crash():
    async def scenario():
        session = await _start_session()
        reader, writer = await _connect(session)
        await asyncio.sleep(0.05)
        writer.close()
        for _ in range(100):
            await asyncio.sleep(0.005)
            if any("peer_disconnected" in name for _, name in session.events):
                break
        assert any("peer_disconnected" in name for _, name in session.events)
        # a replacement connection still works
        reader2, writer2 = await _connect(session)
        await asyncio.sleep(0.05)
        assert session.peer_count == 1
        writer2.close()
        await session.stop()

    asyncio.run(scenario())


def test_bind_conflict_raises():
    async def scenario():
        first = await _start_session()
        second = TcpSession(port=first.port)
        with pytest.raises(SessionError, match=str(first.port)):
            await second.start()
        await first.stop()

    asyncio.run(scenario())


def test_loopback_state_latency_under_10ms():
    async def scenario():
        session = await _start_session()
        reader, writer = await _connect(session)
        await asyncio.sleep(0.05)
        latencies = []
        decoder = FrameDecoder()

        async def pull():
            while len(latencies) < 60:
                data = await asyncio.wait_for(reader.read(4096), 2.0)
                for message in decoder.feed(data):
                    if isinstance(message, RobotStateMessage):
                        latencies.append(time.monotonic() - message.timestamp)

        puller = asyncio.create_task(pull())
        for _ in range(60):
            session.publish(make_state(timestamp=time.monotonic()))
            await asyncio.sleep(0.01)
        await asyncio.wait_for(puller, 5.0)
        writer.close()
        await session.stop()
        assert statistics.median(latencies) < 0.010

    asyncio.run(scenario())
