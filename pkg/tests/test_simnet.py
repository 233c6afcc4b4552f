"""Deterministic event loop, latency model, faults, and timers."""

import pytest

from iotchain.simnet import (
    ENV,
    Actor,
    ConfigError,
    Crash,
    Dos,
    Heal,
    LinkModel,
    Network,
    Partition,
    SimError,
)


class Echo(Actor):
    """Replies 'pong' to every 'ping' and keeps a log of arrivals."""

    def __init__(self, actor_id):
        self.actor_id = actor_id
        self.seen = []

    def on_message(self, ctx, sender, payload):
        self.seen.append((ctx.now, sender, payload))
        if payload == "ping" and sender != ENV:
            ctx.send(sender, "pong")


class Pinger(Actor):
    def __init__(self, actor_id, target):
        self.actor_id = actor_id
        self.target = target
        self.seen = []

    def on_start(self, ctx):
        ctx.send(self.target, "ping")

    def on_message(self, ctx, sender, payload):
        self.seen.append((ctx.now, sender, payload))


class TimerUser(Actor):
    def __init__(self, actor_id):
        self.actor_id = actor_id
        self.fired = []

    def on_start(self, ctx):
        ctx.set_timer("tick", 100)

    def on_timer(self, ctx, name):
        self.fired.append((ctx.now, name))


def test_messages_arrive_after_link_latency():
    net = Network(seed=1)
    a, b = Pinger("a", "b"), Echo("b")
    net.add_actor(a)
    net.add_actor(b)
    net.run(1000)
    assert b.seen == [(50, "a", "ping")]  # default one-way delay
    assert a.seen == [(100, "b", "pong")]


def test_kind_aware_latency_is_symmetric():
    link = LinkModel()
    assert link.latency("rn", "rn") == 100
    assert link.latency("rn", "device") == 50
    assert link.latency("device", "rn") == 50

    net = Network(seed=1)
    net.add_actor(Pinger("a", "b"), kind="rn")
    echo = Echo("b")
    net.add_actor(echo, kind="rn")
    net.run(500)
    assert echo.seen[0][0] == 100


def test_identical_seeds_produce_identical_traces():
    class Chatter(Actor):
        """Pings its peer on a recurring timer; peer-to-peer traffic is
        what the lossy link gets to roll dice on."""

        def __init__(self, actor_id, peer):
            self.actor_id = actor_id
            self.peer = peer

        def on_start(self, ctx):
            ctx.set_timer("beat", 50)

        def on_timer(self, ctx, name):
            ctx.send(self.peer, "ping")
            ctx.set_timer("beat", 50)

    def run_once(seed):
        net = Network(seed=seed)
        net.drop_probability = 0.3
        net.add_actor(Chatter("a", "b"))
        net.add_actor(Echo("b"))
        net.run(2000)
        return net.trace_text()

    assert run_once(7) == run_once(7)
    assert run_once(7) != run_once(8)


def test_trace_line_shape():
    net = Network(seed=0)
    net.add_actor(Echo("b"))
    net.schedule(5, "b", "ping")
    net.run(10)
    line = [l for l in net.trace if "|msg|" in l][0]
    fields = line.split("|")
    assert len(fields) == 7
    assert int(fields[0]) == 5
    assert fields[1:5] == ["msg", "env", "b", "str"]
    assert len(fields[5]) == 8  # payload digest


def test_crash_fault_silences_an_actor():
    net = Network(seed=0)
    target = Echo("t")
    net.add_actor(target)
    net.add_actor(Echo("x"))
    net.add_fault(Crash("t", at=100))
    net.schedule(50, "t", "before")
    net.schedule(150, "t", "after")
    net.run(1000)
    assert [p for _, _, p in target.seen] == ["before"]
    assert any("|drop|" in l and "target crashed" in l for l in net.trace)


def test_crashed_actor_timers_stop():
    net = Network(seed=0)
    user = TimerUser("t")
    net.add_actor(user)
    net.add_fault(Crash("t", at=50))
    net.run(1000)
    assert user.fired == []


def test_dos_window_drops_then_recovers():
    net = Network(seed=0)
    target = Echo("t")
    net.add_actor(target)
    net.add_fault(Dos("t", at=100, duration=200))
    net.schedule(150, "t", "during")
    net.schedule(400, "t", "after")
    net.run(1000)
    assert [p for _, _, p in target.seen] == ["after"]
    assert any("target flooded" in l for l in net.trace)


def test_partition_and_heal():
    net = Network(seed=0)
    a, b = Pinger("a", "b"), Echo("b")
    net.add_actor(a)
    net.add_actor(b)
    net.add_fault(Partition(at=0, groups=(frozenset({"a"}), frozenset({"b"}))))
    net.add_fault(Heal(at=500))
    net.schedule(600, "b", "ping")  # scripted traffic ignores partitions
    net.run(1000)
    # the on_start ping at t=0 was cut by the partition
    assert all("partitioned" in l for l in net.trace if "|drop|" in l)
    assert b.seen[-1][2] == "ping"


def test_timer_reset_supersedes_older_arming():
    class Resetter(TimerUser):
        def on_start(self, ctx):
            ctx.set_timer("tick", 100)
            ctx.set_timer("tick", 300)  # re-arm before the first fires

    net = Network(seed=0)
    user = Resetter("t")
    net.add_actor(user)
    net.run(1000)
    assert user.fired == [(300, "tick")]


def test_timer_cancel():
    class Canceller(TimerUser):
        def on_start(self, ctx):
            ctx.set_timer("tick", 100)
            ctx.cancel_timer("tick")

    net = Network(seed=0)
    user = Canceller("t")
    net.add_actor(user)
    net.run(1000)
    assert user.fired == []


def test_tamper_hook_rewrites_and_eats():
    net = Network(seed=0)
    a, b = Pinger("a", "b"), Echo("b")
    net.add_actor(a)
    net.add_actor(b)
    net.set_tamper("a", lambda target, payload: None)  # eat everything
    net.run(500)
    assert b.seen == []
    assert any("|eat|" in l for l in net.trace)


def test_wiring_errors():
    net = Network(seed=0)
    net.add_actor(Echo("a"))
    with pytest.raises(ConfigError):
        net.add_actor(Echo("a"))
    with pytest.raises(ConfigError):
        net.schedule(0, "ghost", "x")
    net.run(10)
    with pytest.raises(ConfigError):
        net.add_actor(Echo("late"))
    with pytest.raises(ConfigError):
        net.add_fault(Crash("a", at=50))


def test_runaway_loops_hit_the_event_ceiling():
    class Storm(Actor):
        actor_id = "storm"

        def on_start(self, ctx):
            ctx.send("storm", "again")

        def on_message(self, ctx, sender, payload):
            ctx.send("storm", "again")

    net = Network(seed=0)
    net.add_actor(Storm())
    with pytest.raises(SimError, match="exceeded"):
        net.run(10**9, max_events=500)


def test_clock_advances_to_horizon_even_when_idle():
    net = Network(seed=0)
    net.add_actor(Echo("a"))
    net.run(12345)
    assert net.now == 12345
