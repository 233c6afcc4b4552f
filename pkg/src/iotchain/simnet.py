"""Deterministic discrete-event network simulation.

Actors exchange message objects over links with fixed latencies. A single
event queue ordered by (delivery time, insertion sequence) makes every run
with the same seed and the same wiring produce a bitwise-identical trace.
Time is simulated milliseconds; no wall clock is consulted anywhere.

Fault directives model the adversary at the transport level: crashes,
inbound flooding (denial of service), network partitions, and in-flight
tampering. Byzantine *behavior* is expressed by swapping in a misbehaving
actor subclass instead, since a lying node is application logic, not a
property of the wire.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass
from typing import Callable


class SimError(Exception):
    pass


class ConfigError(SimError):
    """The scenario wiring itself is wrong (duplicate ids, unknown targets)."""


ENV = "env"  # pseudo-sender for scripted workload injections


@dataclass(frozen=True)
class LinkModel:
    """One-way delay in ms looked up by (sender kind, receiver kind)."""

    default_ms: int = 50
    by_kind: tuple[tuple[tuple[str, str], int], ...] = (
        (("rn", "rn"), 100),
    )

    def latency(self, sender_kind: str, receiver_kind: str) -> int:
        for (a, b), delay in self.by_kind:
            if (sender_kind, receiver_kind) in ((a, b), (b, a)):
                return delay
        return self.default_ms


# --- fault directives ---------------------------------------------------


@dataclass(frozen=True)
class Crash:
    actor: str
    at: int


@dataclass(frozen=True)
class Dos:
    """Suppress everything inbound to one actor for a window."""

    actor: str
    at: int
    duration: int


@dataclass(frozen=True)
class Partition:
    """Split the network into groups; traffic between groups is dropped.

    Actors not named in any group become singleton groups of their own.
    """

    at: int
    groups: tuple[frozenset[str], ...]


@dataclass(frozen=True)
class Heal:
    """Lift the current partition."""

    at: int


Fault = Crash | Dos | Partition | Heal


class Actor:
    """Base class; subclasses override the callbacks they need."""

    actor_id: str = ""

    def on_start(self, ctx: "Context") -> None:
        pass

    def on_message(self, ctx: "Context", sender: str, payload) -> None:
        pass

    def on_timer(self, ctx: "Context", name: str) -> None:
        pass


class Context:
    """What an actor sees of the network during one callback."""

    def __init__(self, network: "Network", actor_id: str):
        self._network = network
        self._actor_id = actor_id

    @property
    def now(self) -> int:
        return self._network.now

    @property
    def rng(self) -> random.Random:
        return self._network.rng

    def send(self, target: str, payload) -> None:
        self._network._send(self._actor_id, target, payload)

    def set_timer(self, name: str, delay_ms: int) -> None:
        self._network._set_timer(self._actor_id, name, delay_ms)

    def cancel_timer(self, name: str) -> None:
        self._network._cancel_timer(self._actor_id, name)

    def log(self, text: str) -> None:
        self._network._trace("log", self._actor_id, "", "", "", text)


def payload_digest(payload) -> str:
    """Eight hex chars identifying a payload in traces."""
    raw = payload.hex() if isinstance(payload, bytes) else repr(payload)
    return hashlib.sha256(raw.encode()).hexdigest()[:8]


_MESSAGE = 0
_TIMER = 1


class Network:
    def __init__(self, *, seed: int = 0, link: LinkModel | None = None):
        self.link = link or LinkModel()
        self.rng = random.Random(seed)
        self.now = 0
        self.drop_probability = 0.0
        self.trace: list[str] = []
        self._actors: dict[str, Actor] = {}
        self._kinds: dict[str, str] = {}
        self._queue: list[tuple[int, int, int, str, str, object]] = []
        self._seq = 0
        self._timer_gen: dict[tuple[str, str], int] = {}
        self._faults: list[Fault] = []
        self._next_fault = 0
        self._crashed: set[str] = set()
        self._dos_until: dict[str, int] = {}
        self._partition: dict[str, int] | None = None
        self._tamper: dict[str, Callable[[str, object], object | None]] = {}
        self._started = False

    # --- wiring -----------------------------------------------------------

    def add_actor(self, actor: Actor, kind: str = "node") -> None:
        if not actor.actor_id:
            raise ConfigError("actor has no id")
        if actor.actor_id in self._actors or actor.actor_id == ENV:
            raise ConfigError(f"duplicate actor id {actor.actor_id!r}")
        if self._started:
            raise ConfigError("cannot add actors after the run started")
        self._actors[actor.actor_id] = actor
        self._kinds[actor.actor_id] = kind

    def add_fault(self, fault: Fault) -> None:
        if self._started:
            raise ConfigError("cannot add faults after the run started")
        self._faults.append(fault)

    def set_tamper(self, actor_id: str, fn: Callable[[str, object], object | None]) -> None:
        """Rewrite (or eat, by returning None) messages *sent by* an actor."""
        self._tamper[actor_id] = fn

    def schedule(self, at: int, target: str, payload) -> None:
        """Inject a scripted workload message, delivered exactly at ``at``."""
        if target not in self._actors:
            raise ConfigError(f"schedule targets unknown actor {target!r}")
        self._push(at, _MESSAGE, ENV, target, payload)

    # --- internals ----------------------------------------------------------

    def _push(self, at: int, kind: int, sender: str, target: str, payload) -> None:
        heapq.heappush(self._queue, (at, self._seq, kind, sender, target, payload))
        self._seq += 1

    def _send(self, sender: str, target: str, payload) -> None:
        if target not in self._actors:
            raise ConfigError(f"{sender} sends to unknown actor {target!r}")
        tamper = self._tamper.get(sender)
        if tamper is not None:
            payload = tamper(target, payload)
            if payload is None:
                self._trace("eat", sender, target, "", "", "tampered away")
                return
        delay = self.link.latency(self._kinds[sender], self._kinds[target])
        self._push(self.now + delay, _MESSAGE, sender, target, payload)

    def _set_timer(self, actor_id: str, name: str, delay_ms: int) -> None:
        gen = self._timer_gen.get((actor_id, name), 0) + 1
        self._timer_gen[(actor_id, name)] = gen
        self._push(self.now + delay_ms, _TIMER, actor_id, actor_id, (name, gen))

    def _cancel_timer(self, actor_id: str, name: str) -> None:
        # bump the generation so any queued firing is stale on arrival
        self._timer_gen[(actor_id, name)] = (
            self._timer_gen.get((actor_id, name), 0) + 1
        )

    def _trace(self, kind: str, sender: str, target: str, type_name: str,
               digest: str, detail: str) -> None:
        self.trace.append(
            f"{self.now:>8}|{kind}|{sender}|{target}|{type_name}|{digest}|{detail}"
        )

    def _apply_faults(self) -> None:
        while self._next_fault < len(self._faults):
            fault = self._faults[self._next_fault]
            if fault.at > self.now:
                break
            self._next_fault += 1
            if isinstance(fault, Crash):
                self._crashed.add(fault.actor)
                self._trace("fault", fault.actor, "", "Crash", "", "")
            elif isinstance(fault, Dos):
                self._dos_until[fault.actor] = fault.at + fault.duration
                self._trace(
                    "fault", fault.actor, "", "Dos", "", f"until {fault.at + fault.duration}"
                )
            elif isinstance(fault, Partition):
                self._partition = {}
                for index, group in enumerate(fault.groups):
                    for actor_id in group:
                        self._partition[actor_id] = index
                self._trace("fault", "", "", "Partition", "", f"{len(fault.groups)} groups")
            elif isinstance(fault, Heal):
                self._partition = None
                self._trace("fault", "", "", "Heal", "", "")

    def _deliverable(self, sender: str, target: str) -> str | None:
        """None if the message goes through, else the drop reason."""
        if target in self._crashed:
            return "target crashed"
        if self._dos_until.get(target, 0) > self.now:
            return "target flooded"
        if self._partition is not None and sender != ENV:
            # unlisted actors sit in singleton groups (hash of their id)
            a = self._partition.get(sender, ("solo", sender))
            b = self._partition.get(target, ("solo", target))
            if a != b:
                return "partitioned"
        if self.drop_probability > 0 and sender != ENV:
            if self.rng.random() < self.drop_probability:
                return "lossy link"
        return None

    # --- the loop -----------------------------------------------------------

    def run(self, until: int, max_events: int = 1_000_000) -> None:
        """Process events up to and including simulated time ``until``."""
        if not self._started:
            self._started = True
            self._faults.sort(key=lambda f: f.at)
            for actor_id, actor in self._actors.items():
                actor.on_start(Context(self, actor_id))
        events = 0
        while self._queue and self._queue[0][0] <= until:
            if events >= max_events:
                raise SimError(f"run exceeded {max_events} events")
            events += 1
            at, _, kind, sender, target, payload = heapq.heappop(self._queue)
            self.now = max(self.now, at)
            self._apply_faults()
            actor = self._actors.get(target)
            if actor is None:
                continue
            if kind == _TIMER:
                name, gen = payload
                if target in self._crashed:
                    continue
                if self._timer_gen.get((target, name)) != gen:
                    continue  # reset or cancelled since it was armed
                actor.on_timer(Context(self, target), name)
                continue
            reason = self._deliverable(sender, target)
            type_name = type(payload).__name__
            if reason is not None:
                self._trace("drop", sender, target, type_name,
                            payload_digest(payload), reason)
                continue
            self._trace("msg", sender, target, type_name,
                        payload_digest(payload), "")
            actor.on_message(Context(self, target), sender, payload)
        self.now = max(self.now, until)
        self._apply_faults()

    def trace_text(self) -> str:
        return "\n".join(self.trace) + ("\n" if self.trace else "")
