"""Practical-BFT ordering over the simulated network.

The engine is not an actor itself; a hosting actor (a regional node, or a
bare harness node in tests) feeds it consensus messages and timer ticks and
lets it send through the actor's context. With n nodes the protocol
tolerates f = (n - 1) // 3 byzantine members; quorums are 2f + 1.

Shape of a slot: the view's primary batches submitted transactions and
broadcasts a pre-prepare; everyone (primary included) broadcasts a prepare
for the digest they accepted; 2f+1 matching prepares unlock a commit; 2f+1
matching commits decide the slot, and slots execute strictly in order. One
slot is proposed at a time, so batch validation always runs against the
state every honest node holds at that point.

Progress is protected by a view-change timer: a node holding transactions
that refuse to commit votes the view out, with doubling patience. A node
seeing f+1 higher votes joins them. The incoming primary bundles 2f+1
votes into a new-view, replays the prepared-but-undecided slots they carry
(lowest digest wins a conflict, and every conflict is written to the audit
log), fills gaps with empty slots, and the chain continues. Old decisions
travel inside the votes, which doubles as catch-up for a node that missed
a decision; there is no separate state-transfer channel.

Decided slots reach the host through one callback carrying the slot
number, the view that first proposed it, the proposal timestamp, and the
batch — everything needed to mint identical blocks on every honest node.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable

from .crypto import KeyPair, hash_data, sign, verify
from .simnet import Context


@dataclass(frozen=True)
class PbftConfig:
    view_timeout_ms: int = 2000
    batch_interval_ms: int = 500
    batch_limit: int = 16
    entry_window: int = 4  # decided history carried in a view-change vote
    max_backoff: int = 6


# --- wire messages --------------------------------------------------------


@dataclass(frozen=True)
class TxForward:
    """A transaction routed to whoever currently leads."""

    tx: bytes


@dataclass(frozen=True)
class PrePrepare:
    view: int
    seq: int
    origin_view: int
    timestamp_ms: int
    batch: tuple[bytes, ...]
    sender: str
    signature: bytes


@dataclass(frozen=True)
class Prepare:
    view: int
    seq: int
    digest: bytes
    sender: str
    signature: bytes


@dataclass(frozen=True)
class Commit:
    view: int
    seq: int
    digest: bytes
    sender: str
    signature: bytes


@dataclass(frozen=True)
class ReplayEntry:
    """One slot's worth of evidence inside a view-change vote."""

    seq: int
    origin_view: int
    timestamp_ms: int
    batch: tuple[bytes, ...]
    decided: bool

    def digest(self) -> bytes:
        return proposal_digest(self.seq, self.origin_view, self.timestamp_ms, self.batch)


@dataclass(frozen=True)
class ViewChange:
    new_view: int
    executed_through: int
    entries: tuple[ReplayEntry, ...]
    sender: str
    signature: bytes


@dataclass(frozen=True)
class NewView:
    view: int
    votes: tuple[ViewChange, ...]
    proposals: tuple[ReplayEntry, ...]
    sender: str
    signature: bytes


@dataclass(frozen=True)
class Ordered:
    """Single-leader stub's decision broadcast."""

    seq: int
    timestamp_ms: int
    batch: tuple[bytes, ...]
    sender: str
    signature: bytes


@dataclass(frozen=True)
class CatchUpReq:
    """Ask peers for decisions from ``from_seq`` on (sent when behind)."""

    from_seq: int
    sender: str


@dataclass(frozen=True)
class CatchUpRes:
    entries: tuple[ReplayEntry, ...]
    sender: str
    signature: bytes


CONSENSUS_TYPES = (
    TxForward, PrePrepare, Prepare, Commit, ViewChange, NewView, Ordered,
    CatchUpReq, CatchUpRes,
)


def proposal_digest(seq: int, origin_view: int, timestamp_ms: int,
                    batch: tuple[bytes, ...]) -> bytes:
    head = struct.pack(">QQQ", seq, origin_view, timestamp_ms)
    body = b"".join(struct.pack(">I", len(tx)) + tx for tx in batch)
    return hash_data(head + body)


def _preimage(kind: str, *fields) -> bytes:
    # repr of nested tuples of ints/str/bytes is deterministic
    return repr((kind,) + fields).encode()


def _vc_preimage(new_view: int, executed_through: int,
                 entries: tuple[ReplayEntry, ...], sender: str) -> bytes:
    entry_digests = tuple(
        (e.seq, e.origin_view, e.timestamp_ms, e.digest(), e.decided) for e in entries
    )
    return _preimage("viewchange", new_view, executed_through, entry_digests, sender)


def _nv_preimage(view: int, votes: tuple[ViewChange, ...],
                 proposals: tuple[ReplayEntry, ...], sender: str) -> bytes:
    vote_ids = tuple(sorted(v.sender for v in votes))
    proposal_digests = tuple((p.seq, p.digest()) for p in proposals)
    return _preimage("newview", view, vote_ids, proposal_digests, sender)


DecideFn = Callable[[int, int, int, tuple[bytes, ...]], None]
ValidateFn = Callable[[tuple[bytes, ...]], "str | None"]

PROGRESS_TIMER = "pbft-progress"
BATCH_TIMER = "pbft-batch"


class PbftEngine:
    """One node's slice of the protocol. See the module docstring."""

    def __init__(
        self,
        node_id: str,
        peers: tuple[str, ...],
        keypair: KeyPair,
        peer_keys: dict[str, bytes],
        on_decide: DecideFn,
        validate_batch: ValidateFn | None = None,
        config: PbftConfig | None = None,
    ):
        if node_id not in peers:
            raise ValueError(f"{node_id!r} is not among the peers")
        self.node_id = node_id
        self.peers = tuple(peers)
        self.keypair = keypair
        self.peer_keys = dict(peer_keys)
        self.on_decide = on_decide
        self.validate_batch = validate_batch or (lambda batch: None)
        self.config = config or PbftConfig()

        self.n = len(self.peers)
        self.f = (self.n - 1) // 3
        self.quorum = 2 * self.f + 1

        self.active_view = 0
        self.voted_view = 0
        self.next_exec = 1
        self.in_flight: int | None = None
        self.backoff = 0
        self.batch_deadline_armed = False

        self.pending: dict[bytes, None] = {}  # insertion-ordered set
        self.decided_txs: set[bytes] = set()
        self.accepted: dict[tuple[int, int], PrePrepare] = {}
        self.forwarded: set[tuple[int, int]] = set()
        self.prepares: dict[tuple[int, int, bytes], set[str]] = {}
        self.commits: dict[tuple[int, int, bytes], set[str]] = {}
        self.prepare_sent: dict[tuple[int, int], bytes] = {}
        self.commit_sent: dict[tuple[int, int], bytes] = {}
        self.prepared_log: dict[int, ReplayEntry] = {}
        self.decided_log: dict[int, ReplayEntry] = {}
        self.vc_votes: dict[int, dict[str, ViewChange]] = {}
        self.new_view_issued: set[int] = set()
        self.catchup_votes: dict[tuple[int, bytes], set[str]] = {}
        self.catchup_asked_at = 0
        self.audit: list[str] = []

    # --- helpers ----------------------------------------------------------

    def primary(self, view: int) -> str:
        return self.peers[view % self.n]

    def is_primary(self) -> bool:
        return (
            self.primary(self.active_view) == self.node_id
            and self.voted_view == self.active_view
        )

    def _broadcast(self, ctx: Context, msg, *, exclude: tuple[str, ...] = ()) -> None:
        skip = set(exclude) | {self.node_id}
        for peer in self.peers:
            if peer not in skip:
                ctx.send(peer, msg)

    def _signed_prepare(self, view: int, seq: int, digest: bytes) -> Prepare:
        sig = sign(
            self.keypair.secret_key,
            _preimage("prepare", view, seq, digest, self.node_id),
        )
        return Prepare(view, seq, digest, self.node_id, sig)

    def _signed_commit(self, view: int, seq: int, digest: bytes) -> Commit:
        sig = sign(
            self.keypair.secret_key,
            _preimage("commit", view, seq, digest, self.node_id),
        )
        return Commit(view, seq, digest, self.node_id, sig)

    def _peer_key(self, sender: str) -> bytes | None:
        return self.peer_keys.get(sender)

    def _arm_progress(self, ctx: Context) -> None:
        if self.pending or self.voted_view != self.active_view:
            ctx.set_timer(
                PROGRESS_TIMER,
                self.config.view_timeout_ms * (1 << min(self.backoff, self.config.max_backoff)),
            )
        else:
            ctx.cancel_timer(PROGRESS_TIMER)

    # --- submissions --------------------------------------------------------

    def submit(self, ctx: Context, tx: bytes) -> None:
        """Queue a transaction for ordering, wherever the leader is."""
        if tx in self.decided_txs or tx in self.pending:
            return
        self.pending[tx] = None
        if self.is_primary():
            self._maybe_propose(ctx)
        else:
            ctx.send(self.primary(max(self.active_view, self.voted_view)), TxForward(tx))
        self._arm_progress(ctx)

    def _maybe_propose(self, ctx: Context, *, force: bool = False) -> None:
        if not self.is_primary() or self.in_flight is not None or not self.pending:
            return
        if len(self.pending) < self.config.batch_limit and not force:
            if not self.batch_deadline_armed:
                self.batch_deadline_armed = True
                ctx.set_timer(BATCH_TIMER, self.config.batch_interval_ms)
            return
        candidates = list(self.pending)[: self.config.batch_limit]
        batch: list[bytes] = []
        for tx in candidates:
            reason = self.validate_batch(tuple(batch) + (tx,))
            if reason is None:
                batch.append(tx)
            else:
                self.audit.append(f"dropped invalid tx at propose time: {reason}")
                del self.pending[tx]
        if not batch:
            return
        self._propose(ctx, tuple(batch))

    def _propose(self, ctx: Context, batch: tuple[bytes, ...]) -> None:
        view = self.active_view
        seq = self.next_exec
        timestamp = ctx.now
        digest = proposal_digest(seq, view, timestamp, batch)
        sig = sign(
            self.keypair.secret_key,
            _preimage("preprepare", view, seq, view, timestamp, digest, self.node_id),
        )
        pp = PrePrepare(view, seq, view, timestamp, batch, self.node_id, sig)
        self.in_flight = seq
        self.accepted[(view, seq)] = pp
        self._broadcast(ctx, pp)
        self._send_prepare(ctx, view, seq, digest)

    # --- message handling -----------------------------------------------------

    def handle(self, ctx: Context, sender: str, msg) -> bool:
        """Process one consensus message; False if it is not one."""
        if isinstance(msg, TxForward):
            if msg.tx not in self.decided_txs:
                self.pending.setdefault(msg.tx, None)
                if self.is_primary():
                    self._maybe_propose(ctx)
                self._arm_progress(ctx)
            return True
        if isinstance(msg, PrePrepare):
            self._on_preprepare(ctx, msg)
            return True
        if isinstance(msg, Prepare):
            self._on_prepare(ctx, msg)
            return True
        if isinstance(msg, Commit):
            self._on_commit(ctx, msg)
            return True
        if isinstance(msg, ViewChange):
            self._on_view_change(ctx, msg)
            return True
        if isinstance(msg, NewView):
            self._on_new_view(ctx, msg)
            return True
        if isinstance(msg, CatchUpReq):
            self._on_catchup_req(ctx, msg)
            return True
        if isinstance(msg, CatchUpRes):
            self._on_catchup_res(ctx, msg)
            return True
        if isinstance(msg, Ordered):
            return True  # stub traffic, not ours
        return False

    def on_timer(self, ctx: Context, name: str) -> bool:
        if name == PROGRESS_TIMER:
            if self.pending or self.voted_view != self.active_view:
                # maybe the slots moved on without us; ask before escalating
                self._request_catchup(ctx)
                self.backoff += 1
                self._vote_view_change(ctx, max(self.active_view, self.voted_view) + 1)
            return True
        if name == BATCH_TIMER:
            self.batch_deadline_armed = False
            self._maybe_propose(ctx, force=True)
            return True
        return False

    def _on_preprepare(self, ctx: Context, pp: PrePrepare) -> None:
        if pp.view != self.active_view or self.voted_view != self.active_view:
            return
        if pp.sender != self.primary(pp.view):
            return
        key = self._peer_key(pp.sender)
        digest = proposal_digest(pp.seq, pp.origin_view, pp.timestamp_ms, pp.batch)
        preimage = _preimage(
            "preprepare", pp.view, pp.seq, pp.origin_view, pp.timestamp_ms,
            digest, pp.sender,
        )
        if key is None or not verify(key, preimage, pp.signature):
            return
        slot = (pp.view, pp.seq)
        existing = self.accepted.get(slot)
        if existing is not None:
            if proposal_digest(
                existing.seq, existing.origin_view,
                existing.timestamp_ms, existing.batch,
            ) != digest:
                self.audit.append(
                    f"conflicting pre-prepare for view {pp.view} slot {pp.seq}"
                    f" from {pp.sender}"
                )
            return
        if pp.seq < self.next_exec:
            return  # already executed here
        self.accepted[slot] = pp
        if slot not in self.forwarded:
            # relay so every peer sees the same proposal even if the
            # primary addressed only some of us
            self.forwarded.add(slot)
            self._broadcast(ctx, pp, exclude=(pp.sender,))
        if pp.seq > self.next_exec:
            self._request_catchup(ctx)  # we are missing at least one decision
        self._maybe_prepare_next(ctx)

    def _maybe_prepare_next(self, ctx: Context) -> None:
        """Prepare the slot at the execution frontier, if one is waiting."""
        if self.voted_view != self.active_view:
            return  # sitting out the old view until the new one lands
        slot = (self.active_view, self.next_exec)
        pp = self.accepted.get(slot)
        if pp is None or slot in self.prepare_sent:
            return
        reason = self.validate_batch(pp.batch)
        if reason is not None:
            self.audit.append(
                f"refused to prepare slot {pp.seq} (view {pp.view}): {reason}"
            )
            return
        digest = proposal_digest(pp.seq, pp.origin_view, pp.timestamp_ms, pp.batch)
        self._send_prepare(ctx, pp.view, pp.seq, digest)

    def _send_prepare(self, ctx: Context, view: int, seq: int, digest: bytes) -> None:
        if (view, seq) in self.prepare_sent:
            return
        self.prepare_sent[(view, seq)] = digest
        msg = self._signed_prepare(view, seq, digest)
        self.prepares.setdefault((view, seq, digest), set()).add(self.node_id)
        self._broadcast(ctx, msg)
        self._check_prepared(ctx, view, seq, digest)

    def _on_prepare(self, ctx: Context, msg: Prepare) -> None:
        if msg.view != self.active_view:
            return
        key = self._peer_key(msg.sender)
        preimage = _preimage("prepare", msg.view, msg.seq, msg.digest, msg.sender)
        if key is None or not verify(key, preimage, msg.signature):
            return
        self.prepares.setdefault((msg.view, msg.seq, msg.digest), set()).add(msg.sender)
        self._check_prepared(ctx, msg.view, msg.seq, msg.digest)

    def _check_prepared(self, ctx: Context, view: int, seq: int, digest: bytes) -> None:
        if self.prepare_sent.get((view, seq)) != digest:
            return  # only commit what we ourselves vetted
        if (view, seq) in self.commit_sent:
            return
        senders = self.prepares.get((view, seq, digest), set())
        if len(senders) < self.quorum:
            return
        pp = self.accepted.get((view, seq))
        if pp is not None:
            self.prepared_log[seq] = ReplayEntry(
                pp.seq, pp.origin_view, pp.timestamp_ms, pp.batch, decided=False
            )
        self.commit_sent[(view, seq)] = digest
        msg = self._signed_commit(view, seq, digest)
        self.commits.setdefault((view, seq, digest), set()).add(self.node_id)
        self._broadcast(ctx, msg)
        self._check_decided(ctx, view, seq, digest)

    def _on_commit(self, ctx: Context, msg: Commit) -> None:
        if msg.view != self.active_view:
            return
        key = self._peer_key(msg.sender)
        preimage = _preimage("commit", msg.view, msg.seq, msg.digest, msg.sender)
        if key is None or not verify(key, preimage, msg.signature):
            return
        self.commits.setdefault((msg.view, msg.seq, msg.digest), set()).add(msg.sender)
        self._check_decided(ctx, msg.view, msg.seq, msg.digest)

    def _check_decided(self, ctx: Context, view: int, seq: int, digest: bytes) -> None:
        if self.commit_sent.get((view, seq)) != digest:
            return
        if len(self.commits.get((view, seq, digest), set())) < self.quorum:
            return
        pp = self.accepted.get((view, seq))
        if pp is None or seq in self.decided_log:
            return
        self._decide(ctx, ReplayEntry(
            pp.seq, pp.origin_view, pp.timestamp_ms, pp.batch, decided=True
        ))

    def _decide(self, ctx: Context, entry: ReplayEntry) -> None:
        if entry.seq in self.decided_log:
            return
        self.decided_log[entry.seq] = entry
        self.prepared_log.pop(entry.seq, None)
        if self.in_flight == entry.seq:
            self.in_flight = None
        for tx in entry.batch:
            self.pending.pop(tx, None)
            self.decided_txs.add(tx)
        self.backoff = 0
        while self.next_exec in self.decided_log:
            done = self.decided_log[self.next_exec]
            ctx.log(
                f"decide slot={done.seq} view={done.origin_view} txs={len(done.batch)}"
            )
            self.on_decide(done.seq, done.origin_view, done.timestamp_ms, done.batch)
            self.next_exec += 1
        self._maybe_prepare_next(ctx)
        if self.is_primary():
            self._maybe_propose(ctx)
        self._arm_progress(ctx)

    # --- catch-up ---------------------------------------------------------------

    def _request_catchup(self, ctx: Context) -> None:
        if self.catchup_asked_at == self.next_exec:
            return  # already out for this frontier
        self.catchup_asked_at = self.next_exec
        self._broadcast(ctx, CatchUpReq(self.next_exec, self.node_id))

    def _on_catchup_req(self, ctx: Context, req: CatchUpReq) -> None:
        entries = tuple(
            self.decided_log[seq]
            for seq in range(req.from_seq, req.from_seq + self.config.entry_window)
            if seq in self.decided_log
        )
        if not entries or req.sender not in self.peer_keys:
            return
        digests = tuple((e.seq, e.digest()) for e in entries)
        sig = sign(self.keypair.secret_key,
                   _preimage("catchup", digests, self.node_id))
        ctx.send(req.sender, CatchUpRes(entries, self.node_id, sig))

    def _on_catchup_res(self, ctx: Context, res: CatchUpRes) -> None:
        key = self._peer_key(res.sender)
        digests = tuple((e.seq, e.digest()) for e in res.entries)
        if key is None or not verify(
            key, _preimage("catchup", digests, res.sender), res.signature
        ):
            return
        for entry in res.entries:
            if entry.seq < self.next_exec:
                continue
            voters = self.catchup_votes.setdefault((entry.seq, entry.digest()), set())
            voters.add(res.sender)
            # f+1 matching attestations must include an honest node
            if len(voters) >= self.f + 1 and entry.seq not in self.decided_log:
                self._decide(ctx, ReplayEntry(
                    entry.seq, entry.origin_view, entry.timestamp_ms,
                    entry.batch, decided=True,
                ))

    # --- view change -----------------------------------------------------------

    def _vote_view_change(self, ctx: Context, new_view: int) -> None:
        if new_view <= self.voted_view:
            return
        self.voted_view = new_view
        executed_through = self.next_exec - 1
        horizon = executed_through - self.config.entry_window
        recent_decided = [e for s, e in self.decided_log.items() if s > horizon]
        entries = tuple(
            sorted(recent_decided + list(self.prepared_log.values()),
                   key=lambda e: e.seq)
        )
        vc = ViewChange(
            new_view,
            executed_through,
            entries,
            self.node_id,
            sign(self.keypair.secret_key,
                 _vc_preimage(new_view, executed_through, entries, self.node_id)),
        )
        self.vc_votes.setdefault(new_view, {})[self.node_id] = vc
        ctx.log(f"view-change vote view={new_view}")
        self._broadcast(ctx, vc)
        self._arm_progress(ctx)
        if self.primary(new_view) == self.node_id:
            self._maybe_new_view(ctx, new_view)

    def _on_view_change(self, ctx: Context, vc: ViewChange) -> None:
        key = self._peer_key(vc.sender)
        preimage = _vc_preimage(vc.new_view, vc.executed_through, vc.entries, vc.sender)
        if key is None or not verify(key, preimage, vc.signature):
            return
        if vc.new_view <= self.active_view:
            return
        self.vc_votes.setdefault(vc.new_view, {})[vc.sender] = vc
        # join once f+1 distinct peers want out of a view at or past ours
        ahead: set[str] = set()
        lowest = None
        for view, votes in self.vc_votes.items():
            if view > self.voted_view:
                ahead.update(votes)
                lowest = view if lowest is None else min(lowest, view)
        if lowest is not None and len(ahead) >= self.f + 1:
            self._vote_view_change(ctx, lowest)
        if self.primary(vc.new_view) == self.node_id:
            self._maybe_new_view(ctx, vc.new_view)

    def _maybe_new_view(self, ctx: Context, view: int) -> None:
        if view <= self.active_view or view in self.new_view_issued:
            return
        if self.primary(view) != self.node_id:
            return
        votes = self.vc_votes.get(view, {})
        if self.node_id not in votes:
            self._vote_view_change(ctx, view)
            votes = self.vc_votes.get(view, {})
        if len(votes) < self.quorum:
            return
        self.new_view_issued.add(view)
        ordered_votes = tuple(votes[s] for s in sorted(votes))
        start = min(v.executed_through for v in ordered_votes) + 1
        decided_pick: dict[int, ReplayEntry] = {}
        prepared_pick: dict[int, ReplayEntry] = {}
        for vote in ordered_votes:
            for entry in vote.entries:
                bucket = decided_pick if entry.decided else prepared_pick
                current = bucket.get(entry.seq)
                if current is None:
                    bucket[entry.seq] = entry
                elif current.digest() != entry.digest():
                    if entry.decided:
                        self.audit.append(
                            f"divergent decisions reported for slot {entry.seq}"
                        )
                    else:
                        self.audit.append(
                            f"conflicting prepared entries for slot {entry.seq}"
                        )
                    if entry.digest() < current.digest():
                        bucket[entry.seq] = entry
        top = max(
            [start - 1]
            + list(decided_pick)
            + list(prepared_pick)
        )
        proposals = []
        for seq in range(start, top + 1):
            entry = decided_pick.get(seq) or prepared_pick.get(seq)
            if entry is None:
                entry = ReplayEntry(seq, view, ctx.now, (), decided=False)
            proposals.append(
                ReplayEntry(entry.seq, entry.origin_view, entry.timestamp_ms,
                            entry.batch, decided=False)
            )
        proposals = tuple(proposals)
        nv = NewView(
            view,
            ordered_votes,
            proposals,
            self.node_id,
            sign(self.keypair.secret_key,
                 _nv_preimage(view, ordered_votes, proposals, self.node_id)),
        )
        ctx.log(f"new-view view={view} replays={len(proposals)}")
        self._broadcast(ctx, nv)
        self._adopt_new_view(ctx, nv)

    def _on_new_view(self, ctx: Context, nv: NewView) -> None:
        if nv.view <= self.active_view:
            return
        if nv.sender != self.primary(nv.view):
            return
        key = self._peer_key(nv.sender)
        preimage = _nv_preimage(nv.view, nv.votes, nv.proposals, nv.sender)
        if key is None or not verify(key, preimage, nv.signature):
            return
        voters = set()
        for vote in nv.votes:
            if vote.new_view != nv.view:
                continue
            vote_key = self._peer_key(vote.sender)
            vote_preimage = _vc_preimage(
                vote.new_view, vote.executed_through, vote.entries, vote.sender
            )
            if vote_key is not None and verify(vote_key, vote_preimage, vote.signature):
                voters.add(vote.sender)
        if len(voters) < self.quorum:
            return
        self._adopt_new_view(ctx, nv)

    def _adopt_new_view(self, ctx: Context, nv: NewView) -> None:
        self.active_view = nv.view
        self.voted_view = nv.view
        self.in_flight = None
        ctx.log(f"enter view {nv.view}")
        for entry in nv.proposals:
            digest = entry.digest()
            if entry.seq < self.next_exec:
                decided = self.decided_log.get(entry.seq)
                if decided is not None and decided.digest() != digest:
                    self.audit.append(
                        f"new-view tried to rewrite decided slot {entry.seq}"
                    )
                    continue
                # echo votes so peers that missed the decision can finish it
                self.prepares.setdefault(
                    (nv.view, entry.seq, digest), set()).add(self.node_id)
                self._broadcast(ctx, self._signed_prepare(nv.view, entry.seq, digest))
                self.commits.setdefault(
                    (nv.view, entry.seq, digest), set()).add(self.node_id)
                self.prepare_sent[(nv.view, entry.seq)] = digest
                self.commit_sent[(nv.view, entry.seq)] = digest
                self._broadcast(ctx, self._signed_commit(nv.view, entry.seq, digest))
                continue
            self.accepted[(nv.view, entry.seq)] = PrePrepare(
                nv.view, entry.seq, entry.origin_view, entry.timestamp_ms,
                entry.batch, nv.sender, b"",
            )
        self._maybe_prepare_next(ctx)
        if self.is_primary():
            self._maybe_propose(ctx)
        else:
            primary = self.primary(nv.view)
            for tx in self.pending:
                ctx.send(primary, TxForward(tx))
        self._arm_progress(ctx)


# --- misbehaving variants ---------------------------------------------------


class SilentEngine(PbftEngine):
    """Participates in nothing; indistinguishable from a crash on the wire."""

    def submit(self, ctx: Context, tx: bytes) -> None:
        pass

    def handle(self, ctx: Context, sender: str, msg) -> bool:
        return isinstance(msg, CONSENSUS_TYPES)

    def on_timer(self, ctx: Context, name: str) -> bool:
        return name in (PROGRESS_TIMER, BATCH_TIMER)


class EquivocatingEngine(PbftEngine):
    """As primary, shows different halves of the network different batches."""

    def _maybe_propose(self, ctx: Context, *, force: bool = False) -> None:
        if not self.is_primary() or self.in_flight is not None or not self.pending:
            return
        txs = list(self.pending)
        if len(txs) >= 2:
            batches = ((txs[0],), (txs[1],))
        else:
            batches = (tuple(txs), ())
        seq = self.next_exec
        view = self.active_view
        timestamp = ctx.now
        others = [p for p in self.peers if p != self.node_id]
        groups = (others[: (len(others) + 1) // 2], others[(len(others) + 1) // 2 :])
        for batch, group in zip(batches, groups):
            digest = proposal_digest(seq, view, timestamp, batch)
            sig = sign(
                self.keypair.secret_key,
                _preimage("preprepare", view, seq, view, timestamp, digest,
                          self.node_id),
            )
            pp = PrePrepare(view, seq, view, timestamp, batch, self.node_id, sig)
            for peer in group:
                ctx.send(peer, pp)
                ctx.send(peer, self._signed_prepare(view, seq, digest))
                ctx.send(peer, self._signed_commit(view, seq, digest))
        self.in_flight = seq


class CollusionEngine(PbftEngine):
    """Backs every proposal or prepare it sees, however contradictory,
    with full prepare+commit votes. Alone it is harmless; next to an
    equivocating primary it hands both halves a quorum."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._backed: set[tuple[int, int, bytes]] = set()

    def _back(self, ctx: Context, view: int, seq: int, digest: bytes) -> None:
        if (view, seq, digest) in self._backed:
            return
        self._backed.add((view, seq, digest))
        for peer in self.peers:
            if peer == self.node_id:
                continue
            ctx.send(peer, self._signed_prepare(view, seq, digest))
            ctx.send(peer, self._signed_commit(view, seq, digest))

    def handle(self, ctx: Context, sender: str, msg) -> bool:
        if isinstance(msg, PrePrepare):
            digest = proposal_digest(
                msg.seq, msg.origin_view, msg.timestamp_ms, msg.batch
            )
            self._back(ctx, msg.view, msg.seq, digest)
            return True
        if isinstance(msg, Prepare):
            self._back(ctx, msg.view, msg.seq, msg.digest)
            return True
        return isinstance(msg, CONSENSUS_TYPES)

    def submit(self, ctx: Context, tx: bytes) -> None:
        pass

    def on_timer(self, ctx: Context, name: str) -> bool:
        return name in (PROGRESS_TIMER, BATCH_TIMER)


# --- pluggability check ------------------------------------------------------


class OrderingStub:
    """Single fixed leader, no fault tolerance: the smallest engine that
    honors the same submit/handle/on_timer/on_decide surface. Exists to
    keep the ordering layer swappable (and tested as such)."""

    def __init__(
        self,
        node_id: str,
        peers: tuple[str, ...],
        keypair: KeyPair,
        peer_keys: dict[str, bytes],
        on_decide: DecideFn,
        validate_batch: ValidateFn | None = None,
        config: PbftConfig | None = None,
    ):
        self.node_id = node_id
        self.peers = tuple(peers)
        self.keypair = keypair
        self.peer_keys = dict(peer_keys)
        self.on_decide = on_decide
        self.validate_batch = validate_batch or (lambda batch: None)
        self.config = config or PbftConfig()
        self.leader = self.peers[0]
        self.pending: dict[bytes, None] = {}
        self.decided_txs: set[bytes] = set()
        self.next_exec = 1
        self.next_seq = 1
        self.buffer: dict[int, Ordered] = {}
        self.decided_log: dict[int, ReplayEntry] = {}
        self.audit: list[str] = []
        self.batch_deadline_armed = False

    def submit(self, ctx: Context, tx: bytes) -> None:
        if tx in self.decided_txs or tx in self.pending:
            return
        if self.node_id == self.leader:
            self.pending[tx] = None
            self._maybe_order(ctx)
        else:
            ctx.send(self.leader, TxForward(tx))

    def handle(self, ctx: Context, sender: str, msg) -> bool:
        if isinstance(msg, TxForward):
            if self.node_id == self.leader and msg.tx not in self.decided_txs:
                self.pending.setdefault(msg.tx, None)
                self._maybe_order(ctx)
            return True
        if isinstance(msg, Ordered):
            key = self.peer_keys.get(msg.sender)
            preimage = _preimage(
                "ordered", msg.seq, msg.timestamp_ms,
                proposal_digest(msg.seq, 0, msg.timestamp_ms, msg.batch), msg.sender,
            )
            if msg.sender != self.leader or key is None or not verify(
                key, preimage, msg.signature
            ):
                return True
            self.buffer[msg.seq] = msg
            self._drain(ctx)
            return True
        return isinstance(msg, CONSENSUS_TYPES)

    def on_timer(self, ctx: Context, name: str) -> bool:
        if name == BATCH_TIMER:
            self.batch_deadline_armed = False
            self._maybe_order(ctx, force=True)
            return True
        return name == PROGRESS_TIMER

    def _maybe_order(self, ctx: Context, *, force: bool = False) -> None:
        if not self.pending:
            return
        if len(self.pending) < self.config.batch_limit and not force:
            if not self.batch_deadline_armed:
                self.batch_deadline_armed = True
                ctx.set_timer(BATCH_TIMER, self.config.batch_interval_ms)
            return
        batch = tuple(list(self.pending)[: self.config.batch_limit])
        reason = self.validate_batch(batch)
        if reason is not None:
            self.audit.append(f"stub dropped batch: {reason}")
            for tx in batch:
                self.pending.pop(tx, None)
            return
        seq = self.next_seq
        self.next_seq += 1
        timestamp = ctx.now
        sig = sign(
            self.keypair.secret_key,
            _preimage("ordered", seq, timestamp,
                      proposal_digest(seq, 0, timestamp, batch), self.node_id),
        )
        msg = Ordered(seq, timestamp, batch, self.node_id, sig)
        for peer in self.peers:
            if peer != self.node_id:
                ctx.send(peer, msg)
        self.buffer[seq] = msg
        self._drain(ctx)
        self._maybe_order(ctx, force=force)

    def _drain(self, ctx: Context) -> None:
        while self.next_exec in self.buffer:
            msg = self.buffer.pop(self.next_exec)
            entry = ReplayEntry(msg.seq, 0, msg.timestamp_ms, msg.batch, decided=True)
            self.decided_log[msg.seq] = entry
            for tx in msg.batch:
                self.pending.pop(tx, None)
                self.decided_txs.add(tx)
            ctx.log(f"decide slot={msg.seq} view=0 txs={len(msg.batch)}")
            self.on_decide(msg.seq, 0, msg.timestamp_ms, msg.batch)
            self.next_exec += 1
