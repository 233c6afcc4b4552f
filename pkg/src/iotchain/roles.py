"""The participants: regional nodes, devices, manufacturers, cloud
providers, the certification center, and the detection center.

Regional nodes are the only consensus members. Everyone else is a client
of its home regional node: devices never see a consensus message, which
keeps them cheap, and all chain answers they need come back over the same
link they submit on.

Region-local interactions are merkle-batched by the home regional node:
the chain carries only the batch root, the node keeps the batched
transactions and hands each submitter a membership proof once the root's
block commits. Transactions with network-wide meaning go to the ordering
engine one by one.

Session keys for device-to-device permissions are derived by the data
owner's regional node and travel only wrapped: each copy is XOR-masked
with a secret derived from an ECDH exchange between the node and that
device, so no key material crosses the simulated wire in the clear.

Key distribution (the :class:`~iotchain.ledger.KeyDirectory`) and the
device-to-region map are out-of-band fixtures shared by construction, the
way burned-in hardware keys and regional topology would be.
"""

from __future__ import annotations

import copy
import struct
from dataclasses import dataclass, field

from . import ledger as ledgermod
from . import merkle, tx as txmod
from .consensus import (
    CONSENSUS_TYPES,
    CollusionEngine,
    EquivocatingEngine,
    OrderingStub,
    PbftConfig,
    PbftEngine,
    SilentEngine,
)
from .crypto import (
    DeterministicRng,
    KeyPair,
    derive_session_key,
    ecdh_shared_secret,
    generate_keypair,
    hash_data,
    sign,
    unwrap_session_key,
    verify,
    wrap_session_key,
)
from .ledger import (
    Block,
    KeyDirectory,
    Ledger,
    RnTables,
    TxValidationError,
    apply_block,
    apply_tx,
    make_genesis,
    replay_tables,
    validate_tx,
)
from .simnet import Actor, ConfigError, Context, Network
from .tx import (
    CancellationTx,
    DeviceRegistrationTx,
    DeviceStorageTx,
    EntityClass,
    EntityRegistrationTx,
    LocalInteractiveTx,
    Operation,
    PermissionTx,
    TxType,
    UpdateQueryTx,
    UpdateReleaseTx,
)

# payloads containing this byte string are "malware" to the detection
# oracle; honest updates in scenarios never include it
MALWARE_MARKER = b"\xee\xba\xd0"

REPORT_THRESHOLD = 3
# a device cries foul after this many consecutive rejections from its
# home node, and the detection center acts on this many distinct criers
RN_REJECT_REPORT_AFTER = 3
RN_REPORT_THRESHOLD = 2
LOCAL_BATCH_LIMIT = 4
LOCAL_BATCH_INTERVAL_MS = 1000
REGISTRATION_RETRY_MS = 3000
UPDATE_POLL_MS = 5000


# --- client <-> regional node messages --------------------------------------


@dataclass(frozen=True)
class SubmitTx:
    tx: bytes


@dataclass(frozen=True)
class TxConfirmed:
    tx: bytes
    height: int


@dataclass(frozen=True)
class TxRejected:
    tx: bytes
    reason: str


@dataclass(frozen=True)
class MerkleReceipt:
    """Membership proof for a batched transaction under a committed root."""

    tx: bytes
    proof: bytes
    height: int


@dataclass(frozen=True)
class UpdateInfo:
    manufacturer_id: int
    model_id: int
    payload_hash: bytes | None
    height: int


@dataclass(frozen=True)
class FetchUpdate:
    manufacturer_id: int
    model_id: int


@dataclass(frozen=True)
class UpdateData:
    manufacturer_id: int
    model_id: int
    payload: bytes


@dataclass(frozen=True)
class SessionKeyGrant:
    peer_id: int
    rn_key_id: int
    nonce: bytes
    wrapped: bytes


@dataclass(frozen=True)
class KeyRelay:
    """A wrapped key hopping home via the device's own regional node."""

    device_id: int
    grant: SessionKeyGrant


@dataclass(frozen=True)
class EndorseRequest:
    """Cross-region permission request bearing the first node's signature."""

    tx: bytes


@dataclass(frozen=True)
class EndorseReject:
    base: bytes
    reason: str


@dataclass(frozen=True)
class BadUpdateReport:
    device_id: int
    manufacturer_id: int
    model_id: int
    payload_hash: bytes


@dataclass(frozen=True)
class RnMisbehaviorReport:
    """A device telling the detection center its home node stonewalls it."""

    device_id: int
    rn: str


@dataclass(frozen=True)
class UpdateCommitted:
    """Regional node tells the detection center what update just landed."""

    manufacturer_id: int
    model_id: int
    payload: bytes
    height: int


# --- device <-> cloud messages ----------------------------------------------


@dataclass(frozen=True)
class StoreData:
    device_id: int
    data_number: int
    processing_method: int
    payload: bytes


@dataclass(frozen=True)
class StoreAck:
    device_id: int
    data_number: int


@dataclass(frozen=True)
class ReadData:
    device_id: int
    data_number: int


@dataclass(frozen=True)
class DataBlob:
    device_id: int
    data_number: int
    payload: bytes | None


@dataclass(frozen=True)
class StorageHashQuery:
    device_id: int
    data_number: int


@dataclass(frozen=True)
class StorageHashReply:
    device_id: int
    data_number: int
    data_hash: bytes | None


# --- scripted workload (sent by the scenario through the env sender) ---------


@dataclass(frozen=True)
class ScriptStore:
    payload: bytes
    processing_method: int = 0


@dataclass(frozen=True)
class ScriptGrant:
    peer_id: int
    operation: int = int(Operation.READ)


@dataclass(frozen=True)
class ScriptRequest:
    peer_id: int
    operation: int = int(Operation.READ)


@dataclass(frozen=True)
class ScriptRelease:
    model_id: int
    payload: bytes


@dataclass(frozen=True)
class ScriptAudit:
    device_id: int
    data_number: int


@dataclass(frozen=True)
class ScriptForge:
    kind: str  # "registration" | "storage" | "push-update"


@dataclass(frozen=True)
class ScriptSubmit:
    """Raw submission straight into a consensus host (harness worlds)."""

    tx: bytes


def _height_nonce(height: int) -> bytes:
    return struct.pack(">Q", height)


# --- regional node ------------------------------------------------------------


class RegionalNode(Actor):
    """Consensus member, regional gateway, and table keeper."""

    def __init__(
        self,
        actor_id: str,
        entity_id: int,
        keypair: KeyPair,
        key_id: int,
        peers: tuple[str, ...],
        peer_keys: dict[str, bytes],
        directory: KeyDirectory,
        genesis: Block,
        device_home: dict[int, str],
        device_clients: dict[str, int],
        entity_clients: dict[str, tuple[EntityClass, int]],
        dc_id: str | None = None,
        engine_cls=PbftEngine,
        pbft_config: PbftConfig | None = None,
        self_check_batches: bool = True,
    ):
        self.actor_id = actor_id
        self.entity_id = entity_id
        self.keypair = keypair
        self.key_id = key_id
        self.directory = directory
        self.device_home = device_home
        self.device_clients = device_clients
        self.entity_clients = entity_clients
        self.dc_id = dc_id
        self.ledger = Ledger(genesis)
        self.tables = replay_tables(self.ledger)
        self.engine = engine_cls(
            node_id=actor_id,
            peers=peers,
            keypair=keypair,
            peer_keys=peer_keys,
            on_decide=self._on_decide,
            validate_batch=self._validate_batch if self_check_batches else None,
            config=pbft_config,
        )
        self.merkle_buffer: list[tuple[bytes, str]] = []
        self.pending_batches: dict[bytes, tuple[merkle.MerkleTree, tuple[tuple[bytes, str], ...]]] = {}
        self.retained_batches: list[tuple[bytes, tuple[bytes, ...]]] = []
        self.direct_submitters: dict[bytes, str] = {}
        self.pending_cross: dict[bytes, tuple[str, bytes]] = {}
        self.announced_updates: set[tuple[int, int, bytes]] = set()
        self.audit: list[str] = []
        self._batch_timer_armed = False
        self._ctx: Context | None = None

    # --- plumbing -------------------------------------------------------------

    def on_start(self, ctx: Context) -> None:
        self._ctx = ctx

    def on_timer(self, ctx: Context, name: str) -> None:
        self._ctx = ctx
        if self.engine.on_timer(ctx, name):
            return
        if name == "local-batch":
            self._batch_timer_armed = False
            self._flush_batch(ctx)

    def on_message(self, ctx: Context, sender: str, payload) -> None:
        self._ctx = ctx
        if isinstance(payload, CONSENSUS_TYPES):
            self.engine.handle(ctx, sender, payload)
            return
        if isinstance(payload, SubmitTx):
            self._ingress(ctx, sender, payload.tx)
        elif isinstance(payload, EndorseRequest):
            self._endorse(ctx, sender, payload.tx)
        elif isinstance(payload, EndorseReject):
            origin = self.pending_cross.pop(payload.base, None)
            if origin is not None:
                submitter, raw = origin
                ctx.send(submitter, TxRejected(raw, payload.reason))
        elif isinstance(payload, KeyRelay):
            home = self.device_home.get(payload.device_id)
            if home == self.actor_id:
                target = self._device_actor(payload.device_id)
                if target is not None:
                    ctx.send(target, payload.grant)
        elif isinstance(payload, FetchUpdate):
            record = self.tables.update_table.get(
                (payload.manufacturer_id, payload.model_id)
            )
            if record is not None:
                ctx.send(sender, UpdateData(
                    record.manufacturer_id, record.model_id, record.payload
                ))
        elif isinstance(payload, BadUpdateReport):
            if self.dc_id is not None:
                ctx.send(self.dc_id, payload)
        elif isinstance(payload, StorageHashQuery):
            record = self.tables.storage_info.get(
                (payload.device_id, payload.data_number)
            )
            ctx.send(sender, StorageHashReply(
                payload.device_id,
                payload.data_number,
                record.data_hash if record is not None else None,
            ))

    def _device_actor(self, device_id: int) -> str | None:
        for actor, did in self.device_clients.items():
            if did == device_id:
                return actor
        return None

    # --- ingress ---------------------------------------------------------------

    def _ingress(self, ctx: Context, sender: str, raw: bytes) -> None:
        try:
            tx = txmod.decode(raw)
        except txmod.CodecError as exc:
            ctx.send(sender, TxRejected(raw, f"undecodable: {exc}"))
            return
        reason = self._gate(sender, tx)
        if reason is not None:
            self.audit.append(f"ingress reject from {sender}: {reason}")
            ctx.send(sender, TxRejected(raw, reason))
            return
        if isinstance(tx, UpdateQueryTx):
            record = self.tables.update_table.get((tx.manufacturer_id, tx.model_id))
            ctx.send(sender, UpdateInfo(
                tx.manufacturer_id,
                tx.model_id,
                record.payload_hash if record is not None else None,
                record.released_at if record is not None else -1,
            ))
            self._enqueue_batch(ctx, raw, sender)
            return
        if isinstance(tx, PermissionTx) and len(tx.signatures) == 1:
            if self.device_home.get(tx.d2_id) != self.actor_id:
                self._start_cross_region(ctx, sender, raw, tx)
                return
        if ledgermod.classify(tx) == ledgermod.TxClass.MERKLE:
            self._enqueue_batch(ctx, raw, sender)
        else:
            self.direct_submitters[raw] = sender
            self.engine.submit(ctx, raw)

    def _gate(self, sender: str, tx) -> str | None:
        """Region-local admission checks: ownership, then chain-state rules."""
        device_id = self.device_clients.get(sender)
        entity = self.entity_clients.get(sender)
        if isinstance(tx, DeviceRegistrationTx):
            if device_id != tx.device_key_id:
                return "registration for a different device"
            if self.device_home.get(tx.device_key_id) != self.actor_id:
                return "device belongs to another region"
        elif isinstance(tx, DeviceStorageTx):
            if device_id != tx.device_id:
                return "storage claim for a different device"
            if tx.device_id not in self.tables.devices:
                return "device not registered in this region"
        elif isinstance(tx, PermissionTx):
            if len(tx.signatures) > 1:
                return "endorsed permissions arrive from regional nodes only"
            if device_id != tx.d1_id:
                return "permission names a different device"
            if tx.d1_id not in self.tables.devices:
                return "device not registered in this region"
            if len(tx.signatures) == 0 and tx.tx_type != TxType.PERMISSION_RELEASE:
                return "request carries no signature"
            if (
                len(tx.signatures) == 1
                and self.device_home.get(tx.d2_id) == self.actor_id
                and tx.d2_id not in self.tables.devices
            ):
                return "peer device not registered yet"
            if len(tx.signatures) == 1 and self.device_home.get(tx.d2_id) != self.actor_id:
                # cross-region: the grant lives at the peer's home region,
                # so only the requester's signature is checked here
                d1_key = self.directory.lookup(tx.d1_id)
                base = txmod.signing_bytes(
                    PermissionTx(tx.tx_type, tx.d1_id, tx.d2_id, tx.operation)
                )
                if d1_key is None or not verify(d1_key, base, tx.signatures[0]):
                    return "bad requester signature"
                return None
        elif isinstance(tx, UpdateQueryTx):
            if device_id is None:
                return "queries come from devices"
        elif isinstance(tx, UpdateReleaseTx):
            if entity != (EntityClass.MANUFACTURER, tx.manufacturer_id):
                return "release from someone other than the manufacturer"
        elif isinstance(tx, (EntityRegistrationTx, CancellationTx)):
            if entity is None or entity[0] not in (
                EntityClass.CERTIFICATION_CENTER,
                EntityClass.DETECTION_CENTER,
            ):
                return "registration changes come from the authorities"
        elif isinstance(tx, LocalInteractiveTx):
            return "batch roots are minted here, not submitted"
        # same-region permission requests are validated against local tables,
        # which hold this region's grants; everything else is global state
        try:
            validate_tx(tx, self.tables, self.directory)
        except TxValidationError as exc:
            return exc.reason
        return None

    # --- merkle batching ---------------------------------------------------------

    def _enqueue_batch(self, ctx: Context, raw: bytes, sender: str) -> None:
        self.merkle_buffer.append((raw, sender))
        if len(self.merkle_buffer) >= LOCAL_BATCH_LIMIT:
            self._flush_batch(ctx)
        elif not self._batch_timer_armed:
            self._batch_timer_armed = True
            ctx.set_timer("local-batch", LOCAL_BATCH_INTERVAL_MS)

    def _flush_batch(self, ctx: Context) -> None:
        if not self.merkle_buffer:
            return
        items = tuple(self.merkle_buffer)
        self.merkle_buffer = []
        leaves = [hash_data(raw) for raw, _ in items]
        tree = merkle.build_tree(leaves)
        self.pending_batches[tree.root] = (tree, items)
        blank = LocalInteractiveTx(self.entity_id, tree.root, len(items), b"")
        root_tx = LocalInteractiveTx(
            self.entity_id, tree.root, len(items),
            sign(self.keypair.secret_key, txmod.signing_bytes(blank)),
        )
        self.engine.submit(ctx, txmod.encode(root_tx))

    # --- cross-region permissions ---------------------------------------------

    def _start_cross_region(self, ctx: Context, sender: str, raw: bytes,
                            tx: PermissionTx) -> None:
        peer_rn = self.device_home.get(tx.d2_id)
        if peer_rn is None:
            ctx.send(sender, TxRejected(raw, "peer device has no home region"))
            return
        base = txmod.signing_bytes(
            PermissionTx(tx.tx_type, tx.d1_id, tx.d2_id, tx.operation)
        )
        endorsed = PermissionTx(
            tx.tx_type, tx.d1_id, tx.d2_id, tx.operation,
            (sign(self.keypair.secret_key, base),),
        )
        self.pending_cross[base] = (sender, raw)
        ctx.send(peer_rn, EndorseRequest(txmod.encode(endorsed)))

    def _endorse(self, ctx: Context, sender: str, raw: bytes) -> None:
        try:
            tx = txmod.decode(raw)
        except txmod.CodecError:
            return
        if not isinstance(tx, PermissionTx) or len(tx.signatures) != 1:
            return
        base = txmod.signing_bytes(
            PermissionTx(tx.tx_type, tx.d1_id, tx.d2_id, tx.operation)
        )
        if self.device_home.get(tx.d2_id) != self.actor_id:
            ctx.send(sender, EndorseReject(base, "not the peer's home region"))
            return
        if tx.d2_id not in self.tables.devices:
            ctx.send(sender, EndorseReject(base, "peer device not registered"))
            return
        if self.tables.grant(tx.d2_id, tx.d1_id, int(tx.operation)) is None:
            ctx.send(sender, EndorseReject(base, "no grant on file"))
            return
        endorsing_rn = None
        for rec in self.tables.entities.values():
            if rec.entity_class == EntityClass.REGIONAL_NODE and rec.active:
                key = self.directory.lookup(rec.key_id)
                if key is not None and verify(key, base, tx.signatures[0]):
                    endorsing_rn = rec
                    break
        if endorsing_rn is None or endorsing_rn.entity_id == self.entity_id:
            ctx.send(sender, EndorseReject(base, "first endorsement unverifiable"))
            return
        countersigned = PermissionTx(
            tx.tx_type, tx.d1_id, tx.d2_id, tx.operation,
            tx.signatures + (
                sign(self.keypair.secret_key, base + tx.signatures[0]),
            ),
        )
        self.engine.submit(ctx, txmod.encode(countersigned))

    # --- consensus callbacks ------------------------------------------------------

    def _validate_batch(self, batch: tuple[bytes, ...]) -> str | None:
        if not batch:
            return None
        scratch = copy.deepcopy(self.tables)
        height = self.ledger.height + 1
        for raw in batch:
            try:
                tx = txmod.decode(raw)
            except txmod.CodecError as exc:
                return f"undecodable: {exc}"
            try:
                validate_tx(tx, scratch, self.directory)
            except TxValidationError as exc:
                return exc.reason
            apply_tx(scratch, tx, height)
        return None

    def _on_decide(self, seq: int, origin_view: int, timestamp_ms: int,
                   batch: tuple[bytes, ...]) -> None:
        ctx = self._ctx
        block = Block(
            height=seq,
            prev_hash=self.ledger.tip_hash,
            timestamp_ms=max(timestamp_ms, self.ledger.blocks[-1].timestamp_ms),
            proposer=origin_view % len(self.engine.peers),
            txs=batch,
        )
        self.ledger.append(block)
        apply_block(self.tables, block)
        for raw in batch:
            tx = txmod.decode(raw)
            submitter = self.direct_submitters.pop(raw, None)
            if submitter is not None:
                ctx.send(submitter, TxConfirmed(raw, block.height))
            if isinstance(tx, LocalInteractiveTx) and tx.rn_id == self.entity_id:
                self._apply_own_batch(ctx, tx.merkle_root, block.height)
            elif isinstance(tx, UpdateReleaseTx):
                self._announce_update(ctx, tx, block.height)
            elif isinstance(tx, PermissionTx) and len(tx.signatures) == 2:
                self._deliver_cross_keys(ctx, tx, block.height)

    def _apply_own_batch(self, ctx: Context, root: bytes, height: int) -> None:
        held = self.pending_batches.pop(root, None)
        if held is None:
            self.audit.append(f"committed root {root.hex()[:16]} had no held batch")
            return
        tree, items = held
        self.retained_batches.append((root, tuple(raw for raw, _ in items)))
        for index, (raw, submitter) in enumerate(items):
            tx = txmod.decode(raw)
            apply_tx(self.tables, tx, height)
            proof = merkle.prove(tree, index)
            ctx.send(submitter, MerkleReceipt(raw, proof.to_bytes(), height))
            ctx.send(submitter, TxConfirmed(raw, height))
            if isinstance(tx, PermissionTx) and len(tx.signatures) == 1:
                self._deliver_local_keys(ctx, tx, height)
            elif isinstance(tx, UpdateReleaseTx):
                self._announce_update(ctx, tx, height)

    def _announce_update(self, ctx: Context, tx: UpdateReleaseTx, height: int) -> None:
        if self.dc_id is None:
            return
        key = (tx.manufacturer_id, tx.model_id, hash_data(tx.payload))
        if key in self.announced_updates:
            return
        self.announced_updates.add(key)
        ctx.send(self.dc_id, UpdateCommitted(
            tx.manufacturer_id, tx.model_id, tx.payload, height
        ))

    def _grant_for(self, device_id: int, peer_id: int, key,
                   nonce: bytes) -> SessionKeyGrant | None:
        device_pub = self.directory.lookup(device_id)
        if device_pub is None:
            return None
        shared = ecdh_shared_secret(self.keypair.secret_key, device_pub)
        wrapped = wrap_session_key(shared, nonce, key)
        return SessionKeyGrant(peer_id, self.key_id, nonce, wrapped)

    def _deliver_local_keys(self, ctx: Context, tx: PermissionTx, height: int) -> None:
        nonce = _height_nonce(height)
        key = derive_session_key(self.keypair.secret_key, tx.d1_id, tx.d2_id, nonce)
        for device_id, peer_id in ((tx.d1_id, tx.d2_id), (tx.d2_id, tx.d1_id)):
            grant = self._grant_for(device_id, peer_id, key, nonce)
            target = self._device_actor(device_id)
            if grant is not None and target is not None:
                ctx.send(target, grant)

    def _deliver_cross_keys(self, ctx: Context, tx: PermissionTx, height: int) -> None:
        # the data owner's home region derives; the requester's key rides
        # home wrapped, relayed by its own regional node
        if self.device_home.get(tx.d2_id) != self.actor_id:
            base = txmod.signing_bytes(
                PermissionTx(tx.tx_type, tx.d1_id, tx.d2_id, tx.operation)
            )
            origin = self.pending_cross.pop(base, None)
            if origin is not None:
                submitter, raw = origin
                ctx.send(submitter, TxConfirmed(raw, height))
            return
        nonce = _height_nonce(height)
        key = derive_session_key(self.keypair.secret_key, tx.d1_id, tx.d2_id, nonce)
        local_grant = self._grant_for(tx.d2_id, tx.d1_id, key, nonce)
        target = self._device_actor(tx.d2_id)
        if local_grant is not None and target is not None:
            ctx.send(target, local_grant)
        remote_grant = self._grant_for(tx.d1_id, tx.d2_id, key, nonce)
        remote_rn = self.device_home.get(tx.d1_id)
        if remote_grant is not None and remote_rn is not None:
            ctx.send(remote_rn, KeyRelay(tx.d1_id, remote_grant))

    # --- exports -------------------------------------------------------------

    def export_state(self) -> dict:
        return {
            "node": self.actor_id,
            "ledger": self.ledger.export(),
            "tables": self.tables.export(),
            "audit": list(self.audit) + list(self.engine.audit),
        }


class ForgingRn(RegionalNode):
    """Byzantine regional node: refuses service to its own region's
    clients, and invents transactions with bogus signatures that it pushes
    straight into ordering, skipping its own admission checks."""

    def __init__(self, *args, **kwargs):
        kwargs["self_check_batches"] = False
        super().__init__(*args, **kwargs)
        self.forged: list[bytes] = []

    def on_message(self, ctx: Context, sender: str, payload) -> None:
        if isinstance(payload, SubmitTx):
            ctx.send(sender, TxRejected(payload.tx, "service refused"))
            return
        if isinstance(payload, ScriptForge):
            victim = next(iter(self.device_home), 1)
            fake = DeviceStorageTx(
                device_id=victim,
                data_number=0xBEEF,
                processing_method=0,
                data_hash=hash_data(b"planted"),
                signature=sign(self.keypair.secret_key, b"wrong preimage"),
            )
            raw = txmod.encode(fake)
            self.forged.append(raw)
            self.engine.submit(ctx, raw)
            return
        super().on_message(ctx, sender, payload)


# --- device --------------------------------------------------------------------


class Device(Actor):
    """Constrained endpoint: signs its own transactions, talks only to its
    home regional node and its cloud provider, and never orders anything."""

    def __init__(
        self,
        actor_id: str,
        device_id: int,
        keypair: KeyPair,
        home_rn: str,
        cloud: str | None,
        manufacturer_id: int,
        model_id: int,
        registration: bytes,
        directory: KeyDirectory,
        auto_register: bool = True,
        poll_updates: bool = True,
        dc_id: str | None = None,
    ):
        self.actor_id = actor_id
        self.device_id = device_id
        self.keypair = keypair
        self.home_rn = home_rn
        self.cloud = cloud
        self.manufacturer_id = manufacturer_id
        self.model_id = model_id
        self.registration = registration
        self.directory = directory
        self.auto_register = auto_register
        self.poll_updates = poll_updates
        self.dc_id = dc_id

        self.registered = False
        self.registration_tries = 0
        self.confirmed: list[TxConfirmed] = []
        self.receipts: list[MerkleReceipt] = []
        self.rejections: list[TxRejected] = []
        self.rejection_streak = 0
        self.reported_home_rn = False
        self.session_keys: dict[int, bytes] = {}
        self.expected_update: bytes | None = None
        self.applied_update: bytes | None = None
        self.ignored_pushes = 0
        self.reported: set[bytes] = set()
        self.store_acks: list[StoreAck] = []
        self.data_counter = 0

    def on_start(self, ctx: Context) -> None:
        if self.auto_register:
            self._register(ctx)
        if self.poll_updates:
            # spread polls out so regions do not query in lockstep
            ctx.set_timer("update-poll", UPDATE_POLL_MS + (self.device_id % 7) * 100)

    def on_timer(self, ctx: Context, name: str) -> None:
        if name == "reg-retry":
            if not self.registered and self.registration_tries < 5:
                self._register(ctx)
        elif name == "update-poll":
            ctx.send(self.home_rn, SubmitTx(txmod.encode(
                UpdateQueryTx(self.manufacturer_id, self.model_id)
            )))
            ctx.set_timer("update-poll", UPDATE_POLL_MS)

    def _register(self, ctx: Context) -> None:
        self.registration_tries += 1
        ctx.send(self.home_rn, SubmitTx(self.registration))
        ctx.set_timer("reg-retry", REGISTRATION_RETRY_MS)

    def on_message(self, ctx: Context, sender: str, payload) -> None:
        if isinstance(payload, TxConfirmed):
            self.confirmed.append(payload)
            self.rejection_streak = 0
            if payload.tx == self.registration:
                self.registered = True
                ctx.cancel_timer("reg-retry")
        elif isinstance(payload, MerkleReceipt):
            proof = merkle.MerkleProof.from_bytes(payload.proof)
            if merkle.verify_proof(proof) and proof.leaf == hash_data(payload.tx):
                self.receipts.append(payload)
        elif isinstance(payload, TxRejected):
            self.rejections.append(payload)
            self.rejection_streak += 1
            if (
                self.rejection_streak >= RN_REJECT_REPORT_AFTER
                and not self.reported_home_rn
                and self.dc_id is not None
            ):
                # a node refusing everything cannot be reported through
                # itself; the complaint goes to the detection center direct
                self.reported_home_rn = True
                ctx.send(self.dc_id, RnMisbehaviorReport(self.device_id, self.home_rn))
        elif isinstance(payload, UpdateInfo):
            if (
                payload.payload_hash is not None
                and payload.payload_hash != self.applied_update
                and sender == self.home_rn
            ):
                self.expected_update = payload.payload_hash
                ctx.send(self.home_rn, FetchUpdate(
                    payload.manufacturer_id, payload.model_id
                ))
        elif isinstance(payload, UpdateData):
            self._consider_update(ctx, sender, payload)
        elif isinstance(payload, SessionKeyGrant):
            self._accept_key(payload)
        elif isinstance(payload, StoreAck):
            self.store_acks.append(payload)
        elif isinstance(payload, ScriptStore):
            self._store(ctx, payload)
        elif isinstance(payload, ScriptGrant):
            base = PermissionTx(
                TxType.PERMISSION_RELEASE, self.device_id, payload.peer_id,
                Operation(payload.operation),
            )
            ctx.send(self.home_rn, SubmitTx(txmod.encode(base)))
        elif isinstance(payload, ScriptRequest):
            base = PermissionTx(
                TxType.PERMISSION_REQUEST, self.device_id, payload.peer_id,
                Operation(payload.operation),
            )
            signed = PermissionTx(
                base.tx_type, base.d1_id, base.d2_id, base.operation,
                (sign(self.keypair.secret_key, txmod.signing_bytes(base)),),
            )
            ctx.send(self.home_rn, SubmitTx(txmod.encode(signed)))

    def _consider_update(self, ctx: Context, sender: str, payload: UpdateData) -> None:
        digest = hash_data(payload.payload)
        if sender != self.home_rn or digest != self.expected_update:
            # unsolicited pushes carry no weight; only what the chain
            # confirmed through the home region gets considered
            self.ignored_pushes += 1
            return
        if MALWARE_MARKER in payload.payload:
            if digest not in self.reported:
                self.reported.add(digest)
                ctx.send(self.home_rn, BadUpdateReport(
                    self.device_id, payload.manufacturer_id,
                    payload.model_id, digest,
                ))
            return
        self.applied_update = digest
        self.expected_update = None

    def _accept_key(self, grant: SessionKeyGrant) -> None:
        rn_pub = self.directory.lookup(grant.rn_key_id)
        if rn_pub is None:
            return
        shared = ecdh_shared_secret(self.keypair.secret_key, rn_pub)
        session = unwrap_session_key(
            shared, grant.nonce, grant.wrapped, (self.device_id, grant.peer_id)
        )
        self.session_keys[grant.peer_id] = session.bytes

    def _store(self, ctx: Context, script: ScriptStore) -> None:
        data_number = self.data_counter
        self.data_counter += 1
        if self.cloud is not None:
            ctx.send(self.cloud, StoreData(
                self.device_id, data_number, script.processing_method, script.payload
            ))
        blank = DeviceStorageTx(
            device_id=self.device_id,
            data_number=data_number,
            processing_method=script.processing_method,
            data_hash=hash_data(script.payload),
            signature=b"",
        )
        record = DeviceStorageTx(
            blank.device_id, blank.data_number, blank.processing_method,
            blank.data_hash,
            sign(self.keypair.secret_key, txmod.signing_bytes(blank)),
        )
        ctx.send(self.home_rn, SubmitTx(txmod.encode(record)))


class Intruder(Actor):
    """Outside attacker: a key pair nobody certified, plus someone else's
    identifiers. Scripted to try registration, storage claims, or fake
    update pushes."""

    def __init__(self, actor_id: str, keypair: KeyPair, home_rn: str,
                 victim_device: int, victim_manufacturer: int,
                 device_targets: tuple[str, ...] = ()):
        self.actor_id = actor_id
        self.keypair = keypair
        self.home_rn = home_rn
        self.victim_device = victim_device
        self.victim_manufacturer = victim_manufacturer
        self.device_targets = device_targets
        self.rejections: list[TxRejected] = []
        self.attempts: list[bytes] = []

    def on_message(self, ctx: Context, sender: str, payload) -> None:
        if isinstance(payload, TxRejected):
            self.rejections.append(payload)
            return
        if not isinstance(payload, ScriptForge):
            return
        if payload.kind == "registration":
            fake = DeviceRegistrationTx(
                manufacturer_id=self.victim_manufacturer,
                device_key_id=self.victim_device,
                signature=sign(self.keypair.secret_key, b"not the real preimage"),
            )
            raw = txmod.encode(fake)
            self.attempts.append(raw)
            ctx.send(self.home_rn, SubmitTx(raw))
        elif payload.kind == "storage":
            fake = DeviceStorageTx(
                device_id=self.victim_device,
                data_number=0x7777,
                processing_method=0,
                data_hash=hash_data(b"planted by intruder"),
                signature=sign(self.keypair.secret_key, b"unrelated bytes"),
            )
            raw = txmod.encode(fake)
            self.attempts.append(raw)
            ctx.send(self.home_rn, SubmitTx(raw))
        elif payload.kind == "push-update":
            junk = UpdateData(self.victim_manufacturer, 1, b"FREE-UPGRADE" * 4)
            for target in self.device_targets:
                ctx.send(target, junk)


# --- manufacturer ----------------------------------------------------------------


class Manufacturer(Actor):
    def __init__(self, actor_id: str, entity_id: int, keypair: KeyPair,
                 key_id: int, home_rn: str, malicious: bool = False):
        self.actor_id = actor_id
        self.entity_id = entity_id
        self.keypair = keypair
        self.key_id = key_id
        self.home_rn = home_rn
        self.malicious = malicious
        self.confirmed: list[TxConfirmed] = []
        self.rejections: list[TxRejected] = []

    def provision(self, device_key_id: int) -> bytes:
        """Pre-sign a device's registration, as done at manufacture time."""
        blank = DeviceRegistrationTx(self.entity_id, device_key_id, b"")
        signed = DeviceRegistrationTx(
            self.entity_id, device_key_id,
            sign(self.keypair.secret_key, txmod.signing_bytes(blank)),
        )
        return txmod.encode(signed)

    def on_message(self, ctx: Context, sender: str, payload) -> None:
        if isinstance(payload, TxConfirmed):
            self.confirmed.append(payload)
        elif isinstance(payload, TxRejected):
            self.rejections.append(payload)
        elif isinstance(payload, ScriptRelease):
            body = payload.payload
            if self.malicious:
                body = body + MALWARE_MARKER
            blank = UpdateReleaseTx(self.entity_id, payload.model_id, b"", body)
            tx = UpdateReleaseTx(
                self.entity_id, payload.model_id,
                sign(self.keypair.secret_key, txmod.signing_bytes(blank)), body,
            )
            ctx.send(self.home_rn, SubmitTx(txmod.encode(tx)))


# --- cloud provider ----------------------------------------------------------------


class CloudProvider(Actor):
    def __init__(self, actor_id: str, entity_id: int, keypair: KeyPair,
                 key_id: int, home_rn: str, tampers: bool = False):
        self.actor_id = actor_id
        self.entity_id = entity_id
        self.keypair = keypair
        self.key_id = key_id
        self.home_rn = home_rn
        self.tampers = tampers
        self.store: dict[tuple[int, int], bytes] = {}

    def on_message(self, ctx: Context, sender: str, payload) -> None:
        if isinstance(payload, StoreData):
            body = payload.payload
            if self.tampers and body:
                body = body[:-1] + bytes([body[-1] ^ 0xFF])
            self.store[(payload.device_id, payload.data_number)] = body
            ctx.send(sender, StoreAck(payload.device_id, payload.data_number))
        elif isinstance(payload, ReadData):
            ctx.send(sender, DataBlob(
                payload.device_id, payload.data_number,
                self.store.get((payload.device_id, payload.data_number)),
            ))


# --- certification and detection centers ----------------------------------------


class CertificationCenter(Actor):
    """Root of trust. Its signatures are spent at world construction;
    at run time it only observes."""

    def __init__(self, actor_id: str, entity_id: int, keypair: KeyPair, key_id: int):
        self.actor_id = actor_id
        self.entity_id = entity_id
        self.keypair = keypair
        self.key_id = key_id


class DetectionCenter(Actor):
    """Scans committed updates, collects device reports, and revokes
    manufacturers that ship recognizably bad payloads."""

    def __init__(self, actor_id: str, entity_id: int, keypair: KeyPair,
                 key_id: int, home_rn: str,
                 registry_keys: dict[tuple[EntityClass, int], int],
                 cloud: str | None = None,
                 rn_entities: dict[str, tuple[int, int]] | None = None):
        self.actor_id = actor_id
        self.entity_id = entity_id
        self.keypair = keypair
        self.key_id = key_id
        self.home_rn = home_rn
        self.registry_keys = registry_keys
        self.cloud = cloud
        # actor id -> (entity id, key id) of the consensus members, plus
        # an ordering to pick an uninvolved node to submit through
        self.rn_entities = rn_entities or {}
        self.seen_updates: set[tuple[int, int, bytes]] = set()
        self.reports: dict[tuple[int, int, bytes], set[int]] = {}
        self.rn_reports: dict[str, set[int]] = {}
        self.findings: list[str] = []
        self.cancelled: set[tuple[EntityClass, int]] = set()
        self.audit_pending: dict[tuple[int, int], dict] = {}
        self.audit_results: dict[tuple[int, int], dict] = {}

    def on_message(self, ctx: Context, sender: str, payload) -> None:
        if isinstance(payload, UpdateCommitted):
            key = (payload.manufacturer_id, payload.model_id,
                   hash_data(payload.payload))
            if key in self.seen_updates:
                return
            self.seen_updates.add(key)
            if MALWARE_MARKER in payload.payload:
                self.findings.append(
                    f"malicious payload in update {payload.manufacturer_id}"
                    f"/{payload.model_id} at height {payload.height}"
                )
                self._cancel_manufacturer(ctx, payload.manufacturer_id)
        elif isinstance(payload, BadUpdateReport):
            key = (payload.manufacturer_id, payload.model_id, payload.payload_hash)
            reporters = self.reports.setdefault(key, set())
            reporters.add(payload.device_id)
            if len(reporters) >= REPORT_THRESHOLD:
                self.findings.append(
                    f"{len(reporters)} devices reported update"
                    f" {payload.manufacturer_id}/{payload.model_id}"
                )
                self._cancel_manufacturer(ctx, payload.manufacturer_id)
        elif isinstance(payload, RnMisbehaviorReport):
            criers = self.rn_reports.setdefault(payload.rn, set())
            criers.add(payload.device_id)
            if len(criers) >= RN_REPORT_THRESHOLD and payload.rn in self.rn_entities:
                self.findings.append(
                    f"{len(criers)} devices report {payload.rn} refusing service"
                )
                rn_entity, rn_key = self.rn_entities[payload.rn]
                submit_to = next(
                    (rid for rid in self.rn_entities if rid != payload.rn),
                    self.home_rn,
                )
                self._cancel_entity(
                    ctx, EntityClass.REGIONAL_NODE, rn_entity, rn_key, submit_to
                )
        elif isinstance(payload, ScriptAudit):
            slot = (payload.device_id, payload.data_number)
            self.audit_pending[slot] = {}
            if self.cloud is not None:
                ctx.send(self.cloud, ReadData(*slot))
            ctx.send(self.home_rn, StorageHashQuery(*slot))
        elif isinstance(payload, DataBlob):
            slot = (payload.device_id, payload.data_number)
            if slot in self.audit_pending:
                self.audit_pending[slot]["cloud_hash"] = (
                    hash_data(payload.payload) if payload.payload is not None else None
                )
                self._finish_audit(slot)
        elif isinstance(payload, StorageHashReply):
            slot = (payload.device_id, payload.data_number)
            if slot in self.audit_pending:
                self.audit_pending[slot]["chain_hash"] = payload.data_hash
                self._finish_audit(slot)

    def _finish_audit(self, slot: tuple[int, int]) -> None:
        partial = self.audit_pending[slot]
        if "cloud_hash" not in partial or "chain_hash" not in partial:
            return
        del self.audit_pending[slot]
        match = (
            partial["cloud_hash"] is not None
            and partial["cloud_hash"] == partial["chain_hash"]
        )
        self.audit_results[slot] = {**partial, "match": match}
        if not match:
            self.findings.append(
                f"stored data for device {slot[0]} item {slot[1]}"
                f" does not match the chain"
            )

    def _cancel_manufacturer(self, ctx: Context, manufacturer_id: int) -> None:
        key_id = self.registry_keys.get((EntityClass.MANUFACTURER, manufacturer_id))
        if key_id is None:
            return
        self._cancel_entity(
            ctx, EntityClass.MANUFACTURER, manufacturer_id, key_id, self.home_rn
        )

    def _cancel_entity(self, ctx: Context, entity_class: EntityClass,
                       entity_id: int, key_id: int, submit_to: str) -> None:
        if (entity_class, entity_id) in self.cancelled:
            return
        self.cancelled.add((entity_class, entity_id))
        blank = CancellationTx(entity_class, entity_id, key_id, b"")
        tx = CancellationTx(
            entity_class, entity_id, key_id,
            sign(self.keypair.secret_key, txmod.signing_bytes(blank)),
        )
        ctx.send(submit_to, SubmitTx(txmod.encode(tx)))


# --- a bare consensus host, for protocol-only worlds -----------------------------


class ConsensusHost(Actor):
    """Minimal actor around an ordering engine; used by the consensus
    scenarios and tests where the full role cast would be noise."""

    def __init__(self, actor_id: str, peers: tuple[str, ...], keypair: KeyPair,
                 peer_keys: dict[str, bytes], engine_cls=PbftEngine,
                 config: PbftConfig | None = None):
        self.actor_id = actor_id
        self.keypair = keypair
        self.decided: list[tuple[int, int, int, tuple[bytes, ...]]] = []
        self.engine = engine_cls(
            node_id=actor_id,
            peers=peers,
            keypair=keypair,
            peer_keys=peer_keys,
            on_decide=lambda seq, view, ts, batch: self.decided.append(
                (seq, view, ts, batch)
            ),
            config=config,
        )

    def on_message(self, ctx: Context, sender: str, payload) -> None:
        if isinstance(payload, ScriptSubmit):
            self.engine.submit(ctx, payload.tx)
            return
        self.engine.handle(ctx, sender, payload)

    def on_timer(self, ctx: Context, name: str) -> None:
        self.engine.on_timer(ctx, name)

    def decided_digest(self) -> str:
        """Order-sensitive fingerprint of everything this node decided."""
        acc = hash_data(b"")
        for seq, view, ts, batch in self.decided:
            head = struct.pack(">QQQ", seq, view, ts)
            body = b"".join(struct.pack(">I", len(t)) + t for t in batch)
            acc = hash_data(acc + head + body)
        return acc.hex()


# --- world construction ------------------------------------------------------------


@dataclass
class WorldConfig:
    regions: int = 4
    devices_per_region: int = 2
    manufacturers: int = 1
    clouds: int = 1
    seed: int = 0
    engine: str = "pbft"  # or "stub"
    pbft: PbftConfig = field(default_factory=PbftConfig)
    drop_probability: float = 0.0
    byzantine_rns: tuple[str, ...] = ()
    byzantine_mode: str = "forge"  # "forge" | "silent" | "equivocate" | "collude"
    malicious_manufacturers: tuple[int, ...] = ()
    tampering_clouds: tuple[int, ...] = ()
    with_intruder: bool = False


@dataclass
class World:
    config: WorldConfig
    network: Network
    directory: KeyDirectory
    genesis: Block
    cc: CertificationCenter
    dc: DetectionCenter
    rns: list[RegionalNode]
    devices: list[Device]
    manufacturers: list[Manufacturer]
    clouds: list[CloudProvider]
    intruder: Intruder | None = None

    def rn(self, actor_id: str) -> RegionalNode:
        for node in self.rns:
            if node.actor_id == actor_id:
                return node
        raise KeyError(actor_id)

    def honest_rns(self) -> list[RegionalNode]:
        return [
            node for node in self.rns
            if node.actor_id not in self.config.byzantine_rns
        ]


_ENGINES = {
    "pbft": PbftEngine,
    "stub": OrderingStub,
}

_BYZANTINE_ENGINES = {
    "silent": SilentEngine,
    "equivocate": EquivocatingEngine,
    "collude": CollusionEngine,
}


def build_world(config: WorldConfig) -> World:
    """Wire a full deployment: keys, genesis, actors, and the network."""
    if config.engine == "pbft" and config.regions < 4:
        raise ConfigError(
            "byzantine ordering needs at least 4 regional nodes"
            f" (got {config.regions})"
        )
    rng = DeterministicRng(config.seed)
    network = Network(seed=config.seed ^ 0x5EED)
    network.drop_probability = config.drop_probability
    directory = KeyDirectory()

    def enroll() -> tuple[KeyPair, int, int]:
        pair = generate_keypair(rng)
        return pair, directory.add_key(pair.public_key), directory.allocate_entity_id()

    cc_pair, cc_key, cc_id = enroll()
    dc_pair, dc_key, dc_id = enroll()
    rn_ids = [f"rn-{i + 1}" for i in range(config.regions)]
    rn_pairs: dict[str, tuple[KeyPair, int, int]] = {rid: enroll() for rid in rn_ids}
    man_pairs = [enroll() for _ in range(config.manufacturers)]
    cloud_pairs = [enroll() for _ in range(config.clouds)]

    def reg(entity_class: EntityClass, entity_id: int, key_id: int,
            signer: KeyPair) -> bytes:
        blank = EntityRegistrationTx(entity_class, entity_id, key_id, b"")
        tx = EntityRegistrationTx(
            entity_class, entity_id, key_id,
            sign(signer.secret_key, txmod.signing_bytes(blank)),
        )
        return txmod.encode(tx)

    first_rn_pair = rn_pairs[rn_ids[0]][0]
    genesis_txs = [
        reg(EntityClass.CERTIFICATION_CENTER, cc_id, cc_key, cc_pair),
        reg(EntityClass.DETECTION_CENTER, dc_id, dc_key, cc_pair),
    ]
    for rid in rn_ids:
        pair, key_id, entity_id = rn_pairs[rid]
        genesis_txs.append(reg(EntityClass.REGIONAL_NODE, entity_id, key_id, cc_pair))
    for pair, key_id, entity_id in man_pairs:
        genesis_txs.append(reg(EntityClass.MANUFACTURER, entity_id, key_id, cc_pair))
    for pair, key_id, entity_id in cloud_pairs:
        # providers are certified by the regional node they attach to
        genesis_txs.append(
            reg(EntityClass.CLOUD_PROVIDER, entity_id, key_id, first_rn_pair)
        )
    genesis = make_genesis(tuple(genesis_txs))

    manufacturers = [
        Manufacturer(
            f"man-{index + 1}", entity_id, pair, key_id,
            home_rn=rn_ids[index % len(rn_ids)],
            malicious=(index + 1) in config.malicious_manufacturers,
        )
        for index, (pair, key_id, entity_id) in enumerate(man_pairs)
    ]
    clouds = [
        CloudProvider(
            f"cloud-{index + 1}", entity_id, pair, key_id,
            home_rn=rn_ids[index % len(rn_ids)],
            tampers=(index + 1) in config.tampering_clouds,
        )
        for index, (pair, key_id, entity_id) in enumerate(cloud_pairs)
    ]

    devices: list[Device] = []
    device_home: dict[int, str] = {}
    device_clients: dict[str, int] = {}
    for region_index, rid in enumerate(rn_ids):
        for slot in range(config.devices_per_region):
            pair = generate_keypair(rng)
            device_id = directory.add_key(pair.public_key)
            man = manufacturers[(region_index + slot) % len(manufacturers)]
            actor_id = f"dev-{region_index + 1}-{slot + 1}"
            devices.append(Device(
                actor_id=actor_id,
                device_id=device_id,
                keypair=pair,
                home_rn=rid,
                cloud=clouds[0].actor_id if clouds else None,
                manufacturer_id=man.entity_id,
                model_id=1,
                registration=man.provision(device_id),
                directory=directory,
                dc_id="dc",
            ))
            device_home[device_id] = rid
            device_clients[actor_id] = device_id

    entity_clients: dict[str, tuple[EntityClass, int]] = {
        "cc": (EntityClass.CERTIFICATION_CENTER, cc_id),
        "dc": (EntityClass.DETECTION_CENTER, dc_id),
    }
    for man in manufacturers:
        entity_clients[man.actor_id] = (EntityClass.MANUFACTURER, man.entity_id)
    for cloud in clouds:
        entity_clients[cloud.actor_id] = (EntityClass.CLOUD_PROVIDER, cloud.entity_id)

    peer_keys = {rid: rn_pairs[rid][0].public_key for rid in rn_ids}
    rns: list[RegionalNode] = []
    for rid in rn_ids:
        pair, key_id, entity_id = rn_pairs[rid]
        engine_cls = _ENGINES[config.engine]
        node_cls = RegionalNode
        if rid in config.byzantine_rns:
            if config.byzantine_mode == "forge":
                node_cls = ForgingRn
            else:
                engine_cls = _BYZANTINE_ENGINES[config.byzantine_mode]
        rns.append(node_cls(
            actor_id=rid,
            entity_id=entity_id,
            keypair=pair,
            key_id=key_id,
            peers=tuple(rn_ids),
            peer_keys=peer_keys,
            directory=directory,
            genesis=genesis,
            device_home=device_home,
            device_clients=device_clients,
            entity_clients=entity_clients,
            dc_id="dc",
            engine_cls=engine_cls,
            pbft_config=config.pbft,
        ))

    registry_keys = {
        (EntityClass.MANUFACTURER, man.entity_id): man.key_id
        for man in manufacturers
    }
    rn_entities = {
        rid: (rn_pairs[rid][2], rn_pairs[rid][1]) for rid in rn_ids
    }
    cc = CertificationCenter("cc", cc_id, cc_pair, cc_key)
    dc = DetectionCenter(
        "dc", dc_id, dc_pair, dc_key, home_rn=rn_ids[0],
        registry_keys=registry_keys,
        cloud=clouds[0].actor_id if clouds else None,
        rn_entities=rn_entities,
    )

    intruder = None
    if config.with_intruder:
        intruder = Intruder(
            "intruder",
            generate_keypair(rng),
            home_rn=rn_ids[0],
            victim_device=devices[0].device_id if devices else 1,
            victim_manufacturer=(
                manufacturers[0].entity_id if manufacturers else 1
            ),
            device_targets=tuple(d.actor_id for d in devices),
        )

    for node in rns:
        network.add_actor(node, kind="rn")
    for device in devices:
        network.add_actor(device, kind="device")
    for man in manufacturers:
        network.add_actor(man, kind="man")
    for cloud in clouds:
        network.add_actor(cloud, kind="cloud")
    network.add_actor(cc, kind="cc")
    network.add_actor(dc, kind="dc")
    if intruder is not None:
        network.add_actor(intruder, kind="device")

    return World(
        config=config,
        network=network,
        directory=directory,
        genesis=genesis,
        cc=cc,
        dc=dc,
        rns=rns,
        devices=devices,
        manufacturers=manufacturers,
        clouds=clouds,
        intruder=intruder,
    )


def build_consensus_world(
    n: int,
    seed: int = 0,
    engine_cls=PbftEngine,
    byzantine: dict[str, type] | None = None,
    config: PbftConfig | None = None,
) -> tuple[Network, list[ConsensusHost]]:
    """A bare ordering cluster: n hosts, no application roles."""
    rng = DeterministicRng(seed)
    network = Network(seed=seed ^ 0x5EED)
    names = tuple(f"node-{i + 1}" for i in range(n))
    pairs = {name: generate_keypair(rng) for name in names}
    peer_keys = {name: pair.public_key for name, pair in pairs.items()}
    hosts = []
    for name in names:
        cls = (byzantine or {}).get(name, engine_cls)
        host = ConsensusHost(name, names, pairs[name], peer_keys,
                             engine_cls=cls, config=config)
        hosts.append(host)
        network.add_actor(host, kind="rn")
    return network, hosts
