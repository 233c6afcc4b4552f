"""Blocks, chain state, and the four tables a regional node maintains.

The chain stores transactions in their wire encoding. State lives in
:class:`RnTables`: an entity/device registry, the update table, the
permission table, and the storage-info table, plus the list of batch
roots recorded on behalf of regional nodes.

Validation here is the deterministic part every consensus node can run
from chain state alone. Checks that need a node's private context (for
example whether a device actually belongs to this region) happen at
ingress in the role layer, not here.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

from . import tx as txmod
from .crypto import DIGEST_LEN, hash_data, verify
from .tx import (
    CancellationTx,
    DeviceRegistrationTx,
    DeviceStorageTx,
    EntityClass,
    EntityRegistrationTx,
    LocalInteractiveTx,
    PermissionTx,
    Transaction,
    TxType,
    UpdateQueryTx,
    UpdateReleaseTx,
)

GENESIS_PREV_HASH = bytes(DIGEST_LEN)


class LedgerError(Exception):
    pass


class BlockLinkError(LedgerError):
    """Block does not extend the current tip."""


class TxValidationError(LedgerError):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class KeyDirectory:
    """Out-of-band public-key infrastructure shared by all participants.

    Key material distribution is not the chain's job: hardware modules are
    loaded at manufacture time and entity keys are exchanged during
    certification. The directory hands out sequential identifiers so that
    a device's 4-byte id doubles as its key id.
    """

    def __init__(self):
        self._keys: dict[int, bytes] = {}
        self._next_key_id = 1
        self._next_entity_id = 1

    def add_key(self, public_key: bytes) -> int:
        key_id = self._next_key_id
        self._next_key_id += 1
        self._keys[key_id] = public_key
        return key_id

    def lookup(self, key_id: int) -> bytes | None:
        return self._keys.get(key_id)

    def allocate_entity_id(self) -> int:
        entity_id = self._next_entity_id
        self._next_entity_id += 1
        return entity_id

    def __len__(self) -> int:
        return len(self._keys)


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: bytes
    timestamp_ms: int
    proposer: int
    txs: tuple[bytes, ...]


def block_bytes(block: Block) -> bytes:
    """Canonical serialization: fixed header, then length-prefixed txs."""
    out = [
        struct.pack(
            ">QQ", block.height, block.timestamp_ms
        ),
        block.prev_hash,
        struct.pack(">II", block.proposer, len(block.txs)),
    ]
    for encoded in block.txs:
        out.append(struct.pack(">I", len(encoded)))
        out.append(encoded)
    return b"".join(out)


def block_hash(block: Block) -> bytes:
    return hash_data(block_bytes(block))


def make_genesis(txs: tuple[bytes, ...], timestamp_ms: int = 0) -> Block:
    return Block(
        height=0,
        prev_hash=GENESIS_PREV_HASH,
        timestamp_ms=timestamp_ms,
        proposer=0,
        txs=txs,
    )


class Ledger:
    """Append-only chain of blocks with hash linkage checks."""

    def __init__(self, genesis: Block):
        if genesis.height != 0 or genesis.prev_hash != GENESIS_PREV_HASH:
            raise BlockLinkError("genesis must have height 0 and a zero prev hash")
        self.blocks: list[Block] = [genesis]

    @property
    def height(self) -> int:
        return self.blocks[-1].height

    @property
    def tip_hash(self) -> bytes:
        return block_hash(self.blocks[-1])

    def append(self, block: Block) -> None:
        tip = self.blocks[-1]
        if block.height != tip.height + 1:
            raise BlockLinkError(
                f"expected height {tip.height + 1}, got {block.height}"
            )
        if block.prev_hash != block_hash(tip):
            raise BlockLinkError(f"block {block.height} does not link to tip")
        if block.timestamp_ms < tip.timestamp_ms:
            raise BlockLinkError(f"block {block.height} moves time backwards")
        self.blocks.append(block)

    def iter_txs(self):
        """Yield (height, index_in_block, decoded transaction)."""
        for block in self.blocks:
            for index, encoded in enumerate(block.txs):
                yield block.height, index, txmod.decode(encoded)

    def export(self) -> dict:
        return {
            "height": self.height,
            "tip_hash": self.tip_hash.hex(),
            "blocks": [
                {
                    "height": b.height,
                    "prev_hash": b.prev_hash.hex(),
                    "timestamp_ms": b.timestamp_ms,
                    "proposer": b.proposer,
                    "hash": block_hash(b).hex(),
                    "txs": [
                        {"raw": enc.hex(), "text": txmod.render(txmod.decode(enc))}
                        for enc in b.txs
                    ],
                }
                for b in self.blocks
            ],
        }

    def export_json(self) -> str:
        return json.dumps(self.export(), indent=2, sort_keys=True)


# --- regional-node state ----------------------------------------------------


@dataclass
class EntityRecord:
    entity_class: EntityClass
    entity_id: int
    key_id: int
    registered_at: int
    cancelled_at: int | None = None

    @property
    def active(self) -> bool:
        return self.cancelled_at is None


@dataclass
class DeviceRecord:
    device_id: int  # equals the device's key id
    manufacturer_id: int
    registered_at: int


@dataclass
class UpdateRecord:
    manufacturer_id: int
    model_id: int
    payload: bytes
    payload_hash: bytes
    released_at: int


@dataclass
class GrantRecord:
    granter: int
    grantee: int
    operation: txmod.Operation
    granted_at: int


@dataclass
class StorageRecord:
    device_id: int
    data_number: int
    processing_method: int
    data_hash: bytes
    stored_at: int


@dataclass
class BatchRootRecord:
    rn_id: int
    root: bytes
    batch_size: int
    height: int


@dataclass
class RnTables:
    """The node-local view of chain state.

    ``entities`` and ``devices`` together form the registry; devices
    appear only where a node saw the underlying batched transactions
    (its own region), everyone else holds just the batch root.
    """

    entities: dict[tuple[EntityClass, int], EntityRecord] = field(default_factory=dict)
    devices: dict[int, DeviceRecord] = field(default_factory=dict)
    update_table: dict[tuple[int, int], UpdateRecord] = field(default_factory=dict)
    permissions: dict[tuple[int, int, int], GrantRecord] = field(default_factory=dict)
    storage_info: dict[tuple[int, int], StorageRecord] = field(default_factory=dict)
    batch_roots: list[BatchRootRecord] = field(default_factory=list)

    def entity(self, entity_class: EntityClass, entity_id: int) -> EntityRecord | None:
        return self.entities.get((entity_class, entity_id))

    def active_entity(self, entity_class: EntityClass, entity_id: int) -> bool:
        record = self.entity(entity_class, entity_id)
        return record is not None and record.active

    def active_keys(self, entity_class: EntityClass) -> list[tuple[int, int]]:
        """(entity_id, key_id) pairs for active entities of one class."""
        return [
            (rec.entity_id, rec.key_id)
            for rec in self.entities.values()
            if rec.entity_class == entity_class and rec.active
        ]

    def grant(self, granter: int, grantee: int, operation: int) -> GrantRecord | None:
        return self.permissions.get((granter, grantee, operation))

    def export(self) -> dict:
        return {
            "registry": {
                "entities": [
                    {
                        "class": rec.entity_class.name.lower(),
                        "entity_id": rec.entity_id,
                        "key_id": rec.key_id,
                        "registered_at": rec.registered_at,
                        "cancelled_at": rec.cancelled_at,
                    }
                    for rec in sorted(
                        self.entities.values(),
                        key=lambda r: (r.entity_class, r.entity_id),
                    )
                ],
                "devices": [
                    {
                        "device_id": rec.device_id,
                        "manufacturer_id": rec.manufacturer_id,
                        "registered_at": rec.registered_at,
                    }
                    for rec in sorted(self.devices.values(), key=lambda r: r.device_id)
                ],
            },
            "update_table": [
                {
                    "manufacturer_id": rec.manufacturer_id,
                    "model_id": rec.model_id,
                    "payload_hash": rec.payload_hash.hex(),
                    "payload_len": len(rec.payload),
                    "released_at": rec.released_at,
                }
                for rec in sorted(
                    self.update_table.values(),
                    key=lambda r: (r.manufacturer_id, r.model_id),
                )
            ],
            "permissions": [
                {
                    "granter": rec.granter,
                    "grantee": rec.grantee,
                    "operation": txmod.Operation(rec.operation).name.lower(),
                    "granted_at": rec.granted_at,
                }
                for rec in sorted(
                    self.permissions.values(),
                    key=lambda r: (r.granter, r.grantee, r.operation),
                )
            ],
            "storage_info": [
                {
                    "device_id": rec.device_id,
                    "data_number": rec.data_number,
                    "processing_method": rec.processing_method,
                    "data_hash": rec.data_hash.hex(),
                    "stored_at": rec.stored_at,
                }
                for rec in sorted(
                    self.storage_info.values(),
                    key=lambda r: (r.device_id, r.data_number),
                )
            ],
            "batch_roots": [
                {
                    "rn_id": rec.rn_id,
                    "root": rec.root.hex(),
                    "batch_size": rec.batch_size,
                    "height": rec.height,
                }
                for rec in self.batch_roots
            ],
        }


# --- recording mode ---------------------------------------------------------


class TxClass:
    DIRECT = "direct"
    MERKLE = "merkle"


def classify(tx: Transaction, *, regional_update: bool = False) -> str:
    """Whether a transaction is chained directly or batched under a root.

    Interactions confined to one region ride in merkle batches so that
    only the root reaches the shared chain; anything with network-wide
    effect is chained as-is. An update release defaults to network-wide;
    pass ``regional_update=True`` for one aimed at a single region.
    """
    if isinstance(tx, DeviceRegistrationTx):
        return TxClass.MERKLE
    if isinstance(tx, (EntityRegistrationTx, CancellationTx)):
        if tx.entity_class == EntityClass.CLOUD_PROVIDER:
            return TxClass.MERKLE
        return TxClass.DIRECT
    if isinstance(tx, UpdateReleaseTx):
        return TxClass.MERKLE if regional_update else TxClass.DIRECT
    if isinstance(tx, UpdateQueryTx):
        return TxClass.MERKLE
    if isinstance(tx, DeviceStorageTx):
        return TxClass.DIRECT
    if isinstance(tx, PermissionTx):
        # both regional nodes endorse the cross-region form
        return TxClass.DIRECT if len(tx.signatures) == 2 else TxClass.MERKLE
    if isinstance(tx, LocalInteractiveTx):
        return TxClass.DIRECT
    raise LedgerError(f"not a transaction: {tx!r}")


# --- validation -------------------------------------------------------------


def _verify_entity_sig(
    tx: EntityRegistrationTx | CancellationTx,
    tables: RnTables,
    directory: KeyDirectory,
    signer_classes: tuple[EntityClass, ...],
) -> bool:
    message = txmod.signing_bytes(tx)
    for signer_class in signer_classes:
        for _, key_id in tables.active_keys(signer_class):
            public_key = directory.lookup(key_id)
            if public_key is not None and verify(public_key, message, tx.signature):
                return True
    return False


def validate_tx(
    tx: Transaction, tables: RnTables, directory: KeyDirectory
) -> None:
    """Reject a transaction that fails the chain-state checks.

    Raises :class:`TxValidationError` with a stable reason string
    (used in traces and verdicts); returns None when valid.
    """
    if isinstance(tx, DeviceRegistrationTx):
        if directory.lookup(tx.device_key_id) is None:
            raise TxValidationError("device key not in directory")
        if not tables.active_entity(EntityClass.MANUFACTURER, tx.manufacturer_id):
            raise TxValidationError("manufacturer not registered")
        man = tables.entity(EntityClass.MANUFACTURER, tx.manufacturer_id)
        man_key = directory.lookup(man.key_id)
        if man_key is None or not verify(man_key, txmod.signing_bytes(tx), tx.signature):
            raise TxValidationError("bad manufacturer signature")
        return

    if isinstance(tx, EntityRegistrationTx):
        if directory.lookup(tx.key_id) is None:
            raise TxValidationError("entity key not in directory")
        if tables.active_entity(tx.entity_class, tx.entity_id):
            raise TxValidationError("entity already registered")
        if tx.entity_class == EntityClass.CLOUD_PROVIDER:
            signers = (EntityClass.REGIONAL_NODE,)
        elif tx.entity_class == EntityClass.CERTIFICATION_CENTER:
            # the root of trust self-signs in the genesis block
            public_key = directory.lookup(tx.key_id)
            if not verify(public_key, txmod.signing_bytes(tx), tx.signature):
                raise TxValidationError("bad self-signature")
            return
        else:
            signers = (EntityClass.CERTIFICATION_CENTER,)
        if not _verify_entity_sig(tx, tables, directory, signers):
            raise TxValidationError("registration not signed by an authority")
        return

    if isinstance(tx, CancellationTx):
        record = tables.entity(tx.entity_class, tx.entity_id)
        if record is None or not record.active:
            raise TxValidationError("entity not active")
        if record.key_id != tx.key_id:
            raise TxValidationError("key id mismatch")
        authorities = (EntityClass.CERTIFICATION_CENTER, EntityClass.DETECTION_CENTER)
        if not _verify_entity_sig(tx, tables, directory, authorities):
            raise TxValidationError("cancellation not signed by an authority")
        return

    if isinstance(tx, UpdateReleaseTx):
        man = tables.entity(EntityClass.MANUFACTURER, tx.manufacturer_id)
        if man is None or not man.active:
            raise TxValidationError("manufacturer not registered")
        man_key = directory.lookup(man.key_id)
        if man_key is None or not verify(man_key, txmod.signing_bytes(tx), tx.signature):
            raise TxValidationError("bad manufacturer signature")
        return

    if isinstance(tx, UpdateQueryTx):
        return  # unsigned; anyone may ask

    if isinstance(tx, DeviceStorageTx):
        device_key = directory.lookup(tx.device_id)
        if device_key is None:
            raise TxValidationError("device key not in directory")
        if not verify(device_key, txmod.signing_bytes(tx), tx.signature):
            raise TxValidationError("bad device signature")
        return

    if isinstance(tx, PermissionTx):
        _validate_permission(tx, tables, directory)
        return

    if isinstance(tx, LocalInteractiveTx):
        rn = tables.entity(EntityClass.REGIONAL_NODE, tx.rn_id)
        if rn is None or not rn.active:
            raise TxValidationError("regional node not registered")
        if tx.batch_size < 1:
            raise TxValidationError("empty batch")
        rn_key = directory.lookup(rn.key_id)
        if rn_key is None or not verify(rn_key, txmod.signing_bytes(tx), tx.signature):
            raise TxValidationError("bad regional node signature")
        return

    raise TxValidationError(f"unknown transaction {tx!r}")


def _validate_permission(
    tx: PermissionTx, tables: RnTables, directory: KeyDirectory
) -> None:
    if tx.d1_id == tx.d2_id:
        raise TxValidationError("permission between a device and itself")
    if len(tx.signatures) == 0:
        if tx.tx_type != TxType.PERMISSION_RELEASE:
            raise TxValidationError("request carries no signature")
        return  # same-region release: authenticity handled at ingress
    if len(tx.signatures) == 1:
        if tx.tx_type != TxType.PERMISSION_REQUEST:
            raise TxValidationError("release carries a device signature")
        d1_key = directory.lookup(tx.d1_id)
        if d1_key is None:
            raise TxValidationError("requester key not in directory")
        base = txmod.signing_bytes(
            PermissionTx(tx.tx_type, tx.d1_id, tx.d2_id, tx.operation)
        )
        if not verify(d1_key, base, tx.signatures[0]):
            raise TxValidationError("bad requester signature")
        if tables.grant(tx.d2_id, tx.d1_id, tx.operation) is None:
            raise TxValidationError("no matching grant")
        return
    # two signatures: each regional node endorsed in turn
    rn_keys = [
        directory.lookup(key_id)
        for _, key_id in tables.active_keys(EntityClass.REGIONAL_NODE)
    ]
    base = txmod.signing_bytes(PermissionTx(tx.tx_type, tx.d1_id, tx.d2_id, tx.operation))
    first_signer = None
    for index, key in enumerate(rn_keys):
        if key is not None and verify(key, base, tx.signatures[0]):
            first_signer = index
            break
    if first_signer is None:
        raise TxValidationError("first endorsement not from a regional node")
    second_preimage = base + tx.signatures[0]
    for index, key in enumerate(rn_keys):
        if index == first_signer:
            continue  # endorsements must come from two distinct regions
        if key is not None and verify(key, second_preimage, tx.signatures[1]):
            return
    raise TxValidationError("second endorsement not from another regional node")


# --- state transitions ------------------------------------------------------


def apply_tx(tables: RnTables, tx: Transaction, height: int) -> None:
    """Fold one transaction into the tables. Assumes it validated."""
    if isinstance(tx, DeviceRegistrationTx):
        tables.devices[tx.device_key_id] = DeviceRecord(
            device_id=tx.device_key_id,
            manufacturer_id=tx.manufacturer_id,
            registered_at=height,
        )
    elif isinstance(tx, EntityRegistrationTx):
        tables.entities[(tx.entity_class, tx.entity_id)] = EntityRecord(
            entity_class=tx.entity_class,
            entity_id=tx.entity_id,
            key_id=tx.key_id,
            registered_at=height,
        )
    elif isinstance(tx, CancellationTx):
        record = tables.entity(tx.entity_class, tx.entity_id)
        if record is not None and record.cancelled_at is None:
            record.cancelled_at = height
    elif isinstance(tx, UpdateReleaseTx):
        tables.update_table[(tx.manufacturer_id, tx.model_id)] = UpdateRecord(
            manufacturer_id=tx.manufacturer_id,
            model_id=tx.model_id,
            payload=tx.payload,
            payload_hash=hash_data(tx.payload),
            released_at=height,
        )
    elif isinstance(tx, UpdateQueryTx):
        pass  # a question, not a state change
    elif isinstance(tx, DeviceStorageTx):
        tables.storage_info[(tx.device_id, tx.data_number)] = StorageRecord(
            device_id=tx.device_id,
            data_number=tx.data_number,
            processing_method=tx.processing_method,
            data_hash=tx.data_hash,
            stored_at=height,
        )
    elif isinstance(tx, PermissionTx):
        if tx.tx_type == TxType.PERMISSION_RELEASE:
            tables.permissions[(tx.d1_id, tx.d2_id, int(tx.operation))] = GrantRecord(
                granter=tx.d1_id,
                grantee=tx.d2_id,
                operation=tx.operation,
                granted_at=height,
            )
        # a request consumes nothing: grants stay until cancelled
    elif isinstance(tx, LocalInteractiveTx):
        tables.batch_roots.append(
            BatchRootRecord(
                rn_id=tx.rn_id,
                root=tx.merkle_root,
                batch_size=tx.batch_size,
                height=height,
            )
        )
    else:
        raise LedgerError(f"not a transaction: {tx!r}")


def apply_block(tables: RnTables, block: Block) -> None:
    for encoded in block.txs:
        apply_tx(tables, txmod.decode(encoded), block.height)


def replay_tables(ledger: Ledger) -> RnTables:
    """Rebuild the shared-state tables from the chain alone."""
    tables = RnTables()
    for block in ledger.blocks:
        apply_block(tables, block)
    return tables


def audit_chain(ledger: Ledger, directory: KeyDirectory) -> list[str]:
    """Re-validate every committed transaction against reconstructed state.

    Returns human-readable findings, one per defect; an empty list means
    every signature and authorization on the chain checks out. Genesis is
    included — its registrations must self-certify.
    """
    findings: list[str] = []
    tables = RnTables()
    for block in ledger.blocks:
        for index, encoded in enumerate(block.txs):
            try:
                tx = txmod.decode(encoded)
            except txmod.CodecError as exc:
                findings.append(f"block {block.height} tx {index}: undecodable ({exc})")
                continue
            try:
                validate_tx(tx, tables, directory)
            except TxValidationError as exc:
                findings.append(
                    f"block {block.height} tx {index}: {exc.reason}"
                    f" [{txmod.render(tx)}]"
                )
            apply_tx(tables, tx, block.height)
    return findings
