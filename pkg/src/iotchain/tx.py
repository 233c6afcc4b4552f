"""Transaction families and their bit-exact binary encodings.

Every multi-byte integer is big-endian. The single tag byte is included in
all size figures. Fixed encoded sizes per family:

====================================  =====
device registration                      79
entity registration / cancellation       80
update release (header, sans payload)    77
update query                              5
device storage                          112
permission, no signatures                10
permission, one device signature         82
permission, two regional-node sigs      154
local interactive (merkle root)         109
====================================  =====

``signing_bytes`` yields the byte string a signer actually signs: the
encoding with signature fields left out. Permission transactions are
endorsed sequentially, so the second signer's preimage includes the first
signature.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

from .crypto import DIGEST_LEN, SIGNATURE_LEN


class TxType(IntEnum):
    DEVICE_REGISTRATION = 1
    ENTITY_REGISTRATION = 2
    CANCELLATION = 3
    UPDATE_RELEASE = 4
    UPDATE_QUERY = 5
    DEVICE_STORAGE = 6
    PERMISSION_RELEASE = 7
    PERMISSION_REQUEST = 8
    LOCAL_INTERACTIVE = 9


class EntityClass(IntEnum):
    CERTIFICATION_CENTER = 0
    MANUFACTURER = 1
    REGIONAL_NODE = 2
    CLOUD_PROVIDER = 3
    DETECTION_CENTER = 4


class Operation(IntEnum):
    READ = 0
    WRITE = 1
    REVISE = 2
    QUERY = 3
    REAL_TIME_READ = 4


class CodecError(Exception):
    pass


class EncodeError(CodecError):
    """A field is out of range for its wire width."""


class DecodeError(CodecError):
    pass


class UnknownTagError(DecodeError):
    pass


class TruncatedError(DecodeError):
    pass


class TrailingBytesError(DecodeError):
    pass


def _check_uint(name: str, value: int, width: int) -> None:
    if not 0 <= value < 1 << (8 * width):
        raise EncodeError(f"{name}={value} does not fit in {width} bytes")


def _check_sig(name: str, sig: bytes) -> None:
    if len(sig) != SIGNATURE_LEN:
        raise EncodeError(f"{name} must be {SIGNATURE_LEN} bytes, got {len(sig)}")


def _check_digest(name: str, digest: bytes) -> None:
    if len(digest) != DIGEST_LEN:
        raise EncodeError(f"{name} must be {DIGEST_LEN} bytes, got {len(digest)}")


@dataclass(frozen=True)
class DeviceRegistrationTx:
    """Device joins its regional network; signature pre-issued by the manufacturer."""

    manufacturer_id: int
    device_key_id: int
    signature: bytes

    tx_type = TxType.DEVICE_REGISTRATION


@dataclass(frozen=True)
class EntityRegistrationTx:
    """Certification of a manufacturer, regional node, or cloud provider."""

    entity_class: EntityClass
    entity_id: int
    key_id: int
    signature: bytes

    tx_type = TxType.ENTITY_REGISTRATION


@dataclass(frozen=True)
class CancellationTx:
    """Revokes a previously registered entity; same layout as registration."""

    entity_class: EntityClass
    entity_id: int
    key_id: int
    signature: bytes

    tx_type = TxType.CANCELLATION


@dataclass(frozen=True)
class UpdateReleaseTx:
    """Manufacturer publishes an update; the signature covers the payload.

    On the wire the payload follows the fixed 77-byte header, so header
    size stays constant while the update content rides along.
    """

    manufacturer_id: int
    model_id: int
    signature: bytes
    payload: bytes = b""

    tx_type = TxType.UPDATE_RELEASE


@dataclass(frozen=True)
class UpdateQueryTx:
    """Device asks whether an update exists. Unsigned by construction."""

    manufacturer_id: int
    model_id: int

    tx_type = TxType.UPDATE_QUERY


@dataclass(frozen=True)
class DeviceStorageTx:
    """Records the hash of data a device hands to a cloud provider."""

    device_id: int
    data_number: int
    processing_method: int
    data_hash: bytes
    signature: bytes

    tx_type = TxType.DEVICE_STORAGE


@dataclass(frozen=True)
class PermissionTx:
    """Grant (release) or exercise (request) of an access right between devices.

    Signature count fixes the wire size: none for a same-region release,
    the requesting device's for a same-region request, and both regional
    nodes' for any cross-region form. Endorsement is sequential: each
    signature covers the 10-byte base plus all earlier signatures.
    """

    tx_type: TxType
    d1_id: int
    d2_id: int
    operation: Operation
    signatures: tuple[bytes, ...] = ()

    def __post_init__(self):
        if self.tx_type not in (TxType.PERMISSION_RELEASE, TxType.PERMISSION_REQUEST):
            raise EncodeError(f"permission tx cannot carry tag {self.tx_type}")


@dataclass(frozen=True)
class LocalInteractiveTx:
    """On-chain carrier for the merkle root of a regional node's local batch."""

    rn_id: int
    merkle_root: bytes
    batch_size: int
    signature: bytes

    tx_type = TxType.LOCAL_INTERACTIVE


Transaction = (
    DeviceRegistrationTx
    | EntityRegistrationTx
    | CancellationTx
    | UpdateReleaseTx
    | UpdateQueryTx
    | DeviceStorageTx
    | PermissionTx
    | LocalInteractiveTx
)

# fixed encoded sizes (tag byte included); update release excludes payload,
# permission sizes depend on signature count
SIZE_DEVICE_REGISTRATION = 79
SIZE_ENTITY_REGISTRATION = 80
SIZE_CANCELLATION = 80
SIZE_UPDATE_RELEASE_HEADER = 77
SIZE_UPDATE_QUERY = 5
SIZE_DEVICE_STORAGE = 112
SIZE_PERMISSION_BASE = 10
SIZE_PERMISSION_ONE_SIG = 82
SIZE_PERMISSION_TWO_SIGS = 154
SIZE_LOCAL_INTERACTIVE = 109


def signing_bytes(tx: Transaction) -> bytes:
    """The message a signer signs: the encoding minus signature fields.

    For permission transactions, signatures already attached are part of
    the next signer's preimage (sequential endorsement).
    """
    if isinstance(tx, DeviceRegistrationTx):
        _check_uint("manufacturer_id", tx.manufacturer_id, 2)
        _check_uint("device_key_id", tx.device_key_id, 4)
        return struct.pack(">BHI", tx.tx_type, tx.manufacturer_id, tx.device_key_id)
    if isinstance(tx, (EntityRegistrationTx, CancellationTx)):
        _check_uint("entity_id", tx.entity_id, 2)
        _check_uint("key_id", tx.key_id, 4)
        return struct.pack(
            ">BBHI", tx.tx_type, tx.entity_class, tx.entity_id, tx.key_id
        )
    if isinstance(tx, UpdateReleaseTx):
        _check_uint("manufacturer_id", tx.manufacturer_id, 2)
        _check_uint("model_id", tx.model_id, 2)
        return (
            struct.pack(">BHH", tx.tx_type, tx.manufacturer_id, tx.model_id)
            + tx.payload
        )
    if isinstance(tx, UpdateQueryTx):
        return encode(tx)
    if isinstance(tx, DeviceStorageTx):
        _check_uint("device_id", tx.device_id, 4)
        _check_uint("data_number", tx.data_number, 2)
        _check_uint("processing_method", tx.processing_method, 1)
        _check_digest("data_hash", tx.data_hash)
        return (
            struct.pack(
                ">BIHB",
                tx.tx_type,
                tx.device_id,
                tx.data_number,
                tx.processing_method,
            )
            + tx.data_hash
        )
    if isinstance(tx, PermissionTx):
        base = _permission_base(tx)
        for sig in tx.signatures:
            _check_sig("signature", sig)
            base += sig
        return base
    if isinstance(tx, LocalInteractiveTx):
        _check_uint("rn_id", tx.rn_id, 2)
        _check_uint("batch_size", tx.batch_size, 2)
        _check_digest("merkle_root", tx.merkle_root)
        return (
            struct.pack(">BH", tx.tx_type, tx.rn_id)
            + tx.merkle_root
            + struct.pack(">H", tx.batch_size)
        )
    raise EncodeError(f"not a transaction: {tx!r}")


def _permission_base(tx: PermissionTx) -> bytes:
    _check_uint("d1_id", tx.d1_id, 4)
    _check_uint("d2_id", tx.d2_id, 4)
    if not isinstance(tx.operation, int) or not 0 <= tx.operation <= max(Operation):
        raise EncodeError(f"operation code {tx.operation} out of range")
    return struct.pack(">BIIB", tx.tx_type, tx.d1_id, tx.d2_id, tx.operation)


def encode(tx: Transaction) -> bytes:
    """Encode to the fixed wire layout for the transaction's type."""
    if isinstance(tx, UpdateQueryTx):
        _check_uint("manufacturer_id", tx.manufacturer_id, 2)
        _check_uint("model_id", tx.model_id, 2)
        return struct.pack(">BHH", tx.tx_type, tx.manufacturer_id, tx.model_id)
    if isinstance(tx, PermissionTx):
        if len(tx.signatures) > 2:
            raise EncodeError("permission tx carries at most two signatures")
        return signing_bytes(tx)  # all attached signatures are on the wire
    if isinstance(tx, UpdateReleaseTx):
        _check_uint("manufacturer_id", tx.manufacturer_id, 2)
        _check_uint("model_id", tx.model_id, 2)
        _check_sig("signature", tx.signature)
        head = struct.pack(">BHH", tx.tx_type, tx.manufacturer_id, tx.model_id)
        return head + tx.signature + tx.payload
    if isinstance(
        tx,
        (
            DeviceRegistrationTx,
            EntityRegistrationTx,
            CancellationTx,
            DeviceStorageTx,
            LocalInteractiveTx,
        ),
    ):
        _check_sig("signature", tx.signature)
        return signing_bytes(tx) + tx.signature
    raise EncodeError(f"not a transaction: {tx!r}")


def encoded_size(tx: Transaction) -> int:
    return len(encode(tx))


def decode(data: bytes) -> Transaction:
    """Decode one transaction occupying the whole buffer.

    Unknown tags, short buffers, and extra bytes raise
    :class:`UnknownTagError`, :class:`TruncatedError`, and
    :class:`TrailingBytesError` respectively.
    """
    if len(data) < 1:
        raise TruncatedError("empty buffer")
    tag = data[0]
    try:
        tx_type = TxType(tag)
    except ValueError:
        raise UnknownTagError(f"unknown transaction tag {tag:#04x}") from None

    if tx_type == TxType.DEVICE_REGISTRATION:
        _expect_exact(data, SIZE_DEVICE_REGISTRATION, tx_type)
        _, manufacturer_id, device_key_id = struct.unpack(">BHI", data[:7])
        return DeviceRegistrationTx(manufacturer_id, device_key_id, data[7:])
    if tx_type in (TxType.ENTITY_REGISTRATION, TxType.CANCELLATION):
        _expect_exact(data, SIZE_ENTITY_REGISTRATION, tx_type)
        _, class_byte, entity_id, key_id = struct.unpack(">BBHI", data[:8])
        try:
            entity_class = EntityClass(class_byte)
        except ValueError:
            raise DecodeError(f"unknown entity class {class_byte:#04x}") from None
        cls = (
            EntityRegistrationTx
            if tx_type == TxType.ENTITY_REGISTRATION
            else CancellationTx
        )
        return cls(entity_class, entity_id, key_id, data[8:])
    if tx_type == TxType.UPDATE_RELEASE:
        if len(data) < SIZE_UPDATE_RELEASE_HEADER:
            raise TruncatedError(
                f"update release header needs {SIZE_UPDATE_RELEASE_HEADER} bytes,"
                f" got {len(data)}"
            )
        _, manufacturer_id, model_id = struct.unpack(">BHH", data[:5])
        signature = data[5:SIZE_UPDATE_RELEASE_HEADER]
        return UpdateReleaseTx(
            manufacturer_id, model_id, signature, data[SIZE_UPDATE_RELEASE_HEADER:]
        )
    if tx_type == TxType.UPDATE_QUERY:
        _expect_exact(data, SIZE_UPDATE_QUERY, tx_type)
        _, manufacturer_id, model_id = struct.unpack(">BHH", data)
        return UpdateQueryTx(manufacturer_id, model_id)
    if tx_type == TxType.DEVICE_STORAGE:
        _expect_exact(data, SIZE_DEVICE_STORAGE, tx_type)
        _, device_id, data_number, processing_method = struct.unpack(">BIHB", data[:8])
        return DeviceStorageTx(
            device_id,
            data_number,
            processing_method,
            data[8 : 8 + DIGEST_LEN],
            data[8 + DIGEST_LEN :],
        )
    if tx_type in (TxType.PERMISSION_RELEASE, TxType.PERMISSION_REQUEST):
        return _decode_permission(data, tx_type)
    if tx_type == TxType.LOCAL_INTERACTIVE:
        _expect_exact(data, SIZE_LOCAL_INTERACTIVE, tx_type)
        _, rn_id = struct.unpack(">BH", data[:3])
        merkle_root = data[3 : 3 + DIGEST_LEN]
        (batch_size,) = struct.unpack(">H", data[35:37])
        return LocalInteractiveTx(rn_id, merkle_root, batch_size, data[37:])
    raise UnknownTagError(f"unknown transaction tag {tag:#04x}")


def _expect_exact(data: bytes, size: int, tx_type: TxType) -> None:
    if len(data) < size:
        raise TruncatedError(
            f"{tx_type.name} needs {size} bytes, got {len(data)}"
        )
    if len(data) > size:
        raise TrailingBytesError(
            f"{tx_type.name} is {size} bytes, got {len(data) - size} extra"
        )


def _decode_permission(data: bytes, tx_type: TxType) -> PermissionTx:
    if len(data) < SIZE_PERMISSION_BASE:
        raise TruncatedError(
            f"{tx_type.name} needs at least {SIZE_PERMISSION_BASE} bytes, got {len(data)}"
        )
    sig_bytes = len(data) - SIZE_PERMISSION_BASE
    if sig_bytes % SIGNATURE_LEN != 0 or sig_bytes // SIGNATURE_LEN > 2:
        raise TrailingBytesError(
            f"{tx_type.name} must be {SIZE_PERMISSION_BASE},"
            f" {SIZE_PERMISSION_ONE_SIG}, or {SIZE_PERMISSION_TWO_SIGS} bytes,"
            f" got {len(data)}"
        )
    _, d1_id, d2_id, op_byte = struct.unpack(">BIIB", data[:SIZE_PERMISSION_BASE])
    try:
        operation = Operation(op_byte)
    except ValueError:
        raise DecodeError(f"unknown operation code {op_byte:#04x}") from None
    signatures = tuple(
        data[pos : pos + SIGNATURE_LEN]
        for pos in range(SIZE_PERMISSION_BASE, len(data), SIGNATURE_LEN)
    )
    return PermissionTx(tx_type, d1_id, d2_id, operation, signatures)


def render(tx: Transaction) -> str:
    """One-line debug text: type name plus hex fields, for CLI reports."""
    if isinstance(tx, DeviceRegistrationTx):
        body = f"manufacturer={tx.manufacturer_id:04x} device_key={tx.device_key_id:08x} sig={tx.signature.hex()[:16]}.."
    elif isinstance(tx, (EntityRegistrationTx, CancellationTx)):
        body = (
            f"class={tx.entity_class.name.lower()} entity={tx.entity_id:04x}"
            f" key={tx.key_id:08x} sig={tx.signature.hex()[:16]}.."
        )
    elif isinstance(tx, UpdateReleaseTx):
        body = (
            f"manufacturer={tx.manufacturer_id:04x} model={tx.model_id:04x}"
            f" payload={len(tx.payload)}B sig={tx.signature.hex()[:16]}.."
        )
    elif isinstance(tx, UpdateQueryTx):
        body = f"manufacturer={tx.manufacturer_id:04x} model={tx.model_id:04x}"
    elif isinstance(tx, DeviceStorageTx):
        body = (
            f"device={tx.device_id:08x} data_number={tx.data_number:04x}"
            f" hash={tx.data_hash.hex()[:16]}.."
        )
    elif isinstance(tx, PermissionTx):
        body = (
            f"d1={tx.d1_id:08x} d2={tx.d2_id:08x} op={tx.operation.name.lower()}"
            f" sigs={len(tx.signatures)}"
        )
    elif isinstance(tx, LocalInteractiveTx):
        body = (
            f"rn={tx.rn_id:04x} root={tx.merkle_root.hex()[:16]}.."
            f" batch={tx.batch_size}"
        )
    else:
        body = repr(tx)
    return f"{tx.tx_type.name.lower().replace('_', '-')} {body}"
