"""Key material, signatures, hashing, and session-key derivation.

All key and signature encodings are fixed-width so that transaction byte
accounting elsewhere in the package is exact:

* public keys: 33 bytes (X9.62 compressed point, curve P-256)
* signatures:  72 bytes (raw r||s padded with zero fill and a trailing
  length byte)
* digests:     32 bytes (SHA-256)
* session keys: 16 bytes

Signing is deterministic (RFC 6979), so equal inputs always produce equal
bytes; the whole simulation inherits reproducibility from that.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from functools import lru_cache

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.hazmat.primitives.asymmetric.utils import (
    decode_dss_signature,
    encode_dss_signature,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

_CURVE = ec.SECP256R1()
_CURVE_ORDER = 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551

PUBLIC_KEY_LEN = 33
SIGNATURE_LEN = 72
DIGEST_LEN = 32
SESSION_KEY_LEN = 16
NONCE_LEN = 8

# raw r||s for P-256 is 64 bytes; the remaining 8 bytes are zero fill plus
# a trailing length byte so every signature is exactly 72 bytes on the wire
_RAW_SIG_LEN = 64


class CryptoError(Exception):
    """Base class for failures in this module."""


class KeyDecodeError(CryptoError):
    """Public key bytes are not a valid 33-byte compressed point."""


class SignatureFormatError(CryptoError):
    """Signature bytes are not exactly 72 bytes."""


class EmptyMessageError(CryptoError):
    """Signing an empty message is always a caller bug."""


class DeterministicRng:
    """Seeded byte source for key generation.

    Identical seeds and call sequences yield identical output, which is what
    makes whole simulation runs replayable from a single integer seed.
    """

    def __init__(self, seed) -> None:
        self._rng = random.Random(seed)

    def take(self, n: int) -> bytes:
        return self._rng.getrandbits(8 * n).to_bytes(n, "big")


@dataclass(frozen=True)
class KeyPair:
    """A signing key plus its 33-byte encoded verification key."""

    public_key: bytes
    secret_key: ec.EllipticCurvePrivateKey = field(repr=False, compare=False)


@dataclass(frozen=True)
class DeviceCertificate:
    """Manufacturer's endorsement of a device public key."""

    device_public_key: bytes
    manufacturer_signature: bytes
    manufacturer_id: int


@dataclass(frozen=True)
class HsmRecord:
    """Write-once key store contents burned into a device at manufacture.

    The secret key never leaves this record: callers sign through
    :meth:`sign` and otherwise only see the public half.
    """

    key_pair: KeyPair = field(repr=False)
    certificate: DeviceCertificate

    @property
    def public_key(self) -> bytes:
        return self.key_pair.public_key

    def sign(self, message: bytes) -> bytes:
        return sign(self.key_pair.secret_key, message)


@dataclass(frozen=True)
class SessionKey:
    """Shared 16-byte symmetric key for one authorized device pair."""

    bytes: bytes
    participants: tuple[int, int]


def generate_keypair(rng: DeterministicRng) -> KeyPair:
    """Generate a fresh P-256 key pair from the deterministic byte source."""
    scalar = int.from_bytes(rng.take(32), "big") % (_CURVE_ORDER - 1) + 1
    secret = ec.derive_private_key(scalar, _CURVE)
    public = secret.public_key().public_bytes(
        Encoding.X962, PublicFormat.CompressedPoint
    )
    return KeyPair(public_key=public, secret_key=secret)


def sign(secret_key: ec.EllipticCurvePrivateKey, message: bytes) -> bytes:
    """Sign ``message``, returning exactly 72 bytes.

    Layout: 64-byte raw r||s, 7 bytes of zero fill, then a single trailing
    byte holding the raw length (64). Deterministic per RFC 6979.
    """
    if not message:
        raise EmptyMessageError("refusing to sign an empty message")
    der = secret_key.sign(
        message, ec.ECDSA(hashes.SHA256(), deterministic_signing=True)
    )
    r, s = decode_dss_signature(der)
    raw = r.to_bytes(32, "big") + s.to_bytes(32, "big")
    return raw + b"\x00" * (SIGNATURE_LEN - _RAW_SIG_LEN - 1) + bytes([_RAW_SIG_LEN])


def verify(public_key: bytes, message: bytes, signature: bytes) -> bool:
    """True iff ``signature`` was produced over ``message`` by the matching key.

    Malformed encodings raise rather than return False: a key that is not a
    valid 33-byte compressed point raises :class:`KeyDecodeError`, and a
    signature that is not exactly 72 bytes raises
    :class:`SignatureFormatError`. Any byte-level corruption *within* a
    72-byte signature simply fails verification.
    """
    if len(signature) != SIGNATURE_LEN:
        raise SignatureFormatError(
            f"signature must be {SIGNATURE_LEN} bytes, got {len(signature)}"
        )
    return _verify_cached(bytes(public_key), bytes(message), bytes(signature))


@lru_cache(maxsize=1 << 16)
def _verify_cached(public_key: bytes, message: bytes, signature: bytes) -> bool:
    # consensus repeatedly re-verifies identical broadcast messages; caching
    # keeps large scenario sweeps cheap without changing semantics
    if len(public_key) != PUBLIC_KEY_LEN:
        raise KeyDecodeError(
            f"public key must be {PUBLIC_KEY_LEN} bytes, got {len(public_key)}"
        )
    try:
        pk = ec.EllipticCurvePublicKey.from_encoded_point(_CURVE, public_key)
    except ValueError as exc:
        raise KeyDecodeError(f"invalid compressed point: {exc}") from exc
    if signature[-1] != _RAW_SIG_LEN or any(signature[_RAW_SIG_LEN:-1]):
        return False
    r = int.from_bytes(signature[:32], "big")
    s = int.from_bytes(signature[32:64], "big")
    if not (0 < r < _CURVE_ORDER and 0 < s < _CURVE_ORDER):
        return False
    try:
        pk.verify(
            encode_dss_signature(r, s), message, ec.ECDSA(hashes.SHA256())
        )
    except InvalidSignature:
        return False
    return True


def hash_data(data: bytes) -> bytes:
    """SHA-256 digest of ``data`` (32 bytes, bit-exact against the standard)."""
    return hashlib.sha256(data).digest()


def derive_session_key(
    rn_secret: ec.EllipticCurvePrivateKey, d1: int, d2: int, nonce: bytes
) -> SessionKey:
    """Derive the shared symmetric key a regional node hands to a device pair.

    The key is the first 16 bytes of a hash over a secret tag derived from
    the node's signing key, the canonically sorted device ids, and the
    nonce — so both request directions yield the same key.
    """
    if d1 == d2:
        raise CryptoError("session keys pair two distinct devices")
    if len(nonce) != NONCE_LEN:
        raise CryptoError(f"nonce must be {NONCE_LEN} bytes, got {len(nonce)}")
    lo, hi = sorted((d1, d2))
    secret_tag = hash_data(
        b"iotchain/session-tag"
        + rn_secret.private_numbers().private_value.to_bytes(32, "big")
    )
    material = hash_data(
        secret_tag + lo.to_bytes(4, "big") + hi.to_bytes(4, "big") + nonce
    )
    return SessionKey(bytes=material[:SESSION_KEY_LEN], participants=(lo, hi))


def ecdh_shared_secret(
    secret_key: ec.EllipticCurvePrivateKey, peer_public_key: bytes
) -> bytes:
    """Raw ECDH agreement, used to wrap session keys for transport.

    Lets a regional node deliver a session key to a device without the key
    bytes ever crossing the simulated network in cleartext.
    """
    if len(peer_public_key) != PUBLIC_KEY_LEN:
        raise KeyDecodeError(
            f"public key must be {PUBLIC_KEY_LEN} bytes, got {len(peer_public_key)}"
        )
    try:
        peer = ec.EllipticCurvePublicKey.from_encoded_point(_CURVE, peer_public_key)
    except ValueError as exc:
        raise KeyDecodeError(f"invalid compressed point: {exc}") from exc
    return secret_key.exchange(ec.ECDH(), peer)


def wrap_session_key(shared_secret: bytes, nonce: bytes, key: SessionKey) -> bytes:
    """XOR-wrap a session key under an ECDH shared secret for delivery."""
    pad = hash_data(b"iotchain/key-wrap" + shared_secret + nonce)
    return bytes(a ^ b for a, b in zip(key.bytes, pad[:SESSION_KEY_LEN]))


def unwrap_session_key(
    shared_secret: bytes, nonce: bytes, wrapped: bytes, participants: tuple[int, int]
) -> SessionKey:
    pad = hash_data(b"iotchain/key-wrap" + shared_secret + nonce)
    raw = bytes(a ^ b for a, b in zip(wrapped, pad[:SESSION_KEY_LEN]))
    return SessionKey(bytes=raw, participants=tuple(sorted(participants)))


def issue_certificate(
    manufacturer_key: KeyPair, manufacturer_id: int, device_public_key: bytes
) -> DeviceCertificate:
    """Produce the manufacturer's certificate over a device public key."""
    return DeviceCertificate(
        device_public_key=device_public_key,
        manufacturer_signature=sign(manufacturer_key.secret_key, device_public_key),
        manufacturer_id=manufacturer_id,
    )


def verify_certificate(
    manufacturer_public_key: bytes, certificate: DeviceCertificate
) -> bool:
    return verify(
        manufacturer_public_key,
        certificate.device_public_key,
        certificate.manufacturer_signature,
    )
