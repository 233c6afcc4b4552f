"""Keys, signatures, hashing, and session-key transport."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iotchain.crypto import (
    NONCE_LEN,
    PUBLIC_KEY_LEN,
    SIGNATURE_LEN,
    CryptoError,
    DeterministicRng,
    EmptyMessageError,
    KeyDecodeError,
    SignatureFormatError,
    derive_session_key,
    ecdh_shared_secret,
    generate_keypair,
    hash_data,
    issue_certificate,
    sign,
    unwrap_session_key,
    verify,
    verify_certificate,
    wrap_session_key,
)


def kp(seed="k"):
    return generate_keypair(DeterministicRng(seed))


def test_hash_matches_published_sha256_vectors():
    # FIPS 180-2 test vectors, so the digest is bit-exact against everyone
    # else's implementation, not merely self-consistent.
    assert hash_data(b"").hex() == (
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
    )
    assert hash_data(b"abc").hex() == (
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    )
    assert len(hash_data(b"anything")) == 32


def test_keypair_shape_and_determinism():
    a = kp("seed-1")
    b = kp("seed-1")
    c = kp("seed-2")
    assert len(a.public_key) == PUBLIC_KEY_LEN
    assert a.public_key[0] in (2, 3)  # compressed point prefix
    assert a.public_key == b.public_key
    assert a.public_key != c.public_key


def test_signatures_are_72_bytes_and_deterministic():
    pair = kp()
    sig1 = sign(pair.secret_key, b"same message")
    sig2 = sign(pair.secret_key, b"same message")
    assert len(sig1) == SIGNATURE_LEN
    assert sig1 == sig2
    assert sig1[-1] == 64
    assert sig1[64:71] == b"\x00" * 7


def test_verify_accepts_and_rejects():
    pair = kp()
    message = b"attested content"
    sig = sign(pair.secret_key, message)
    assert verify(pair.public_key, message, sig)
    assert not verify(pair.public_key, b"attested content!", sig)
    assert not verify(kp("other").public_key, message, sig)


def test_every_single_byte_corruption_is_rejected():
    pair = kp()
    sig = sign(pair.secret_key, b"msg")
    for index in range(SIGNATURE_LEN):
        broken = bytearray(sig)
        broken[index] ^= 0x01
        assert not verify(pair.public_key, b"msg", bytes(broken))


def test_error_taxonomy():
    pair = kp()
    sig = sign(pair.secret_key, b"msg")
    with pytest.raises(EmptyMessageError):
        sign(pair.secret_key, b"")
    with pytest.raises(SignatureFormatError):
        verify(pair.public_key, b"msg", sig[:71])
    with pytest.raises(KeyDecodeError):
        verify(b"\x02" * 5, b"msg", sig)
    with pytest.raises(KeyDecodeError):
        # right length, but not a point on the curve
        verify(b"\x05" + b"\x00" * 32, b"msg", sig)
    with pytest.raises(KeyDecodeError):
        ecdh_shared_secret(pair.secret_key, b"\x02short")


def test_session_key_is_symmetric_in_device_order():
    node = kp("rn")
    nonce = (42).to_bytes(NONCE_LEN, "big")
    forward = derive_session_key(node.secret_key, 7, 9, nonce)
    backward = derive_session_key(node.secret_key, 9, 7, nonce)
    assert forward == backward
    assert len(forward.bytes) == 16
    assert forward.participants == (7, 9)


def test_session_key_separates_pairs_and_nonces():
    node = kp("rn")
    n1 = (1).to_bytes(NONCE_LEN, "big")
    n2 = (2).to_bytes(NONCE_LEN, "big")
    assert derive_session_key(node.secret_key, 1, 2, n1) != derive_session_key(
        node.secret_key, 1, 3, n1
    )
    assert derive_session_key(node.secret_key, 1, 2, n1) != derive_session_key(
        node.secret_key, 1, 2, n2
    )
    with pytest.raises(CryptoError):
        derive_session_key(node.secret_key, 5, 5, n1)
    with pytest.raises(CryptoError):
        derive_session_key(node.secret_key, 1, 2, b"short")


def test_wrap_unwrap_roundtrip_over_ecdh():
    """The node wraps under its half of the agreement, the device unwraps
    under its own half; both halves must agree byte-for-byte."""
    node, device = kp("node"), kp("device")
    nonce = (3).to_bytes(NONCE_LEN, "big")
    key = derive_session_key(node.secret_key, 1, 2, nonce)

    node_side = ecdh_shared_secret(node.secret_key, device.public_key)
    device_side = ecdh_shared_secret(device.secret_key, node.public_key)
    assert node_side == device_side

    wrapped = wrap_session_key(node_side, nonce, key)
    assert wrapped != key.bytes
    recovered = unwrap_session_key(device_side, nonce, wrapped, (2, 1))
    assert recovered == key


def test_certificate_roundtrip_and_tamper():
    maker = kp("manufacturer")
    device = kp("device")
    cert = issue_certificate(maker, 12, device.public_key)
    assert verify_certificate(maker.public_key, cert)
    assert not verify_certificate(kp("impostor").public_key, cert)


@settings(max_examples=25, deadline=None)
@given(st.binary(min_size=1, max_size=256))
def test_sign_verify_roundtrip_any_message(message):
    pair = kp("prop")
    assert verify(pair.public_key, message, sign(pair.secret_key, message))


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**64 - 1))
def test_wrap_roundtrip_any_nonce(height):
    node, device = kp("n"), kp("d")
    nonce = height.to_bytes(NONCE_LEN, "big")
    key = derive_session_key(node.secret_key, 10, 20, nonce)
    shared = ecdh_shared_secret(device.secret_key, node.public_key)
    assert unwrap_session_key(shared, nonce, wrap_session_key(shared, nonce, key),
                              (10, 20)) == key
