"""Chain linkage, the recording-mode split, validation, and the audit."""

import pytest

from iotchain import tx as txmod
from iotchain.crypto import DeterministicRng, generate_keypair, hash_data, sign
from iotchain.ledger import (
    Block,
    BlockLinkError,
    KeyDirectory,
    Ledger,
    RnTables,
    TxClass,
    TxValidationError,
    apply_tx,
    audit_chain,
    block_bytes,
    block_hash,
    classify,
    make_genesis,
    replay_tables,
    validate_tx,
)
from iotchain.tx import (
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


class Actors:
    """A hand-built registry: certification center, detection center, two
    regional nodes, one manufacturer, one device key."""

    def __init__(self):
        self.directory = KeyDirectory()
        self.tables = RnTables()
        rng = DeterministicRng("ledger-tests")
        self.cc = self._enroll(rng, EntityClass.CERTIFICATION_CENTER)
        self.dc = self._enroll(rng, EntityClass.DETECTION_CENTER)
        self.rn1 = self._enroll(rng, EntityClass.REGIONAL_NODE)
        self.rn2 = self._enroll(rng, EntityClass.REGIONAL_NODE)
        self.man = self._enroll(rng, EntityClass.MANUFACTURER)
        self.device = generate_keypair(rng)
        self.device_id = self.directory.add_key(self.device.public_key)

    def _enroll(self, rng, entity_class):
        pair = generate_keypair(rng)
        key_id = self.directory.add_key(pair.public_key)
        entity_id = self.directory.allocate_entity_id()
        blank = EntityRegistrationTx(entity_class, entity_id, key_id, b"")
        if entity_class == EntityClass.CERTIFICATION_CENTER:
            signer = pair  # the root self-signs
        else:
            signer = self.cc.pair
        tx = EntityRegistrationTx(
            entity_class, entity_id, key_id,
            sign(signer.secret_key, txmod.signing_bytes(blank)),
        )
        validate_tx(tx, self.tables, self.directory)
        apply_tx(self.tables, tx, 0)

        class Enrolled:
            pass

        e = Enrolled()
        e.pair, e.key_id, e.entity_id, e.tx = pair, key_id, entity_id, tx
        return e

    def signed(self, blank, pair):
        return sign(pair.secret_key, txmod.signing_bytes(blank))


@pytest.fixture
def actors():
    return Actors()


# --- blocks and linkage -------------------------------------------------------


def test_block_linkage():
    genesis = make_genesis(())
    ledger = Ledger(genesis)
    nxt = Block(1, block_hash(genesis), 500, 0, ())
    ledger.append(nxt)
    assert ledger.height == 1
    with pytest.raises(BlockLinkError):
        ledger.append(Block(3, block_hash(nxt), 600, 0, ()))
    with pytest.raises(BlockLinkError):
        ledger.append(Block(2, b"\x00" * 32, 600, 0, ()))
    with pytest.raises(BlockLinkError):
        ledger.append(Block(2, block_hash(nxt), 400, 0, ()))  # time reversal
    with pytest.raises(BlockLinkError):
        Ledger(Block(1, b"\x00" * 32, 0, 0, ()))


def test_block_bytes_are_canonical():
    a = Block(1, b"\x11" * 32, 500, 2, (b"aa", b"bbb"))
    b = Block(1, b"\x11" * 32, 500, 2, (b"aab", b"bb"))
    assert block_bytes(a) != block_bytes(b)  # length prefixes split fields
    assert block_hash(a) == hash_data(block_bytes(a))


# --- direct vs merkle recording -----------------------------------------------


SIG72 = bytes(71) + b"\x40"


@pytest.mark.parametrize(
    "tx,expected",
    [
        (DeviceRegistrationTx(1, 2, SIG72), TxClass.MERKLE),
        (EntityRegistrationTx(EntityClass.MANUFACTURER, 1, 2, SIG72),
         TxClass.DIRECT),
        (EntityRegistrationTx(EntityClass.CLOUD_PROVIDER, 1, 2, SIG72),
         TxClass.MERKLE),
        (CancellationTx(EntityClass.REGIONAL_NODE, 1, 2, SIG72), TxClass.DIRECT),
        (UpdateReleaseTx(1, 1, SIG72), TxClass.DIRECT),
        (UpdateQueryTx(1, 1), TxClass.MERKLE),
        (DeviceStorageTx(1, 0, 0, bytes(32), SIG72), TxClass.DIRECT),
        (PermissionTx(TxType.PERMISSION_RELEASE, 1, 2, Operation.READ),
         TxClass.MERKLE),
        (PermissionTx(TxType.PERMISSION_REQUEST, 2, 1, Operation.READ, (SIG72,)),
         TxClass.MERKLE),
        (PermissionTx(TxType.PERMISSION_REQUEST, 2, 1, Operation.READ,
                      (SIG72, SIG72)), TxClass.DIRECT),
        (LocalInteractiveTx(1, bytes(32), 3, SIG72), TxClass.DIRECT),
    ],
)
def test_recording_mode(tx, expected):
    assert classify(tx) == expected


def test_regional_update_release_is_batched():
    tx = UpdateReleaseTx(1, 1, SIG72)
    assert classify(tx, regional_update=True) == TxClass.MERKLE


# --- validation ----------------------------------------------------------------


def test_device_registration_validates_and_applies(actors):
    blank = DeviceRegistrationTx(actors.man.entity_id, actors.device_id, b"")
    tx = DeviceRegistrationTx(
        actors.man.entity_id, actors.device_id,
        actors.signed(blank, actors.man.pair),
    )
    validate_tx(tx, actors.tables, actors.directory)
    apply_tx(actors.tables, tx, 1)
    assert actors.tables.devices[actors.device_id].manufacturer_id == \
        actors.man.entity_id


def test_device_registration_rejections(actors):
    blank = DeviceRegistrationTx(actors.man.entity_id, 999, b"")
    with pytest.raises(TxValidationError, match="device key not in directory"):
        validate_tx(
            DeviceRegistrationTx(actors.man.entity_id, 999,
                                 actors.signed(blank, actors.man.pair)),
            actors.tables, actors.directory,
        )
    blank = DeviceRegistrationTx(77, actors.device_id, b"")
    with pytest.raises(TxValidationError, match="manufacturer not registered"):
        validate_tx(
            DeviceRegistrationTx(77, actors.device_id,
                                 actors.signed(blank, actors.man.pair)),
            actors.tables, actors.directory,
        )
    blank = DeviceRegistrationTx(actors.man.entity_id, actors.device_id, b"")
    with pytest.raises(TxValidationError, match="bad manufacturer signature"):
        validate_tx(
            DeviceRegistrationTx(actors.man.entity_id, actors.device_id,
                                 actors.signed(blank, actors.rn1.pair)),
            actors.tables, actors.directory,
        )


def test_entity_registration_needs_the_authority(actors):
    pair = generate_keypair(DeterministicRng("new-man"))
    key_id = actors.directory.add_key(pair.public_key)
    blank = EntityRegistrationTx(EntityClass.MANUFACTURER, 50, key_id, b"")
    with pytest.raises(TxValidationError,
                       match="registration not signed by an authority"):
        validate_tx(
            EntityRegistrationTx(EntityClass.MANUFACTURER, 50, key_id,
                                 actors.signed(blank, pair)),  # self-signed
            actors.tables, actors.directory,
        )
    with pytest.raises(TxValidationError, match="entity already registered"):
        validate_tx(actors.man.tx, actors.tables, actors.directory)


def test_cloud_registration_is_endorsed_by_a_regional_node(actors):
    pair = generate_keypair(DeterministicRng("cloud"))
    key_id = actors.directory.add_key(pair.public_key)
    blank = EntityRegistrationTx(EntityClass.CLOUD_PROVIDER, 60, key_id, b"")
    good = EntityRegistrationTx(EntityClass.CLOUD_PROVIDER, 60, key_id,
                                actors.signed(blank, actors.rn2.pair))
    validate_tx(good, actors.tables, actors.directory)
    bad = EntityRegistrationTx(EntityClass.CLOUD_PROVIDER, 60, key_id,
                               actors.signed(blank, actors.cc.pair))
    with pytest.raises(TxValidationError,
                       match="registration not signed by an authority"):
        validate_tx(bad, actors.tables, actors.directory)


def test_cancellation_flow(actors):
    blank = CancellationTx(EntityClass.MANUFACTURER, actors.man.entity_id,
                           actors.man.key_id, b"")
    by_rn = CancellationTx(EntityClass.MANUFACTURER, actors.man.entity_id,
                           actors.man.key_id, actors.signed(blank, actors.rn1.pair))
    with pytest.raises(TxValidationError,
                       match="cancellation not signed by an authority"):
        validate_tx(by_rn, actors.tables, actors.directory)

    by_dc = CancellationTx(EntityClass.MANUFACTURER, actors.man.entity_id,
                           actors.man.key_id, actors.signed(blank, actors.dc.pair))
    validate_tx(by_dc, actors.tables, actors.directory)
    apply_tx(actors.tables, by_dc, 5)
    record = actors.tables.entity(EntityClass.MANUFACTURER, actors.man.entity_id)
    assert not record.active and record.cancelled_at == 5
    with pytest.raises(TxValidationError, match="entity not active"):
        validate_tx(by_dc, actors.tables, actors.directory)
    # and a release from the cancelled manufacturer now bounces
    rel_blank = UpdateReleaseTx(actors.man.entity_id, 1, b"", b"v2")
    rel = UpdateReleaseTx(actors.man.entity_id, 1,
                          actors.signed(rel_blank, actors.man.pair), b"v2")
    with pytest.raises(TxValidationError, match="manufacturer not registered"):
        validate_tx(rel, actors.tables, actors.directory)


def test_storage_signature_checks(actors):
    digest = hash_data(b"reading")
    blank = DeviceStorageTx(actors.device_id, 0, 0, digest, b"")
    good = DeviceStorageTx(actors.device_id, 0, 0, digest,
                           actors.signed(blank, actors.device))
    validate_tx(good, actors.tables, actors.directory)
    bad = DeviceStorageTx(actors.device_id, 0, 0, digest,
                          actors.signed(blank, actors.man.pair))
    with pytest.raises(TxValidationError, match="bad device signature"):
        validate_tx(bad, actors.tables, actors.directory)


def test_permission_request_needs_grant_then_succeeds(actors):
    other = generate_keypair(DeterministicRng("other-dev"))
    other_id = actors.directory.add_key(other.public_key)
    base = PermissionTx(TxType.PERMISSION_REQUEST, other_id, actors.device_id,
                        Operation.READ)
    req = PermissionTx(TxType.PERMISSION_REQUEST, other_id, actors.device_id,
                       Operation.READ, (actors.signed(base, other),))
    with pytest.raises(TxValidationError, match="no matching grant"):
        validate_tx(req, actors.tables, actors.directory)

    release = PermissionTx(TxType.PERMISSION_RELEASE, actors.device_id,
                           other_id, Operation.READ)
    validate_tx(release, actors.tables, actors.directory)  # 0-sig form
    apply_tx(actors.tables, release, 3)
    validate_tx(req, actors.tables, actors.directory)
    assert actors.tables.grant(actors.device_id, other_id, Operation.READ)


def test_cross_region_permission_needs_two_distinct_endorsers(actors):
    base = PermissionTx(TxType.PERMISSION_RELEASE, actors.device_id, 999,
                        Operation.READ)
    first = actors.signed(base, actors.rn1.pair)
    once = PermissionTx(base.tx_type, base.d1_id, base.d2_id, base.operation,
                        (first,))
    both = PermissionTx(base.tx_type, base.d1_id, base.d2_id, base.operation,
                        (first, actors.signed(once, actors.rn2.pair)))
    validate_tx(both, actors.tables, actors.directory)

    same_twice = PermissionTx(base.tx_type, base.d1_id, base.d2_id,
                              base.operation,
                              (first, actors.signed(once, actors.rn1.pair)))
    with pytest.raises(TxValidationError,
                       match="second endorsement not from another"):
        validate_tx(same_twice, actors.tables, actors.directory)

    swapped = PermissionTx(base.tx_type, base.d1_id, base.d2_id, base.operation,
                           (actors.signed(once, actors.rn2.pair), first))
    with pytest.raises(TxValidationError, match="first endorsement"):
        validate_tx(swapped, actors.tables, actors.directory)


def test_permission_shape_mismatches(actors):
    with pytest.raises(TxValidationError, match="between a device and itself"):
        validate_tx(PermissionTx(TxType.PERMISSION_RELEASE, 4, 4,
                                 Operation.READ), actors.tables, actors.directory)
    with pytest.raises(TxValidationError, match="request carries no signature"):
        validate_tx(PermissionTx(TxType.PERMISSION_REQUEST, 4, 5,
                                 Operation.READ), actors.tables, actors.directory)
    with pytest.raises(TxValidationError, match="release carries a device"):
        validate_tx(PermissionTx(TxType.PERMISSION_RELEASE, 4, 5,
                                 Operation.READ, (SIG72,)),
                    actors.tables, actors.directory)


def test_batch_root_carrier_checks(actors):
    root = hash_data(b"batch")
    blank = LocalInteractiveTx(actors.rn1.entity_id, root, 4, b"")
    good = LocalInteractiveTx(actors.rn1.entity_id, root, 4,
                              actors.signed(blank, actors.rn1.pair))
    validate_tx(good, actors.tables, actors.directory)
    empty_blank = LocalInteractiveTx(actors.rn1.entity_id, root, 0, b"")
    with pytest.raises(TxValidationError, match="empty batch"):
        validate_tx(
            LocalInteractiveTx(actors.rn1.entity_id, root, 0,
                               actors.signed(empty_blank, actors.rn1.pair)),
            actors.tables, actors.directory,
        )
    with pytest.raises(TxValidationError, match="bad regional node signature"):
        validate_tx(
            LocalInteractiveTx(actors.rn1.entity_id, root, 4,
                               actors.signed(blank, actors.cc.pair)),
            actors.tables, actors.directory,
        )


# --- audit and replay -----------------------------------------------------------


def build_clean_chain(actors):
    genesis = make_genesis((
        txmod.encode(actors.cc.tx),
        txmod.encode(actors.dc.tx),
        txmod.encode(actors.rn1.tx),
        txmod.encode(actors.rn2.tx),
        txmod.encode(actors.man.tx),
    ))
    ledger = Ledger(genesis)
    blank = DeviceRegistrationTx(actors.man.entity_id, actors.device_id, b"")
    reg = DeviceRegistrationTx(actors.man.entity_id, actors.device_id,
                               actors.signed(blank, actors.man.pair))
    ledger.append(Block(1, block_hash(genesis), 500, 0,
                        (txmod.encode(reg),)))
    return ledger


def test_audit_passes_a_clean_chain(actors):
    ledger = build_clean_chain(actors)
    assert audit_chain(ledger, actors.directory) == []


def test_audit_catches_planted_forgeries(actors):
    ledger = build_clean_chain(actors)
    digest = hash_data(b"reading")
    blank = DeviceStorageTx(actors.device_id, 0, 0, digest, b"")
    forged = DeviceStorageTx(actors.device_id, 0, 0, digest,
                             actors.signed(blank, actors.rn1.pair))
    tip = ledger.blocks[-1]
    ledger.append(Block(2, block_hash(tip), 900, 1,
                        (txmod.encode(forged), b"\x01\x02")))
    findings = audit_chain(ledger, actors.directory)
    assert len(findings) == 2
    assert "block 2 tx 0: bad device signature" in findings[0]
    assert "block 2 tx 1: undecodable" in findings[1]


def test_replay_rebuilds_tables_from_chain_alone(actors):
    ledger = build_clean_chain(actors)
    tables = replay_tables(ledger)
    assert tables.devices[actors.device_id].registered_at == 1
    assert tables.active_entity(EntityClass.MANUFACTURER, actors.man.entity_id)
    assert tables.export() == replay_tables(ledger).export()


def test_key_directory_hands_out_sequential_ids():
    directory = KeyDirectory()
    first = directory.add_key(b"\x02" + bytes(32))
    second = directory.add_key(b"\x03" + bytes(32))
    assert (first, second) == (1, 2)
    assert directory.lookup(99) is None
    assert len(directory) == 2
    assert directory.allocate_entity_id() == 1
