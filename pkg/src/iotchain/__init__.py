"""Deterministic simulator and protocol library for a three-tier
device / regional-node / blockchain security architecture.

The pieces compose bottom-up:

- :mod:`iotchain.crypto` — keys, signatures, session-key transport
- :mod:`iotchain.merkle` — trees, membership proofs, serialization
- :mod:`iotchain.tx` — fixed-layout binary transaction codec
- :mod:`iotchain.ledger` — blocks, registry tables, validation, audit
- :mod:`iotchain.simnet` — seeded discrete-event network with faults
- :mod:`iotchain.consensus` — three-phase ordering with view changes
- :mod:`iotchain.roles` — devices, regional nodes, vendors, auditors
- :mod:`iotchain.scenarios` — scripted attacks with machine-checked verdicts
"""

from .crypto import (
    DeterministicRng,
    KeyPair,
    SessionKey,
    derive_session_key,
    generate_keypair,
    hash_data,
    sign,
    verify,
)
from .ledger import Block, Ledger, RnTables, TxValidationError, audit_chain
from .merkle import MerkleProof, MerkleTree, build_tree, prove, verify_proof
from .scenarios import (
    RunResult,
    Verdict,
    builtin_suite,
    run_scenario,
    run_scenario_file,
    run_suite,
)
from .simnet import ConfigError, Crash, Dos, Heal, Network, Partition
from .roles import World, WorldConfig, build_world

__all__ = [
    "Block",
    "ConfigError",
    "Crash",
    "DeterministicRng",
    "Dos",
    "Heal",
    "KeyPair",
    "Ledger",
    "MerkleProof",
    "MerkleTree",
    "Network",
    "Partition",
    "RnTables",
    "RunResult",
    "SessionKey",
    "TxValidationError",
    "Verdict",
    "World",
    "WorldConfig",
    "audit_chain",
    "build_tree",
    "build_world",
    "builtin_suite",
    "derive_session_key",
    "generate_keypair",
    "hash_data",
    "prove",
    "run_scenario",
    "run_scenario_file",
    "run_suite",
    "sign",
    "verify",
    "verify_proof",
]
