"""Merkle trees over batched local transactions.

A regional node hashes each locally handled transaction, builds a tree over
the digests, chains only the root, and hands every submitter an
authentication path. Verifiers holding just the root can then confirm
membership of a single transaction without seeing any other leaf.

Conventions (fixed here so independent implementations agree):

* internal node = SHA-256(left || right), sides explicit in proofs
* an unpaired node at any level is hashed with itself
* a single-leaf tree's root is the leaf digest, with an empty path
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

from .crypto import DIGEST_LEN, hash_data


class MerkleError(Exception):
    pass


class ProofParseError(MerkleError):
    """Serialized proof bytes do not follow the wire layout."""


class Side(IntEnum):
    """Which side of the running hash a path sibling sits on."""

    LEFT = 0
    RIGHT = 1


@dataclass(frozen=True)
class MerkleProof:
    """Leaf digest, authentication path, and the root it folds up to."""

    leaf: bytes
    path: tuple[tuple[bytes, Side], ...]
    root: bytes

    def to_bytes(self) -> bytes:
        """Serialize: leaf(32) || path-len(1) || [side(1) || sibling(32)]* || root(32)."""
        out = bytearray(self.leaf)
        out.append(len(self.path))
        for sibling, side in self.path:
            out.append(int(side))
            out.extend(sibling)
        out.extend(self.root)
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "MerkleProof":
        if len(data) < DIGEST_LEN + 1 + DIGEST_LEN:
            raise ProofParseError(f"proof too short: {len(data)} bytes")
        leaf = data[:DIGEST_LEN]
        count = data[DIGEST_LEN]
        expected = DIGEST_LEN + 1 + count * (1 + DIGEST_LEN) + DIGEST_LEN
        if len(data) != expected:
            raise ProofParseError(
                f"proof with {count} path steps must be {expected} bytes, got {len(data)}"
            )
        path = []
        pos = DIGEST_LEN + 1
        for _ in range(count):
            side_byte = data[pos]
            if side_byte not in (Side.LEFT, Side.RIGHT):
                raise ProofParseError(f"invalid side marker {side_byte:#04x}")
            sibling = data[pos + 1 : pos + 1 + DIGEST_LEN]
            path.append((sibling, Side(side_byte)))
            pos += 1 + DIGEST_LEN
        root = data[pos:]
        return cls(leaf=leaf, path=tuple(path), root=root)


class MerkleTree:
    """Tree of digests, kept level by level from leaves up to the root."""

    def __init__(self, levels: list[list[bytes]]) -> None:
        self.levels = levels

    @property
    def leaves(self) -> list[bytes]:
        return self.levels[0]

    @property
    def root(self) -> bytes:
        return self.levels[-1][0]

    @property
    def height(self) -> int:
        return len(self.levels) - 1


def build_tree(leaves: list[bytes]) -> MerkleTree:
    """Build the tree bottom-up; an odd node at any level pairs with itself."""
    if not leaves:
        raise MerkleError("cannot build a merkle tree over zero leaves")
    for leaf in leaves:
        if len(leaf) != DIGEST_LEN:
            raise MerkleError(f"leaf must be a {DIGEST_LEN}-byte digest")
    levels = [list(leaves)]
    while len(levels[-1]) > 1:
        below = levels[-1]
        above = []
        for i in range(0, len(below), 2):
            left = below[i]
            right = below[i + 1] if i + 1 < len(below) else below[i]
            above.append(hash_data(left + right))
        levels.append(above)
    return MerkleTree(levels)


def prove(tree: MerkleTree, index: int) -> MerkleProof:
    """Authentication path for the leaf at ``index``."""
    if not 0 <= index < len(tree.leaves):
        raise MerkleError(
            f"leaf index {index} out of range for {len(tree.leaves)} leaves"
        )
    path = []
    pos = index
    for level in tree.levels[:-1]:
        sibling_pos = pos ^ 1
        if sibling_pos >= len(level):
            sibling_pos = pos  # unpaired node: sibling is the node itself
        side = Side.LEFT if sibling_pos < pos else Side.RIGHT
        path.append((level[sibling_pos], side))
        pos //= 2
    return MerkleProof(leaf=tree.leaves[index], path=tuple(path), root=tree.root)


def verify_proof(proof: MerkleProof) -> bool:
    """Fold the leaf through the path and compare against the stated root."""
    current = proof.leaf
    if len(current) != DIGEST_LEN or len(proof.root) != DIGEST_LEN:
        return False
    for sibling, side in proof.path:
        if len(sibling) != DIGEST_LEN:
            return False
        if side == Side.RIGHT:
            current = hash_data(current + sibling)
        else:
            current = hash_data(sibling + current)
    return current == proof.root
