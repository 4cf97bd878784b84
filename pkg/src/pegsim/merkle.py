"""Binary Merkle trees with domain-separated hashing and membership proofs.

Used for extension commitments, confirmation witnesses, and transaction
reports.  Leaves hash as SHA256(0x00 || data), internal nodes as
SHA256(0x01 || left || right).  When a level has odd width the last node is
promoted unchanged to the next level (no duplication), so a promoted node's
path consumes no sibling at that level.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import List, Sequence, Tuple

from .errors import EmptyTree, IndexOutOfRange

HASH_LEN = 32

_LEAF_TAG = b"\x00"
_NODE_TAG = b"\x01"


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def leaf_hash(data: bytes) -> bytes:
    return sha256(_LEAF_TAG + data)


def node_hash(left: bytes, right: bytes) -> bytes:
    return sha256(_NODE_TAG + left + right)


@dataclass(frozen=True)
class MerkleProof:
    """Membership path for one leaf, siblings ordered leaf-to-root."""

    leaf_index: int
    siblings: Tuple[bytes, ...]
    leaf_count: int


def _next_level(level: List[bytes]) -> List[bytes]:
    nxt = [node_hash(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
    if len(level) % 2 == 1:
        nxt.append(level[-1])  # odd width: promote the last node
    return nxt


def merkle_root(leaves: Sequence[bytes]) -> bytes:
    """Root over the given leaf byte-strings; raises EmptyTree on []."""
    if not leaves:
        raise EmptyTree("merkle_root of empty leaf list")
    level = [leaf_hash(x) for x in leaves]
    while len(level) > 1:
        level = _next_level(level)
    return level[0]


def merkle_prove(leaves: Sequence[bytes], index: int) -> MerkleProof:
    """Build the membership proof for leaves[index]."""
    if not leaves:
        raise EmptyTree("merkle_prove of empty leaf list")
    if not 0 <= index < len(leaves):
        raise IndexOutOfRange(f"index {index} not in [0, {len(leaves)})")
    siblings: List[bytes] = []
    level = [leaf_hash(x) for x in leaves]
    i = index
    while len(level) > 1:
        n = len(level)
        if n % 2 == 1 and i == n - 1:
            # promoted: no sibling at this level, lands after all pairs
            i = n // 2
        else:
            siblings.append(level[i + 1] if i % 2 == 0 else level[i - 1])
            i //= 2
        level = _next_level(level)
    return MerkleProof(leaf_index=index, siblings=tuple(siblings), leaf_count=len(leaves))


def merkle_verify(root: bytes, leaf: bytes, proof: MerkleProof) -> bool:
    """True iff the proof path recomputes to root; never raises."""
    if proof.leaf_count < 1 or not 0 <= proof.leaf_index < proof.leaf_count:
        return False
    for sib in proof.siblings:
        if not isinstance(sib, (bytes, bytearray)) or len(sib) != HASH_LEN:
            return False
    h = leaf_hash(leaf)
    i = proof.leaf_index
    width = proof.leaf_count
    used = 0
    while width > 1:
        if width % 2 == 1 and i == width - 1:
            i = width // 2
        else:
            if used >= len(proof.siblings):
                return False
            sib = bytes(proof.siblings[used])
            used += 1
            h = node_hash(h, sib) if i % 2 == 0 else node_hash(sib, h)
            i //= 2
        width = width // 2 + width % 2
    return used == len(proof.siblings) and h == root
