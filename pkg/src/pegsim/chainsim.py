"""Simulated PoW coin chain: transactions, mining, fork tracking, fork choice.

Difficulty is constant for a whole simulation; cumulative work is still
tracked and fork choice compares work, with ties broken by earliest arrival
then lexicographically smallest hash.

Canonical byte encodings (all integers big-endian, addresses length-prefixed)
are the cross-language contract for every hash in the system; the exact
layouts are documented in the README.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .errors import UnknownParent, RangeUnavailable
from .merkle import merkle_root, sha256

ZERO_HASH = b"\x00" * 32
EMPTY_TX_ROOT = sha256(b"\x02")  # designated root for an empty tx list
MAX_U64 = 2**64


def _u64(n: int) -> bytes:
    return (n % MAX_U64).to_bytes(8, "big")


def _u256(n: int) -> bytes:
    return n.to_bytes(32, "big")


def _lp(data: bytes) -> bytes:
    """Length-prefixed bytes (1-byte length, max 255)."""
    if len(data) > 255:
        raise ValueError("length-prefixed field too long")
    return bytes([len(data)]) + data


def doge_address(name: str) -> bytes:
    """Derive a stable opaque 20-byte address from a label."""
    return sha256(b"doge/" + name.encode())[:20]


# ---------------------------------------------------------------------------
# transactions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Transaction:
    """Account-style DOGE transfer; memo optionally names an ETH-side recipient."""

    sender: bytes
    receiver: bytes
    amount: int
    nonce: int
    memo: bytes = b""

    def encode(self) -> bytes:
        return _lp(self.sender) + _lp(self.receiver) + _u64(self.amount) + _u64(self.nonce) + _lp(self.memo)

    @property
    def tx_id(self) -> bytes:
        return sha256(self.encode())


def tx_list_root(txs: Sequence[Transaction]) -> bytes:
    if not txs:
        return EMPTY_TX_ROOT
    return merkle_root([tx.encode() for tx in txs])


# ---------------------------------------------------------------------------
# headers, blocks, proof of work
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockHeader:
    parent: bytes
    tx_root: bytes
    ordinal: int
    timestamp: int
    nonce: int
    difficulty_target: int
    pow_fn: str = "sha256d"

    def encode(self) -> bytes:
        return (
            self.parent
            + self.tx_root
            + _u64(self.ordinal)
            + _u64(self.timestamp)
            + _u64(self.nonce)
            + _u256(self.difficulty_target)
        )


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    txs: Tuple[Transaction, ...]


def _pow_sha256d(data: bytes) -> bytes:
    return hashlib.sha256(hashlib.sha256(data).digest()).digest()


def _pow_scrypt(data: bytes) -> bytes:
    # reduced-parameter variant only; real memory-hard parameters are out of scope
    return hashlib.scrypt(data, salt=b"pegsim/pow", n=1024, r=1, p=1, dklen=32)


POW_FNS = {
    "sha256d": _pow_sha256d,
    "scrypt": _pow_scrypt,
}


def pow_digest(header: BlockHeader) -> bytes:
    return POW_FNS[header.pow_fn](header.encode())


def block_hash(header: BlockHeader) -> bytes:
    """A block's identity is its PoW digest."""
    return pow_digest(header)


def pow_check(header: BlockHeader) -> bool:
    """True iff the PoW digest, read as a 256-bit big-endian integer, beats the target."""
    if header.difficulty_target <= 0:
        return False
    return int.from_bytes(pow_digest(header), "big") < header.difficulty_target


def work_for_target(target: int) -> int:
    """Expected attempts per block at this target; constant at constant difficulty."""
    if target <= 0:
        return 0
    return (1 << 256) // (target + 1)


def search_pow(
    parent: bytes,
    tx_root: bytes,
    ordinal: int,
    timestamp: int,
    target: int,
    pow_fn: str = "sha256d",
    seed: int = 0,
) -> Tuple[BlockHeader, int]:
    """Deterministic nonce search from a seeded start; returns (header, attempts)."""
    start = int.from_bytes(sha256(b"nonce/" + _u64(seed) + parent + tx_root + _u64(ordinal))[:8], "big")
    nonce = start
    attempts = 0
    while True:
        attempts += 1
        header = BlockHeader(parent, tx_root, ordinal, timestamp, nonce, target, pow_fn)
        if pow_check(header):
            return header, attempts
        nonce = (nonce + 1) % MAX_U64


def mine_header(
    parent_header: BlockHeader,
    tx_root: bytes,
    timestamp: int,
    seed: int = 0,
) -> BlockHeader:
    """Mine a child header of parent_header (same target and PoW function)."""
    header, _ = search_pow(
        block_hash(parent_header),
        tx_root,
        parent_header.ordinal + 1,
        timestamp,
        parent_header.difficulty_target,
        parent_header.pow_fn,
        seed,
    )
    return header


# ---------------------------------------------------------------------------
# chain view
# ---------------------------------------------------------------------------


@dataclass
class AddResult:
    accepted: bool
    reason: Optional[str] = None  # BadPoW | UnknownParent | BadOrdinal | BadTxRoot


@dataclass
class ChainView:
    """All blocks seen so far, fork structure, and arrival bookkeeping.

    Owned by the simulation thread; never mutated concurrently.
    """

    blocks: Dict[bytes, Block] = field(default_factory=dict)
    children: Dict[bytes, List[bytes]] = field(default_factory=dict)
    tips: Set[bytes] = field(default_factory=set)
    arrival: Dict[bytes, int] = field(default_factory=dict)
    cum_work: Dict[bytes, int] = field(default_factory=dict)
    genesis_hash: bytes = ZERO_HASH

    @classmethod
    def new(cls, difficulty_target: int, pow_fn: str = "sha256d") -> "ChainView":
        header, _ = search_pow(ZERO_HASH, EMPTY_TX_ROOT, 0, 0, difficulty_target, pow_fn, seed=0)
        genesis = Block(header, ())
        gh = block_hash(header)
        view = cls(genesis_hash=gh)
        view.blocks[gh] = genesis
        view.tips.add(gh)
        view.arrival[gh] = 0
        view.cum_work[gh] = work_for_target(difficulty_target)
        return view

    @property
    def genesis(self) -> Block:
        return self.blocks[self.genesis_hash]

    def header(self, h: bytes) -> BlockHeader:
        return self.blocks[h].header

    def add_block(self, block: Block, arrival_time: int = 0) -> AddResult:
        h = block_hash(block.header)
        if h in self.blocks:
            return AddResult(True)  # idempotent
        parent = block.header.parent
        if parent not in self.blocks:
            return AddResult(False, "UnknownParent")
        if not pow_check(block.header):
            return AddResult(False, "BadPoW")
        if block.header.ordinal != self.blocks[parent].header.ordinal + 1:
            return AddResult(False, "BadOrdinal")
        if block.header.tx_root != tx_list_root(block.txs):
            return AddResult(False, "BadTxRoot")
        self.blocks[h] = block
        self.children.setdefault(parent, []).append(h)
        self.arrival[h] = arrival_time
        self.cum_work[h] = self.cum_work[parent] + work_for_target(block.header.difficulty_target)
        self.tips.discard(parent)
        self.tips.add(h)
        return AddResult(True)

    def mine_block(self, parent: bytes, txs: Sequence[Transaction], time: int, seed: int = 0) -> Block:
        """Mine a child of parent containing txs; does not insert it."""
        if parent not in self.blocks:
            raise UnknownParent(parent.hex())
        parent_header = self.blocks[parent].header
        txs = tuple(txs)
        header, _ = search_pow(
            parent,
            tx_list_root(txs),
            parent_header.ordinal + 1,
            time,
            parent_header.difficulty_target,
            parent_header.pow_fn,
            seed,
        )
        return Block(header, txs)

    def best_tip(self) -> bytes:
        """Tip with maximal cumulative work; ties: earliest arrival, then smallest hash."""
        return min(self.tips, key=lambda h: (-self.cum_work[h], self.arrival[h], h))

    def ancestor_at(self, tip: bytes, ordinal: int) -> bytes:
        """Hash of tip's ancestor at the given ordinal; raises RangeUnavailable."""
        if tip not in self.blocks:
            raise RangeUnavailable("unknown tip")
        h = tip
        cur = self.blocks[h].header.ordinal
        if ordinal > cur or ordinal < 0:
            raise RangeUnavailable(f"ordinal {ordinal} not on path to tip at {cur}")
        while cur > ordinal:
            h = self.blocks[h].header.parent
            cur -= 1
        return h

    def path_blocks(self, tip: bytes, from_ordinal: int, to_ordinal: int) -> List[Block]:
        """Blocks with ordinals in [from_ordinal, to_ordinal] on tip's ancestor path."""
        if tip not in self.blocks:
            raise RangeUnavailable("unknown tip")
        tip_ord = self.blocks[tip].header.ordinal
        if not 0 <= from_ordinal <= to_ordinal <= tip_ord:
            raise RangeUnavailable(f"[{from_ordinal}, {to_ordinal}] outside path to ordinal {tip_ord}")
        h = self.ancestor_at(tip, to_ordinal)
        out: List[Block] = []
        cur = to_ordinal
        while cur >= from_ordinal:
            out.append(self.blocks[h])
            h = self.blocks[h].header.parent
            cur -= 1
        out.reverse()
        return out

    def headers_range(self, tip: bytes, from_ordinal: int, to_ordinal: int) -> List[BlockHeader]:
        return [b.header for b in self.path_blocks(tip, from_ordinal, to_ordinal)]


def visible_view(view: ChainView, cutoff_time: int) -> ChainView:
    """Restriction of view to blocks that arrived at or before cutoff_time.

    Cheap filtered copy sharing immutable blocks; genesis is always visible.
    """
    out = ChainView(genesis_hash=view.genesis_hash)
    for h, block in view.blocks.items():
        if view.arrival[h] <= cutoff_time or h == view.genesis_hash:
            out.blocks[h] = block
            out.arrival[h] = view.arrival[h]
            out.cum_work[h] = view.cum_work[h]
    for h, block in out.blocks.items():
        p = block.header.parent
        if p in out.blocks:
            out.children.setdefault(p, []).append(h)
    for h in out.blocks:
        if not out.children.get(h):
            out.tips.add(h)
    return out
