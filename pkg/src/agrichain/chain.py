"""Blocks, proof-of-work and the append-only FN / TN ledgers."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import canon
from .bayes import PriorMatrix
from .crypto import SUITE
from .errors import CorruptLedgerError, LedgerParseError
from .kinetics import CLASS_LABELS

HASH_NAME = "SHA-256"
DEFAULT_DIFFICULTY = 12
LEDGER_FORMAT = 1
ZERO_HASH = bytes(32)
NETWORKS = ("FN", "TN")

# canonical colour per response class, A (low) .. E (high)
CLASS_COLORS = {"A": "#1a9850", "B": "#91cf60", "C": "#fee08b", "D": "#fc8d59", "E": "#d73027"}


def _header_prefix(index: int, prev_hash: bytes, payload: bytes, miner_id: str) -> bytes:
    miner = miner_id.encode("utf-8")
    return b"".join([
        struct.pack(">Q", index),
        prev_hash,
        struct.pack(">I", len(payload)), payload,
        struct.pack(">H", len(miner)), miner,
    ])


def block_hash(index: int, prev_hash: bytes, payload: bytes, miner_id: str, nonce: int, timestamp: int) -> bytes:
    """SHA-256 over index | prev_hash | payload | miner_id | nonce | timestamp."""
    h = hashlib.sha256(_header_prefix(index, prev_hash, payload, miner_id))
    h.update(struct.pack(">Qq", nonce, timestamp))
    return h.digest()


def meets_difficulty(digest: bytes, difficulty: int) -> bool:
    """True when ``digest`` starts with at least ``difficulty`` zero bits."""
    if difficulty <= 0:
        return True
    return int.from_bytes(digest, "big") >> (len(digest) * 8 - difficulty) == 0


@dataclass(frozen=True)
class Block:
    index: int
    prev_hash: bytes
    payload: bytes
    miner_id: str
    nonce: int
    timestamp: int
    hash: bytes

    def recompute_hash(self) -> bytes:
        return block_hash(self.index, self.prev_hash, self.payload, self.miner_id, self.nonce, self.timestamp)

    def data(self):
        """Decoded canonical payload."""
        return canon.decode(self.payload)

    def to_bytes(self) -> bytes:
        return canon.encode([self.index, self.prev_hash, self.payload, self.miner_id,
                             self.nonce, self.timestamp, self.hash])

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Block":
        try:
            index, prev_hash, payload, miner_id, nonce, timestamp, digest = canon.decode(raw)
        except (ValueError, TypeError) as exc:
            raise LedgerParseError(f"undecodable block record: {exc}") from exc
        if not (isinstance(prev_hash, bytes) and isinstance(payload, bytes) and isinstance(digest, bytes)):
            raise LedgerParseError("block record has wrong field types")
        return cls(index, prev_hash, payload, miner_id, nonce, timestamp, digest)


def mine_block(prev: Block | None, payload: bytes, miner_id: str, difficulty: int, timestamp: int) -> Block:
    """Exhaustive nonce search from zero; deterministic for fixed inputs."""
    if difficulty < 0:
        raise ValueError("difficulty must be >= 0")
    index = 0 if prev is None else prev.index + 1
    prev_hash = ZERO_HASH if prev is None else prev.hash
    base = hashlib.sha256(_header_prefix(index, prev_hash, payload, miner_id))
    ts = struct.pack(">q", timestamp)
    nonce = 0
    while True:
        h = base.copy()
        h.update(struct.pack(">Q", nonce) + ts)
        digest = h.digest()
        if meets_difficulty(digest, difficulty):
            return Block(index, prev_hash, payload, miner_id, nonce, timestamp, digest)
        nonce += 1


def validate_block(block: Block, prev: Block, difficulty: int) -> bool:
    return (
        block.index == prev.index + 1
        and block.prev_hash == prev.hash
        and block.recompute_hash() == block.hash
        and meets_difficulty(block.hash, difficulty)
    )


@dataclass(frozen=True)
class ColorToken:
    """Five class segments proportional to a farm's posterior."""

    segments: tuple[float, ...]

    def __post_init__(self):
        if len(self.segments) != 5:
            raise ValueError("a colour token has exactly five segments")

    @classmethod
    def from_posterior(cls, column) -> "ColorToken":
        col = np.asarray(column, dtype=float)
        total = col.sum()
        if total > 0:
            col = col / total
        return cls(tuple(float(x) for x in col))

    @property
    def dominant(self) -> str:
        return CLASS_LABELS[int(np.argmax(self.segments))]

    def colors(self) -> list[tuple[str, float]]:
        return [(CLASS_COLORS[label], share) for label, share in zip(CLASS_LABELS, self.segments)]


def genesis_payload(n_farms: int, farm_ids, cr0: float, difficulty: int, network: str) -> bytes:
    prior = PriorMatrix.uniform(n_farms).probs
    return canon.encode({
        "network": network,
        "prior": prior,
        "next_prior": prior,
        "cr0": float(cr0),
        "farm_ids": list(farm_ids),
        "difficulty": difficulty,
        "hash": HASH_NAME,
        "suite": SUITE,
    })


@dataclass
class Ledger:
    network: str
    blocks: list[Block] = field(default_factory=list)

    def __post_init__(self):
        if self.network not in NETWORKS:
            raise ValueError(f"network must be one of {NETWORKS}")

    @classmethod
    def create(cls, network: str, n_farms: int, farm_ids, cr0: float = 500.0,
               difficulty: int = DEFAULT_DIFFICULTY) -> "Ledger":
        payload = genesis_payload(n_farms, farm_ids, cr0, difficulty, network)
        return cls(network, [mine_block(None, payload, "genesis", difficulty, 0)])

    def __len__(self):
        return len(self.blocks)

    def __iter__(self) -> Iterator[Block]:
        return iter(self.blocks)

    @property
    def head(self) -> Block:
        return self.blocks[-1]

    @property
    def height(self) -> int:
        return len(self.blocks) - 1

    @property
    def difficulty(self) -> int:
        return int(self.blocks[0].data()["difficulty"])

    def append(self, block: Block, difficulty: int | None = None) -> None:
        difficulty = self.difficulty if difficulty is None else difficulty
        if not validate_block(block, self.head, difficulty):
            raise CorruptLedgerError(f"block {block.index} does not extend {self.network} ledger")
        self.blocks.append(block)

    def copy(self) -> "Ledger":
        return Ledger(self.network, list(self.blocks))

    # -- export / import ---------------------------------------------------

    def export_lines(self) -> list[str]:
        tag = struct.pack(">BB", LEDGER_FORMAT, NETWORKS.index(self.network))
        return [(tag + b.to_bytes()).hex() for b in self.blocks]

    def export(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("\n".join(self.export_lines()) + "\n")

    @classmethod
    def from_lines(cls, lines) -> "Ledger":
        blocks = []
        network = None
        for n, line in enumerate(lines, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = bytes.fromhex(line)
            except ValueError as exc:
                raise LedgerParseError(f"record {n}: not hex") from exc
            if len(raw) < 2 or raw[0] != LEDGER_FORMAT or raw[1] >= len(NETWORKS):
                raise LedgerParseError(f"record {n}: unknown format or network byte")
            net = NETWORKS[raw[1]]
            if network is None:
                network = net
            elif net != network:
                raise LedgerParseError(f"record {n}: mixes {network} and {net} records")
            blocks.append(Block.from_bytes(raw[2:]))
        if not blocks:
            raise LedgerParseError("ledger file holds no records")
        return cls(network, blocks)

    @classmethod
    def load(cls, path) -> "Ledger":
        with open(path) as fh:
            return cls.from_lines(fh)


def _genesis_ok(block: Block, difficulty: int) -> bool:
    if block.index != 0 or block.prev_hash != ZERO_HASH:
        return False
    if block.recompute_hash() != block.hash or not meets_difficulty(block.hash, difficulty):
        return False
    try:
        data = block.data()
        prior = np.asarray(data["prior"], dtype=float)
        return prior.shape[0] == 5 and np.allclose(prior, 0.2) and "cr0" in data
    except (ValueError, TypeError, KeyError):
        return False


def first_invalid_height(ledger: Ledger, difficulty: int | None = None) -> int | None:
    """Height of the first block that breaks the chain, or None when valid."""
    if not ledger.blocks:
        return 0
    if difficulty is None:
        try:
            difficulty = ledger.difficulty
        except (ValueError, TypeError, KeyError):
            return 0
    if not _genesis_ok(ledger.blocks[0], difficulty):
        return 0
    for prev, block in zip(ledger.blocks, ledger.blocks[1:]):
        if not validate_block(block, prev, difficulty):
            return block.index if block.index == prev.index + 1 else prev.index + 1
    return None


def validate_chain(ledger: Ledger, difficulty: int | None = None) -> bool:
    return first_invalid_height(ledger, difficulty) is None


def latest_prior(ledger: Ledger, difficulty: int | None = None) -> PriorMatrix:
    """Prior for the next round, read from the highest block."""
    bad = first_invalid_height(ledger, difficulty)
    if bad is not None:
        raise CorruptLedgerError(f"{ledger.network} ledger invalid at height {bad}")
    data = ledger.head.data()
    return PriorMatrix(np.asarray(data["next_prior"], dtype=float), ledger.height)
