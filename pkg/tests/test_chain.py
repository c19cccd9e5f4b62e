from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from agrichain import canon
from agrichain.chain import (
    Block,
    ColorToken,
    Ledger,
    block_hash,
    first_invalid_height,
    latest_prior,
    meets_difficulty,
    mine_block,
    validate_block,
    validate_chain,
)
from agrichain.errors import CorruptLedgerError, LedgerParseError


def _ledger(n_blocks=4, difficulty=8):
    ledger = Ledger.create("FN", 3, ["F00", "F01", "F02"], 500.0, difficulty)
    for t in range(1, n_blocks + 1):
        prior = np.full((5, 3), 0.2)
        prior[0] += 0.01 * t
        payload = canon.encode({"round": t, "next_prior": prior / prior.sum(axis=0)})
        ledger.append(mine_block(ledger.head, payload, "FN0", difficulty, t))
    return ledger


def test_difficulty_zero_accepts_first_nonce():
    genesis = Ledger.create("FN", 1, ["F00"], difficulty=0).head
    block = mine_block(genesis, b"data", "m", 0, 1)
    assert block.nonce == 0 and validate_block(block, genesis, 0)


def test_mining_is_deterministic_and_valid():
    genesis = Ledger.create("TN", 2, ["F00", "F01"], difficulty=8).head
    a = mine_block(genesis, b"payload", "FN1", 8, 3)
    b = mine_block(genesis, b"payload", "FN1", 8, 3)
    assert a == b
    assert meets_difficulty(a.hash, 8) and a.hash[0] == 0
    assert a.hash == block_hash(a.index, a.prev_hash, a.payload, a.miner_id, a.nonce, a.timestamp)
    assert validate_block(a, genesis, 8)
    assert not validate_block(dataclasses.replace(a, payload=b"payloaD"), genesis, 8)


def test_meets_difficulty_bits():
    assert meets_difficulty(b"\x00\x0f" + bytes(30), 12)
    assert not meets_difficulty(b"\x00\x1f" + bytes(30), 12)


def test_chain_validation_and_tampering():
    ledger = _ledger()
    assert validate_chain(ledger) and first_invalid_height(ledger) is None
    blocks = list(ledger.blocks)
    bad = dataclasses.replace(blocks[2], payload=bytes([blocks[2].payload[0] ^ 1]) + blocks[2].payload[1:])
    tampered = Ledger("FN", blocks[:2] + [bad] + blocks[3:])
    assert not validate_chain(tampered)
    assert first_invalid_height(tampered) == 2
    swapped = Ledger("FN", [blocks[0], blocks[2], blocks[1], *blocks[3:]])
    assert first_invalid_height(swapped) == 1


def test_append_rejects_foreign_blocks():
    ledger = _ledger(1)
    stray = mine_block(ledger.blocks[0], b"x", "m", 8, 9)
    with pytest.raises(CorruptLedgerError):
        ledger.append(stray)


def test_latest_prior():
    fresh = Ledger.create("FN", 4, [f"F{i:02d}" for i in range(4)], difficulty=4)
    np.testing.assert_allclose(latest_prior(fresh).probs, 0.2)
    ledger = _ledger(2)
    assert latest_prior(ledger).step == 2
    assert latest_prior(ledger).probs[0, 0] > 0.2
    head = ledger.blocks[-1]
    ledger.blocks[-1] = dataclasses.replace(head, payload=head.payload + b"\x00")
    with pytest.raises(CorruptLedgerError):
        latest_prior(ledger)


def test_export_import_round_trip(tmp_path):
    ledger = _ledger(3)
    path = tmp_path / "fn.txt"
    ledger.export(path)
    again = Ledger.load(path)
    assert again.network == "FN" and again.blocks == ledger.blocks
    assert all(line[:4] == "0100" for line in path.read_text().split())


@pytest.mark.parametrize("text", ["", "zz\n", "0200\n", "0100ff\n"])
def test_import_errors(tmp_path, text):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(LedgerParseError):
        Ledger.load(path)


def test_import_rejects_mixed_networks():
    fn, tn = _ledger(1), Ledger.create("TN", 3, ["F00", "F01", "F02"], difficulty=8)
    with pytest.raises(LedgerParseError):
        Ledger.from_lines(fn.export_lines() + tn.export_lines())


def test_color_token():
    token = ColorToken.from_posterior([0.0, 1.0, 3.0, 0.0, 0.0])
    assert sum(token.segments) == pytest.approx(1.0, abs=1e-9)
    assert token.dominant == "C"
    assert token.colors()[0][0].startswith("#")
    assert ColorToken.from_posterior(np.zeros(5)).segments == (0.0,) * 5
    with pytest.raises(ValueError):
        ColorToken((0.5, 0.5))


def test_block_bytes_round_trip():
    block = _ledger(1).head
    assert Block.from_bytes(block.to_bytes()) == block
