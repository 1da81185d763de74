import pytest

from veriframe.errors import ParseError, StaleTipError
from veriframe.ledger.blocks import (
    Block,
    BlockHeader,
    CommittedBlock,
    Transaction,
    Vote,
    ZERO_HASH,
    assemble_block,
    compute_tx_root,
    genesis_block,
)
from veriframe.model import DigestAlgorithm, DigestRecord, WriteMode

from conftest import golden


GENESIS_HASH = "e3aa7a445dcd12969fabf577898cfc134f694dbaacc5645f00562ffab408b4e9"


def golden_record() -> DigestRecord:
    record, _ = DigestRecord.decode(golden("digest_record"))
    return record


def golden_block() -> Block:
    record = golden_record()
    header = BlockHeader(
        height=1,
        prev_hash=genesis_block(0).hash,
        tx_root=compute_tx_root([Transaction(record).tx_hash]),
        timestamp=1_000_000,
        leader_id=0,
    )
    return Block(header, (record,))


def test_genesis_hash():
    genesis = genesis_block(0)
    assert genesis.hash.hex() == GENESIS_HASH
    assert genesis.header.prev_hash == ZERO_HASH
    assert genesis.records == ()
    assert genesis_block(1).hash != genesis.hash


def test_block_encoding_matches_golden():
    block = golden_block()
    assert block.encode() == golden("block")
    assert len(block.encode()) == 145

    decoded, end = Block.decode(golden("block"))
    assert decoded == block
    assert end == 145


def test_golden_hashes():
    block = golden_block()
    assert Transaction(golden_record()).tx_hash.hex() == (
        "e26bcf1a3fbccac79e9568736813c54c68ead58f82352e5e62fc467c319034f6"
    )
    assert block.header.tx_root.hex() == (
        "a9971501ec78a769aae2ac1de405d6d22bf9d7a1a626eaacea84438fd286c575"
    )
    assert block.header.hash.hex() == (
        "e35e2969707b340f52d046409e0064bbc8c619e690b122e51bc0f1ef39169509"
    )
    assert block.hash.hex() == (
        "8dadd65a997c0e94a7ca60bd1e3cc9348a06d57fd850c4d90720eb268aa80934"
    )
    assert block.has_consistent_tx_root()


def test_committed_block_with_votes():
    block = golden_block()
    votes = (
        Vote(0, block.header.hash, bytes(64)),
        Vote(2, block.header.hash, b"\x01" * 64),
    )
    entry = CommittedBlock(block, votes)
    data = entry.encode()

    assert len(data) == 145 + 2 + 2 * (4 + 64)
    assert CommittedBlock.decode(data) == entry

    with pytest.raises(ParseError):
        CommittedBlock.decode(data + b"\x00")
    with pytest.raises(ParseError):
        CommittedBlock.decode(data[:-1])


def _records(count: int):
    return [
        DigestRecord(
            bytes(16),
            WriteMode.per_frame(),
            index,
            index,
            DigestAlgorithm.SHA256,
            bytes([index]) * 32,
        )
        for index in range(count)
    ]


def test_assemble_orders_and_deduplicates():
    records = _records(4)
    pending = [
        Transaction(records[2], receipt_time=30),
        Transaction(records[0], receipt_time=10),
        Transaction(records[1], receipt_time=20),
        Transaction(records[3], receipt_time=40),
    ]
    tip = genesis_block(0)
    block = assemble_block(
        pending,
        tip,
        1,
        height=1,
        timestamp=5,
        max_txs=3,
        committed_keys={records[1].key},
    )

    assert block is not None
    assert block.records == (records[0], records[2], records[3])
    assert block.header.prev_hash == tip.hash
    assert block.header.leader_id == 1
    assert block.has_consistent_tx_root()


def test_assemble_caps_block_size_and_clamps_timestamp():
    tip = Block(BlockHeader(0, ZERO_HASH, compute_tx_root(()), 1000, 0))
    pending = [Transaction(record, index) for index, record in enumerate(_records(5))]
    block = assemble_block(pending, tip, 0, height=1, timestamp=10, max_txs=2)

    assert block is not None
    assert len(block.records) == 2
    assert block.header.timestamp == 1000


def test_assemble_nothing_or_wrong_height():
    tip = genesis_block(0)
    assert assemble_block([], tip, 0, height=1, timestamp=0) is None
    with pytest.raises(StaleTipError):
        assemble_block(
            [Transaction(_records(1)[0])], tip, 0, height=2, timestamp=0
        )


def test_duplicate_submissions_are_included_once():
    record = _records(1)[0]
    pending = [Transaction(record, 1), Transaction(record, 2)]
    block = assemble_block(pending, genesis_block(0), 0, height=1, timestamp=0)
    assert block is not None
    assert block.records == (record,)
