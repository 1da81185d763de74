from dataclasses import replace

import pytest

from veriframe.errors import LedgerError, ProtocolError
from veriframe.ledger.blocks import Block
from veriframe.ledger.client import ChainInfo
from veriframe.ledger.cluster import bootstrap_cluster
from veriframe.ledger.crypto import sign_header
from veriframe.ledger.messages import (
    Confirm,
    Gossip,
    Propose,
    SignedRelay,
    decode_consensus_message,
    encode_consensus_message,
)
from veriframe.ledger.node import LedgerNode
from veriframe.ledger.protocol import (
    ChainInfoRequest,
    QueryDigestRequest,
    decode_chain_info,
    decode_entries,
    decode_request,
    encode_chain_info,
    encode_entries,
    encode_request,
    error_response,
    unwrap_response,
)
from veriframe.ledger.store import LedgerEntry

from conftest import make_records


@pytest.mark.parametrize(
    "request_",
    [
        make_records(1)[0],
        QueryDigestRequest(bytes(range(16)), 2**40),
        ChainInfoRequest(),
    ],
)
def test_requests(request_):
    assert decode_request(encode_request(request_)) == request_


def test_request_opcodes():
    assert encode_request(ChainInfoRequest()) == b"\x03"
    assert encode_request(QueryDigestRequest(bytes(16), 1))[:1] == b"\x02"
    assert encode_request(make_records(1)[0])[:1] == b"\x01"


@pytest.mark.parametrize(
    "payload", [b"", b"\x07", b"\x02" + bytes(10), b"\x03\x00", b"\x01\x00"]
)
def test_malformed_requests(payload):
    with pytest.raises(ProtocolError):
        decode_request(payload)


def test_entries_response():
    records = make_records(3)
    entries = [LedgerEntry(record, 4 + i, 1000 * i) for i, record in enumerate(records)]
    body = unwrap_response(encode_entries(entries))
    assert decode_entries(body) == entries
    assert decode_entries(unwrap_response(encode_entries([]))) == []

    with pytest.raises(ProtocolError):
        decode_entries(body[:-1])


def test_chain_info_response():
    info = ChainInfo(7, bytes(range(32)), 3)
    assert decode_chain_info(unwrap_response(encode_chain_info(info))) == info


def test_error_response():
    with pytest.raises(LedgerError, match="no quorum"):
        unwrap_response(error_response("no quorum"))
    with pytest.raises(ProtocolError):
        unwrap_response(b"\x42")


@pytest.fixture
def proposal():
    cluster, keys = bootstrap_cluster(3)
    leader = LedgerNode(0, cluster, keys[0])
    for record in make_records(3):
        leader.submit(record)
    leader.begin_round(1)
    outgoing = leader.start_round()
    assert [destination for destination, _ in outgoing] == [1, 2]
    return cluster, keys, outgoing[0][1]


def test_consensus_messages(proposal):
    cluster, keys, propose = proposal
    assert isinstance(propose, Propose)

    header_hash = propose.block.header.hash
    vote = sign_header(keys[1], 1, header_hash)
    messages = [
        propose,
        SignedRelay(1, 1, 0, vote),
        Confirm(2, 1, 0, header_hash, (propose.leader_vote, vote)),
        Gossip(2, make_records(1)[0]),
    ]
    for message in messages:
        decoded = decode_consensus_message(encode_consensus_message(message))
        assert decoded == message

    decoded = decode_consensus_message(encode_consensus_message(propose))
    assert decoded.leader_vote.block_header_hash == header_hash
    assert cluster.is_valid_vote(decoded.leader_vote)


@pytest.mark.parametrize("cut", [1, 5, 20, -1])
def test_truncated_consensus_messages(proposal, cut):
    _, _, propose = proposal
    data = encode_consensus_message(propose)
    with pytest.raises(ProtocolError):
        decode_consensus_message(data[:cut])


def test_unknown_consensus_opcode():
    with pytest.raises(ProtocolError):
        decode_consensus_message(b"\x1f\x00\x00")


def test_proposal_height_must_match_block(proposal):
    _, _, propose = proposal
    data = bytearray(encode_consensus_message(propose))
    data[3] = 9
    with pytest.raises(ProtocolError):
        decode_consensus_message(bytes(data))


def test_validator_signs_one_block_per_round(proposal):
    cluster, keys, propose = proposal
    validator = LedgerNode(1, cluster, keys[1])
    relays = validator.handle(propose)
    assert [destination for destination, _ in relays] == [0, 2]

    block = propose.block
    twin = Block(replace(block.header, timestamp=block.header.timestamp + 1), block.records)
    twin_vote = sign_header(keys[0], 0, twin.header.hash)
    assert validator.handle(Propose(0, 0, twin, twin_vote)) == []
    assert validator.round.signed == block.header.hash
