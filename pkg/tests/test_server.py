import asyncio
import json

import pytest

from excall_chain.chain import BlockLog
from excall_chain.config import save_chain_config
from excall_chain.core.digests import tx_identity
from excall_chain.core.types import Transaction
from excall_chain.server import build_server, load_verifier
from excall_chain.vm import encode_call

from .conftest import produce

TOOLS = {
    "chain_head",
    "chain_get_block",
    "chain_get_receipt",
    "chain_scan_events",
    "chain_get_winnings",
    "chain_metrics",
}


def call(mcp, name: str, **params) -> str:
    arguments = {"params": params} if params else {}
    result = asyncio.run(mcp.call_tool(name, arguments))
    if isinstance(result, tuple):  # newer FastMCP returns (content, structured)
        result = result[0]
    return result[0].text


@pytest.fixture
def settled(sealer, verifier, punter, contracts):
    """Verifier holding a deploy block and one winning bet."""
    tx = Transaction(sender=punter.address, account_nonce=0, target=contracts.excall, input=encode_call("betEXCALL"))
    sealer.submit_tx(tx)
    produce(sealer, verifier)
    return verifier, tx


@pytest.fixture
def mcp(settled):
    return build_server(settled[0])


class TestTools:
    def test_registered(self, mcp):
        tools = asyncio.run(mcp.list_tools())
        assert {tool.name for tool in tools} == TOOLS
        assert all(tool.annotations.readOnlyHint for tool in tools)

    def test_head(self, mcp, settled):
        node, _ = settled
        body = json.loads(call(mcp, "chain_head"))
        assert body["number"] == 2
        assert body["digest"] == node.head_digest().hex()

    def test_block_with_extension(self, mcp):
        body = json.loads(call(mcp, "chain_get_block", number=2))
        assert body["extension_entries"] == 1
        assert body["excall_extension"][0]["outcome"] == "recorded"

    def test_missing_block(self, mcp):
        assert call(mcp, "chain_get_block", number=99).startswith("Error: no block 99")

    def test_receipt(self, mcp, settled):
        _, tx = settled
        body = json.loads(call(mcp, "chain_get_receipt", tx_digest=tx_identity(tx).hex()))
        assert body["block_number"] == 2
        assert body["receipt"]["status"] == "success"

    def test_receipt_bad_digest(self, mcp):
        assert call(mcp, "chain_get_receipt", tx_digest="abc").startswith("Error")

    def test_events_by_name(self, mcp, sealer, verifier, punter, contracts):
        tx = Transaction(
            sender=punter.address, account_nonce=1, target=contracts.standard, input=encode_call("beginBetOracle"),
        )
        sealer.submit_tx(tx)
        produce(sealer, verifier)
        body = json.loads(call(mcp, "chain_scan_events", topic="BetPlaced"))
        assert [event["block_number"] for event in body] == [3]
        assert body[0]["contract"] == contracts.standard.hex()

    def test_winnings(self, mcp, punter, contracts):
        body = json.loads(call(mcp, "chain_get_winnings", contract=contracts.excall.hex(), address=punter.address.hex()))
        assert body["winnings"] == 1

    def test_metrics(self, mcp):
        body = json.loads(call(mcp, "chain_metrics"))
        assert body["external_calls_made"] == 0
        assert body["height"] == 2
        assert body["recorded_outcomes"] == {"recorded": 1}


class TestLoadVerifier:
    def test_without_a_log(self):
        assert load_verifier(None).height == 0

    def test_replays_the_log(self, tmp_path, chain_config, sealer):
        log = tmp_path / "chain.log"
        save_chain_config(chain_config, log)
        produce(sealer)
        produce(sealer)
        writer = BlockLog(log)
        for block in sealer.blocks():
            writer.append(block)
        node = load_verifier(log)
        assert node.height == 2
        assert node.state_root() == sealer.state_root()
        assert node.excall_count == 0
