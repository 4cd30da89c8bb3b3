"""MCP tools for inspecting a replayed chain."""

import json
from typing import Optional

from mcp.server.fastmcp import FastMCP
from pydantic import BaseModel, ConfigDict, Field

from ..chain.node import ChainNode
from ..core.types import Block, BlockHeader, Receipt
from ..vm.abi import topic as topic_of


def _hex(value: str, size: Optional[int] = None) -> bytes:
    raw = bytes.fromhex(value[2:] if value.startswith("0x") else value)
    if size is not None and len(raw) != size:
        raise ValueError(f"expected {size} bytes, got {len(raw)}")
    return raw


def _header(header: BlockHeader) -> dict:
    return header.model_dump(mode="json")


def _receipt(receipt: Receipt) -> dict:
    return receipt.model_dump(mode="json")


def _block(block: Block, include_extension: bool) -> dict:
    data = {
        "header": _header(block.header),
        "transactions": [tx.model_dump(mode="json") for tx in block.transactions],
        "seal": block.seal.hex(),
        "extension_entries": len(block.excall_extension),
    }
    if include_extension:
        data["excall_extension"] = [entry.model_dump(mode="json") for entry in block.excall_extension]
    return data


def register_chain_tools(mcp: FastMCP, node: ChainNode) -> None:
    """Register read-only chain inspection tools backed by node."""

    # ------------------------------------------------------------------
    # Head
    # ------------------------------------------------------------------

    @mcp.tool(
        name="chain_head",
        annotations={"readOnlyHint": True, "destructiveHint": False},
    )
    async def chain_head() -> str:
        """
        Get the current head block header and state root.

        Returns:
            str: JSON with 'number', 'digest', 'state_root' and 'header'.
        """
        try:
            header = node.head()
            return json.dumps({
                "number": header.number,
                "digest": node.head_digest().hex(),
                "state_root": header.state_root.hex(),
                "header": _header(header),
            }, indent=2)
        except Exception as e:
            return f"Error reading head: {e}"

    # ------------------------------------------------------------------
    # Block
    # ------------------------------------------------------------------

    class GetBlockInput(BaseModel):
        model_config = ConfigDict(extra="forbid")

        number: int = Field(..., description="Block number (0 is genesis)", ge=0)
        include_extension: bool = Field(
            default=True, description="Include the recorded external-call results."
        )

    @mcp.tool(
        name="chain_get_block",
        annotations={"readOnlyHint": True, "destructiveHint": False},
    )
    async def chain_get_block(params: GetBlockInput) -> str:
        """
        Fetch one block with its transactions and, optionally, its extension.

        Args:
            params.number: Block number.
            params.include_extension: Whether to list the recorded calls.

        Returns:
            str: JSON block, or an error if the block does not exist.
        """
        try:
            block = node.block(params.number)
            if block is None:
                return f"Error: no block {params.number} (head is {node.height})"
            return json.dumps(_block(block, params.include_extension), indent=2)
        except Exception as e:
            return f"Error fetching block: {e}"

    # ------------------------------------------------------------------
    # Receipt
    # ------------------------------------------------------------------

    class GetReceiptInput(BaseModel):
        model_config = ConfigDict(str_strip_whitespace=True, extra="forbid")

        tx_digest: str = Field(..., description="Transaction digest as 64 hex characters")

    @mcp.tool(
        name="chain_get_receipt",
        annotations={"readOnlyHint": True, "destructiveHint": False},
    )
    async def chain_get_receipt(params: GetReceiptInput) -> str:
        """
        Look up a transaction's receipt by digest.

        Returns:
            str: JSON with 'block_number', 'tx_index' and 'receipt'.
        """
        try:
            record = node.receipt(_hex(params.tx_digest, 32))
            if record is None:
                return f"Error: no receipt for {params.tx_digest}"
            return json.dumps({
                "block_number": record.block_number,
                "tx_index": record.tx_index,
                "receipt": _receipt(record.receipt),
            }, indent=2)
        except Exception as e:
            return f"Error fetching receipt: {e}"

    # ------------------------------------------------------------------
    # Events
    # ------------------------------------------------------------------

    class ScanEventsInput(BaseModel):
        model_config = ConfigDict(str_strip_whitespace=True, extra="forbid")

        topic: Optional[str] = Field(
            default=None,
            description="Event name (e.g. 'BetPlaced') or 32-byte topic in hex. Omit for all events.",
        )
        from_block: int = Field(default=0, ge=0)
        to_block: Optional[int] = Field(default=None, ge=0)
        limit: int = Field(default=100, ge=1, le=1000)

    @mcp.tool(
        name="chain_scan_events",
        annotations={"readOnlyHint": True, "destructiveHint": False},
    )
    async def chain_scan_events(params: ScanEventsInput) -> str:
        """
        List events emitted by successful transactions, oldest first.

        Returns:
            str: JSON array of events with block, tx and log indexes.
        """
        try:
            wanted = None
            if params.topic:
                try:
                    wanted = _hex(params.topic, 32)
                except ValueError:
                    wanted = topic_of(params.topic)
            records = node.scan_events(wanted, params.from_block, params.to_block)[: params.limit]
            return json.dumps([
                {
                    "block_number": r.block_number,
                    "tx_index": r.tx_index,
                    "log_index": r.log_index,
                    "contract": r.event.contract.hex(),
                    "topic": r.event.topic.hex(),
                    "data": r.event.data.hex(),
                }
                for r in records
            ], indent=2)
        except Exception as e:
            return f"Error scanning events: {e}"

    # ------------------------------------------------------------------
    # Winnings
    # ------------------------------------------------------------------

    class WinningsInput(BaseModel):
        model_config = ConfigDict(str_strip_whitespace=True, extra="forbid")

        contract: str = Field(..., description="Betting contract address (40 hex characters)")
        address: str = Field(..., description="Punter address (40 hex characters)")

    @mcp.tool(
        name="chain_get_winnings",
        annotations={"readOnlyHint": True, "destructiveHint": False},
    )
    async def chain_get_winnings(params: WinningsInput) -> str:
        """
        Read a punter's win count from a betting contract.

        Returns:
            str: JSON with 'contract', 'address' and 'winnings'.
        """
        try:
            contract = _hex(params.contract, 20)
            address = _hex(params.address, 20)
            return json.dumps({
                "contract": contract.hex(),
                "address": address.hex(),
                "winnings": node.winnings(contract, address),
            }, indent=2)
        except Exception as e:
            return f"Error reading winnings: {e}"

    # ------------------------------------------------------------------
    # Metrics
    # ------------------------------------------------------------------

    @mcp.tool(
        name="chain_metrics",
        annotations={"readOnlyHint": True, "destructiveHint": False},
    )
    async def chain_metrics() -> str:
        """
        Node counters: blocks applied, receipt statuses, recorded call
        outcomes, the rate of calls a sealer reported as unanswered, and how
        many external calls this node itself made (zero for a verifier).
        """
        try:
            data = node.metrics.as_dict()
            data["external_calls_made"] = node.excall_count
            data["height"] = node.height
            return json.dumps(data, indent=2)
        except Exception as e:
            return f"Error reading metrics: {e}"
