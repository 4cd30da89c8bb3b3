"""
excall-chain MCP inspector
==========================

Replays a block log into a verifier node and exposes the resulting chain
as read-only MCP tools: head, blocks with their recorded external calls,
receipts, events, winnings and node metrics.

Setup:
    1. Produce a block log, e.g. `excall-chain run --log-dir logs`
    2. Point EXCALL_BLOCK_LOG at one of the .log files (or pass --log to
       `excall-chain inspect`)
    3. Add `excall-chain-mcp` to your MCP client config (see README.md)
"""

import logging
import sys
from pathlib import Path
from typing import Optional

from mcp.server.fastmcp import FastMCP

from .chain.node import ChainNode
from .config import (
    configure_logging,
    env_str,
    load_chain_config,
    load_environment,
    simulation_chain_config,
)
from .tools import register_chain_tools

logger = logging.getLogger(__name__)


def load_verifier(block_log: Optional[Path]) -> ChainNode:
    """A verifier node with block_log replayed into it (empty chain if None)."""
    if block_log is None:
        return ChainNode(simulation_chain_config(), name="inspector")
    node = ChainNode(load_chain_config(block_log), name="inspector")
    applied = node.replay_log(block_log)
    logger.info("replayed %d blocks from %s", applied, block_log)
    return node


def build_server(node: ChainNode) -> FastMCP:
    mcp = FastMCP(
        "excall_chain",
        instructions=(
            "This server inspects a proof-of-authority chain whose contracts can make "
            "verifiable external calls. Use chain_head for the tip, chain_get_block to see "
            "a block and the signed call results recorded in its extension, "
            "chain_get_receipt and chain_scan_events for transaction outcomes, "
            "chain_get_winnings for betting contract balances, and chain_metrics for "
            "node counters. All tools are read-only."
        ),
    )
    register_chain_tools(mcp, node)
    return mcp


def main(block_log: Optional[Path] = None) -> None:
    """Entry point for the excall-chain-mcp command."""
    load_environment()
    configure_logging()
    if block_log is None:
        raw = env_str("EXCALL_BLOCK_LOG", "")
        block_log = Path(raw) if raw else None
    print("excall-chain-mcp: starting up...", file=sys.stderr)
    try:
        build_server(load_verifier(block_log)).run()
    except KeyboardInterrupt:
        pass
    finally:
        print("excall-chain-mcp: shutting down.", file=sys.stderr)


if __name__ == "__main__":
    main()
