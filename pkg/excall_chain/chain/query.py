"""Read-only view of a node, as used by the relayer, harness and MCP tools."""

from typing import NamedTuple, Optional, Protocol

from ..core.types import Block, BlockHeader, EventLog, Receipt


class ReceiptRecord(NamedTuple):
    receipt: Receipt
    block_number: int
    tx_index: int


class EventRecord(NamedTuple):
    block_number: int
    tx_index: int
    log_index: int
    event: EventLog


class ChainQuery(Protocol):
    def head(self) -> BlockHeader: ...

    def block(self, number: int) -> Optional[Block]: ...

    def receipt(self, tx_digest: bytes) -> Optional[ReceiptRecord]: ...

    def scan_events(
        self, topic: Optional[bytes] = None, from_block: int = 0, to_block: Optional[int] = None
    ) -> list[EventRecord]: ...

    def winnings(self, contract: bytes, address: bytes) -> int: ...

    def next_nonce(self, sender: bytes) -> int: ...
