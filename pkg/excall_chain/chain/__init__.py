from .blocklog import BlockLog, BlockLogError, read_blocks
from .initiator import attach_calls, excall_templates
from .mempool import Mempool
from .node import (
    BlockRejected,
    ChainError,
    ChainHalted,
    ChainNode,
    GenesisMismatch,
    NodeMetrics,
    NotSealerTurn,
    RejectReason,
    SubmitRejection,
    SubmitResult,
    Verdict,
    genesis_block,
)
from .query import ChainQuery, EventRecord, ReceiptRecord
from .state import WorldState, pending_key, winnings_key

__all__ = [
    "BlockLog",
    "BlockLogError",
    "read_blocks",
    "attach_calls",
    "excall_templates",
    "Mempool",
    "BlockRejected",
    "ChainError",
    "ChainHalted",
    "ChainNode",
    "GenesisMismatch",
    "NodeMetrics",
    "NotSealerTurn",
    "RejectReason",
    "SubmitRejection",
    "SubmitResult",
    "Verdict",
    "genesis_block",
    "ChainQuery",
    "EventRecord",
    "ReceiptRecord",
    "WorldState",
    "pending_key",
    "winnings_key",
]
