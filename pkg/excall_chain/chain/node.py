"""Proof-of-authority chain node: mempool, block production and verification.

A sealer produces a block in four steps:

1. ``build_block`` picks mempool transactions and dry-runs them to find the
   external calls they will make. Those intentions are committed to by the
   header, which fixes the intention hash. No call is made yet.
2. ``finalize_excalls`` runs the transactions for real. Each external call
   is sent with a nonce derived from the intention hash and its position,
   and every call's result is appended to the block's extension.
3. ``seal_block`` signs intention hash, extension root and state root.
4. Every node (the sealer included) verifies and applies the block by
   replaying the recorded results, without any network access.
"""

import json
import logging
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Sequence

from ..clients.oracle import CountingPort, ExcallPort, OracleEnvelope
from ..config import ChainConfig
from ..core.digests import (
    block_digest,
    excall_nonce,
    initiator_nonce,
    intent_root,
    intention_hash,
    sealed_digest,
    tx_identity,
    tx_root,
)
from ..core.types import (
    ZERO_ADDRESS,
    ZERO_DIGEST,
    Block,
    BlockHeader,
    CallMode,
    CallOutcome,
    ExtensionEntry,
    Intention,
    Receipt,
    ReceiptStatus,
    Transaction,
)
from ..crypto import KeyPair, address_of, hash_bytes, verify_seal_signature
from ..vm.abi import contract_address, selector, split_deploy_input
from ..vm.machine import BlockEnv, ExcallFault, ExecContext, ExecMode, ExecResult, execute
from ..vm.program import ContractProgram, ProgramError
from .blocklog import BlockLog, read_blocks
from .mempool import Mempool
from .query import EventRecord, ReceiptRecord
from .state import WorldState

logger = logging.getLogger(__name__)

Hook = Callable[[str, dict[str, Any]], None]

CONSTRUCTOR = selector("constructor")


# ---------------------------------------------------------------------------
# Errors and verdicts
# ---------------------------------------------------------------------------

class RejectReason(str, Enum):
    PARENT_MISMATCH = "ParentMismatch"
    BAD_HEADER = "BadHeader"
    BAD_TIMESTAMP = "BadTimestamp"
    OUT_OF_TURN_SEALER = "OutOfTurnSealer"
    BAD_SEAL = "BadSeal"
    TX_ROOT_MISMATCH = "TxRootMismatch"
    INTENTION_MISMATCH = "IntentionMismatch"
    MALFORMED_EXTENSION = "MalformedExtension"
    MISSING_EXTENSION_ENTRY = "MissingExtensionEntry"
    UNEXPECTED_EXTENSION_ENTRY = "UnexpectedExtensionEntry"
    NONCE_MISMATCH = "NonceMismatch"
    EXCALL_URI_MISMATCH = "ExcallUriMismatch"
    UNKNOWN_ORACLE_PUBLIC_KEY = "UnknownOraclePublicKey"
    INVALID_EXCALL_SIGNATURE = "InvalidExcallSignature"
    FALSE_FAILURE_CLAIM = "FalseFailureClaim"
    BAD_TX_NONCE = "BadTxNonce"
    STATE_ROOT_MISMATCH = "StateRootMismatch"


_FAULT_REASONS = {
    ExcallFault.MISSING_CALL: RejectReason.MISSING_EXTENSION_ENTRY,
    ExcallFault.NONCE_MISMATCH: RejectReason.NONCE_MISMATCH,
    ExcallFault.URI_MISMATCH: RejectReason.EXCALL_URI_MISMATCH,
    ExcallFault.UNKNOWN_KEY: RejectReason.UNKNOWN_ORACLE_PUBLIC_KEY,
    ExcallFault.BAD_SIGNATURE: RejectReason.INVALID_EXCALL_SIGNATURE,
    ExcallFault.FALSE_FAILURE: RejectReason.FALSE_FAILURE_CLAIM,
}


class SubmitRejection(str, Enum):
    STALE_NONCE = "StaleNonce"
    DUPLICATE_NONCE = "DuplicateNonce"
    INVALID_ATTACHED_CALL = "InvalidAttachedCall"
    CHAIN_HALTED = "ChainHalted"


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reason: Optional[RejectReason] = None
    detail: str = ""

    @classmethod
    def accept(cls) -> "Verdict":
        return cls(True)

    @classmethod
    def reject(cls, reason: RejectReason, detail: str = "") -> "Verdict":
        return cls(False, reason, detail)


@dataclass(frozen=True)
class SubmitResult:
    accepted: bool
    tx_digest: bytes
    reason: Optional[SubmitRejection] = None
    detail: str = ""


class ChainError(Exception):
    """Base class for chain engine errors."""


class BlockRejected(ChainError):
    def __init__(self, verdict: Verdict) -> None:
        super().__init__(f"{verdict.reason.value}: {verdict.detail}")
        self.verdict = verdict


class ChainHalted(ChainError):
    """The node stopped after a block log write failed."""


class NotSealerTurn(ChainError):
    """This node holds no key for the sealer whose turn it is."""


class GenesisMismatch(ChainError):
    """Two nodes were configured with different chains."""


class _Reject(Exception):
    def __init__(self, reason: RejectReason, detail: str) -> None:
        super().__init__(detail)
        self.verdict = Verdict.reject(reason, detail)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

@dataclass
class NodeMetrics:
    blocks_produced: int = 0
    blocks_applied: int = 0
    blocks_rejected: int = 0
    txs_applied: int = 0
    receipts: Counter = field(default_factory=Counter)
    recorded_outcomes: Counter = field(default_factory=Counter)
    rejections: Counter = field(default_factory=Counter)

    @property
    def no_response_rate(self) -> float:
        """Share of recorded external calls for which a sealer reported no response."""
        total = sum(self.recorded_outcomes.values())
        return self.recorded_outcomes[CallOutcome.NO_RESPONSE] / total if total else 0.0

    def as_dict(self) -> dict[str, Any]:
        return {
            "blocks_produced": self.blocks_produced,
            "blocks_applied": self.blocks_applied,
            "blocks_rejected": self.blocks_rejected,
            "txs_applied": self.txs_applied,
            "receipts": {status.value: n for status, n in self.receipts.items()},
            "recorded_outcomes": {outcome.value: n for outcome, n in self.recorded_outcomes.items()},
            "rejections": {reason.value: n for reason, n in self.rejections.items()},
            "no_response_rate": self.no_response_rate,
        }


# ---------------------------------------------------------------------------
# Genesis
# ---------------------------------------------------------------------------

def config_digest(config: ChainConfig) -> bytes:
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hash_bytes(b"EXCALL-GENESIS" + canonical.encode("utf-8"))


def genesis_block(config: ChainConfig) -> Block:
    """Block 0. Its parent digest commits to the chain configuration."""
    return Block(
        header=BlockHeader(
            parent_digest=config_digest(config),
            number=0,
            timestamp=config.genesis_timestamp,
            tx_root=tx_root([]),
            intent_root=intent_root([]),
            state_root=WorldState().state_root(),
            sealer=ZERO_ADDRESS,
        )
    )


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------

@dataclass
class _Execution:
    state: WorldState
    receipts: list[Receipt]
    extension: list[ExtensionEntry] = field(default_factory=list)
    intentions: list[Intention] = field(default_factory=list)


class _ObservedPort:
    """Fires the excall_performed hook before each call leaves the node."""

    def __init__(self, inner: ExcallPort, emit: Callable[[str, dict[str, Any]], None]) -> None:
        self._inner = inner
        self._emit = emit

    def fetch(self, uri: str, timeout: float) -> OracleEnvelope:
        self._emit("excall_performed", {"uri": uri})
        return self._inner.fetch(uri, timeout)


class ChainNode:
    """
    One node of a proof-of-authority chain.

    Args:
        config: Chain parameters shared by every node.
        sealer_keys: Keys this node may seal with; empty for a verifier.
        excall_port: How this node reaches oracle services. Only used when
            finalizing its own blocks; verifiers never call it.
        block_log: Optional append-only log of applied blocks.
        name: Label used in logs.
    """

    def __init__(
        self,
        config: ChainConfig,
        *,
        sealer_keys: Sequence[KeyPair] = (),
        excall_port: Optional[ExcallPort] = None,
        block_log: Optional[Path] = None,
        name: str = "node",
    ) -> None:
        self.config = config
        self.name = name
        self.port = CountingPort(excall_port)
        self.metrics = NodeMetrics()
        self.mempool = Mempool()
        self.halted = False

        configured = set(config.sealer_keys)
        self._sealer_keys = {key.public_key: key for key in sealer_keys}
        for public_key in self._sealer_keys:
            if public_key not in configured:
                raise ValueError(f"{name}: sealer key {public_key.hex()[:16]} is not in the authority set")

        self._lock = threading.RLock()
        self._hooks: list[Hook] = []
        self._log = BlockLog(block_log) if block_log else None

        genesis = genesis_block(config)
        self._blocks: list[Block] = [genesis]
        self._digests: list[bytes] = [block_digest(genesis)]
        self._state = WorldState()
        self._receipts: dict[bytes, ReceiptRecord] = {}
        self._block_receipts: list[list[Receipt]] = [[]]

    # -- identity ----------------------------------------------------------

    @property
    def is_sealer(self) -> bool:
        return bool(self._sealer_keys)

    @property
    def genesis_digest(self) -> bytes:
        return self._digests[0]

    @property
    def excall_count(self) -> int:
        """External calls that reached this node's port."""
        return self.port.calls

    @property
    def state(self) -> WorldState:
        return self._state

    def add_hook(self, hook: Hook) -> None:
        self._hooks.append(hook)

    def _emit(self, name: str, data: dict[str, Any]) -> None:
        for hook in self._hooks:
            hook(name, data)

    # -- queries -----------------------------------------------------------

    def head(self) -> BlockHeader:
        with self._lock:
            return self._blocks[-1].header

    def head_block(self) -> Block:
        with self._lock:
            return self._blocks[-1]

    def head_digest(self) -> bytes:
        with self._lock:
            return self._digests[-1]

    @property
    def height(self) -> int:
        return self.head().number

    def block(self, number: int) -> Optional[Block]:
        with self._lock:
            return self._blocks[number] if 0 <= number < len(self._blocks) else None

    def blocks(self, from_block: int = 1) -> list[Block]:
        with self._lock:
            return self._blocks[max(from_block, 0):]

    def receipts_for(self, number: int) -> list[Receipt]:
        with self._lock:
            return list(self._block_receipts[number]) if 0 <= number < len(self._block_receipts) else []

    def receipt(self, tx_digest: bytes) -> Optional[ReceiptRecord]:
        with self._lock:
            return self._receipts.get(tx_digest)

    def scan_events(
        self, topic: Optional[bytes] = None, from_block: int = 0, to_block: Optional[int] = None
    ) -> list[EventRecord]:
        """Events of successful transactions, ordered by block, tx and emit index."""
        with self._lock:
            last = len(self._blocks) - 1 if to_block is None else min(to_block, len(self._blocks) - 1)
            found = []
            for number in range(max(from_block, 0), last + 1):
                for tx_index, receipt in enumerate(self._block_receipts[number]):
                    for log_index, event in enumerate(receipt.events):
                        if topic is None or event.topic == topic:
                            found.append(EventRecord(number, tx_index, log_index, event))
            return found

    def winnings(self, contract: bytes, address: bytes) -> int:
        with self._lock:
            return self._state.winnings(contract, address)

    def account_nonce(self, sender: bytes) -> int:
        with self._lock:
            return self._state.nonce(sender)

    def next_nonce(self, sender: bytes) -> int:
        """Next unused nonce, counting transactions still in the mempool."""
        with self._lock:
            on_chain = self._state.nonce(sender)
        pending = self.mempool.highest_nonce(sender)
        return on_chain if pending is None else max(on_chain, pending + 1)

    # -- submission --------------------------------------------------------

    def submit_tx(self, tx: Transaction) -> SubmitResult:
        digest = tx_identity(tx)
        if self.halted:
            return SubmitResult(False, digest, SubmitRejection.CHAIN_HALTED, "node halted")
        with self._lock:
            expected = self._state.nonce(tx.sender)
        if tx.account_nonce < expected:
            return self._refuse(digest, SubmitRejection.STALE_NONCE, f"nonce {tx.account_nonce} < {expected}")
        if tx.mode is CallMode.INITIATOR_ATTACHED:
            problem = self._check_attached(tx)
            if problem:
                return self._refuse(digest, SubmitRejection.INVALID_ATTACHED_CALL, problem)
        if not self.mempool.add(tx):
            return self._refuse(digest, SubmitRejection.DUPLICATE_NONCE, f"nonce {tx.account_nonce} already pending")
        return SubmitResult(True, digest)

    def _refuse(self, digest: bytes, reason: SubmitRejection, detail: str) -> SubmitResult:
        logger.warning("%s: rejected tx %s: %s (%s)", self.name, digest.hex()[:16], reason.value, detail)
        return SubmitResult(False, digest, reason, detail)

    def _check_attached(self, tx: Transaction) -> str:
        if len(tx.excalls) > self.config.max_excalls_per_tx:
            return "too many attached calls"
        for index, call in enumerate(tx.excalls):
            if call.request_nonce != initiator_nonce(tx.sender, tx.account_nonce, index):
                return f"call {index} is not bound to this transaction"
            if self.config.pinned_key_for(call.request_uri) != call.public_key:
                return f"call {index} is signed by an unpinned key"
            if not call.is_valid():
                return f"call {index} has an invalid signature"
        return ""

    # -- execution ---------------------------------------------------------

    def _execute_tx(
        self,
        state: WorldState,
        tx: Transaction,
        tx_index: int,
        mode: ExecMode,
        env: BlockEnv,
        intention_digest: bytes,
        recorded: Sequence[ExtensionEntry] = (),
    ) -> tuple[Receipt, ExecResult]:
        """Run one transaction against state, which it mutates on success."""
        if tx.mode is CallMode.INITIATOR_ATTACHED:
            mode = ExecMode.VERIFY
            recorded = [
                ExtensionEntry(tx_index=tx_index, call_index=i, call=call)
                for i, call in enumerate(tx.excalls)
            ]

            def nonce_for(call_index: int) -> bytes:
                return initiator_nonce(tx.sender, tx.account_nonce, call_index)
        else:
            def nonce_for(call_index: int) -> bytes:
                return excall_nonce(intention_digest, tx_index, call_index)

        nonce = tx.account_nonce
        state.bump_nonce(tx.sender)
        if tx.is_deploy:
            return self._deploy(state, tx, tx_index, mode, env, nonce_for, recorded, nonce)

        program = state.programs.get(tx.target)
        if program is None:
            result = ExecResult(status=ReceiptStatus.FAILED_EXEC, error="no contract at target")
        else:
            result = self._run(program, state, tx.sender, tx.target, tx.input, tx_index, mode, env, nonce_for, recorded)
        return self._receipt(tx, result), result

    def _deploy(self, state, tx, tx_index, mode, env, nonce_for, recorded, nonce) -> tuple[Receipt, ExecResult]:
        address = contract_address(tx.sender, nonce)
        try:
            code, args = split_deploy_input(tx.input)
            program = ContractProgram.from_bytecode(code)
        except ProgramError as e:
            result = ExecResult(status=ReceiptStatus.FAILED_EXEC, error=str(e))
            return self._receipt(tx, result), result
        if address in state.programs:
            result = ExecResult(status=ReceiptStatus.FAILED_EXEC, error="address in use")
            return self._receipt(tx, result), result

        state.programs[address] = program
        if CONSTRUCTOR in program.entry_points:
            result = self._run(program, state, tx.sender, address, CONSTRUCTOR + args, tx_index, mode, env, nonce_for, recorded)
            if result.status is not ReceiptStatus.SUCCESS:
                del state.programs[address]
                return self._receipt(tx, result), result
        else:
            result = ExecResult(status=ReceiptStatus.SUCCESS)
        result.output = address
        return self._receipt(tx, result), result

    def _run(self, program, state, caller, target, data, tx_index, mode, env, nonce_for, recorded) -> ExecResult:
        port = None
        if mode is ExecMode.FINALIZE:
            port = _ObservedPort(self.port, self._emit)
        ctx = ExecContext(
            caller=caller,
            self_address=target,
            input=data,
            mode=mode,
            block_env=env,
            tx_index=tx_index,
            excall_port=port,
            nonce_for=nonce_for,
            pinned_key=self.config.pinned_key_for,
            step_limit=self.config.step_limit,
            max_excalls=self.config.max_excalls_per_tx,
            excall_timeout=self.config.excall_timeout_ms / 1000,
        )
        storage = state.storage_for(target)
        result = execute(program, ctx, storage, recorded)
        if not storage:
            state.storage.pop(target, None)
        return result

    @staticmethod
    def _receipt(tx: Transaction, result: ExecResult) -> Receipt:
        return Receipt(
            tx_digest=tx_identity(tx),
            status=result.status,
            events=result.events,
            excall_count=result.excall_count,
            output=result.output,
        )

    @staticmethod
    def _env(header: BlockHeader) -> BlockEnv:
        return BlockEnv(number=header.number, timestamp=header.timestamp, parent_digest=header.parent_digest)

    def _discover_intentions(self, transactions: Sequence[Transaction], env: BlockEnv) -> list[Intention]:
        """Dry-run transactions in order over a scratch state."""
        scratch = self._state.copy()
        intentions = []
        for index, tx in enumerate(transactions):
            _, result = self._execute_tx(scratch, tx, index, ExecMode.DRY_RUN, env, ZERO_DIGEST)
            # The dry run stops at the first EXCALL, so only call_index 0 is
            # declared. Later calls of a multi-call tx are performed without
            # an intention and bound only through excall_nonce.
            for template in result.intentions:
                intentions.append(Intention(tx_index=index, call_index=0, uri_template=template))
        return intentions

    # -- block production --------------------------------------------------

    def sealer_key_for(self, number: int) -> Optional[KeyPair]:
        return self._sealer_keys.get(self.config.sealer_for(number))

    def next_block_time(self) -> int:
        return self.head().timestamp + self.config.block_period_ms

    def build_block(self, now: Optional[int] = None) -> Block:
        """
        Assemble an unsealed block and commit to its external-call intentions.

        Raises:
            NotSealerTurn: If this node holds no key for the next slot.
            ChainError: If now is earlier than the block period allows.
        """
        with self._lock:
            parent = self._blocks[-1].header
            number = parent.number + 1
            key = self.sealer_key_for(number)
            if key is None:
                raise NotSealerTurn(f"{self.name}: block {number} belongs to another sealer")
            earliest = parent.timestamp + self.config.block_period_ms
            timestamp = max(earliest, int(time.time() * 1000)) if now is None else now
            if timestamp < earliest:
                raise ChainError(f"block {number} at {timestamp} is before {earliest}")

            transactions = self.mempool.select(self._state.nonce, self.config.max_txs_per_block)
            header = BlockHeader(
                parent_digest=self._digests[-1],
                number=number,
                timestamp=timestamp,
                tx_root=tx_root(transactions),
                intent_root=ZERO_DIGEST,
                sealer=key.address,
            )
            intentions = self._discover_intentions(transactions, self._env(header))
            block = Block(
                header=header.model_copy(update={"intent_root": intent_root(intentions)}),
                transactions=tuple(transactions),
            )
        self._emit("intention_fixed", {"number": number, "intention_hash": intention_hash(block)})
        return block

    def finalize_excalls(self, block: Block) -> Block:
        """Perform the block's external calls and fill in extension and state root."""
        with self._lock:
            ih = intention_hash(block)
            env = self._env(block.header)
            state = self._state.copy()
            extension: list[ExtensionEntry] = []
            for index, tx in enumerate(block.transactions):
                _, result = self._execute_tx(state, tx, index, ExecMode.FINALIZE, env, ih)
                extension.extend(result.performed_calls)
            header = block.header.model_copy(update={"state_root": state.state_root()})
        for entry in extension:
            if entry.outcome is not CallOutcome.RECORDED:
                logger.warning("%s: block %d tx %d call %d recorded %s",
                               self.name, header.number, entry.tx_index, entry.call_index, entry.outcome.value)
        return block.model_copy(update={"header": header, "excall_extension": tuple(extension)})

    def seal_block(self, block: Block) -> Block:
        key = self.sealer_key_for(block.number)
        if key is None:
            raise NotSealerTurn(f"{self.name}: no key for block {block.number}")
        return block.model_copy(update={"seal": key.sign_seal(sealed_digest(block))})

    def produce_block(self, now: Optional[int] = None) -> Block:
        """Build, finalize, seal and apply the next block."""
        block = self.seal_block(self.finalize_excalls(self.build_block(now)))
        self.apply_block(block)
        self.metrics.blocks_produced += 1
        logger.info("%s: produced block %d with %d txs and %d external calls",
                    self.name, block.number, len(block.transactions), len(block.excall_extension))
        return block

    # -- verification ------------------------------------------------------

    def verify_seal(self, block: Block) -> bool:
        """Round-robin authority and seal signature."""
        expected = self.config.sealer_for(block.number)
        if block.header.sealer != address_of(expected):
            return False
        return verify_seal_signature(expected, sealed_digest(block), block.seal)

    def verify_block(self, block: Block) -> Verdict:
        """Check block against the current head without changing anything."""
        with self._lock:
            verdict, _ = self._verify(block)
            return verdict

    def _verify(self, block: Block) -> tuple[Verdict, Optional[_Execution]]:
        try:
            return Verdict.accept(), self._check(block)
        except _Reject as reject:
            return reject.verdict, None

    def _check(self, block: Block) -> _Execution:
        header = block.header
        parent = self._blocks[-1].header
        if header.parent_digest != self._digests[-1] or header.number != parent.number + 1:
            raise _Reject(RejectReason.PARENT_MISMATCH, f"block {header.number} does not extend head {parent.number}")
        if header.timestamp < parent.timestamp + self.config.block_period_ms:
            raise _Reject(RejectReason.BAD_TIMESTAMP, "timestamp within the block period")
        if len(block.transactions) > self.config.max_txs_per_block:
            raise _Reject(RejectReason.BAD_HEADER, "too many transactions")
        if header.sealer != address_of(self.config.sealer_for(header.number)):
            raise _Reject(RejectReason.OUT_OF_TURN_SEALER, f"sealer {header.sealer.hex()} out of turn")
        if not self.verify_seal(block):
            raise _Reject(RejectReason.BAD_SEAL, "seal does not verify")
        if tx_root(block.transactions) != header.tx_root:
            raise _Reject(RejectReason.TX_ROOT_MISMATCH, "transactions do not match tx_root")
        self._check_extension_shape(block)

        env = self._env(header)
        if intent_root(self._discover_intentions(block.transactions, env)) != header.intent_root:
            raise _Reject(RejectReason.INTENTION_MISMATCH, "declared intentions differ from the transactions")

        ih = intention_hash(block)
        state = self._state.copy()
        receipts = []
        for index, tx in enumerate(block.transactions):
            if tx.account_nonce != state.nonce(tx.sender):
                raise _Reject(RejectReason.BAD_TX_NONCE, f"tx {index} nonce {tx.account_nonce}")
            entries = block.entries_for(index)
            receipt, result = self._execute_tx(state, tx, index, ExecMode.VERIFY, env, ih, entries)
            if result.fault is not None:
                raise _Reject(_FAULT_REASONS[result.fault], f"tx {index}: {result.error}")
            if tx.mode is CallMode.SEALER_EXECUTES and result.consumed != len(entries):
                raise _Reject(
                    RejectReason.UNEXPECTED_EXTENSION_ENTRY,
                    f"tx {index} used {result.consumed} of {len(entries)} recorded calls",
                )
            receipts.append(receipt)

        if state.state_root() != header.state_root:
            raise _Reject(RejectReason.STATE_ROOT_MISMATCH, "state root differs after replay")
        return _Execution(state=state, receipts=receipts, extension=list(block.excall_extension))

    @staticmethod
    def _check_extension_shape(block: Block) -> None:
        expected_next: dict[int, int] = {}
        last = (-1, -1)
        for entry in block.excall_extension:
            position = (entry.tx_index, entry.call_index)
            if position <= last:
                raise _Reject(RejectReason.MALFORMED_EXTENSION, "entries out of order or duplicated")
            last = position
            if entry.tx_index >= len(block.transactions):
                raise _Reject(RejectReason.MALFORMED_EXTENSION, f"entry for missing tx {entry.tx_index}")
            if block.transactions[entry.tx_index].mode is CallMode.INITIATOR_ATTACHED:
                raise _Reject(RejectReason.MALFORMED_EXTENSION, "entry for an initiator-attached tx")
            if entry.call_index != expected_next.get(entry.tx_index, 0):
                raise _Reject(RejectReason.MALFORMED_EXTENSION, f"gap in calls of tx {entry.tx_index}")
            expected_next[entry.tx_index] = entry.call_index + 1
        for index, tx in enumerate(block.transactions):
            if tx.mode is CallMode.SEALER_EXECUTES and tx.excalls:
                raise _Reject(RejectReason.MALFORMED_EXTENSION, f"tx {index} carries calls outside the extension")

    # -- application -------------------------------------------------------

    def apply_block(self, block: Block) -> WorldState:
        """
        Verify block, append it to the log and make it the new head.

        Raises:
            BlockRejected: If verification fails.
            ChainHalted: If the node is halted or the log write fails.
        """
        with self._lock:
            if self.halted:
                raise ChainHalted(f"{self.name} is halted")
            verdict, execution = self._verify(block)
            if not verdict.accepted:
                self.metrics.blocks_rejected += 1
                self.metrics.rejections[verdict.reason] += 1
                logger.warning("%s: rejected block %d: %s (%s)",
                               self.name, block.number, verdict.reason.value, verdict.detail)
                raise BlockRejected(verdict)

            if self._log is not None:
                try:
                    self._log.append(block)
                except OSError as e:
                    self.halted = True
                    logger.error("%s: block log write failed, halting: %s", self.name, e)
                    raise ChainHalted(f"block log write failed: {e}") from e

            self._state = execution.state
            self._blocks.append(block)
            self._digests.append(block_digest(block))
            self._block_receipts.append(execution.receipts)
            for index, receipt in enumerate(execution.receipts):
                self._receipts[receipt.tx_digest] = ReceiptRecord(receipt, block.number, index)
                self.metrics.receipts[receipt.status] += 1
            for entry in block.excall_extension:
                self.metrics.recorded_outcomes[entry.outcome] += 1
            self.metrics.blocks_applied += 1
            self.metrics.txs_applied += len(block.transactions)
            self.mempool.prune(self._state.nonce)
            state = self._state

        logger.debug("%s: applied block %d", self.name, block.number)
        self._emit("block_applied", {"number": block.number, "digest": self._digests[block.number]})
        return state

    def state_root(self) -> bytes:
        with self._lock:
            return self._state.state_root()

    def replay(self, blocks: Iterable[Block]) -> int:
        """Apply blocks in order, skipping any already applied; returns how many were applied."""
        applied = 0
        for block in blocks:
            if block.number == 0:
                if block_digest(block) != self.genesis_digest:
                    raise GenesisMismatch("replayed chain starts from a different genesis")
                continue
            if block.number <= self.height:
                if block_digest(block) != self._digests[block.number]:
                    raise BlockRejected(Verdict.reject(RejectReason.PARENT_MISMATCH, "conflicting history"))
                continue
            self.apply_block(block)
            applied += 1
        return applied

    def replay_log(self, path: Path) -> int:
        return self.replay(read_blocks(path))
