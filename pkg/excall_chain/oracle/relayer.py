"""
Standard-oracle relayer.

Watches applied blocks for BetPlaced events from the betting contract and
answers each with a continueBetOracle transaction sent from the oracle
account. An event whose outcome or callback fails is tried again on the
next poll. The cursor is persisted so a restarted relayer neither skips
nor repeats an event.
"""

import json
import logging
import threading
from pathlib import Path
from typing import Callable, Iterable, NamedTuple, Optional, Protocol

from ..clients.oracle import ExcallPort, ExcallTransportError, HttpExcallPort
from ..chain.node import SubmitRejection, SubmitResult
from ..chain.query import ChainQuery
from ..core.types import Transaction
from ..crypto import KeyPair, hash_bytes, verify_response
from ..vm.abi import encode_call, topic
from .service import WIN, OracleService

logger = logging.getLogger(__name__)

BET_PLACED = topic("BetPlaced")
MAX_SUBMIT_ATTEMPTS = 3


class BetEvent(NamedTuple):
    block_number: int
    punter: bytes
    oracle_ref: int


def decode_bet_placed(data: bytes) -> tuple[bytes, int]:
    """BetPlaced data is the punter word followed by the reference word."""
    if len(data) != 64:
        raise ValueError(f"BetPlaced data must be 64 bytes, got {len(data)}")
    return data[12:32], int.from_bytes(data[32:64], "big")


def outcome_nonce(contract: bytes, punter: bytes, oracle_ref: int) -> bytes:
    return hash_bytes(b"EXCALL-RELAY" + contract + punter + oracle_ref.to_bytes(32, "big"))


# ---------------------------------------------------------------------------
# Outcome sources
# ---------------------------------------------------------------------------

class OutcomeSource(Protocol):
    def outcome(self, contract: bytes, punter: bytes, oracle_ref: int) -> bool: ...


class LocalOutcomes:
    """Draws outcomes from an in-process service."""

    def __init__(self, service: OracleService) -> None:
        self.service = service

    def outcome(self, contract: bytes, punter: bytes, oracle_ref: int) -> bool:
        return self.service.answer(outcome_nonce(contract, punter, oracle_ref)).response == WIN


class ServiceOutcomes:
    """
    Fetches each outcome from an oracle service and checks its signature
    against the pinned key before trusting it.
    """

    def __init__(self, url: str, public_key: bytes, port: Optional[ExcallPort] = None, timeout: float = 2.0) -> None:
        self.url = url.rstrip("/")
        self.public_key = public_key
        self.port = port or HttpExcallPort()
        self.timeout = timeout

    def outcome(self, contract: bytes, punter: bytes, oracle_ref: int) -> bool:
        nonce = outcome_nonce(contract, punter, oracle_ref)
        envelope = self.port.fetch(f"{self.url}/excallrand?nonce={nonce.hex()}", self.timeout)
        if envelope.public_key != self.public_key:
            raise ExcallTransportError("outcome signed by an unexpected key")
        if not verify_response(envelope.public_key, envelope.response, nonce, envelope.signature):
            raise ExcallTransportError("outcome signature does not verify")
        return envelope.response == WIN


# ---------------------------------------------------------------------------
# Cursor
# ---------------------------------------------------------------------------

class RelayerCursor:
    """
    Last fully answered block, plus the refs already answered past it.

    Optionally persisted as JSON so a restart resumes where it stopped.
    """

    def __init__(self, path: Optional[Path] = None) -> None:
        self.path = Path(path) if path else None
        self.block = 0
        self.answered: set[int] = set()
        if self.path is not None and self.path.exists():
            saved = json.loads(self.path.read_text(encoding="utf-8"))
            self.block = int(saved["block"])
            self.answered = {int(ref) for ref in saved.get("answered", [])}

    def mark_answered(self, oracle_ref: int) -> None:
        self.answered.add(oracle_ref)
        self._save()

    def advance(self, block: int, settled: Iterable[int] = ()) -> None:
        """Move past block; refs in settled no longer need remembering."""
        self.block = block
        self.answered.difference_update(settled)
        self._save()

    def _save(self) -> None:
        if self.path is None:
            return
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        tmp.write_text(json.dumps({"block": self.block, "answered": sorted(self.answered)}), encoding="utf-8")
        tmp.replace(self.path)


# ---------------------------------------------------------------------------
# Relayer
# ---------------------------------------------------------------------------

class Relayer:
    """
    Answers BetPlaced events with continueBetOracle callbacks.

    Args:
        query: Read access to a node's chain.
        submit: Sends a transaction to the sealers.
        contract: Address of the standard betting contract.
        account: The oracle account named in the contract's constructor.
        outcomes: Where punter outcomes come from.
        cursor_path: File holding the last processed block.
    """

    def __init__(
        self,
        query: ChainQuery,
        submit: Callable[[Transaction], SubmitResult],
        contract: bytes,
        account: KeyPair,
        outcomes: OutcomeSource,
        cursor_path: Optional[Path] = None,
    ) -> None:
        self.query = query
        self.submit = submit
        self.contract = contract
        self.account = account
        self.address = account.address
        self.outcomes = outcomes
        self.cursor = RelayerCursor(cursor_path)
        self.callbacks_sent = 0
        self._next_nonce: Optional[int] = None
        self._stop = threading.Event()

    def pending_events(self) -> list[BetEvent]:
        head = self.query.head().number
        events = []
        for record in self.query.scan_events(BET_PLACED, self.cursor.block + 1, head):
            if record.event.contract != self.contract:
                continue
            punter, ref = decode_bet_placed(record.event.data)
            events.append(BetEvent(record.block_number, punter, ref))
        return events

    def poll(self) -> int:
        """
        Answer events in blocks after the cursor; returns callbacks sent.

        An event that could not be answered keeps the cursor at the block
        before it, so the next poll tries it again. Later events are still
        answered and remembered in the cursor.
        """
        head = self.query.head().number
        if head <= self.cursor.block:
            return 0
        events = self.pending_events()
        sent = 0
        first_unanswered: Optional[int] = None
        for event in events:
            if event.oracle_ref in self.cursor.answered:
                continue
            if self._answer(event):
                sent += 1
                self.cursor.mark_answered(event.oracle_ref)
            elif first_unanswered is None:
                first_unanswered = event.block_number
        done_through = head if first_unanswered is None else first_unanswered - 1
        if done_through > self.cursor.block:
            self.cursor.advance(done_through, [e.oracle_ref for e in events if e.block_number <= done_through])
        return sent

    def _answer(self, event: BetEvent) -> bool:
        try:
            won = self.outcomes.outcome(self.contract, event.punter, event.oracle_ref)
        except ExcallTransportError as e:
            logger.warning("relayer: no outcome for ref %d: %s", event.oracle_ref, e)
            return False
        data = encode_call("continueBetOracle", event.punter, event.oracle_ref, won)

        for _ in range(MAX_SUBMIT_ATTEMPTS):
            nonce = self._take_nonce()
            tx = Transaction(sender=self.address, account_nonce=nonce, target=self.contract, input=data)
            result = self.submit(tx)
            if result.accepted:
                self.callbacks_sent += 1
                logger.info("relayer: answered ref %d for %s (won=%s) with nonce %d",
                            event.oracle_ref, event.punter.hex()[:12], won, nonce)
                return True
            if result.reason not in (SubmitRejection.STALE_NONCE, SubmitRejection.DUPLICATE_NONCE):
                break
            self._next_nonce = None
        logger.warning("relayer: callback for ref %d was not accepted", event.oracle_ref)
        return False

    def _take_nonce(self) -> int:
        on_chain = self.query.next_nonce(self.address)
        nonce = on_chain if self._next_nonce is None else max(self._next_nonce, on_chain)
        self._next_nonce = nonce + 1
        return nonce

    def run(self, poll_interval: float = 0.1) -> None:
        """Poll until stop() is called."""
        logger.info("relayer started for contract %s from block %d", self.contract.hex(), self.cursor.block)
        while not self._stop.is_set():
            self.poll()
            self._stop.wait(poll_interval)
        logger.info("relayer stopped at block %d", self.cursor.block)

    def stop(self) -> None:
        self._stop.set()
