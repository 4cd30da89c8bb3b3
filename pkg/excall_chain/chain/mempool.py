"""Pending transactions, queued per sender in nonce order."""

import itertools
import threading
from typing import Callable

from ..core.types import Transaction


class Mempool:
    """
    Per-sender queues of pending transactions.

    Selection never skips a nonce. Among senders whose next transaction is
    ready, the one that arrived first goes first.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._queues: dict[bytes, dict[int, tuple[int, Transaction]]] = {}
        self._arrivals = itertools.count()

    def __len__(self) -> int:
        with self._lock:
            return sum(len(queue) for queue in self._queues.values())

    def contains(self, sender: bytes, account_nonce: int) -> bool:
        with self._lock:
            return account_nonce in self._queues.get(sender, {})

    def add(self, tx: Transaction) -> bool:
        """Queue tx; False if the sender already has a pending tx with that nonce."""
        with self._lock:
            queue = self._queues.setdefault(tx.sender, {})
            if tx.account_nonce in queue:
                return False
            queue[tx.account_nonce] = (next(self._arrivals), tx)
            return True

    def highest_nonce(self, sender: bytes) -> int | None:
        with self._lock:
            queue = self._queues.get(sender)
            return max(queue) if queue else None

    def select(self, expected_nonce: Callable[[bytes], int], limit: int) -> list[Transaction]:
        """Pick up to limit gap-free transactions without removing them."""
        with self._lock:
            cursor = {sender: expected_nonce(sender) for sender in self._queues}
            chosen: list[Transaction] = []
            while len(chosen) < limit:
                ready = [
                    (queue[cursor[sender]][0], sender)
                    for sender, queue in self._queues.items()
                    if cursor[sender] in queue
                ]
                if not ready:
                    break
                _, sender = min(ready)
                chosen.append(self._queues[sender][cursor[sender]][1])
                cursor[sender] += 1
            return chosen

    def prune(self, current_nonce: Callable[[bytes], int]) -> int:
        """Drop transactions whose nonce is already used on-chain."""
        dropped = 0
        with self._lock:
            for sender in list(self._queues):
                queue = self._queues[sender]
                floor = current_nonce(sender)
                for nonce in [n for n in queue if n < floor]:
                    del queue[nonce]
                    dropped += 1
                if not queue:
                    del self._queues[sender]
        return dropped
