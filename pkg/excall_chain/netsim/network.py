"""
In-process multi-node network driven by simpy.

Time is measured in milliseconds of simulated time and doubles as the block
timestamp clock. Every ordered pair of nodes has its own link process, so
messages between two nodes arrive in the order they were sent, never before
the link latency has elapsed, and are never lost.
"""

import logging
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Optional, Sequence

import simpy
from simpy.rt import RealtimeEnvironment

from ..clients.oracle import ExcallPort
from ..config import ChainConfig
from ..core.types import Block, Transaction
from ..crypto import KeyPair
from ..chain.node import (
    BlockRejected,
    ChainHalted,
    ChainNode,
    GenesisMismatch,
    NotSealerTurn,
    SubmitRejection,
    SubmitResult,
    genesis_block,
)
from ..core.digests import block_digest, tx_identity

logger = logging.getLogger(__name__)


class NodeRole(str, Enum):
    SEALER = "sealer"
    VERIFIER = "verifier"


@dataclass(frozen=True)
class Delivery:
    source: str
    destination: str
    block_number: int
    sent_at: float
    received_at: float


class SimNode:
    """A chain node plus its place on the simulated network."""

    def __init__(self, network: "SimNetwork", name: str, role: NodeRole, chain: ChainNode) -> None:
        self.network = network
        self.name = name
        self.role = role
        self.chain = chain
        self.applied_order: list[int] = []
        self._listeners: list[Callable[["SimNode", Block], None]] = []
        self._block_event = network.env.event()

    @property
    def height(self) -> int:
        return self.chain.height

    def state_root(self) -> bytes:
        return self.chain.state_root()

    def subscribe(self, listener: Callable[["SimNode", Block], None]) -> None:
        """Call listener after every block this node applies."""
        self._listeners.append(listener)

    def next_block(self) -> simpy.Event:
        """Event that fires when this node applies its next block."""
        return self._block_event

    def receive(self, block: Block) -> bool:
        try:
            self.chain.apply_block(block)
        except BlockRejected as e:
            logger.warning("%s: dropped block %d: %s", self.name, block.number, e)
            self.network.rejections.append((self.name, block.number, e.verdict.reason))
            return False
        except ChainHalted as e:
            logger.error("%s: halted: %s", self.name, e)
            return False
        self._applied(block)
        return True

    def _applied(self, block: Block) -> None:
        self.applied_order.append(block.number)
        event, self._block_event = self._block_event, self.network.env.event()
        event.succeed(block)
        for listener in self._listeners:
            listener(self, block)


class SimNetwork:
    """
    Message bus and clock for a set of simulated nodes.

    Args:
        config: Chain configuration new nodes default to.
        latency_ms: Fixed per-link delay.
        jitter_ms: Extra uniform delay in [0, jitter_ms], drawn from a seeded RNG.
        seed: Seed of the jitter RNG.
        excall_latency_ms: Delay a sealer adds per external call before
            broadcasting, standing in for a remote data source.
        realtime: Pace simulated milliseconds against the wall clock.
    """

    def __init__(
        self,
        config: ChainConfig,
        *,
        latency_ms: float = 0,
        jitter_ms: float = 0,
        seed: int = 0,
        excall_latency_ms: float = 0,
        realtime: bool = False,
    ) -> None:
        self.config = config
        self.latency_ms = latency_ms
        self.jitter_ms = jitter_ms
        self.excall_latency_ms = excall_latency_ms
        self._rng = random.Random(seed)
        start = config.genesis_timestamp
        if realtime:
            self.env: simpy.Environment = RealtimeEnvironment(initial_time=start, factor=0.001, strict=False)
        else:
            self.env = simpy.Environment(initial_time=start)
        self.nodes: list[SimNode] = []
        self.deliveries: list[Delivery] = []
        self.rejections: list[tuple] = []
        self._links: dict[tuple[str, str], simpy.Store] = {}
        self._genesis = block_digest(genesis_block(config))

    @property
    def now(self) -> float:
        return self.env.now

    @property
    def sealers(self) -> list[SimNode]:
        return [node for node in self.nodes if node.role is NodeRole.SEALER]

    @property
    def verifiers(self) -> list[SimNode]:
        return [node for node in self.nodes if node.role is NodeRole.VERIFIER]

    # -- membership --------------------------------------------------------

    def spawn_node(
        self,
        role: NodeRole,
        config: Optional[ChainConfig] = None,
        *,
        name: Optional[str] = None,
        sealer_keys: Sequence[KeyPair] = (),
        excall_port: Optional[ExcallPort] = None,
        block_log: Optional[Path] = None,
        catch_up_log: Optional[Path] = None,
    ) -> SimNode:
        """
        Start a node from genesis and connect it to every existing node.

        A node joining after blocks were produced first replays catch_up_log
        (if given) and then whatever it still lacks from an existing peer.

        Raises:
            GenesisMismatch: If config describes a different chain.
            ValueError: If a sealer has no keys or a verifier has any.
        """
        config = config or self.config
        name = name or f"{role.value}-{len(self.nodes)}"
        if role is NodeRole.SEALER and not sealer_keys:
            raise ValueError("a sealer node needs at least one sealer key")
        if role is NodeRole.VERIFIER and (sealer_keys or excall_port is not None):
            raise ValueError("a verifier node holds no sealer keys and no external-call port")

        chain = ChainNode(config, sealer_keys=sealer_keys, excall_port=excall_port, block_log=block_log, name=name)
        if chain.genesis_digest != self._genesis:
            raise GenesisMismatch(f"{name}: genesis {chain.genesis_digest.hex()[:16]} differs from the network's")

        node = SimNode(self, name, role, chain)
        if catch_up_log is not None:
            chain.replay_log(catch_up_log)
        if self.nodes:
            donor = max(self.nodes, key=lambda n: n.height)
            chain.replay(donor.chain.blocks(chain.height + 1))
        if chain.height:
            logger.info("%s: caught up to block %d", name, chain.height)

        for peer in self.nodes:
            self._connect(peer, node)
            self._connect(node, peer)
        self.nodes.append(node)
        if role is NodeRole.SEALER:
            self.env.process(self._sealer_loop(node))
        return node

    def _connect(self, source: SimNode, destination: SimNode) -> None:
        store = simpy.Store(self.env)
        self._links[(source.name, destination.name)] = store
        self.env.process(self._link(store, source, destination))

    # -- messaging ---------------------------------------------------------

    def _delay(self) -> float:
        jitter = self._rng.uniform(0, self.jitter_ms) if self.jitter_ms else 0
        return self.latency_ms + jitter

    def broadcast(self, source: SimNode, block: Block) -> None:
        """Queue block on every link leaving source."""
        for (src, _), store in self._links.items():
            if src == source.name:
                store.put((self.env.now, self._delay(), block))

    def _link(self, store: simpy.Store, source: SimNode, destination: SimNode):
        while True:
            sent_at, delay, block = yield store.get()
            wait = sent_at + delay - self.env.now
            if wait > 0:
                yield self.env.timeout(wait)
            self.deliveries.append(Delivery(source.name, destination.name, block.number, sent_at, self.env.now))
            if block.number > destination.height:
                destination.receive(block)

    def submit(self, tx: Transaction) -> SubmitResult:
        """Hand tx to every sealer's mempool."""
        results = [node.chain.submit_tx(tx) for node in self.sealers]
        if not results:
            return SubmitResult(False, tx_identity(tx), SubmitRejection.CHAIN_HALTED, "no sealers")
        accepted = [result for result in results if result.accepted]
        return accepted[0] if accepted else results[0]

    # -- block production --------------------------------------------------

    def _sealer_loop(self, node: SimNode):
        period = self.config.block_period_ms
        while True:
            due = node.chain.next_block_time()
            if due > self.env.now:
                yield self.env.timeout(due - self.env.now)
            if node.chain.sealer_key_for(node.height + 1) is None:
                # Another sealer's slot: wait for its block, or give it a period.
                yield node.next_block() | self.env.timeout(period)
                continue
            try:
                block = node.chain.produce_block(now=int(self.env.now))
            except (NotSealerTurn, BlockRejected, ChainHalted) as e:
                logger.error("%s: could not produce a block: %s", node.name, e)
                return
            calls = len(block.excall_extension)
            if self.excall_latency_ms and calls:
                yield self.env.timeout(self.excall_latency_ms * calls)
            node._applied(block)
            self.broadcast(node, block)

    # -- running -----------------------------------------------------------

    def run(self, until: Optional[float] = None) -> None:
        self.env.run(until=until)

    def run_blocks(self, count: int) -> None:
        """Advance until the first sealer has produced count more blocks and links drain."""
        if not self.sealers:
            raise ValueError("network has no sealer")
        target = self.sealers[0].height + count
        while self.sealers[0].height < target:
            self.env.run(until=self.sealers[0].next_block())
        self.settle()

    def settle(self) -> None:
        """Run until every node has caught up with the highest head."""
        top = max(node.height for node in self.nodes)
        slack = self.latency_ms + self.jitter_ms + self.excall_latency_ms * 8 + 1
        deadline = self.env.now + slack * (top + 1) + self.config.block_period_ms
        while any(node.height < top for node in self.nodes) and self.env.now < deadline:
            self.env.run(until=self.env.now + max(slack, 1))

    def heads_agree(self) -> bool:
        roots = {(node.height, node.state_root()) for node in self.nodes}
        return len(roots) == 1
