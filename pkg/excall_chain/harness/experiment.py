"""
Throughput experiment: many punters betting against either contract.

Each initiator submits all of its bets at once with consecutive nonces,
then follows every bet until it is resolved. With the external-call
contract a bet is resolved by the block that includes it; with the
standard contract it is resolved when the relayer's callback lands in a
later block.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import simpy

from ..chain.state import pending_key
from ..clients.oracle import HttpExcallPort, LocalExcallPort
from ..config import (
    ExperimentConfig,
    Implementation,
    account_keypair,
    oracle_keypair,
    save_chain_config,
    sealer_keypair,
    simulation_chain_config,
)
from ..core.types import ReceiptStatus, Transaction
from ..crypto import KeyPair
from ..netsim.network import NodeRole, SimNetwork, SimNode
from ..oracle.relayer import BET_PLACED, LocalOutcomes, Relayer, ServiceOutcomes, decode_bet_placed
from ..oracle.service import OracleService
from ..vm.abi import encode_call
from .samples import SampleContracts, deploy_samples

logger = logging.getLogger(__name__)


@dataclass
class RunResult:
    impl: Implementation
    initiators: int
    iterations: int
    repeat: int
    wall_ms: float = 0.0
    blocks: int = 0
    failed_txs: int = 0
    complete: bool = True
    resolved_bets: int = 0
    total_winnings: int = 0
    oracle_wins: Optional[int] = None
    verifier_excalls: int = 0
    block_spans: list[int] = field(default_factory=list)
    heads_agree: bool = True


@dataclass
class ExperimentReport:
    runs: list[RunResult] = field(default_factory=list)

    def extend(self, other: "ExperimentReport") -> None:
        self.runs.extend(other.runs)


@dataclass
class Session:
    config: ExperimentConfig
    network: SimNetwork
    observer: SimNode
    contracts: SampleContracts
    service: OracleService
    result: RunResult


def build_session(cfg: ExperimentConfig, repeat: int) -> Session:
    service = OracleService(oracle_keypair(cfg.oracle_key_seed), cfg.win_probability, cfg.oracle_seed + repeat)
    oracle_url = cfg.oracle_url.rstrip("/")
    port = HttpExcallPort() if cfg.external_oracle else LocalExcallPort({oracle_url: service})
    chain_config = simulation_chain_config(
        oracle_url, service.public_key, block_period_ms=cfg.block_period_ms,
    )
    network = SimNetwork(
        chain_config,
        latency_ms=cfg.link_latency_ms,
        excall_latency_ms=cfg.excall_latency_ms,
        seed=repeat,
        realtime=cfg.realtime,
    )
    block_log = None
    if cfg.block_log_dir is not None:
        block_log = cfg.block_log_dir / f"{cfg.impl.value}-{cfg.initiators}x{cfg.iterations}-r{repeat}.log"
        block_log.unlink(missing_ok=True)
        save_chain_config(chain_config, block_log)
    network.spawn_node(
        NodeRole.SEALER,
        name="sealer",
        sealer_keys=[sealer_keypair(i) for i in range(len(chain_config.sealer_keys))],
        excall_port=port,
        block_log=block_log,
    )
    for i in range(cfg.verifiers):
        network.spawn_node(NodeRole.VERIFIER, name=f"verifier-{i}")
    observer = network.verifiers[0] if network.verifiers else network.sealers[0]

    relayer_account = account_keypair("relayer")
    contracts = deploy_samples(network, account_keypair("deployer"), relayer_account.address, oracle_url)
    network.settle()

    if cfg.impl is Implementation.STANDARD:
        if cfg.external_oracle:
            outcomes = ServiceOutcomes(oracle_url, service.public_key)
        else:
            outcomes = LocalOutcomes(service)
        relayer = Relayer(observer.chain, network.submit, contracts.standard, relayer_account, outcomes)
        observer.subscribe(lambda node, block: relayer.poll())

    result = RunResult(cfg.impl, cfg.initiators, cfg.iterations, repeat)
    return Session(cfg, network, observer, contracts, service, result)


@dataclass
class _Bet:
    digest: bytes
    placed_in: Optional[int] = None
    ref: Optional[int] = None


def _place_bets(session: Session, punter: KeyPair, target: bytes, data: bytes) -> list[_Bet]:
    """Submit every bet up front with consecutive nonces."""
    network = session.network
    sealer = network.sealers[0].chain
    bets = []
    for _ in range(session.config.iterations):
        tx = Transaction(
            sender=punter.address, account_nonce=sealer.next_nonce(punter.address), target=target, input=data,
        )
        submitted = network.submit(tx)
        if not submitted.accepted:
            # Later nonces would queue behind the gap forever.
            logger.warning("bet from %s refused: %s", punter.address.hex()[:12], submitted.detail)
            session.result.failed_txs += 1
            session.result.complete = False
            break
        bets.append(_Bet(submitted.tx_digest))
    return bets


def _initiator(session: Session, punter: KeyPair):
    cfg = session.config
    env = session.network.env
    chain = session.observer.chain
    standard = cfg.impl is Implementation.STANDARD
    target = session.contracts.standard if standard else session.contracts.excall
    data = encode_call("beginBetOracle" if standard else "betEXCALL")

    bets = _place_bets(session, punter, target, data)
    deadline = env.now + cfg.bet_timeout_ms
    while bets:
        still_open = []
        for bet in bets:
            if bet.placed_in is None:
                record = chain.receipt(bet.digest)
                if record is None:
                    still_open.append(bet)
                    continue
                if not record.receipt.succeeded:
                    continue
                bet.placed_in = record.block_number
                if standard:
                    bet.ref = next(
                        decode_bet_placed(event.data)[1]
                        for event in record.receipt.events
                        if event.topic == BET_PLACED
                    )
            resolved_at = bet.placed_in
            if standard:
                if chain.state.read(target, pending_key(bet.ref)) != 0:
                    still_open.append(bet)
                    continue
                # woken on every observer block, so the head is the settling block
                resolved_at = chain.height
            session.result.resolved_bets += 1
            session.result.block_spans.append(resolved_at - bet.placed_in + 1)
        bets = still_open
        if not bets:
            return
        if env.now >= deadline:
            session.result.complete = False
            return
        yield session.observer.next_block() | env.timeout(deadline - env.now)


def run_once(cfg: ExperimentConfig, repeat: int = 0) -> RunResult:
    """Run one repeat of cfg on a fresh network."""
    session = build_session(cfg, repeat)
    network = session.network
    env = network.env
    start_ms = env.now
    start_height = session.observer.height
    punters = [account_keypair(f"punter-{i}") for i in range(cfg.initiators)]

    processes = [env.process(_initiator(session, punter)) for punter in punters]
    env.run(until=simpy.AllOf(env, processes))
    network.settle()

    result = session.result
    result.wall_ms = env.now - start_ms
    result.blocks = session.observer.height - start_height
    chain = session.observer.chain
    for number in range(start_height + 1, chain.height + 1):
        result.failed_txs += sum(1 for r in chain.receipts_for(number) if r.status is not ReceiptStatus.SUCCESS)
    target = session.contracts.standard if cfg.impl is Implementation.STANDARD else session.contracts.excall
    result.total_winnings = sum(chain.winnings(target, punter.address) for punter in punters)
    if not cfg.external_oracle:
        result.oracle_wins = session.service.wins
    result.verifier_excalls = sum(node.chain.excall_count for node in network.verifiers)
    result.heads_agree = network.heads_agree()
    logger.info(
        "%s initiators=%d iterations=%d repeat=%d: %.0f ms, %d blocks, %d failed%s",
        cfg.impl.value, cfg.initiators, cfg.iterations, repeat, result.wall_ms, result.blocks,
        result.failed_txs, "" if result.complete else " (incomplete)",
    )
    return result


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run cfg.repeats independent repeats; each uses its own oracle seed."""
    return ExperimentReport([run_once(cfg, repeat) for repeat in range(cfg.repeats)])
