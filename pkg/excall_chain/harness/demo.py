"""One bet on each contract, traced step by step."""

from typing import Callable

from ..config import DEFAULT_ORACLE_URL, ExperimentConfig, Implementation, account_keypair
from ..core.types import Transaction
from ..vm.abi import encode_call
from .experiment import build_session


def run_demo(emit: Callable[[str], None] = print, oracle_url: str = DEFAULT_ORACLE_URL) -> list[str]:
    """Place a single bet through each implementation and report what happened."""
    lines: list[str] = []

    def say(line: str) -> None:
        lines.append(line)
        emit(line)

    for impl in (Implementation.EXCALL, Implementation.STANDARD):
        cfg = ExperimentConfig(impl=impl, initiators=1, iterations=1, repeats=1, oracle_url=oracle_url,
                               win_probability=1)
        session = build_session(cfg, 0)
        network = session.network
        sealer = network.sealers[0].chain
        say(f"== {impl.value}: contracts deployed at block {sealer.height}")

        def trace(name: str, data: dict) -> None:
            if name == "intention_fixed":
                say(f"  block {data['number']}: intentions fixed, hash {data['intention_hash'].hex()[:16]}")
            elif name == "excall_performed":
                say(f"  external call {data['uri']}")
            elif name == "block_applied":
                say(f"  block {data['number']} applied")

        sealer.add_hook(trace)

        punter = account_keypair("punter-0")
        target = session.contracts.excall if impl is Implementation.EXCALL else session.contracts.standard
        data = encode_call("betEXCALL" if impl is Implementation.EXCALL else "beginBetOracle")
        tx = Transaction(sender=punter.address, account_nonce=sealer.next_nonce(punter.address), target=target, input=data)
        result = network.submit(tx)
        say(f"  submitted bet {result.tx_digest.hex()[:16]} accepted={result.accepted}")
        network.run_blocks(1 if impl is Implementation.EXCALL else 2)

        record = sealer.receipt(result.tx_digest)
        say(f"  bet receipt: block {record.block_number} status {record.receipt.status.value}")
        say(f"  winnings of punter: {sealer.winnings(target, punter.address)}")
        say(f"  verifier external calls: {sum(n.chain.excall_count for n in network.verifiers)}")
    return lines
