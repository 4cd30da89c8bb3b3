"""The two shipped betting contracts: loading, sizing and deployment."""

import logging
from dataclasses import dataclass
from pathlib import Path

from ..config import DEFAULT_ORACLE_URL
from ..core.digests import tx_identity
from ..core.types import Transaction
from ..crypto import KeyPair
from ..vm.abi import contract_address, deploy_input
from ..vm.assembler import AssembleError, assemble
from ..vm.program import ContractProgram

logger = logging.getLogger(__name__)

CONTRACTS_DIR = Path(__file__).resolve().parent.parent / "vm" / "contracts"
STANDARD_CONTRACT = "betting_standard.easm"
EXCALL_CONTRACT = "betting_excall.easm"


class DeployError(Exception):
    """A sample contract failed to assemble or to deploy."""


@dataclass(frozen=True)
class SampleContracts:
    standard: bytes
    excall: bytes


def contract_source(name: str) -> str:
    return (CONTRACTS_DIR / name).read_text(encoding="utf-8")


def load_contract(name: str, oracle_url: str = DEFAULT_ORACLE_URL) -> ContractProgram:
    """
    Assemble a shipped contract with ${ORACLE_URL} filled in.

    Raises:
        DeployError: With the assembler's line diagnostics.
    """
    try:
        return assemble(contract_source(name), constants={"ORACLE_URL": oracle_url.rstrip("/")})
    except AssembleError as e:
        raise DeployError(f"{name}: {e}") from e


def instruction_counts(oracle_url: str = DEFAULT_ORACLE_URL) -> dict[str, int]:
    return {
        name: load_contract(name, oracle_url).instruction_count
        for name in (STANDARD_CONTRACT, EXCALL_CONTRACT)
    }


def sample_deploy_txs(
    deployer: bytes, first_nonce: int, oracle_account: bytes, oracle_url: str = DEFAULT_ORACLE_URL
) -> tuple[list[Transaction], SampleContracts]:
    """Deploy transactions for both contracts and the addresses they will get."""
    standard = load_contract(STANDARD_CONTRACT, oracle_url)
    excall = load_contract(EXCALL_CONTRACT, oracle_url)
    txs = [
        Transaction(sender=deployer, account_nonce=first_nonce, input=deploy_input(standard, oracle_account)),
        Transaction(sender=deployer, account_nonce=first_nonce + 1, input=deploy_input(excall)),
    ]
    contracts = SampleContracts(
        standard=contract_address(deployer, first_nonce),
        excall=contract_address(deployer, first_nonce + 1),
    )
    return txs, contracts


def deploy_samples(network, deployer: KeyPair, oracle_account: bytes, oracle_url: str = DEFAULT_ORACLE_URL) -> SampleContracts:
    """
    Deploy both contracts on a simulated network and wait for their block.

    The standard contract is constructed with oracle_account as the only
    address allowed to answer bets.

    Raises:
        DeployError: If assembly, submission or deployment fails.
    """
    sealer = network.sealers[0].chain
    txs, contracts = sample_deploy_txs(deployer.address, sealer.next_nonce(deployer.address), oracle_account, oracle_url)
    for tx in txs:
        result = network.submit(tx)
        if not result.accepted:
            raise DeployError(f"deploy rejected: {result.reason.value} {result.detail}")
    network.run_blocks(1)
    for tx in txs:
        record = sealer.receipt(tx_identity(tx))
        if record is None or not record.receipt.succeeded:
            status = record.receipt.status.value if record else "not included"
            raise DeployError(f"deploy of nonce {tx.account_nonce} failed: {status}")
    logger.info("deployed standard contract %s and excall contract %s",
                contracts.standard.hex(), contracts.excall.hex())
    return contracts
