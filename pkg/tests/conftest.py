"""Shared fixtures: an oracle service, a two-key sealer and a verifier on one chain."""

from fractions import Fraction

import pytest

from excall_chain.chain.node import ChainNode
from excall_chain.clients.oracle import LocalExcallPort
from excall_chain.config import account_keypair, oracle_keypair, sealer_keypair, simulation_chain_config
from excall_chain.core.digests import tx_identity
from excall_chain.harness.samples import sample_deploy_txs
from excall_chain.oracle.service import OracleService

ORACLE_URL = "http://oracle.test"


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for name in (
        "EXCALL_BLOCK_PERIOD_MS",
        "EXCALL_STEP_LIMIT",
        "EXCALL_EXCALL_TIMEOUT_MS",
        "EXCALL_ORACLE_URL",
        "EXCALL_ORACLE_KEY_SEED",
        "EXCALL_WIN_PROB",
        "EXCALL_ORACLE_SEED",
        "EXCALL_BLOCK_LOG",
        "EXCALL_ORACLE_BIND",
        "EXCALL_LOG_LEVEL",
    ):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def oracle_service():
    return OracleService(oracle_keypair(1), Fraction(1, 2), seed=7)


@pytest.fixture
def winning_service():
    return OracleService(oracle_keypair(1), 1, seed=7)


@pytest.fixture
def chain_config(oracle_service):
    return simulation_chain_config(ORACLE_URL, oracle_service.public_key)


@pytest.fixture
def port(winning_service):
    return LocalExcallPort({ORACLE_URL: winning_service})


@pytest.fixture
def sealer(chain_config, port):
    return ChainNode(
        chain_config,
        sealer_keys=[sealer_keypair(0), sealer_keypair(1)],
        excall_port=port,
        name="sealer",
    )


@pytest.fixture
def verifier(chain_config):
    return ChainNode(chain_config, name="verifier")


@pytest.fixture
def punter():
    return account_keypair("punter-0")


@pytest.fixture
def relayer_account():
    return account_keypair("relayer")


def produce(sealer, *followers):
    """Produce the next block on sealer at its earliest time and apply it to followers."""
    block = sealer.produce_block(now=sealer.next_block_time())
    for node in followers:
        node.apply_block(block)
    return block


@pytest.fixture
def contracts(sealer, verifier, relayer_account):
    """Both betting contracts deployed in block 1 and applied on the verifier."""
    deployer = account_keypair("deployer")
    txs, deployed = sample_deploy_txs(deployer.address, 0, relayer_account.address, ORACLE_URL)
    for tx in txs:
        assert sealer.submit_tx(tx).accepted
    produce(sealer, verifier)
    for tx in txs:
        assert sealer.receipt(tx_identity(tx)).receipt.succeeded
    return deployed
