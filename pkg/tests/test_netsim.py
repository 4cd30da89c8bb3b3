import pytest

from excall_chain.chain import GenesisMismatch
from excall_chain.clients.oracle import LocalExcallPort
from excall_chain.config import account_keypair, sealer_keypair, simulation_chain_config
from excall_chain.core.types import Transaction
from excall_chain.harness.samples import deploy_samples
from excall_chain.netsim.network import NodeRole, SimNetwork
from excall_chain.vm import encode_call

from .conftest import ORACLE_URL


def spawn_sealer(network, port, keys=(0, 1), name="sealer"):
    return network.spawn_node(
        NodeRole.SEALER, name=name, sealer_keys=[sealer_keypair(i) for i in keys], excall_port=port,
    )


@pytest.fixture
def network(chain_config):
    return SimNetwork(chain_config, latency_ms=50, seed=1)


def place_bets(network, contract, punters, rounds):
    for nonce in range(rounds):
        for p in punters:
            tx = Transaction(sender=p.address, account_nonce=nonce, target=contract, input=encode_call("betEXCALL"))
            assert network.submit(tx).accepted


class TestReplication:
    def test_one_sealer_three_verifiers(self, network, oracle_service, relayer_account):
        port = LocalExcallPort({ORACLE_URL: oracle_service})
        spawn_sealer(network, port)
        for i in range(3):
            network.spawn_node(NodeRole.VERIFIER, name=f"verifier-{i}")
        contracts = deploy_samples(network, account_keypair("deployer"), relayer_account.address, ORACLE_URL)

        punters = [account_keypair(f"punter-{i}") for i in range(4)]
        place_bets(network, contracts.excall, punters, 1)
        network.run_blocks(5)

        assert network.heads_agree()
        assert all(node.chain.excall_count == 0 for node in network.verifiers)
        assert network.sealers[0].chain.excall_count == 4
        heights = {node.height for node in network.nodes}
        assert heights == {network.sealers[0].height}

    def test_deliveries_respect_link_latency(self, network, port):
        spawn_sealer(network, port)
        network.spawn_node(NodeRole.VERIFIER)
        network.run_blocks(5)
        assert network.deliveries
        for delivery in network.deliveries:
            assert delivery.received_at >= delivery.sent_at + 50

    def test_blocks_applied_in_order(self, chain_config, port):
        network = SimNetwork(chain_config, latency_ms=10, jitter_ms=200, seed=4)
        spawn_sealer(network, port)
        verifier = network.spawn_node(NodeRole.VERIFIER)
        network.run_blocks(10)
        assert verifier.applied_order == list(range(1, verifier.height + 1))
        assert verifier.height == network.sealers[0].height
        assert network.rejections == []

    @pytest.mark.slow
    def test_thousand_deliveries_stay_in_order(self, chain_config, port):
        network = SimNetwork(chain_config, latency_ms=5, jitter_ms=900, seed=11)
        spawn_sealer(network, port)
        verifiers = [network.spawn_node(NodeRole.VERIFIER, name=f"verifier-{i}") for i in range(10)]
        network.run_blocks(100)
        assert len(network.deliveries) >= 1000
        for verifier in verifiers:
            assert verifier.applied_order == list(range(1, 101))
        assert network.rejections == []

    def test_two_sealers_take_turns(self, network, port):
        even = spawn_sealer(network, port, keys=(0,), name="sealer-0")
        odd = spawn_sealer(network, port, keys=(1,), name="sealer-1")
        network.run_blocks(6)
        sealers = {block.header.sealer for block in even.chain.blocks()}
        assert sealers == {sealer_keypair(0).address, sealer_keypair(1).address}
        assert even.state_root() == odd.state_root()


class TestJoining:
    def test_late_joiner_catches_up(self, network, port):
        spawn_sealer(network, port)
        network.run_blocks(4)
        late = network.spawn_node(NodeRole.VERIFIER, name="late")
        assert late.height == network.sealers[0].height
        network.run_blocks(2)
        assert network.heads_agree()

    def test_joiner_replays_a_log(self, tmp_path, chain_config, port):
        log = tmp_path / "chain.log"
        first = SimNetwork(chain_config)
        first.spawn_node(NodeRole.SEALER, sealer_keys=[sealer_keypair(0), sealer_keypair(1)],
                         excall_port=port, block_log=log)
        first.run_blocks(3)

        second = SimNetwork(chain_config)
        node = second.spawn_node(NodeRole.VERIFIER, catch_up_log=log)
        assert node.height == 3
        assert node.state_root() == first.sealers[0].state_root()

    def test_other_genesis_is_refused(self, network, chain_config):
        other = simulation_chain_config(ORACLE_URL, chain_config.pinned_oracle_keys[ORACLE_URL], sealers=3)
        with pytest.raises(GenesisMismatch):
            network.spawn_node(NodeRole.VERIFIER, other)

    def test_verifier_with_a_port(self, network, port):
        with pytest.raises(ValueError):
            network.spawn_node(NodeRole.VERIFIER, excall_port=port)

    def test_sealer_without_keys(self, network):
        with pytest.raises(ValueError):
            network.spawn_node(NodeRole.SEALER)


class TestSubmit:
    def test_no_sealers(self, network):
        network.spawn_node(NodeRole.VERIFIER)
        result = network.submit(Transaction(sender=bytes(20), account_nonce=0))
        assert not result.accepted

    def test_run_blocks_needs_a_sealer(self, network):
        with pytest.raises(ValueError):
            network.run_blocks(1)
