import pytest

from excall_chain.chain import ChainNode, SubmitRejection, SubmitResult
from excall_chain.config import ExperimentConfig, Implementation, chain_config_path, load_chain_config
from excall_chain.core.digests import tx_identity
from excall_chain.harness.demo import run_demo
from excall_chain.harness.experiment import build_session, run_experiment, run_once
from excall_chain.harness.report import ratios
from excall_chain.harness.samples import EXCALL_CONTRACT, STANDARD_CONTRACT, instruction_counts
from excall_chain.netsim.network import SimNetwork
from excall_chain.vm import encode_call

from .conftest import ORACLE_URL


def config(impl: Implementation, **overrides) -> ExperimentConfig:
    values = dict(impl=impl, initiators=2, iterations=3, repeats=1, oracle_url=ORACLE_URL)
    values.update(overrides)
    return ExperimentConfig(**values)


class TestSession:
    def test_contracts_are_deployed(self):
        session = build_session(config(Implementation.EXCALL), 0)
        chain = session.observer.chain
        assert session.contracts.standard in chain.state.programs
        assert session.contracts.excall in chain.state.programs
        assert session.network.heads_agree()

    def test_repeats_use_their_own_oracle_seed(self):
        cfg = config(Implementation.EXCALL, oracle_seed=20)
        assert build_session(cfg, 0).service.seed == 20
        assert build_session(cfg, 3).service.seed == 23


class TestRunOnce:
    def test_excall_bets_resolve_in_their_own_block(self):
        result = run_once(config(Implementation.EXCALL))
        assert result.complete
        assert result.resolved_bets == 6
        assert result.block_spans == [1] * 6
        assert result.verifier_excalls == 0
        assert result.heads_agree
        assert result.total_winnings == result.oracle_wins

    def test_standard_bets_need_a_callback_block(self):
        result = run_once(config(Implementation.STANDARD))
        assert result.complete
        assert result.resolved_bets == 6
        assert min(result.block_spans) >= 2
        assert result.total_winnings == result.oracle_wins
        assert result.failed_txs == 0

    @pytest.mark.parametrize("impl", [Implementation.EXCALL, Implementation.STANDARD])
    def test_bets_share_blocks(self, impl):
        result = run_once(config(impl, initiators=1, iterations=10, win_probability=1))
        assert result.complete
        assert result.resolved_bets == 10
        assert result.total_winnings == 10
        assert result.blocks < 10

    def test_refused_bet_marks_the_run_incomplete(self, monkeypatch):
        submit = SimNetwork.submit
        bets = []

        def refuse_second_bet(network, tx):
            if tx.input == encode_call("betEXCALL"):
                bets.append(tx)
                if len(bets) == 2:
                    return SubmitResult(False, tx_identity(tx), SubmitRejection.CHAIN_HALTED, "refused")
            return submit(network, tx)

        monkeypatch.setattr(SimNetwork, "submit", refuse_second_bet)
        result = run_once(config(Implementation.EXCALL, initiators=1, iterations=3))
        assert not result.complete
        assert result.failed_txs == 1
        assert result.resolved_bets == 1
        assert len(bets) == 2

    def test_losing_oracle_pays_nothing(self):
        result = run_once(config(Implementation.EXCALL, win_probability=0, iterations=2))
        assert result.complete
        assert result.total_winnings == 0

    def test_block_logs_replay_without_calls(self, tmp_path):
        result = run_once(config(Implementation.EXCALL, block_log_dir=tmp_path))
        (log,) = tmp_path.glob("*.log")
        assert log.name == "excall-2x3-r0.log"
        assert chain_config_path(log).exists()
        node = ChainNode(load_chain_config(log))
        assert node.replay_log(log) >= result.blocks
        assert node.excall_count == 0

    def test_run_experiment_repeats(self):
        report = run_experiment(config(Implementation.EXCALL, iterations=1, repeats=3))
        assert [run.repeat for run in report.runs] == [0, 1, 2]


def test_excall_contract_is_smaller():
    counts = instruction_counts(ORACLE_URL)
    assert counts[EXCALL_CONTRACT] < counts[STANDARD_CONTRACT]


def test_demo_traces_both_contracts():
    lines = run_demo(emit=lambda line: None, oracle_url=ORACLE_URL)
    assert lines[0].startswith("== excall")
    assert any(line.startswith("== standard") for line in lines)
    assert sum("status success" in line for line in lines) == 2
    assert any(line.strip().startswith("external call http://oracle.test/excallrand?nonce=") for line in lines)
    assert all(line.endswith("verifier external calls: 0") for line in lines if "verifier external calls" in line)


@pytest.mark.slow
def test_block_spans_at_four_initiators():
    excall = run_once(config(Implementation.EXCALL, initiators=4, iterations=100))
    standard = run_once(config(Implementation.STANDARD, initiators=4, iterations=100))
    assert excall.complete and standard.complete
    assert set(excall.block_spans) == {1}
    assert min(standard.block_spans) >= 2
    assert excall.verifier_excalls == standard.verifier_excalls == 0


@pytest.mark.slow
@pytest.mark.parametrize("initiators", [1, 2, 3, 4])
def test_excall_beats_standard_over_many_bets(initiators):
    report = run_experiment(config(Implementation.STANDARD, initiators=initiators, iterations=1000))
    report.extend(run_experiment(config(Implementation.EXCALL, initiators=initiators, iterations=1000)))
    assert all(run.complete for run in report.runs)
    assert all(run.verifier_excalls == 0 for run in report.runs)
    assert ratios(report)[(initiators, 1000)] < 0.85


@pytest.mark.slow
@pytest.mark.parametrize("impl", [Implementation.EXCALL, Implementation.STANDARD])
def test_fair_oracle_over_a_thousand_bets(impl):
    result = run_once(config(impl, initiators=1, iterations=1000))
    assert result.complete
    assert result.resolved_bets == 1000
    assert 420 <= result.oracle_wins <= 580
    assert result.total_winnings == result.oracle_wins
