import json

import pytest
from pydantic import ValidationError
from typer.testing import CliRunner

from excall_chain.cli import app, experiment_configs
from excall_chain.config import Implementation
from excall_chain.harness.samples import EXCALL_CONTRACT, CONTRACTS_DIR

runner = CliRunner()


class TestExperimentConfigs:
    def test_defaults_expand_both_implementations(self):
        configs = experiment_configs({}, {})
        assert [cfg.impl for cfg in configs] == [Implementation.STANDARD, Implementation.EXCALL]
        assert all(cfg.repeats == 4 for cfg in configs)

    def test_grid(self):
        configs = experiment_configs({}, {"impl": "excall", "initiators": [1, 4], "iterations": [10, 100]})
        assert [(c.initiators, c.iterations) for c in configs] == [(1, 10), (1, 100), (4, 10), (4, 100)]

    def test_flags_beat_file_beat_environment(self, monkeypatch):
        monkeypatch.setenv("EXCALL_BLOCK_PERIOD_MS", "300")
        monkeypatch.setenv("EXCALL_ORACLE_SEED", "11")
        (cfg,) = experiment_configs({"period_ms": 200, "impl": "excall"}, {"oracle_seed": None})
        assert cfg.block_period_ms == 200
        assert cfg.oracle_seed == 11
        (cfg,) = experiment_configs({"period_ms": 200}, {"impl": "EXCALL", "block_period_ms": 100})
        assert cfg.block_period_ms == 100

    def test_probability_from_file(self):
        (cfg,) = experiment_configs({"win_prob": "1/100"}, {"impl": "standard"})
        assert cfg.win_probability.denominator == 100

    @pytest.mark.parametrize("flags", [{"initiators": [0]}, {"initiators": [65]}, {"impl": "neither"}])
    def test_invalid(self, flags):
        with pytest.raises(ValidationError):
            experiment_configs({}, flags)


class TestCommands:
    def test_run_writes_csv(self, tmp_path):
        out = tmp_path / "report.csv"
        result = runner.invoke(app, [
            "run", "--impl", "excall", "--initiators", "1", "--iterations", "2", "--repeats", "1",
            "--oracle-url", "http://oracle.test", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "impl,initiators,iterations,repeat,wall_ms,blocks,failed_txs"
        assert lines[1].startswith("excall,1,2,0,")

    def test_run_from_config_file(self, tmp_path):
        config = tmp_path / "experiment.json"
        config.write_text(json.dumps({"impl": "excall", "iterations": 1, "repeats": 1}), encoding="utf-8")
        result = runner.invoke(app, ["run", "--config", str(config)])
        assert result.exit_code == 0, result.output
        assert "excall,1,1,0," in result.stdout

    def test_run_rejects_bad_option(self):
        result = runner.invoke(app, ["run", "--initiators", "0"])
        assert result.exit_code == 1

    def test_replay(self, tmp_path):
        result = runner.invoke(app, [
            "run", "--impl", "excall", "--iterations", "2", "--repeats", "1", "--log-dir", str(tmp_path),
        ])
        assert result.exit_code == 0, result.output
        (log,) = tmp_path.glob("*.log")
        replayed = runner.invoke(app, ["replay", "--log", str(log)])
        assert replayed.exit_code == 0, replayed.output
        assert "verified " in replayed.stdout
        assert "external calls made: 0" in replayed.stdout

    def test_assemble_and_disassemble(self, tmp_path):
        out = tmp_path / "betting.hex"
        result = runner.invoke(app, [
            "assemble", str(CONTRACTS_DIR / EXCALL_CONTRACT), "-D", "ORACLE_URL=http://oracle.test", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        listing = runner.invoke(app, ["disassemble", str(out)])
        assert listing.exit_code == 0
        assert 'EXCALL "http://oracle.test/excallrand?nonce={nonce}"' in listing.stdout

    def test_assemble_reports_line(self, tmp_path):
        source = tmp_path / "bad.easm"
        source.write_text("STOP\nFROB\n", encoding="utf-8")
        result = runner.invoke(app, ["assemble", str(source)])
        assert result.exit_code == 1
        assert "line 2" in result.output

    def test_vectors_round_trip(self, tmp_path):
        out = tmp_path / "vectors.txt"
        assert runner.invoke(app, ["vectors", "--count", "5", "--out", str(out)]).exit_code == 0
        checked = runner.invoke(app, ["vectors", "--check", str(out)])
        assert checked.exit_code == 0
        assert "5/5 vectors verify" in checked.stdout

    def test_stats(self):
        result = runner.invoke(app, ["stats"])
        assert result.exit_code == 0
        assert f"{EXCALL_CONTRACT}:" in result.stdout
