"""
excall-chain command line
=========================

    excall-chain run --impl both --initiators 1 --initiators 4 --iterations 10 --out report.csv
    excall-chain serve-oracle --bind 127.0.0.1:8080 --win-prob 1/100
    excall-chain demo
    excall-chain replay --log logs/excall-1x10-r0.log
    excall-chain inspect --log logs/excall-1x10-r0.log
    excall-chain assemble contract.easm -D ORACLE_URL=http://oracle.local:8080
    excall-chain disassemble contract.hex
    excall-chain vectors --count 1000 --out vectors.txt
    excall-chain stats
"""

import logging
import sys
from pathlib import Path
from typing import Any, List, Optional

import typer
from pydantic import ValidationError

from .chain.node import ChainError, ChainNode
from .config import (
    DEFAULT_ORACLE_URL,
    ExperimentConfig,
    Implementation,
    OracleSettings,
    configure_logging,
    env_int,
    env_str,
    load_chain_config,
    load_environment,
    load_json_config,
)
from .crypto.vectors import make_vectors, read_vectors, write_vectors
from .harness import ExperimentReport, emit_report, instruction_counts, run_demo, run_experiment
from .oracle.http import serve
from .oracle.service import OracleService
from .vm import AssembleError, ContractProgram, ProgramError, assemble, disassemble

logger = logging.getLogger(__name__)

app = typer.Typer(
    name="excall-chain",
    help="Proof-of-authority chain simulator with verifiable external calls.",
    no_args_is_help=True,
    add_completion=False,
)


@app.callback()
def _setup(log_level: Optional[str] = typer.Option(None, help="DEBUG, INFO, WARNING...")) -> None:
    load_environment()
    configure_logging(log_level)


def _fail(message: str) -> None:
    typer.echo(f"error: {message}", err=True)
    raise typer.Exit(code=1)


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def _env_defaults() -> dict[str, Any]:
    return {
        "block_period_ms": env_int("EXCALL_BLOCK_PERIOD_MS", 500),
        "oracle_url": env_str("EXCALL_ORACLE_URL", DEFAULT_ORACLE_URL),
        "oracle_seed": env_int("EXCALL_ORACLE_SEED", 7),
        "oracle_key_seed": env_int("EXCALL_ORACLE_KEY_SEED", 1),
        "win_probability": env_str("EXCALL_WIN_PROB", "0.5"),
    }


_FLAG_NAMES = {
    "period_ms": "block_period_ms",
    "win_prob": "win_probability",
    "latency_ms": "excall_latency_ms",
    "log_dir": "block_log_dir",
}


def _as_list(value: Any) -> list:
    return list(value) if isinstance(value, (list, tuple)) else [value]


def experiment_configs(file_values: dict[str, Any], flags: dict[str, Any]) -> list[ExperimentConfig]:
    """
    Expand merged options into one ExperimentConfig per grid point.

    Flags win over file values, which win over the environment. impl may be
    'both'; initiators and iterations may be lists.

    Raises:
        pydantic.ValidationError: On an invalid option value.
    """
    merged = _env_defaults()
    merged.update({_FLAG_NAMES.get(key, key): value for key, value in file_values.items()})
    merged.update({key: value for key, value in flags.items() if value not in (None, [], ())})

    impl = str(merged.pop("impl", "both")).lower()
    impls = [Implementation.STANDARD, Implementation.EXCALL] if impl == "both" else [impl]
    initiators = _as_list(merged.pop("initiators", 1))
    iterations = _as_list(merged.pop("iterations", 10))
    return [
        ExperimentConfig(impl=kind, initiators=n, iterations=m, **merged)
        for n in initiators
        for m in iterations
        for kind in impls
    ]


@app.command()
def run(
    impl: Optional[str] = typer.Option(None, help="standard, excall or both (default both)."),
    initiators: Optional[List[int]] = typer.Option(None, help="Concurrent initiators; repeat for a grid."),
    iterations: Optional[List[int]] = typer.Option(None, help="Bets per initiator; repeat for a grid."),
    period_ms: Optional[int] = typer.Option(None, "--period-ms", help="Block period in milliseconds."),
    repeats: Optional[int] = typer.Option(None, help="Independent repeats per configuration."),
    oracle_url: Optional[str] = typer.Option(None, help="Base URL the external-call contract calls."),
    external_oracle: Optional[bool] = typer.Option(
        None, "--external-oracle/--local-oracle", help="Call a running serve-oracle over HTTP."
    ),
    win_prob: Optional[str] = typer.Option(None, help="Chance a bet wins, e.g. 0.5 or 1/100."),
    latency_ms: Optional[int] = typer.Option(None, help="Added delay per external call."),
    link_latency_ms: Optional[int] = typer.Option(None, help="Block propagation delay between nodes."),
    verifiers: Optional[int] = typer.Option(None, help="Verifier nodes alongside the sealer."),
    realtime: Optional[bool] = typer.Option(None, "--realtime/--simulated", help="Pace the simulation to the clock."),
    log_dir: Optional[Path] = typer.Option(None, help="Write each run's block log here."),
    config: Optional[Path] = typer.Option(None, help="JSON file supplying any of these options."),
    out: Optional[Path] = typer.Option(None, help="Write the CSV report here instead of stdout."),
) -> None:
    """Run the throughput experiment and print a CSV report."""
    try:
        configs = experiment_configs(
            load_json_config(config),
            {
                "impl": impl,
                "initiators": initiators,
                "iterations": iterations,
                "block_period_ms": period_ms,
                "repeats": repeats,
                "oracle_url": oracle_url,
                "external_oracle": external_oracle,
                "win_probability": win_prob,
                "excall_latency_ms": latency_ms,
                "link_latency_ms": link_latency_ms,
                "verifiers": verifiers,
                "realtime": realtime,
                "block_log_dir": log_dir,
            },
        )
    except (ValidationError, ValueError, OSError) as e:
        _fail(str(e))

    report = ExperimentReport()
    for cfg in configs:
        logger.info(
            "running %s initiators=%d iterations=%d x%d", cfg.impl.value, cfg.initiators, cfg.iterations, cfg.repeats
        )
        report.extend(run_experiment(cfg))

    text, summary = emit_report(report, out)
    if out is None:
        typer.echo(text, nl=False)
    else:
        typer.echo(f"wrote {len(report.runs)} rows to {out}", err=True)
    typer.echo(summary, err=True)
    if not all(result.complete for result in report.runs):
        raise typer.Exit(code=2)


@app.command()
def demo(oracle_url: str = typer.Option(DEFAULT_ORACLE_URL, help="Base URL of the simulated oracle.")) -> None:
    """Place one bet through each contract and trace what happens."""
    run_demo(typer.echo, oracle_url)


# ---------------------------------------------------------------------------
# Oracle service
# ---------------------------------------------------------------------------

@app.command("serve-oracle")
def serve_oracle(
    bind: Optional[str] = typer.Option(None, help="host:port to listen on."),
    seed: Optional[int] = typer.Option(None, help="Outcome RNG seed."),
    win_prob: Optional[str] = typer.Option(None, help="Chance of answering '1'."),
    key_seed: Optional[int] = typer.Option(None, help="Label seed of the signing key."),
    latency_ms: Optional[int] = typer.Option(None, help="Delay added to every answer."),
) -> None:
    """Serve signed random outcomes over HTTP."""
    try:
        settings = OracleSettings.from_env(
            bind=bind, seed=seed, win_probability=win_prob, key_seed=key_seed, latency_ms=latency_ms
        )
    except ValidationError as e:
        _fail(str(e))
    service = OracleService.from_settings(settings)
    print(f"excall-chain oracle: public key {service.public_key.hex()}", file=sys.stderr)
    serve(service, settings.host, settings.port, settings.latency_ms)


# ---------------------------------------------------------------------------
# Block logs
# ---------------------------------------------------------------------------

@app.command()
def replay(log: Path = typer.Option(..., exists=True, dir_okay=False, help="Block log to verify.")) -> None:
    """Verify every block of a log in a fresh verifier node."""
    node = ChainNode(load_chain_config(log), name="replay")
    try:
        applied = node.replay_log(log)
    except ChainError as e:
        _fail(f"replay stopped at block {node.height + 1}: {e}")
    typer.echo(f"verified {applied} blocks; head {node.height} {node.head_digest().hex()}")
    typer.echo(f"state root {node.state_root().hex()}")
    typer.echo(f"external calls made: {node.excall_count}")


@app.command()
def inspect(log: Optional[Path] = typer.Option(None, exists=True, dir_okay=False, help="Block log to serve.")) -> None:
    """Serve a replayed block log to MCP clients over stdio."""
    from .server import main as serve_mcp

    serve_mcp(log)


# ---------------------------------------------------------------------------
# Programs
# ---------------------------------------------------------------------------

def _constants(pairs: List[str]) -> dict[str, str]:
    found = {}
    for pair in pairs:
        name, sep, value = pair.partition("=")
        if not sep or not name:
            raise typer.BadParameter(f"expected NAME=VALUE, got {pair!r}")
        found[name] = value
    return found


@app.command("assemble")
def assemble_cmd(
    source: Path = typer.Argument(..., exists=True, dir_okay=False),
    define: List[str] = typer.Option([], "--define", "-D", help="Template constant NAME=VALUE."),
    out: Optional[Path] = typer.Option(None, help="Write hex bytecode here instead of stdout."),
) -> None:
    """Assemble a contract to hex bytecode."""
    try:
        program = assemble(source.read_text(encoding="utf-8"), constants=_constants(define))
    except AssembleError as e:
        _fail(f"{source}: {e}")
    text = program.bytecode.hex()
    if out is None:
        typer.echo(text)
    else:
        out.write_text(text + "\n", encoding="ascii")
    typer.echo(f"{program.instruction_count} instructions, {len(program.bytecode)} bytes", err=True)


@app.command("disassemble")
def disassemble_cmd(bytecode: Path = typer.Argument(..., exists=True, dir_okay=False, help="File of hex bytecode.")) -> None:
    """Print assembler source for hex bytecode."""
    try:
        program = ContractProgram.from_bytecode(bytes.fromhex("".join(bytecode.read_text().split())))
    except (ProgramError, ValueError) as e:
        _fail(f"{bytecode}: {e}")
    typer.echo(disassemble(program), nl=False)


@app.command()
def stats(oracle_url: str = typer.Option(DEFAULT_ORACLE_URL)) -> None:
    """Instruction counts of the shipped betting contracts."""
    for name, count in instruction_counts(oracle_url).items():
        typer.echo(f"{name}: {count} instructions")


# ---------------------------------------------------------------------------
# Signature vectors
# ---------------------------------------------------------------------------

@app.command()
def vectors(
    count: int = typer.Option(100, min=1),
    seed: int = typer.Option(0, help="RNG seed."),
    out: Optional[Path] = typer.Option(None, help="Write generated vectors here."),
    check: Optional[Path] = typer.Option(None, exists=True, dir_okay=False, help="Verify an existing file instead."),
) -> None:
    """Generate or check signed-response conformance vectors."""
    if check is not None:
        try:
            records = read_vectors(check)
        except ValueError as e:
            _fail(f"{check}: {e}")
        bad = [i for i, record in enumerate(records) if not record.check()]
        typer.echo(f"{len(records) - len(bad)}/{len(records)} vectors verify")
        if bad:
            raise typer.Exit(code=1)
        return
    records = make_vectors(count, seed)
    if out is None:
        for record in records:
            typer.echo(record.to_line())
    else:
        write_vectors(out, records)
        typer.echo(f"wrote {len(records)} vectors to {out}", err=True)


if __name__ == "__main__":
    app()
