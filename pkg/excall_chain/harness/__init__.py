from .demo import run_demo
from .experiment import ExperimentReport, RunResult, build_session, run_experiment, run_once
from .report import CSV_COLUMNS, emit_report, ratios, render_csv, summary_lines
from .samples import (
    EXCALL_CONTRACT,
    STANDARD_CONTRACT,
    DeployError,
    SampleContracts,
    deploy_samples,
    instruction_counts,
    load_contract,
    sample_deploy_txs,
)

__all__ = [
    "run_demo",
    "ExperimentReport",
    "RunResult",
    "build_session",
    "run_experiment",
    "run_once",
    "CSV_COLUMNS",
    "emit_report",
    "ratios",
    "render_csv",
    "summary_lines",
    "EXCALL_CONTRACT",
    "STANDARD_CONTRACT",
    "DeployError",
    "SampleContracts",
    "deploy_samples",
    "instruction_counts",
    "load_contract",
    "sample_deploy_txs",
]
