from .abi import contract_address, deploy_input, encode_call, selector, split_deploy_input, topic, word
from .assembler import AssembleError, assemble, disassemble
from .machine import (
    DEFAULT_MAX_EXCALLS,
    DEFAULT_STEP_LIMIT,
    BlockEnv,
    ExcallFault,
    ExecContext,
    ExecMode,
    ExecResult,
    execute,
    resolve_uri,
)
from .opcodes import RESPONSE_KEY, Op, arg_key
from .program import ContractProgram, ProgramError

__all__ = [
    "contract_address",
    "deploy_input",
    "encode_call",
    "selector",
    "split_deploy_input",
    "topic",
    "word",
    "AssembleError",
    "assemble",
    "disassemble",
    "DEFAULT_MAX_EXCALLS",
    "DEFAULT_STEP_LIMIT",
    "BlockEnv",
    "ExcallFault",
    "ExecContext",
    "ExecMode",
    "ExecResult",
    "execute",
    "resolve_uri",
    "RESPONSE_KEY",
    "Op",
    "arg_key",
    "ContractProgram",
    "ProgramError",
]
