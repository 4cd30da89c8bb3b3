"""Stack machine with an EXCALL instruction.

The same program runs in three modes:

- FINALIZE: the sealer, after block content is fixed. EXCALL performs the
  call through the context's port using the nonce the chain supplies.
- VERIFY: every other node, and anyone replaying. EXCALL consumes the
  recorded tuple for its position and checks it; no network access.
- DRY_RUN: block building. EXCALL notes the intention and stops the run.

Storage writes are buffered and only reach the caller's store on SUCCESS.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, MutableMapping, NoReturn, Optional, Sequence

from pydantic import ValidationError

from ..clients.oracle import ExcallPort, ExcallTransportError
from ..core.types import (
    CallOutcome,
    EventLog,
    ExtensionEntry,
    ReceiptStatus,
    VerifiableExternalCall,
)
from .opcodes import (
    MAX_ARGS,
    MAX_STACK,
    RESERVED_FLOOR,
    RESPONSE_KEY,
    WORD_MASK,
    Op,
)
from .program import ContractProgram

logger = logging.getLogger(__name__)

DEFAULT_STEP_LIMIT = 100_000
DEFAULT_MAX_EXCALLS = 8
ZERO_WORD = bytes(32)


class ExecMode(str, Enum):
    FINALIZE = "finalize"
    VERIFY = "verify"
    DRY_RUN = "dry_run"


class ExcallFault(str, Enum):
    """Why a recorded call was refused during VERIFY."""

    MISSING_CALL = "missing_call"
    NONCE_MISMATCH = "nonce_mismatch"
    URI_MISMATCH = "uri_mismatch"
    UNKNOWN_KEY = "unknown_key"
    BAD_SIGNATURE = "bad_signature"
    FALSE_FAILURE = "false_failure"


@dataclass(frozen=True)
class BlockEnv:
    number: int
    timestamp: int
    parent_digest: bytes


@dataclass
class ExecContext:
    caller: bytes
    self_address: bytes
    input: bytes
    mode: ExecMode
    block_env: BlockEnv
    tx_index: int = 0
    excall_port: Optional[ExcallPort] = None
    nonce_for: Optional[Callable[[int], bytes]] = None
    pinned_key: Optional[Callable[[str], Optional[bytes]]] = None
    step_limit: int = DEFAULT_STEP_LIMIT
    max_excalls: int = DEFAULT_MAX_EXCALLS
    excall_timeout: float = 2.0
    excall_cursor: int = 0

    def __post_init__(self) -> None:
        if self.mode is not ExecMode.FINALIZE and self.excall_port is not None:
            raise ValueError(f"{self.mode.value} contexts cannot hold an external-call port")
        if self.mode is ExecMode.FINALIZE and (self.excall_port is None or self.nonce_for is None):
            raise ValueError("finalize contexts need an external-call port and a nonce source")


@dataclass
class ExecResult:
    status: ReceiptStatus
    events: tuple[EventLog, ...] = ()
    performed_calls: tuple[ExtensionEntry, ...] = ()
    consumed: int = 0
    output: bytes = b""
    steps: int = 0
    fault: Optional[ExcallFault] = None
    intentions: tuple[str, ...] = ()
    writes: dict[bytes, bytes] = field(default_factory=dict)
    error: str = ""

    @property
    def excall_count(self) -> int:
        return len(self.performed_calls) or self.consumed


def resolve_uri(template: str, nonce: bytes) -> str:
    return template.replace("{nonce}", nonce.hex())


def _to_word(value: int) -> bytes:
    return value.to_bytes(32, "big")


class _Halt(Exception):
    def __init__(self, status: ReceiptStatus, error: str = "", fault: Optional[ExcallFault] = None):
        super().__init__(error)
        self.status = status
        self.error = error
        self.fault = fault


class _Machine:
    def __init__(
        self,
        program: ContractProgram,
        ctx: ExecContext,
        storage: MutableMapping[bytes, bytes],
        recorded: Sequence[ExtensionEntry],
    ) -> None:
        self.program = program
        self.ctx = ctx
        self.storage = storage
        self.recorded = recorded
        self.stack: list[int] = []
        self.writes: dict[bytes, bytes] = {}
        self.events: list[EventLog] = []
        self.performed: list[ExtensionEntry] = []
        self.intentions: list[str] = []
        self.args: list[int] = []
        self.response = b""
        self.cursor = ctx.excall_cursor
        self.steps = 0

    # -- stack helpers -----------------------------------------------------

    def push(self, value: int) -> None:
        if len(self.stack) >= MAX_STACK:
            raise _Halt(ReceiptStatus.FAILED_EXEC, "stack overflow")
        self.stack.append(value & WORD_MASK)

    def pop(self) -> int:
        if not self.stack:
            raise _Halt(ReceiptStatus.FAILED_EXEC, "stack underflow")
        return self.stack.pop()

    # -- storage -----------------------------------------------------------

    def sload(self, key: int) -> int:
        if key == RESPONSE_KEY:
            return int.from_bytes(self.response[:32].ljust(32, b"\x00"), "big")
        if key > RESERVED_FLOOR:
            index = WORD_MASK - 1 - key
            return self.args[index] if index < len(self.args) else 0
        raw = _to_word(key)
        value = self.writes.get(raw)
        if value is None:
            value = self.storage.get(raw, ZERO_WORD)
        return int.from_bytes(value, "big")

    def sstore(self, key: int, value: int) -> None:
        if key > RESERVED_FLOOR:
            raise _Halt(ReceiptStatus.FAILED_EXEC, "write to reserved key")
        self.writes[_to_word(key)] = _to_word(value)

    # -- main loop ---------------------------------------------------------

    def run(self) -> ExecResult:
        try:
            output = self._run()
            status, error, fault = ReceiptStatus.SUCCESS, "", None
        except _Halt as halt:
            output = b""
            status, error, fault = halt.status, halt.error, halt.fault
        return ExecResult(
            status=status,
            events=tuple(self.events) if status is ReceiptStatus.SUCCESS else (),
            performed_calls=tuple(self.performed),
            consumed=self.cursor - self.ctx.excall_cursor if self.ctx.mode is ExecMode.VERIFY else 0,
            output=output,
            steps=self.steps,
            fault=fault,
            intentions=tuple(self.intentions),
            writes=self.writes if status is ReceiptStatus.SUCCESS else {},
            error=error,
        )

    def _run(self) -> bytes:
        data = self.ctx.input
        entry = self.program.entry_points.get(data[:4]) if len(data) >= 4 else None
        if entry is None:
            raise _Halt(ReceiptStatus.FAILED_EXEC, "unknown selector")
        args = data[4:]
        if len(args) % 32 or len(args) // 32 > MAX_ARGS:
            raise _Halt(ReceiptStatus.FAILED_EXEC, "malformed arguments")
        self.args = [int.from_bytes(args[i:i + 32], "big") for i in range(0, len(args), 32)]

        instructions = self.program.instructions
        pc = entry
        while True:
            if self.steps >= self.ctx.step_limit:
                raise _Halt(ReceiptStatus.FAILED_EXEC, "step limit exceeded")
            self.steps += 1
            ins = instructions.get(pc)
            if ins is None:
                # Running off the end of the code is an implicit STOP.
                return _to_word(self.stack[-1]) if self.stack else b""
            pc = ins.next_offset

            match ins.op:
                case Op.STOP:
                    return _to_word(self.stack[-1]) if self.stack else b""
                case Op.REVERT:
                    raise _Halt(ReceiptStatus.FAILED_EXEC, "reverted")
                case Op.PUSH8:
                    self.push(ins.arg)
                case Op.PUSHB:
                    self.push(int.from_bytes(ins.arg, "big"))
                case Op.DUP:
                    top = self.pop()
                    self.push(top)
                    self.push(top)
                case Op.POP:
                    self.pop()
                case Op.ADD:
                    y, x = self.pop(), self.pop()
                    self.push(x + y)
                case Op.SUB:
                    y, x = self.pop(), self.pop()
                    self.push(x - y)
                case Op.EQ:
                    y, x = self.pop(), self.pop()
                    self.push(int(x == y))
                case Op.LT:
                    y, x = self.pop(), self.pop()
                    self.push(int(x < y))
                case Op.NOT:
                    self.push(int(self.pop() == 0))
                case Op.JUMP:
                    pc = ins.arg
                case Op.JUMPI:
                    if self.pop():
                        pc = ins.arg
                case Op.CALLER:
                    self.push(int.from_bytes(self.ctx.caller, "big"))
                case Op.SLOAD:
                    self.push(self.sload(self.pop()))
                case Op.SSTORE:
                    key = self.pop()
                    self.sstore(key, self.pop())
                case Op.EMIT:
                    topic, first, second = self.pop(), self.pop(), self.pop()
                    self.events.append(EventLog(
                        contract=self.ctx.self_address,
                        topic=_to_word(topic),
                        data=_to_word(first) + _to_word(second),
                    ))
                case Op.EXCALL:
                    self.push(self.excall(ins.arg))

    # -- external calls ----------------------------------------------------

    def excall(self, template: str) -> int:
        index = self.cursor
        if index - self.ctx.excall_cursor >= self.ctx.max_excalls:
            raise _Halt(ReceiptStatus.FAILED_EXEC, "too many external calls")
        if self.ctx.mode is ExecMode.DRY_RUN:
            self.intentions.append(template)
            raise _Halt(ReceiptStatus.FAILED_EXCALL_NO_RESPONSE, "dry run stops at EXCALL")
        if self.ctx.mode is ExecMode.FINALIZE:
            return self._perform(template, index)
        return self._replay(template, index)

    def _key_trusted(self, call: VerifiableExternalCall) -> bool:
        if self.ctx.pinned_key is None:
            return True
        return self.ctx.pinned_key(call.request_uri) == call.public_key

    def _no_response(self, index: int, error: Exception) -> NoReturn:
        self.performed.append(ExtensionEntry(
            tx_index=self.ctx.tx_index, call_index=index, outcome=CallOutcome.NO_RESPONSE,
        ))
        raise _Halt(ReceiptStatus.FAILED_EXCALL_NO_RESPONSE, str(error) or type(error).__name__) from None

    def _perform(self, template: str, index: int) -> int:
        nonce = self.ctx.nonce_for(index)
        uri = resolve_uri(template, nonce)
        self.cursor += 1
        try:
            envelope = self.ctx.excall_port.fetch(uri, self.ctx.excall_timeout)
            call = VerifiableExternalCall(
                request_uri=uri,
                request_nonce=nonce,
                public_key=envelope.public_key,
                response=envelope.response,
                signature=envelope.signature,
            )
        except (ExcallTransportError, ValidationError) as e:
            logger.warning("external call %s got no usable response: %s", uri, e)
            self._no_response(index, e)
        except Exception as e:
            # whatever the port raises, only this transaction fails
            logger.exception("external call %s raised %s", uri, type(e).__name__)
            self._no_response(index, e)

        if not (self._key_trusted(call) and call.is_valid()):
            logger.warning("external call %s returned an unverifiable response", uri)
            self.performed.append(ExtensionEntry(
                tx_index=self.ctx.tx_index, call_index=index, outcome=CallOutcome.UNVERIFIED, call=call,
            ))
            raise _Halt(ReceiptStatus.FAILED_EXCALL_UNVERIFIED, "response failed verification")

        self.performed.append(ExtensionEntry(
            tx_index=self.ctx.tx_index, call_index=index, outcome=CallOutcome.RECORDED, call=call,
        ))
        return self._deliver(call.response)

    def _replay(self, template: str, index: int) -> int:
        position = index - self.ctx.excall_cursor
        if position >= len(self.recorded):
            raise _Halt(ReceiptStatus.FAILED_EXCALL_UNVERIFIED, "no recorded call", ExcallFault.MISSING_CALL)
        entry = self.recorded[position]
        self.cursor += 1
        if entry.outcome is CallOutcome.NO_RESPONSE:
            raise _Halt(ReceiptStatus.FAILED_EXCALL_NO_RESPONSE, "sealer recorded no response")

        call = entry.call
        unverified = ReceiptStatus.FAILED_EXCALL_UNVERIFIED
        if self.ctx.nonce_for is not None and call.request_nonce != self.ctx.nonce_for(index):
            raise _Halt(unverified, "nonce does not match this call", ExcallFault.NONCE_MISMATCH)
        if call.request_uri != resolve_uri(template, call.request_nonce):
            raise _Halt(unverified, "recorded URI differs from the instruction", ExcallFault.URI_MISMATCH)

        key_ok = self._key_trusted(call)
        valid = call.is_valid()
        if entry.outcome is CallOutcome.UNVERIFIED:
            if key_ok and valid:
                raise _Halt(unverified, "call recorded as unverified verifies", ExcallFault.FALSE_FAILURE)
            raise _Halt(unverified, "sealer recorded an unverifiable response")
        if not key_ok:
            raise _Halt(unverified, "response key is not pinned for this URI", ExcallFault.UNKNOWN_KEY)
        if not valid:
            raise _Halt(unverified, "response signature invalid", ExcallFault.BAD_SIGNATURE)
        return self._deliver(call.response)

    def _deliver(self, response: bytes) -> int:
        self.response = response
        return response[0] if response else 0


def execute(
    program: ContractProgram,
    ctx: ExecContext,
    storage: MutableMapping[bytes, bytes],
    recorded: Sequence[ExtensionEntry] = (),
) -> ExecResult:
    """
    Run one call of program under ctx.

    Args:
        program: Validated contract program.
        ctx: Caller, input, mode and (in FINALIZE) the external-call port.
        storage: The contract's storage; written only when the run succeeds.
        recorded: In VERIFY, this transaction's recorded calls in order.

    Returns:
        ExecResult with status, events, the calls performed (FINALIZE) or
        consumed (VERIFY), and a fault when a recorded call was refused.
    """
    result = _Machine(program, ctx, storage, recorded).run()
    if result.status is ReceiptStatus.SUCCESS:
        for key, value in result.writes.items():
            if value == ZERO_WORD:
                storage.pop(key, None)
            else:
                storage[key] = value
    return result
