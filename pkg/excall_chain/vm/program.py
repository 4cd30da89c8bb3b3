"""Contract programs: header parsing and deploy-time validation."""

import struct
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from .opcodes import JUMP_OPS, MAGIC, MAX_PROGRAM_BYTES, Instruction, Op


class ProgramError(ValueError):
    """Raised when bytecode is malformed or fails validation."""


def decode_instructions(code: bytes) -> dict[int, Instruction]:
    """Split code into instructions keyed by offset."""
    instructions: dict[int, Instruction] = {}
    pos = 0
    while pos < len(code):
        byte = code[pos]
        try:
            op = Op(byte)
        except ValueError:
            raise ProgramError(f"unknown opcode 0x{byte:02x} at offset {pos}") from None

        if op is Op.PUSH8:
            _need(code, pos, 2, op)
            ins = Instruction(pos, op, code[pos + 1], 2)
        elif op is Op.PUSHB:
            _need(code, pos, 2, op)
            length = code[pos + 1]
            if not 1 <= length <= 32:
                raise ProgramError(f"PUSHB length {length} out of range at offset {pos}")
            _need(code, pos, 2 + length, op)
            ins = Instruction(pos, op, code[pos + 2:pos + 2 + length], 2 + length)
        elif op in JUMP_OPS:
            _need(code, pos, 3, op)
            ins = Instruction(pos, op, struct.unpack(">H", code[pos + 1:pos + 3])[0], 3)
        elif op is Op.EXCALL:
            _need(code, pos, 3, op)
            length = struct.unpack(">H", code[pos + 1:pos + 3])[0]
            _need(code, pos, 3 + length, op)
            try:
                uri = code[pos + 3:pos + 3 + length].decode("utf-8")
            except UnicodeDecodeError:
                raise ProgramError(f"EXCALL operand is not utf-8 at offset {pos}") from None
            if not uri.startswith("http"):
                raise ProgramError(f"EXCALL operand must start with 'http' at offset {pos}")
            ins = Instruction(pos, op, uri, 3 + length)
        else:
            ins = Instruction(pos, op, None, 1)

        instructions[pos] = ins
        pos = ins.next_offset
    return instructions


def _need(code: bytes, pos: int, size: int, op: Op) -> None:
    if pos + size > len(code):
        raise ProgramError(f"truncated {op.name} immediate at offset {pos}")


@dataclass(frozen=True)
class ContractProgram:
    """Validated bytecode plus its entry table and decoded instructions."""

    bytecode: bytes
    entry_points: Mapping[bytes, int] = field(default_factory=dict)
    instructions: Mapping[int, Instruction] = field(default_factory=dict, repr=False, compare=False)

    @property
    def header_size(self) -> int:
        return len(MAGIC) + 1 + 6 * len(self.entry_points)

    @property
    def code(self) -> bytes:
        return self.bytecode[self.header_size:]

    @property
    def instruction_count(self) -> int:
        return len(self.instructions)

    @classmethod
    def from_bytecode(cls, bytecode: bytes) -> "ContractProgram":
        """
        Parse and validate bytecode.

        Every jump target and entry offset must land on an instruction
        boundary and every EXCALL operand must be an http URI.

        Raises:
            ProgramError: On any layout or validation failure.
        """
        bytecode = bytes(bytecode)
        if len(bytecode) > MAX_PROGRAM_BYTES:
            raise ProgramError(f"program is {len(bytecode)} bytes; limit is {MAX_PROGRAM_BYTES}")
        if len(bytecode) < 3 or bytecode[:2] != MAGIC:
            raise ProgramError("missing program header")
        count = bytecode[2]
        header_size = 3 + 6 * count
        if len(bytecode) < header_size:
            raise ProgramError("truncated entry table")

        entries: dict[bytes, int] = {}
        for i in range(count):
            start = 3 + 6 * i
            selector = bytecode[start:start + 4]
            if selector in entries:
                raise ProgramError(f"duplicate entry selector {selector.hex()}")
            entries[selector] = struct.unpack(">H", bytecode[start + 4:start + 6])[0]

        instructions = decode_instructions(bytecode[header_size:])
        for ins in instructions.values():
            if ins.op in JUMP_OPS and ins.arg not in instructions:
                raise ProgramError(f"{ins.op.name} at offset {ins.offset} targets non-boundary {ins.arg}")
        for selector, offset in entries.items():
            if offset not in instructions:
                raise ProgramError(f"entry {selector.hex()} points at non-boundary {offset}")

        return cls(
            bytecode=bytecode,
            entry_points=MappingProxyType(entries),
            instructions=MappingProxyType(instructions),
        )
