"""Instruction set and bytecode layout.

Program layout::

    b"EX" | entry count (1) | entries: selector (4) + code offset (2) | code

Opcode table (stack effect is pops -> pushes; "x y OP" means y is on top)::

    0x00 STOP                 0 -> 0   halt; top word, if any, is the return value
    0x01 PUSH8  imm(1)        0 -> 1
    0x02 PUSHB  len(1) bytes  0 -> 1   1..32 bytes, big-endian
    0x03 DUP                  1 -> 2
    0x04 POP                  1 -> 0
    0x05 ADD                  2 -> 1   x + y mod 2^256
    0x06 SUB                  2 -> 1   x - y mod 2^256
    0x07 EQ                   2 -> 1
    0x08 LT                   2 -> 1   x < y
    0x09 NOT                  1 -> 1   1 if zero else 0
    0x0A JUMP   target(2)     0 -> 0
    0x0B JUMPI  target(2)     1 -> 0   jump when the popped word is non-zero
    0x0C CALLER               0 -> 1
    0x0D SLOAD                1 -> 1   pops key
    0x0E SSTORE               2 -> 0   pops key, then value
    0x0F EMIT                 3 -> 0   pops topic, then two data words
    0x10 EXCALL len(2) uri    0 -> 1   pushes the first response byte
    0xFE REVERT               0 -> 0
"""

from enum import IntEnum
from typing import NamedTuple, Union

WORD_BITS = 256
WORD_MASK = (1 << WORD_BITS) - 1

# Reserved storage keys: the response register and the argument words.
RESPONSE_KEY = WORD_MASK
MAX_ARGS = 8
RESERVED_FLOOR = WORD_MASK - 1 - MAX_ARGS

MAGIC = b"EX"
MAX_PROGRAM_BYTES = 24 * 1024
MAX_STACK = 1024


def arg_key(index: int) -> int:
    """Reserved key holding argument word index."""
    if not 0 <= index < MAX_ARGS:
        raise ValueError(f"argument index must be in [0, {MAX_ARGS})")
    return WORD_MASK - 1 - index


class Op(IntEnum):
    STOP = 0x00
    PUSH8 = 0x01
    PUSHB = 0x02
    DUP = 0x03
    POP = 0x04
    ADD = 0x05
    SUB = 0x06
    EQ = 0x07
    LT = 0x08
    NOT = 0x09
    JUMP = 0x0A
    JUMPI = 0x0B
    CALLER = 0x0C
    SLOAD = 0x0D
    SSTORE = 0x0E
    EMIT = 0x0F
    EXCALL = 0x10
    REVERT = 0xFE


STACK_EFFECTS: dict[Op, tuple[int, int]] = {
    Op.STOP: (0, 0),
    Op.PUSH8: (0, 1),
    Op.PUSHB: (0, 1),
    Op.DUP: (1, 2),
    Op.POP: (1, 0),
    Op.ADD: (2, 1),
    Op.SUB: (2, 1),
    Op.EQ: (2, 1),
    Op.LT: (2, 1),
    Op.NOT: (1, 1),
    Op.JUMP: (0, 0),
    Op.JUMPI: (1, 0),
    Op.CALLER: (0, 1),
    Op.SLOAD: (1, 1),
    Op.SSTORE: (2, 0),
    Op.EMIT: (3, 0),
    Op.EXCALL: (0, 1),
    Op.REVERT: (0, 0),
}

JUMP_OPS = frozenset({Op.JUMP, Op.JUMPI})


class Instruction(NamedTuple):
    offset: int
    op: Op
    arg: Union[int, bytes, str, None]
    size: int

    @property
    def next_offset(self) -> int:
        return self.offset + self.size
