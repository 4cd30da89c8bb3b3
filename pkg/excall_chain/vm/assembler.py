"""Line-oriented assembler and disassembler for contract programs.

Grammar, one statement per line::

    ; comment
    .entry beginBet                 entry named by a function, selector = selector("beginBet")
    .entry L12 0x1a2b3c4d           entry with an explicit selector
    label:                          label; may share a line with an instruction
    PUSH8 7                         0..255, decimal or 0x
    PUSHB 0x00ff                    hex keeps its length
    PUSHB 1000                      decimal, minimal width
    PUSHB arg:0 | response | topic:BetPlaced
    JUMPI label
    EXCALL "${ORACLE_URL}/excallrand?nonce={nonce}"

``${NAME}`` is replaced from the constants mapping before parsing.
"""

import json
import re
import struct
from string import Template
from typing import Mapping, Optional

from .abi import selector, topic
from .opcodes import JUMP_OPS, MAGIC, RESPONSE_KEY, Op, arg_key
from .program import ContractProgram, ProgramError

_LABEL = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_NO_OPERAND = {op for op in Op if op not in JUMP_OPS and op not in (Op.PUSH8, Op.PUSHB, Op.EXCALL)}


class AssembleError(ProgramError):
    """Raised for malformed assembly; carries the 1-based source line."""

    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


def _strip_comment(text: str) -> str:
    in_string = escaped = False
    for i, ch in enumerate(text):
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
        elif ch == '"':
            in_string = True
        elif ch == ";":
            return text[:i]
    return text


def _parse_int(token: str) -> int:
    return int(token, 16) if token.lower().startswith("0x") else int(token, 10)


def _pushb_bytes(token: str) -> bytes:
    if token == "response":
        return RESPONSE_KEY.to_bytes(32, "big")
    if token.startswith("arg:"):
        return arg_key(int(token[4:])).to_bytes(32, "big")
    if token.startswith("topic:"):
        name = token[6:]
        if not name:
            raise ValueError("topic name is empty")
        return topic(name)
    if token.lower().startswith("0x"):
        digits = token[2:]
        if not digits:
            raise ValueError("empty hex literal")
        return bytes.fromhex(digits if len(digits) % 2 == 0 else "0" + digits)
    value = int(token, 10)
    if value < 0:
        raise ValueError("negative literal")
    return value.to_bytes(max(1, (value.bit_length() + 7) // 8), "big")


class _Statement:
    __slots__ = ("line", "op", "operand", "size")

    def __init__(self, line: int, op: Op, operand, size: int) -> None:
        self.line = line
        self.op = op
        self.operand = operand
        self.size = size


def assemble(source: str, *, constants: Optional[Mapping[str, str]] = None) -> ContractProgram:
    """
    Assemble source into a validated ContractProgram.

    Args:
        source: Assembly text.
        constants: Values for ``${NAME}`` placeholders.

    Returns:
        ContractProgram whose entry table follows the order of `.entry` lines.

    Raises:
        AssembleError: Unknown mnemonic, bad operand, unresolved label,
            missing constant or an EXCALL operand that is not an http URI.
    """
    constants = dict(constants or {})
    labels: dict[str, int] = {}
    entries: list[tuple[int, bytes, str]] = []
    statements: list[_Statement] = []
    offset = 0

    for lineno, raw in enumerate(source.splitlines(), start=1):
        try:
            text = Template(raw).substitute(constants)
        except KeyError as e:
            raise AssembleError(lineno, f"undefined constant {e.args[0]}") from None
        except ValueError as e:
            raise AssembleError(lineno, f"bad placeholder: {e}") from None
        text = _strip_comment(text).strip()
        if not text:
            continue

        if text.startswith(".entry"):
            parts = text.split()
            if len(parts) not in (2, 3) or parts[0] != ".entry" or not _LABEL.match(parts[1]):
                raise AssembleError(lineno, "expected '.entry label [0xSELECTOR]'")
            if len(parts) == 3:
                try:
                    sel = bytes.fromhex(parts[2][2:]) if parts[2].lower().startswith("0x") else b""
                except ValueError:
                    sel = b""
                if len(sel) != 4:
                    raise AssembleError(lineno, f"selector must be 4 hex bytes, got {parts[2]!r}")
            else:
                sel = selector(parts[1])
            if any(sel == existing for _, existing, _ in entries):
                raise AssembleError(lineno, f"duplicate entry selector {sel.hex()}")
            entries.append((lineno, sel, parts[1]))
            continue

        while True:
            match = re.match(r"^([A-Za-z_][A-Za-z0-9_]*):\s*", text)
            if not match:
                break
            name = match.group(1)
            if name in labels:
                raise AssembleError(lineno, f"label {name!r} defined twice")
            labels[name] = offset
            text = text[match.end():]
        if not text:
            continue

        mnemonic, _, rest = text.partition(" ")
        rest = rest.strip()
        try:
            op = Op[mnemonic.upper()]
        except KeyError:
            raise AssembleError(lineno, f"unknown mnemonic {mnemonic!r}") from None

        statement = _parse_operand(lineno, op, rest)
        statements.append(statement)
        offset += statement.size

    code = bytearray()
    for st in statements:
        code.append(st.op)
        if st.op is Op.PUSH8:
            code.append(st.operand)
        elif st.op is Op.PUSHB:
            code += bytes([len(st.operand)]) + st.operand
        elif st.op in JUMP_OPS:
            target = _resolve(labels, st.operand, st.line)
            code += struct.pack(">H", target)
        elif st.op is Op.EXCALL:
            encoded = st.operand.encode("utf-8")
            code += struct.pack(">H", len(encoded)) + encoded

    header = bytearray(MAGIC)
    if len(entries) > 255:
        raise AssembleError(entries[255][0], "more than 255 entries")
    header.append(len(entries))
    for lineno, sel, label in entries:
        header += sel + struct.pack(">H", _resolve(labels, label, lineno))

    try:
        return ContractProgram.from_bytecode(bytes(header + code))
    except AssembleError:
        raise
    except ProgramError as e:
        raise AssembleError(0, str(e)) from e


def _resolve(labels: Mapping[str, int], name: str, lineno: int) -> int:
    if name in labels:
        return labels[name]
    raise AssembleError(lineno, f"unresolved label {name!r}")


def _parse_operand(lineno: int, op: Op, rest: str) -> _Statement:
    if op in _NO_OPERAND:
        if rest:
            raise AssembleError(lineno, f"{op.name} takes no operand")
        return _Statement(lineno, op, None, 1)

    if not rest:
        raise AssembleError(lineno, f"{op.name} needs an operand")

    if op is Op.PUSH8:
        try:
            value = _parse_int(rest)
        except ValueError:
            raise AssembleError(lineno, f"bad PUSH8 operand {rest!r}") from None
        if not 0 <= value <= 255:
            raise AssembleError(lineno, f"PUSH8 operand {value} out of range")
        return _Statement(lineno, op, value, 2)

    if op is Op.PUSHB:
        try:
            data = _pushb_bytes(rest)
        except ValueError as e:
            raise AssembleError(lineno, f"bad PUSHB operand {rest!r}: {e}") from None
        if not 1 <= len(data) <= 32:
            raise AssembleError(lineno, f"PUSHB operand is {len(data)} bytes; must be 1..32")
        return _Statement(lineno, op, data, 2 + len(data))

    if op in JUMP_OPS:
        if not _LABEL.match(rest):
            raise AssembleError(lineno, f"bad label {rest!r}")
        return _Statement(lineno, op, rest, 3)

    # EXCALL
    try:
        uri, end = json.JSONDecoder().raw_decode(rest)
    except json.JSONDecodeError:
        raise AssembleError(lineno, "EXCALL operand must be a double-quoted string") from None
    if not isinstance(uri, str) or rest[end:].strip():
        raise AssembleError(lineno, "EXCALL operand must be a single string")
    if not uri.startswith("http"):
        raise AssembleError(lineno, f"EXCALL URI must start with 'http': {uri!r}")
    size = len(uri.encode("utf-8"))
    if size > 0xFFFF:
        raise AssembleError(lineno, "EXCALL URI too long")
    return _Statement(lineno, op, uri, 3 + size)


def disassemble(program: ContractProgram) -> str:
    """Render program as assembly that assembles back to the same bytecode."""
    instructions = program.instructions
    targets = {ins.arg for ins in instructions.values() if ins.op in JUMP_OPS}
    targets.update(program.entry_points.values())

    lines = [f".entry L{offset} 0x{sel.hex()}" for sel, offset in program.entry_points.items()]
    for offset in sorted(instructions):
        ins = instructions[offset]
        if offset in targets:
            lines.append(f"L{offset}:")
        if ins.op is Op.PUSH8:
            lines.append(f"    PUSH8 {ins.arg}")
        elif ins.op is Op.PUSHB:
            lines.append(f"    PUSHB 0x{ins.arg.hex()}")
        elif ins.op in JUMP_OPS:
            lines.append(f"    {ins.op.name} L{ins.arg}")
        elif ins.op is Op.EXCALL:
            lines.append(f"    EXCALL {json.dumps(ins.arg)}")
        else:
            lines.append(f"    {ins.op.name}")
    return "\n".join(lines) + "\n"
