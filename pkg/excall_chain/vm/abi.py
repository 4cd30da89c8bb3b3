"""Call encoding: selectors, argument words, deploy payloads."""

import struct
from typing import Union

from ..crypto import hash_bytes
from .program import ContractProgram, ProgramError

Word = Union[int, bytes, bool]


def selector(name: str) -> bytes:
    """First four bytes of the hash of a function name."""
    if not name:
        raise ValueError("selector name must be non-empty")
    return hash_bytes(name.encode("utf-8"))[:4]


def topic(name: str) -> bytes:
    """32-byte event topic for an event name."""
    return hash_bytes(name.encode("utf-8"))


def word(value: Word) -> bytes:
    """Encode an int, bool or short byte string as a 32-byte big-endian word."""
    if isinstance(value, (bytes, bytearray)):
        if len(value) > 32:
            raise ValueError("word value longer than 32 bytes")
        return bytes(value).rjust(32, b"\x00")
    value = int(value)
    if not 0 <= value < 1 << 256:
        raise ValueError("word value out of range")
    return value.to_bytes(32, "big")


def encode_call(name: str, *args: Word) -> bytes:
    return selector(name) + b"".join(word(arg) for arg in args)


def deploy_input(program: ContractProgram, *args: Word) -> bytes:
    """Bytecode length, bytecode, then constructor argument words."""
    return struct.pack(">I", len(program.bytecode)) + program.bytecode + b"".join(word(a) for a in args)


def split_deploy_input(data: bytes) -> tuple[bytes, bytes]:
    if len(data) < 4:
        raise ProgramError("deploy input too short")
    size = struct.unpack(">I", data[:4])[0]
    if 4 + size > len(data):
        raise ProgramError("deploy input truncated")
    return data[4:4 + size], data[4 + size:]


def contract_address(sender: bytes, account_nonce: int) -> bytes:
    return hash_bytes(b"EXCALL-DEPLOY" + sender + struct.pack(">Q", account_nonce))[-20:]
