"""Byte-exact canonical encoding.

Integers are big-endian and fixed width, byte strings and sequences carry a
4-byte length prefix, and fields are written in declaration order. The same
bytes serve as the wire format, the block-log format and the hash input.
"""

import struct
from typing import Callable, Iterable, Sequence, TypeVar

from pydantic import ValidationError

from .types import (
    Block,
    BlockHeader,
    CallMode,
    CallOutcome,
    EventLog,
    ExtensionEntry,
    Intention,
    Receipt,
    ReceiptStatus,
    Transaction,
    VerifiableExternalCall,
)

T = TypeVar("T")

_MODE_CODES = {CallMode.SEALER_EXECUTES: 0, CallMode.INITIATOR_ATTACHED: 1}
_STATUS_CODES = {
    ReceiptStatus.SUCCESS: 0,
    ReceiptStatus.FAILED_EXEC: 1,
    ReceiptStatus.FAILED_EXCALL_UNVERIFIED: 2,
    ReceiptStatus.FAILED_EXCALL_NO_RESPONSE: 3,
}
_OUTCOME_CODES = {CallOutcome.RECORDED: 0, CallOutcome.UNVERIFIED: 1, CallOutcome.NO_RESPONSE: 2}


class CodecError(Exception):
    """Base class for encoding errors."""


class DecodeError(CodecError):
    """Raised on truncated input, trailing bytes or unknown codes."""


class InvalidValue(CodecError):
    """Raised when decoded fields violate the target type's invariants."""


class CanonicalWriter:
    def __init__(self) -> None:
        self._parts: list[bytes] = []

    def u8(self, value: int) -> "CanonicalWriter":
        self._parts.append(struct.pack(">B", value))
        return self

    def u16(self, value: int) -> "CanonicalWriter":
        self._parts.append(struct.pack(">H", value))
        return self

    def u32(self, value: int) -> "CanonicalWriter":
        self._parts.append(struct.pack(">I", value))
        return self

    def u64(self, value: int) -> "CanonicalWriter":
        self._parts.append(struct.pack(">Q", value))
        return self

    def raw(self, data: bytes) -> "CanonicalWriter":
        self._parts.append(bytes(data))
        return self

    def blob(self, data: bytes) -> "CanonicalWriter":
        return self.u32(len(data)).raw(data)

    def text(self, value: str) -> "CanonicalWriter":
        return self.blob(value.encode("utf-8"))

    def optional_blob(self, data: bytes | None) -> "CanonicalWriter":
        if data is None:
            return self.u8(0)
        return self.u8(1).blob(data)

    def sequence(self, items: Sequence[T], write_item: Callable[["CanonicalWriter", T], None]) -> "CanonicalWriter":
        self.u32(len(items))
        for item in items:
            write_item(self, item)
        return self

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class CanonicalReader:
    def __init__(self, data: bytes) -> None:
        self._data = memoryview(bytes(data))
        self._pos = 0

    def _take(self, size: int) -> bytes:
        end = self._pos + size
        if size < 0 or end > len(self._data):
            raise DecodeError(f"truncated input: wanted {size} bytes at offset {self._pos}")
        chunk = self._data[self._pos:end].tobytes()
        self._pos = end
        return chunk

    def u8(self) -> int:
        return self._take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self._take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self._take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self._take(8))[0]

    def raw(self, size: int) -> bytes:
        return self._take(size)

    def blob(self) -> bytes:
        return self._take(self.u32())

    def text(self) -> str:
        try:
            return self.blob().decode("utf-8")
        except UnicodeDecodeError as e:
            raise DecodeError(f"invalid utf-8 text: {e}") from e

    def optional_blob(self) -> bytes | None:
        flag = self.u8()
        if flag == 0:
            return None
        if flag != 1:
            raise DecodeError(f"bad optional flag {flag}")
        return self.blob()

    def sequence(self, read_item: Callable[["CanonicalReader"], T]) -> list[T]:
        count = self.u32()
        if count > len(self._data) - self._pos:
            raise DecodeError(f"sequence count {count} exceeds remaining input")
        return [read_item(self) for _ in range(count)]

    def finish(self) -> None:
        if self._pos != len(self._data):
            raise DecodeError(f"{len(self._data) - self._pos} trailing bytes")


def _code(table: dict, value) -> int:
    return table[value]


def _member(table: dict, code: int):
    for member, member_code in table.items():
        if member_code == code:
            return member
    raise DecodeError(f"unknown code {code}")


# ---------------------------------------------------------------------------
# Per-type writers and readers
# ---------------------------------------------------------------------------

def _write_call(w: CanonicalWriter, call: VerifiableExternalCall) -> None:
    w.text(call.request_uri).blob(call.request_nonce).blob(call.public_key)
    w.blob(call.response).blob(call.signature)


def _read_call(r: CanonicalReader) -> dict:
    return {
        "request_uri": r.text(),
        "request_nonce": r.blob(),
        "public_key": r.blob(),
        "response": r.blob(),
        "signature": r.blob(),
    }


def _write_tx(w: CanonicalWriter, tx: Transaction) -> None:
    w.blob(tx.sender).u64(tx.account_nonce).optional_blob(tx.target).blob(tx.input)
    w.sequence(tx.excalls, _write_call)
    w.u8(_code(_MODE_CODES, tx.mode))


def _read_tx(r: CanonicalReader) -> dict:
    return {
        "sender": r.blob(),
        "account_nonce": r.u64(),
        "target": r.optional_blob(),
        "input": r.blob(),
        "excalls": r.sequence(lambda rr: _build(VerifiableExternalCall, _read_call(rr))),
        "mode": _member(_MODE_CODES, r.u8()),
    }


def _write_event(w: CanonicalWriter, event: EventLog) -> None:
    w.blob(event.contract).blob(event.topic).blob(event.data)


def _read_event(r: CanonicalReader) -> dict:
    return {"contract": r.blob(), "topic": r.blob(), "data": r.blob()}


def _write_receipt(w: CanonicalWriter, receipt: Receipt) -> None:
    w.blob(receipt.tx_digest).u8(_code(_STATUS_CODES, receipt.status))
    w.sequence(receipt.events, _write_event)
    w.u32(receipt.excall_count).blob(receipt.output)


def _read_receipt(r: CanonicalReader) -> dict:
    return {
        "tx_digest": r.blob(),
        "status": _member(_STATUS_CODES, r.u8()),
        "events": r.sequence(lambda rr: _build(EventLog, _read_event(rr))),
        "excall_count": r.u32(),
        "output": r.blob(),
    }


def _write_intention(w: CanonicalWriter, intention: Intention) -> None:
    w.u32(intention.tx_index).u32(intention.call_index).text(intention.uri_template)


def _read_intention(r: CanonicalReader) -> dict:
    return {"tx_index": r.u32(), "call_index": r.u32(), "uri_template": r.text()}


def _write_entry(w: CanonicalWriter, entry: ExtensionEntry) -> None:
    w.u32(entry.tx_index).u32(entry.call_index).u8(_code(_OUTCOME_CODES, entry.outcome))
    if entry.call is None:
        w.u8(0)
    else:
        w.u8(1)
        _write_call(w, entry.call)


def _read_entry(r: CanonicalReader) -> dict:
    fields = {
        "tx_index": r.u32(),
        "call_index": r.u32(),
        "outcome": _member(_OUTCOME_CODES, r.u8()),
    }
    flag = r.u8()
    if flag not in (0, 1):
        raise DecodeError(f"bad call flag {flag}")
    fields["call"] = _build(VerifiableExternalCall, _read_call(r)) if flag else None
    return fields


def write_header(w: CanonicalWriter, header: BlockHeader, *, with_state_root: bool = True) -> None:
    w.blob(header.parent_digest).u64(header.number).u64(header.timestamp)
    w.blob(header.tx_root).blob(header.intent_root)
    if with_state_root:
        w.blob(header.state_root)
    w.blob(header.sealer)


def _read_header(r: CanonicalReader) -> dict:
    return {
        "parent_digest": r.blob(),
        "number": r.u64(),
        "timestamp": r.u64(),
        "tx_root": r.blob(),
        "intent_root": r.blob(),
        "state_root": r.blob(),
        "sealer": r.blob(),
    }


def _write_block(w: CanonicalWriter, block: Block) -> None:
    write_header(w, block.header)
    w.sequence(block.transactions, _write_tx)
    w.sequence(block.excall_extension, _write_entry)
    w.blob(block.seal)


def _read_block(r: CanonicalReader) -> dict:
    return {
        "header": _build(BlockHeader, _read_header(r)),
        "transactions": r.sequence(lambda rr: _build(Transaction, _read_tx(rr))),
        "excall_extension": r.sequence(lambda rr: _build(ExtensionEntry, _read_entry(rr))),
        "seal": r.blob(),
    }


_CODECS: dict[type, tuple[Callable, Callable]] = {
    VerifiableExternalCall: (_write_call, _read_call),
    Transaction: (_write_tx, _read_tx),
    EventLog: (_write_event, _read_event),
    Receipt: (_write_receipt, _read_receipt),
    Intention: (_write_intention, _read_intention),
    ExtensionEntry: (_write_entry, _read_entry),
    BlockHeader: (write_header, _read_header),
    Block: (_write_block, _read_block),
}


def _build(cls: type[T], fields: dict) -> T:
    try:
        return cls(**fields)
    except ValidationError as e:
        raise InvalidValue(f"{cls.__name__}: {e}") from e


def _codec_for(cls: type) -> tuple[Callable, Callable]:
    try:
        return _CODECS[cls]
    except KeyError:
        raise TypeError(f"no canonical encoding for {cls.__name__}") from None


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

def encode_canonical(value) -> bytes:
    """Encode one core value to its canonical bytes."""
    write, _ = _codec_for(type(value))
    w = CanonicalWriter()
    write(w, value)
    return w.getvalue()


def decode_canonical(data: bytes, cls: type[T]) -> T:
    """
    Decode canonical bytes into an instance of cls.

    Raises:
        DecodeError: On truncated or trailing bytes.
        InvalidValue: When the decoded fields break cls's invariants.
    """
    _, read = _codec_for(cls)
    r = CanonicalReader(data)
    value = _build(cls, read(r))
    r.finish()
    return value


def encode_sequence(values: Iterable) -> bytes:
    """Length-prefixed concatenation; an empty sequence encodes to 4 zero bytes."""
    values = list(values)
    w = CanonicalWriter().u32(len(values))
    for value in values:
        write, _ = _codec_for(type(value))
        write(w, value)
    return w.getvalue()


def decode_sequence(data: bytes, cls: type[T]) -> list[T]:
    _, read = _codec_for(cls)
    r = CanonicalReader(data)
    values = r.sequence(lambda rr: _build(cls, read(rr)))
    r.finish()
    return values
