"""Canonical data model: calls, transactions, receipts, blocks."""

from enum import Enum
from typing import Annotated, Optional

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, PlainSerializer, field_validator, model_validator

from ..crypto import MAX_RESPONSE_BYTES, verify_response


def _from_hex(value):
    if isinstance(value, str):
        return bytes.fromhex(value[2:] if value.startswith("0x") else value)
    return value


HexBytes = Annotated[
    bytes,
    BeforeValidator(_from_hex),
    PlainSerializer(lambda value: value.hex(), return_type=str, when_used="json"),
]
Address = Annotated[HexBytes, Field(min_length=20, max_length=20)]
Bytes32 = Annotated[HexBytes, Field(min_length=32, max_length=32)]

ZERO_DIGEST = bytes(32)
ZERO_ADDRESS = bytes(20)


class CallMode(str, Enum):
    """Who performs a transaction's external calls."""

    SEALER_EXECUTES = "sealer_executes"
    INITIATOR_ATTACHED = "initiator_attached"


class ReceiptStatus(str, Enum):
    SUCCESS = "success"
    FAILED_EXEC = "failed_exec"
    FAILED_EXCALL_UNVERIFIED = "failed_excall_unverified"
    FAILED_EXCALL_NO_RESPONSE = "failed_excall_no_response"


class CallOutcome(str, Enum):
    """What the sealer got back for one external call."""

    RECORDED = "recorded"
    UNVERIFIED = "unverified"
    NO_RESPONSE = "no_response"


class _Value(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class VerifiableExternalCall(_Value):
    """A request, the key it was answered under, and the signed response."""

    request_uri: str = Field(..., description="Absolute http(s) URI that was called.")
    request_nonce: Bytes32 = Field(..., description="Nonce the response is bound to.")
    public_key: Bytes32 = Field(..., description="Verification key of the answering party.")
    response: HexBytes = Field(..., max_length=MAX_RESPONSE_BYTES)
    signature: HexBytes

    @field_validator("request_uri")
    @classmethod
    def _http_only(cls, value: str) -> str:
        if not value.startswith("http"):
            raise ValueError("request_uri must start with 'http'")
        return value

    def is_valid(self) -> bool:
        return verify_response(self.public_key, self.response, self.request_nonce, self.signature)


class Transaction(_Value):
    sender: Address
    account_nonce: int = Field(..., ge=0)
    target: Optional[Address] = Field(default=None, description="Contract address; None deploys.")
    input: HexBytes = b""
    excalls: tuple[VerifiableExternalCall, ...] = ()
    mode: CallMode = CallMode.SEALER_EXECUTES

    @model_validator(mode="after")
    def _attached_calls_present(self) -> "Transaction":
        if self.mode is CallMode.INITIATOR_ATTACHED and not self.excalls:
            raise ValueError("initiator-attached transactions must carry their calls")
        return self

    @property
    def is_deploy(self) -> bool:
        return self.target is None


class EventLog(_Value):
    contract: Address
    topic: Bytes32
    data: HexBytes = b""


class Receipt(_Value):
    tx_digest: Bytes32
    status: ReceiptStatus
    events: tuple[EventLog, ...] = ()
    excall_count: int = Field(default=0, ge=0)
    output: HexBytes = Field(default=b"", description="Return word of a successful call, if any.")

    @property
    def succeeded(self) -> bool:
        return self.status is ReceiptStatus.SUCCESS


class Intention(_Value):
    """A declared external call, committed to by the header's intent_root."""

    tx_index: int = Field(..., ge=0)
    call_index: int = Field(..., ge=0)
    uri_template: str


class ExtensionEntry(_Value):
    tx_index: int = Field(..., ge=0)
    call_index: int = Field(..., ge=0)
    outcome: CallOutcome = CallOutcome.RECORDED
    call: Optional[VerifiableExternalCall] = None

    @model_validator(mode="after")
    def _call_matches_outcome(self) -> "ExtensionEntry":
        if (self.call is None) != (self.outcome is CallOutcome.NO_RESPONSE):
            raise ValueError("a call tuple is present exactly when a response was received")
        return self


class BlockHeader(_Value):
    parent_digest: Bytes32
    number: int = Field(..., ge=0)
    timestamp: int = Field(..., ge=0, description="Unix milliseconds.")
    tx_root: Bytes32
    intent_root: Bytes32
    state_root: Bytes32 = ZERO_DIGEST
    sealer: Address


class Block(_Value):
    header: BlockHeader
    transactions: tuple[Transaction, ...] = ()
    excall_extension: tuple[ExtensionEntry, ...] = ()
    seal: HexBytes = b""

    @property
    def number(self) -> int:
        return self.header.number

    def entries_for(self, tx_index: int) -> tuple[ExtensionEntry, ...]:
        return tuple(entry for entry in self.excall_extension if entry.tx_index == tx_index)
