from .codec import (
    CanonicalReader,
    CanonicalWriter,
    CodecError,
    DecodeError,
    InvalidValue,
    decode_canonical,
    decode_sequence,
    encode_canonical,
    encode_sequence,
)
from .digests import (
    block_digest,
    excall_nonce,
    extension_root,
    header_intention_hash,
    initiator_nonce,
    intent_root,
    intention_hash,
    sealed_digest,
    tx_identity,
    tx_root,
)
from .types import (
    ZERO_ADDRESS,
    ZERO_DIGEST,
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

__all__ = [
    "CanonicalReader",
    "CanonicalWriter",
    "CodecError",
    "DecodeError",
    "InvalidValue",
    "decode_canonical",
    "decode_sequence",
    "encode_canonical",
    "encode_sequence",
    "block_digest",
    "excall_nonce",
    "extension_root",
    "header_intention_hash",
    "initiator_nonce",
    "intent_root",
    "intention_hash",
    "sealed_digest",
    "tx_identity",
    "tx_root",
    "ZERO_ADDRESS",
    "ZERO_DIGEST",
    "Block",
    "BlockHeader",
    "CallMode",
    "CallOutcome",
    "EventLog",
    "ExtensionEntry",
    "Intention",
    "Receipt",
    "ReceiptStatus",
    "Transaction",
    "VerifiableExternalCall",
]
