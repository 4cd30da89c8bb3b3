from .signing import (
    ADDRESS_SIZE,
    MAX_RESPONSE_BYTES,
    NONCE_SIZE,
    CryptoError,
    InvalidNonce,
    InvalidSeed,
    KeyPair,
    address_of,
    hash_bytes,
    keygen,
    parse_nonce_hex,
    seed_from_label,
    sign_response,
    sign_seal,
    verify_response,
    verify_seal_signature,
)

__all__ = [
    "ADDRESS_SIZE",
    "MAX_RESPONSE_BYTES",
    "NONCE_SIZE",
    "CryptoError",
    "InvalidNonce",
    "InvalidSeed",
    "KeyPair",
    "address_of",
    "hash_bytes",
    "keygen",
    "parse_nonce_hex",
    "seed_from_label",
    "sign_response",
    "sign_seal",
    "verify_response",
    "verify_seal_signature",
]
