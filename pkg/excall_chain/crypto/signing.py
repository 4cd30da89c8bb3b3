"""Keys, hashing, and the signed-response contract for external calls.

Responses are signed over a domain-separated payload so a signature made for
an external call can never be replayed as a block seal (or the other way
round), and the request nonce is part of what is signed.
"""

import hashlib
import re
from typing import Optional

from nacl.exceptions import CryptoError as NaclCryptoError
from nacl.signing import SigningKey, VerifyKey
from pydantic import BaseModel, ConfigDict, Field

RESPONSE_DOMAIN = b"EXCALL-RESP-V1"
SEAL_DOMAIN = b"EXCALL-SEAL-V1"

SEED_SIZE = 32
NONCE_SIZE = 32
DIGEST_SIZE = 32
PUBLIC_KEY_SIZE = 32
SIGNATURE_SIZE = 64
ADDRESS_SIZE = 20
MAX_RESPONSE_BYTES = 4096

_NONCE_HEX = re.compile(rf"[0-9a-fA-F]{{{2 * NONCE_SIZE}}}")


class CryptoError(Exception):
    """Base class for key and signing errors."""


class InvalidSeed(CryptoError, ValueError):
    """Raised when key generation is given anything but 32 bytes of seed."""


class InvalidNonce(CryptoError, ValueError):
    """Raised when a signing nonce is not exactly 32 bytes."""


def parse_nonce_hex(value: Optional[str]) -> bytes:
    """A nonce written as exactly 64 hex digits, nothing else around or inside it."""
    if value is None or not _NONCE_HEX.fullmatch(value):
        raise InvalidNonce(f"nonce must be {2 * NONCE_SIZE} hex characters, got {value!r}")
    return bytes.fromhex(value)


class KeyPair(BaseModel):
    """An Ed25519 key pair; the secret half is the 32-byte seed."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    public_key: bytes = Field(
        ..., min_length=PUBLIC_KEY_SIZE, max_length=PUBLIC_KEY_SIZE,
        description="32-byte verification key.",
    )
    secret_key: bytes = Field(
        ..., min_length=SEED_SIZE, max_length=SEED_SIZE, repr=False,
        description="32-byte signing seed.",
    )

    @property
    def address(self) -> bytes:
        return address_of(self.public_key)

    def sign_response(self, response: bytes, nonce: bytes) -> bytes:
        return sign_response(self.secret_key, response, nonce)

    def sign_seal(self, digest: bytes) -> bytes:
        return sign_seal(self.secret_key, digest)


def keygen(seed: bytes) -> KeyPair:
    """
    Derive a key pair from 32 bytes of seed.

    The derivation is deterministic, so the same seed always yields the same
    keys; tests and simulations rely on that for reproducible chains.

    Raises:
        InvalidSeed: If seed is not exactly 32 bytes.
    """
    if not isinstance(seed, (bytes, bytearray)) or len(seed) != SEED_SIZE:
        raise InvalidSeed(f"key seed must be {SEED_SIZE} bytes")
    signing_key = SigningKey(bytes(seed))
    return KeyPair(public_key=bytes(signing_key.verify_key), secret_key=bytes(seed))


def seed_from_label(label: str | bytes) -> bytes:
    """Stretch a human label into a 32-byte key seed (simulation keys only)."""
    if isinstance(label, str):
        label = label.encode("utf-8")
    return hash_bytes(b"EXCALL-SEED" + label)


def hash_bytes(data: bytes) -> bytes:
    """SHA-256 of data."""
    return hashlib.sha256(data).digest()


def address_of(public_key: bytes) -> bytes:
    """20-byte account address: the tail of the public key's hash."""
    return hash_bytes(public_key)[-ADDRESS_SIZE:]


def _response_payload(nonce: bytes, response: bytes) -> bytes:
    return RESPONSE_DOMAIN + nonce + response


def sign_response(secret_key: bytes, response: bytes, nonce: bytes) -> bytes:
    """
    Sign an external-call response bound to a request nonce.

    Args:
        secret_key: 32-byte signing seed of the external party.
        response: Raw response bytes.
        nonce: The 32-byte request nonce the response answers.

    Returns:
        64-byte Ed25519 signature over RESPONSE_DOMAIN ‖ nonce ‖ response.

    Raises:
        InvalidNonce: If nonce is not 32 bytes.
    """
    if len(nonce) != NONCE_SIZE:
        raise InvalidNonce(f"nonce must be {NONCE_SIZE} bytes, got {len(nonce)}")
    signed = SigningKey(bytes(secret_key)).sign(_response_payload(bytes(nonce), bytes(response)))
    return signed.signature


def verify_response(public_key: bytes, response: bytes, nonce: bytes, signature: bytes) -> bool:
    """
    Check a signed response against a public key and the request nonce.

    Never raises: malformed keys, nonces or signatures simply fail. Performs
    no I/O.
    """
    try:
        if len(nonce) != NONCE_SIZE or len(signature) != SIGNATURE_SIZE:
            return False
        VerifyKey(bytes(public_key)).verify(
            _response_payload(bytes(nonce), bytes(response)), bytes(signature)
        )
    except (NaclCryptoError, ValueError, TypeError):
        return False
    return True


def sign_seal(secret_key: bytes, digest: bytes) -> bytes:
    """Sign a block's sealed digest under the seal domain."""
    return SigningKey(bytes(secret_key)).sign(SEAL_DOMAIN + bytes(digest)).signature


def verify_seal_signature(public_key: bytes, digest: bytes, signature: bytes) -> bool:
    try:
        if len(signature) != SIGNATURE_SIZE:
            return False
        VerifyKey(bytes(public_key)).verify(SEAL_DOMAIN + bytes(digest), bytes(signature))
    except (NaclCryptoError, ValueError, TypeError):
        return False
    return True
