"""External-call ports: how a sealer reaches an oracle service."""

import base64
import binascii
import logging
import threading
from typing import Optional, Protocol

import httpx
from pydantic import BaseModel, ConfigDict, Field

from ..crypto import MAX_RESPONSE_BYTES, NONCE_SIZE, InvalidNonce, parse_nonce_hex

logger = logging.getLogger(__name__)


class ExcallTransportError(Exception):
    """The call produced no usable response (timeout, refused, 4xx/5xx, bad body)."""


class OracleEnvelope(BaseModel):
    """
    JSON body returned by an oracle service.

    The signature covers the raw response bytes and the nonce, never the
    JSON text, so re-encoding the envelope cannot break verification.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    response: bytes = Field(..., max_length=MAX_RESPONSE_BYTES)
    nonce: bytes = Field(..., min_length=NONCE_SIZE, max_length=NONCE_SIZE)
    public_key: bytes = Field(..., min_length=32, max_length=32)
    signature: bytes

    def to_wire(self) -> dict:
        return {
            "response": base64.b64encode(self.response).decode("ascii"),
            "nonce": self.nonce.hex(),
            "pubkey": self.public_key.hex(),
            "sig": base64.b64encode(self.signature).decode("ascii"),
        }

    @classmethod
    def from_wire(cls, body: dict) -> "OracleEnvelope":
        """
        Parse a wire envelope.

        Raises:
            ExcallTransportError: If a field is missing or badly encoded.
        """
        try:
            return cls(
                response=base64.b64decode(body["response"], validate=True),
                nonce=bytes.fromhex(body["nonce"]),
                public_key=bytes.fromhex(body["pubkey"]),
                signature=base64.b64decode(body["sig"], validate=True),
            )
        except (KeyError, TypeError, ValueError, binascii.Error) as e:
            raise ExcallTransportError(f"malformed oracle envelope: {e}") from e


class NonceSigner(Protocol):
    def answer(self, nonce: bytes) -> OracleEnvelope: ...


class ExcallPort(Protocol):
    def fetch(self, uri: str, timeout: float) -> OracleEnvelope: ...


def nonce_from_uri(uri: str) -> bytes:
    """Pull the hex `nonce` query parameter out of a request URI."""
    try:
        return parse_nonce_hex(httpx.URL(uri).params.get("nonce"))
    except InvalidNonce as e:
        raise ExcallTransportError(f"request has no 64-hex-char nonce: {uri}") from e


def _describe_status(code: int, body: str) -> str:
    """Turn an oracle HTTP status into a readable failure message."""
    if code == 400:
        return f"Oracle rejected the request (400): {body}"
    if code == 404:
        return "Oracle endpoint not found (404). Check the URI in the contract."
    if code == 429:
        return "Oracle rate limit hit (429)."
    if code >= 500:
        return f"Oracle service error ({code})."
    return f"Oracle returned HTTP {code}: {body}"


# ---------------------------------------------------------------------------
# Ports
# ---------------------------------------------------------------------------

class HttpExcallPort:
    """Performs external calls over HTTP with httpx."""

    def __init__(self, client: Optional[httpx.Client] = None) -> None:
        self._client = client or httpx.Client()

    def fetch(self, uri: str, timeout: float) -> OracleEnvelope:
        try:
            response = self._client.get(uri, timeout=timeout)
        except httpx.TimeoutException as e:
            raise ExcallTransportError(f"Oracle call timed out after {timeout:.1f}s: {uri}") from e
        except httpx.HTTPError as e:
            raise ExcallTransportError(f"Oracle call failed: {e}") from e
        if response.status_code != 200:
            raise ExcallTransportError(_describe_status(response.status_code, response.text[:200]))
        try:
            body = response.json()
        except ValueError as e:
            raise ExcallTransportError(f"Oracle returned non-JSON body: {e}") from e
        if not isinstance(body, dict):
            raise ExcallTransportError("Oracle returned a non-object JSON body")
        return OracleEnvelope.from_wire(body)

    def close(self) -> None:
        self._client.close()


class LocalExcallPort:
    """
    Routes calls to in-process services by URI prefix, skipping the network.

    Used by the simulator so thousands of calls cost no sockets; the
    envelope and signature checks are exactly the HTTP ones.
    """

    def __init__(self, services: dict[str, NonceSigner]) -> None:
        self._services = dict(services)
        self.online = True

    def fetch(self, uri: str, timeout: float) -> OracleEnvelope:
        if not self.online:
            raise ExcallTransportError(f"Oracle unreachable: {uri}")
        for prefix in sorted(self._services, key=len, reverse=True):
            if uri.startswith(prefix):
                return self._services[prefix].answer(nonce_from_uri(uri))
        raise ExcallTransportError(_describe_status(404, uri))


class CountingPort:
    """Counts every call that reaches the port; a missing inner port always fails."""

    def __init__(self, inner: Optional[ExcallPort] = None) -> None:
        self._inner = inner
        self._lock = threading.Lock()
        self.calls = 0

    def fetch(self, uri: str, timeout: float) -> OracleEnvelope:
        with self._lock:
            self.calls += 1
        if self._inner is None:
            raise ExcallTransportError("this node has no external-call capability")
        logger.debug("external call %s", uri)
        return self._inner.fetch(uri, timeout)
