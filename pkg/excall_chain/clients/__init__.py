from .oracle import (
    CountingPort,
    ExcallPort,
    ExcallTransportError,
    HttpExcallPort,
    LocalExcallPort,
    OracleEnvelope,
    nonce_from_uri,
)

__all__ = [
    "CountingPort",
    "ExcallPort",
    "ExcallTransportError",
    "HttpExcallPort",
    "LocalExcallPort",
    "OracleEnvelope",
    "nonce_from_uri",
]
