from .http import OracleServer, create_app, serve
from .relayer import (
    BET_PLACED,
    BetEvent,
    LocalOutcomes,
    Relayer,
    RelayerCursor,
    ServiceOutcomes,
    decode_bet_placed,
    outcome_nonce,
)
from .service import LOSE, WIN, OracleService

__all__ = [
    "OracleServer",
    "create_app",
    "serve",
    "BET_PLACED",
    "BetEvent",
    "LocalOutcomes",
    "Relayer",
    "RelayerCursor",
    "ServiceOutcomes",
    "decode_bet_placed",
    "outcome_nonce",
    "LOSE",
    "WIN",
    "OracleService",
]
