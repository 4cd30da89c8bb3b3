"""The trusted external party: draws outcomes and signs them over the request nonce."""

import logging
import random
import threading
from fractions import Fraction

from ..clients.oracle import OracleEnvelope
from ..config import OracleSettings, parse_probability
from ..crypto import KeyPair

logger = logging.getLogger(__name__)

WIN = b"1"
LOSE = b"0"


class OracleService:
    """
    Seeded random outcome service.

    Draws are taken behind a lock, so under a fixed seed the sequence of
    outcomes depends only on the order requests are answered in.

    Args:
        keypair: Signing key whose public half verifiers pin.
        win_probability: Chance that a draw is b"1"; any rational in [0, 1].
        seed: Seed of the outcome stream.
    """

    def __init__(self, keypair: KeyPair, win_probability=Fraction(1, 2), seed: int = 7) -> None:
        self.keypair = keypair
        self.win_probability = parse_probability(win_probability)
        self.seed = seed
        self._rng = random.Random(seed)
        self._lock = threading.Lock()
        self.served = 0
        self.wins = 0

    @classmethod
    def from_settings(cls, settings: OracleSettings) -> "OracleService":
        return cls(settings.keypair, settings.win_probability, settings.seed)

    @property
    def public_key(self) -> bytes:
        return self.keypair.public_key

    def draw(self) -> bytes:
        p = self.win_probability
        with self._lock:
            won = self._rng.randrange(p.denominator) < p.numerator
            self.served += 1
            if won:
                self.wins += 1
        return WIN if won else LOSE

    def answer(self, nonce: bytes) -> OracleEnvelope:
        """Draw an outcome and sign it bound to nonce."""
        response = self.draw()
        logger.debug("answered nonce %s with %s", nonce.hex()[:16], response)
        return OracleEnvelope(
            response=response,
            nonce=nonce,
            public_key=self.keypair.public_key,
            signature=self.keypair.sign_response(response, nonce),
        )
