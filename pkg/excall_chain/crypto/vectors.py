"""Conformance vectors for the signed-response contract.

File format, one record per line::

    seed_hex, response_hex, nonce_hex, signature_hex

Blank lines and lines starting with '#' are ignored.
"""

import random
from pathlib import Path
from typing import NamedTuple

from .signing import keygen, sign_response, verify_response


class VectorRecord(NamedTuple):
    seed: bytes
    response: bytes
    nonce: bytes
    signature: bytes

    def to_line(self) -> str:
        return ", ".join(
            part.hex() for part in (self.seed, self.response, self.nonce, self.signature)
        )

    def check(self) -> bool:
        """True when the signature verifies and re-signing reproduces it."""
        keys = keygen(self.seed)
        if not verify_response(keys.public_key, self.response, self.nonce, self.signature):
            return False
        return sign_response(keys.secret_key, self.response, self.nonce) == self.signature


def make_vectors(count: int, rng_seed: int = 0, max_response: int = 64) -> list[VectorRecord]:
    """Generate count records from a seeded RNG."""
    rng = random.Random(rng_seed)
    records = []
    for _ in range(count):
        seed = rng.randbytes(32)
        response = rng.randbytes(rng.randint(0, max_response))
        nonce = rng.randbytes(32)
        signature = sign_response(seed, response, nonce)
        records.append(VectorRecord(seed, response, nonce, signature))
    return records


def write_vectors(path: Path, records: list[VectorRecord]) -> None:
    lines = ["# seed_hex, response_hex, nonce_hex, signature_hex"]
    lines.extend(record.to_line() for record in records)
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_vectors(path: Path) -> list[VectorRecord]:
    """
    Parse a vector file.

    Raises:
        ValueError: On a line without four comma-separated hex fields.
    """
    records = []
    for number, raw in enumerate(Path(path).read_text(encoding="ascii").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [field.strip() for field in line.split(",")]
        if len(fields) != 4:
            raise ValueError(f"line {number}: expected 4 fields, got {len(fields)}")
        records.append(VectorRecord(*(bytes.fromhex(field) for field in fields)))
    return records
