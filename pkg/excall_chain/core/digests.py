"""Identity and commitment digests for transactions and blocks."""

import struct
from typing import Iterable

from ..crypto import hash_bytes
from .codec import CanonicalWriter, encode_canonical, encode_sequence, write_header
from .types import Block, BlockHeader, CallMode, Intention, Transaction


def tx_identity(tx: Transaction) -> bytes:
    """
    Digest identifying a transaction.

    Sealer-filled calls are not part of a transaction's identity, so the
    digest is the same before and after finalization. Initiator-attached
    calls are part of what the initiator submitted and are included.
    """
    if tx.mode is CallMode.SEALER_EXECUTES and tx.excalls:
        tx = tx.model_copy(update={"excalls": ()})
    return hash_bytes(encode_canonical(tx))


def tx_root(transactions: Iterable[Transaction]) -> bytes:
    digests = [tx_identity(tx) for tx in transactions]
    w = CanonicalWriter().u32(len(digests))
    for digest in digests:
        w.raw(digest)
    return hash_bytes(w.getvalue())


def intent_root(intentions: Iterable[Intention]) -> bytes:
    return hash_bytes(encode_sequence(intentions))


def header_intention_hash(header: BlockHeader) -> bytes:
    w = CanonicalWriter()
    write_header(w, header, with_state_root=False)
    return hash_bytes(b"EXCALL-INTENT" + w.getvalue())


def intention_hash(block: Block) -> bytes:
    """Hash of the header without its state root; the extension never enters it."""
    return header_intention_hash(block.header)


def extension_root(block: Block) -> bytes:
    return hash_bytes(encode_sequence(block.excall_extension))


def sealed_digest(block: Block) -> bytes:
    """What the sealer signs: intention hash, extension root and state root."""
    return hash_bytes(intention_hash(block) + extension_root(block) + block.header.state_root)


def block_digest(block: Block) -> bytes:
    return sealed_digest(block)


def excall_nonce(intention_digest: bytes, tx_index: int, call_index: int) -> bytes:
    """Nonce for a sealer-performed call, fixed only once block content is."""
    return hash_bytes(intention_digest + struct.pack(">II", tx_index, call_index))


def initiator_nonce(sender: bytes, account_nonce: int, call_index: int) -> bytes:
    """Nonce for a call the initiator performs before submitting."""
    return hash_bytes(b"EXCALL-INIT" + sender + struct.pack(">QI", account_nonce, call_index))
