"""Blocks that were changed after finalizing and then re-sealed by a dishonest sealer."""

import pytest

from excall_chain.chain import BlockRejected, RejectReason
from excall_chain.config import oracle_keypair
from excall_chain.core.digests import intent_root, tx_root
from excall_chain.core.types import CallOutcome, ExtensionEntry, Transaction, VerifiableExternalCall
from excall_chain.crypto import hash_bytes
from excall_chain.vm import encode_call

from .conftest import produce

ORACLE = oracle_keypair(1)
IMPOSTOR = oracle_keypair(99)


def bet(sender: bytes, nonce: int, contract: bytes) -> Transaction:
    return Transaction(sender=sender, account_nonce=nonce, target=contract, input=encode_call("betEXCALL"))


def resign(call: VerifiableExternalCall, *, nonce=None, response=None, keypair=ORACLE, uri=None):
    nonce = call.request_nonce if nonce is None else nonce
    response = call.response if response is None else response
    if uri is None:
        uri = call.request_uri.replace(call.request_nonce.hex(), nonce.hex())
    return VerifiableExternalCall(
        request_uri=uri,
        request_nonce=nonce,
        public_key=keypair.public_key,
        response=response,
        signature=keypair.sign_response(response, nonce),
    )


@pytest.fixture
def honest(sealer, punter, contracts):
    """A finalized block 2 with one winning bet, not yet applied anywhere."""
    sealer.submit_tx(bet(punter.address, 0, contracts.excall))
    return sealer.finalize_excalls(sealer.build_block(now=sealer.next_block_time()))


@pytest.fixture
def reseal(sealer):
    def _reseal(block, *, entries=None, **header):
        update = {}
        if entries is not None:
            update["excall_extension"] = tuple(entries)
        if header:
            update["header"] = block.header.model_copy(update=header)
        return sealer.seal_block(block.model_copy(update=update))

    return _reseal


def with_call(entry: ExtensionEntry, call, outcome=None) -> ExtensionEntry:
    return entry.model_copy(update={"call": call, "outcome": outcome or entry.outcome})


class TestHonestBlock:
    def test_verifier_accepts(self, sealer, verifier, honest):
        block = sealer.seal_block(honest)
        assert verifier.verify_block(block).accepted
        verifier.apply_block(block)
        assert verifier.head_digest() != verifier.genesis_digest


class TestTamperedExtension:
    def test_flipped_response_byte(self, verifier, honest, reseal):
        (entry,) = honest.excall_extension
        flipped = entry.call.model_copy(update={"response": b"0"})
        verdict = verifier.verify_block(reseal(honest, entries=[with_call(entry, flipped)]))
        assert verdict.reason is RejectReason.INVALID_EXCALL_SIGNATURE

    def test_transplanted_call(self, verifier, honest, reseal):
        (entry,) = honest.excall_extension
        other = resign(entry.call, nonce=hash_bytes(b"an earlier block"))
        verdict = verifier.verify_block(reseal(honest, entries=[with_call(entry, other)]))
        assert verdict.reason is RejectReason.NONCE_MISMATCH

    def test_rewritten_uri(self, verifier, honest, reseal):
        (entry,) = honest.excall_extension
        moved = resign(entry.call, uri=entry.call.request_uri.replace("excallrand", "other"))
        verdict = verifier.verify_block(reseal(honest, entries=[with_call(entry, moved)]))
        assert verdict.reason is RejectReason.EXCALL_URI_MISMATCH

    def test_unpinned_signer(self, verifier, honest, reseal):
        (entry,) = honest.excall_extension
        forged = resign(entry.call, keypair=IMPOSTOR)
        verdict = verifier.verify_block(reseal(honest, entries=[with_call(entry, forged)]))
        assert verdict.reason is RejectReason.UNKNOWN_ORACLE_PUBLIC_KEY

    def test_valid_call_reported_as_unverified(self, verifier, honest, reseal):
        (entry,) = honest.excall_extension
        claim = with_call(entry, entry.call, CallOutcome.UNVERIFIED)
        verdict = verifier.verify_block(reseal(honest, entries=[claim]))
        assert verdict.reason is RejectReason.FALSE_FAILURE_CLAIM

    def test_missing_entry(self, verifier, honest, reseal):
        verdict = verifier.verify_block(reseal(honest, entries=[]))
        assert verdict.reason is RejectReason.MISSING_EXTENSION_ENTRY

    def test_extra_entry(self, verifier, honest, reseal):
        (entry,) = honest.excall_extension
        extra = entry.model_copy(update={"call_index": 1})
        verdict = verifier.verify_block(reseal(honest, entries=[entry, extra]))
        assert verdict.reason is RejectReason.UNEXPECTED_EXTENSION_ENTRY

    @pytest.mark.parametrize(
        "update",
        [
            {"tx_index": 5},
            {"call_index": 1},
        ],
    )
    def test_misplaced_entry(self, verifier, honest, reseal, update):
        (entry,) = honest.excall_extension
        verdict = verifier.verify_block(reseal(honest, entries=[entry.model_copy(update=update)]))
        assert verdict.reason is RejectReason.MALFORMED_EXTENSION

    def test_duplicated_entry(self, verifier, honest, reseal):
        (entry,) = honest.excall_extension
        verdict = verifier.verify_block(reseal(honest, entries=[entry, entry]))
        assert verdict.reason is RejectReason.MALFORMED_EXTENSION

    def test_call_moved_into_transaction(self, verifier, honest, reseal):
        (entry,) = honest.excall_extension
        (tx,) = honest.transactions
        smuggled = tx.model_copy(update={"excalls": (entry.call,)})
        block = honest.model_copy(update={"transactions": (smuggled,)})
        verdict = verifier.verify_block(reseal(block, entries=[]))
        assert verdict.reason is RejectReason.MALFORMED_EXTENSION


class TestTamperedHeader:
    def test_state_root(self, verifier, honest, reseal):
        verdict = verifier.verify_block(reseal(honest, state_root=bytes(32)))
        assert verdict.reason is RejectReason.STATE_ROOT_MISMATCH

    def test_intent_root(self, verifier, honest, reseal):
        verdict = verifier.verify_block(reseal(honest, intent_root=intent_root([])))
        assert verdict.reason is RejectReason.INTENTION_MISMATCH

    def test_dropped_transaction(self, verifier, honest, reseal):
        block = honest.model_copy(update={"transactions": ()})
        verdict = verifier.verify_block(reseal(block, entries=[]))
        assert verdict.reason is RejectReason.TX_ROOT_MISMATCH

    def test_early_timestamp(self, verifier, honest, reseal):
        verdict = verifier.verify_block(reseal(honest, timestamp=verifier.head().timestamp))
        assert verdict.reason is RejectReason.BAD_TIMESTAMP

    def test_skipped_account_nonce(self, verifier, honest, reseal):
        (tx,) = honest.transactions
        skipped = (tx.model_copy(update={"account_nonce": 3}),)
        block = honest.model_copy(update={"transactions": skipped})
        verdict = verifier.verify_block(reseal(block, entries=[], tx_root=tx_root(skipped)))
        # intentions are positional, so the declared root still matches
        assert verdict.reason is RejectReason.BAD_TX_NONCE


class TestRejectionLeavesNodeUnchanged:
    def test_apply_raises_and_keeps_head(self, sealer, verifier, honest, reseal):
        root, head = verifier.state_root(), verifier.head_digest()
        (entry,) = honest.excall_extension
        forged = with_call(entry, resign(entry.call, response=b"1", keypair=IMPOSTOR))
        with pytest.raises(BlockRejected) as excinfo:
            verifier.apply_block(reseal(honest, entries=[forged]))
        assert excinfo.value.verdict.reason is RejectReason.UNKNOWN_ORACLE_PUBLIC_KEY
        assert (verifier.state_root(), verifier.head_digest()) == (root, head)
        assert verifier.metrics.rejections[RejectReason.UNKNOWN_ORACLE_PUBLIC_KEY] == 1

        sealer.apply_block(sealer.seal_block(honest))
        verifier.apply_block(sealer.head_block())
        assert verifier.state_root() == sealer.state_root()

    def test_tampered_block_does_not_spread(self, sealer, verifier, punter, contracts, reseal):
        produce(sealer, verifier)
        sealer.submit_tx(bet(punter.address, 0, contracts.excall))
        block = sealer.finalize_excalls(sealer.build_block(now=sealer.next_block_time()))
        (entry,) = block.excall_extension
        flipped = with_call(entry, entry.call.model_copy(update={"response": b"0"}))
        assert not verifier.verify_block(reseal(block, entries=[flipped])).accepted
        assert verifier.excall_count == 0
