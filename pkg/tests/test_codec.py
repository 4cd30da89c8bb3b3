import random

import pytest
from pydantic import ValidationError

from excall_chain.config import oracle_keypair
from excall_chain.core import (
    Block,
    BlockHeader,
    CallMode,
    CallOutcome,
    CanonicalWriter,
    DecodeError,
    ExtensionEntry,
    InvalidValue,
    Transaction,
    VerifiableExternalCall,
    decode_canonical,
    decode_sequence,
    encode_canonical,
    encode_sequence,
    excall_nonce,
    extension_root,
    initiator_nonce,
    intention_hash,
    sealed_digest,
    tx_identity,
)
from excall_chain.crypto import hash_bytes

ORACLE = oracle_keypair(1)


def signed_call(nonce: bytes, response: bytes = b"1") -> VerifiableExternalCall:
    return VerifiableExternalCall(
        request_uri=f"http://oracle.test/excallrand?nonce={nonce.hex()}",
        request_nonce=nonce,
        public_key=ORACLE.public_key,
        response=response,
        signature=ORACLE.sign_response(response, nonce),
    )


def random_call(rng: random.Random) -> VerifiableExternalCall:
    return VerifiableExternalCall(
        request_uri="http://x/" + rng.randbytes(4).hex(),
        request_nonce=rng.randbytes(32),
        public_key=rng.randbytes(32),
        response=rng.randbytes(rng.randint(0, 8)),
        signature=rng.randbytes(64),
    )


def random_block(rng: random.Random) -> Block:
    txs = []
    for _ in range(rng.randint(0, 3)):
        attached = rng.random() < 0.3
        txs.append(Transaction(
            sender=rng.randbytes(20),
            account_nonce=rng.randrange(1 << 32),
            target=None if rng.random() < 0.2 else rng.randbytes(20),
            input=rng.randbytes(rng.randint(0, 40)),
            excalls=(random_call(rng),) if attached else (),
            mode=CallMode.INITIATOR_ATTACHED if attached else CallMode.SEALER_EXECUTES,
        ))
    entries = []
    for tx_index in range(len(txs)):
        if rng.random() < 0.5:
            outcome = rng.choice(list(CallOutcome))
            call = None if outcome is CallOutcome.NO_RESPONSE else random_call(rng)
            entries.append(ExtensionEntry(tx_index=tx_index, call_index=0, outcome=outcome, call=call))
    header = BlockHeader(
        parent_digest=rng.randbytes(32),
        number=rng.randrange(1000),
        timestamp=rng.randrange(1 << 40),
        tx_root=rng.randbytes(32),
        intent_root=rng.randbytes(32),
        state_root=rng.randbytes(32),
        sealer=rng.randbytes(20),
    )
    return Block(header=header, transactions=tuple(txs), excall_extension=tuple(entries), seal=rng.randbytes(64))


class TestCanonicalEncoding:
    def test_random_blocks_decode_to_themselves(self):
        rng = random.Random(0)
        for _ in range(1000):
            block = random_block(rng)
            assert decode_canonical(encode_canonical(block), Block) == block

    def test_empty_sequence_is_zero_prefix(self):
        assert encode_sequence([]) == b"\x00\x00\x00\x00"
        assert decode_sequence(b"\x00\x00\x00\x00", Transaction) == []

    def test_truncated_input(self):
        data = encode_canonical(random_block(random.Random(1)))
        with pytest.raises(DecodeError):
            decode_canonical(data[:-1], Block)

    def test_trailing_bytes(self):
        data = encode_canonical(random_block(random.Random(1)))
        with pytest.raises(DecodeError):
            decode_canonical(data + b"\x00", Block)

    def test_oversized_response_is_invalid(self):
        w = CanonicalWriter()
        w.text("http://oracle.test/").blob(bytes(32)).blob(bytes(32)).blob(bytes(4097)).blob(bytes(64))
        with pytest.raises(InvalidValue):
            decode_canonical(w.getvalue(), VerifiableExternalCall)

    def test_outcome_without_call_is_invalid(self):
        entry = ExtensionEntry(tx_index=0, call_index=0, call=signed_call(bytes(32)))
        data = bytearray(encode_canonical(entry))
        data[8] = 2  # NO_RESPONSE, but the call tuple is still there
        with pytest.raises(InvalidValue):
            decode_canonical(bytes(data), ExtensionEntry)

    def test_unknown_outcome_code(self):
        entry = ExtensionEntry(tx_index=0, call_index=0, call=signed_call(bytes(32)))
        data = bytearray(encode_canonical(entry))
        data[8] = 9
        with pytest.raises(DecodeError):
            decode_canonical(bytes(data), ExtensionEntry)

    def test_unsupported_type(self):
        with pytest.raises(TypeError):
            encode_canonical("not a core value")


class TestTypes:
    def test_call_uri_must_be_http(self):
        with pytest.raises(ValidationError):
            VerifiableExternalCall(
                request_uri="ftp://x", request_nonce=bytes(32), public_key=bytes(32), response=b"", signature=b"",
            )

    def test_attached_mode_needs_calls(self):
        with pytest.raises(ValidationError):
            Transaction(sender=bytes(20), account_nonce=0, mode=CallMode.INITIATOR_ATTACHED)

    def test_entry_call_matches_outcome(self):
        with pytest.raises(ValidationError):
            ExtensionEntry(tx_index=0, call_index=0, outcome=CallOutcome.RECORDED)

    def test_call_validity(self):
        call = signed_call(hash_bytes(b"n"))
        assert call.is_valid()
        assert not call.model_copy(update={"response": b"0"}).is_valid()

    def test_hex_fields_in_json(self):
        call = signed_call(bytes(32))
        assert VerifiableExternalCall.model_validate_json(call.model_dump_json()) == call


class TestDigests:
    def test_sealer_filled_calls_do_not_change_identity(self):
        tx = Transaction(sender=bytes(20), account_nonce=0, target=b"\x01" * 20)
        filled = tx.model_copy(update={"excalls": (signed_call(bytes(32)),)})
        assert tx_identity(filled) == tx_identity(tx)

    def test_attached_calls_are_part_of_identity(self):
        nonce = initiator_nonce(bytes(20), 0, 0)
        tx = Transaction(
            sender=bytes(20), account_nonce=0, target=b"\x01" * 20,
            excalls=(signed_call(nonce, b"1"),), mode=CallMode.INITIATOR_ATTACHED,
        )
        mutated = tx.model_copy(update={"excalls": (signed_call(nonce, b"0"),)})
        assert tx_identity(mutated) != tx_identity(tx)

    def test_every_field_changes_identity(self):
        base = Transaction(sender=bytes(20), account_nonce=0, target=b"\x01" * 20, input=b"\x00")
        variants = [
            base.model_copy(update={"sender": b"\x02" * 20}),
            base.model_copy(update={"account_nonce": 1}),
            base.model_copy(update={"target": b"\x03" * 20}),
            base.model_copy(update={"target": None}),
            base.model_copy(update={"input": b"\x01"}),
        ]
        digests = {tx_identity(tx) for tx in variants}
        assert len(digests) == len(variants)
        assert tx_identity(base) not in digests

    def test_intention_hash_ignores_extension_and_state_root(self):
        rng = random.Random(2)
        for _ in range(1000):
            block = random_block(rng)
            mutated = block.model_copy(update={
                "excall_extension": (),
                "header": block.header.model_copy(update={"state_root": rng.randbytes(32)}),
            })
            assert intention_hash(mutated) == intention_hash(block)

    def test_sealed_digest_covers_extension(self):
        nonce = bytes(32)
        block = random_block(random.Random(3)).model_copy(update={
            "excall_extension": (ExtensionEntry(tx_index=0, call_index=0, call=signed_call(nonce, b"1")),),
        })
        flipped = block.model_copy(update={
            "excall_extension": (ExtensionEntry(tx_index=0, call_index=0, call=signed_call(nonce, b"0")),),
        })
        assert intention_hash(flipped) == intention_hash(block)
        assert sealed_digest(flipped) != sealed_digest(block)

    def test_sealed_digest_covers_state_root(self):
        block = random_block(random.Random(4))
        moved = block.model_copy(update={"header": block.header.model_copy(update={"state_root": bytes(32)})})
        assert sealed_digest(moved) != sealed_digest(block)

    def test_empty_extension_root(self):
        block = random_block(random.Random(5)).model_copy(update={"excall_extension": ()})
        assert extension_root(block) == hash_bytes(b"\x00\x00\x00\x00")

    def test_call_nonces_are_positional(self):
        ih = hash_bytes(b"intentions")
        nonces = {excall_nonce(ih, tx, call) for tx in range(10) for call in range(4)}
        assert len(nonces) == 40
        assert excall_nonce(ih, 0, 0) == excall_nonce(ih, 0, 0)
        assert excall_nonce(hash_bytes(b"other"), 0, 0) != excall_nonce(ih, 0, 0)
